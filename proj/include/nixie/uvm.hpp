#pragma once

#include <map>
#include <set>
#include <vector>

#include "nixie/transfer.hpp"
#include "nixie/units.hpp"

namespace nixie {

using PageId = std::uint64_t;

struct UvmConfig {
  Seconds fault_latency = 30e-6;  // per fault batch
  int prefetch_pages = 15;        // adjacent pages fetched alongside the faulting one
};

struct FaultResolution {
  std::vector<PageId> evicted;
  std::vector<PageId> fetched;
  Seconds service_time = 0;
};

struct FaultLogRow {
  Seconds time = 0;
  AppId app = 0;
  PageId page = 0;
  Bytes evicted_bytes = 0;
  Bytes fetched_bytes = 0;
  Seconds service_time = 0;
};

// Demand-paging model: fault-driven migration over a half-duplex link,
// LRU metadata updated only on faults, strictly sequential evict-then-fetch,
// and a pinned mirror for every touched managed page.
class UvmSim {
 public:
  UvmSim(Bytes gpu_capacity, const LinkConfig& pcie, UvmConfig cfg,
         std::vector<TransferRecord>* transfer_log = nullptr,
         std::vector<FaultLogRow>* fault_log = nullptr);

  std::vector<ChunkId> register_alloc(AppId app, Bytes size);
  Bytes free_chunk(AppId app, ChunkId chunk);

  // Services one fault: pages of `protect` (the faulting kernel's working
  // set) are exempt from eviction. Transfer intervals are logged starting at
  // `now`.
  FaultResolution on_fault(AppId app, PageId page, Seconds now,
                           const std::vector<ChunkId>& protect = {});

  // Faults in every non-resident page of the touched chunks; returns
  // base_duration plus the summed fault service time.
  Seconds touch_kernel(AppId app, const std::vector<ChunkId>& chunks, Seconds base_duration,
                       Seconds now);

  Bytes pinned_mirror_usage() const { return mirror_bytes_; }
  Bytes pinned_mirror_peak() const { return mirror_peak_; }
  Bytes gpu_used() const { return gpu_used_; }
  Bytes faulted_bytes_total() const { return faulted_bytes_; }
  std::uint64_t fault_count() const { return fault_count_; }

  bool page_resident(PageId p) const;
  std::uint64_t page_stamp(PageId p) const;
  const std::vector<ChunkId>& chunks_of(AppId app) const;
  Bytes app_bytes(AppId app) const;

 private:
  struct Page {
    AppId app = 0;
    ChunkId chunk = 0;
    bool gpu_resident = false;
    bool touched = false;
    bool alive = true;
    std::uint64_t lru_stamp = 0;
  };
  struct UvmChunk {
    AppId app = 0;
    std::vector<PageId> pages;
    bool alive = true;
  };

  void mark_protected(const std::vector<ChunkId>& chunks);
  FaultResolution fault_locked(AppId app, PageId page, Seconds now);
  void evict_one(PageId p);
  void make_resident(PageId p);

  Bytes gpu_capacity_;
  LinkConfig pcie_;
  UvmConfig cfg_;
  std::vector<TransferRecord>* transfer_log_;
  std::vector<FaultLogRow>* fault_log_;

  std::vector<Page> pages_;
  std::vector<UvmChunk> chunks_;
  std::map<AppId, std::vector<ChunkId>> app_chunks_;
  std::set<std::pair<std::uint64_t, PageId>> resident_by_stamp_;
  std::vector<std::uint64_t> protect_epoch_;
  std::uint64_t current_epoch_ = 0;
  bool protection_active_ = false;
  std::uint64_t stamp_counter_ = 0;
  Bytes gpu_used_ = 0;
  Bytes mirror_bytes_ = 0;
  Bytes mirror_peak_ = 0;
  Bytes faulted_bytes_ = 0;
  std::uint64_t fault_count_ = 0;
};

}  // namespace nixie
