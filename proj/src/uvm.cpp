#include "nixie/uvm.hpp"

#include <algorithm>

#include "nixie/errors.hpp"

namespace nixie {

UvmSim::UvmSim(Bytes gpu_capacity, const LinkConfig& pcie, UvmConfig cfg,
               std::vector<TransferRecord>* transfer_log, std::vector<FaultLogRow>* fault_log)
    : gpu_capacity_(gpu_capacity), pcie_(pcie), cfg_(cfg), transfer_log_(transfer_log),
      fault_log_(fault_log) {}

std::vector<ChunkId> UvmSim::register_alloc(AppId app, Bytes size) {
  if (size == 0) throw SimError(Err::InvalidState, "zero-size allocation");
  std::vector<ChunkId> out;
  Bytes remaining = size;
  while (remaining > 0) {
    Bytes chunk_size = std::min<Bytes>(remaining, kChunkMaxBytes);
    UvmChunk c;
    c.app = app;
    std::uint64_t n = block_count_for(chunk_size);
    for (std::uint64_t i = 0; i < n; ++i) {
      Page p;
      p.app = app;
      p.chunk = chunks_.size();
      c.pages.push_back(pages_.size());
      pages_.push_back(p);
      protect_epoch_.push_back(0);
    }
    ChunkId id = chunks_.size();
    app_chunks_[app].push_back(id);
    chunks_.push_back(std::move(c));
    out.push_back(id);
    remaining -= chunk_size;
  }
  return out;
}

Bytes UvmSim::free_chunk(AppId app, ChunkId id) {
  if (id >= chunks_.size() || !chunks_[id].alive)
    throw SimError(Err::UnknownChunk, "chunk " + std::to_string(id));
  UvmChunk& c = chunks_[id];
  if (c.app != app) throw SimError(Err::UnknownChunk, "chunk not owned by app");
  Bytes released = c.pages.size() * kBlockBytes;
  for (PageId pid : c.pages) {
    Page& p = pages_[pid];
    if (p.gpu_resident) {
      resident_by_stamp_.erase({p.lru_stamp, pid});
      gpu_used_ -= kBlockBytes;
    }
    if (p.touched) mirror_bytes_ -= kBlockBytes;
    p.alive = false;
  }
  c.alive = false;
  auto& list = app_chunks_[app];
  list.erase(std::remove(list.begin(), list.end(), id), list.end());
  return released;
}

bool UvmSim::page_resident(PageId p) const { return pages_.at(p).gpu_resident; }
std::uint64_t UvmSim::page_stamp(PageId p) const { return pages_.at(p).lru_stamp; }

const std::vector<ChunkId>& UvmSim::chunks_of(AppId app) const {
  static const std::vector<ChunkId> empty;
  auto it = app_chunks_.find(app);
  return it == app_chunks_.end() ? empty : it->second;
}

Bytes UvmSim::app_bytes(AppId app) const {
  Bytes total = 0;
  for (ChunkId c : chunks_of(app)) total += chunks_[c].pages.size() * kBlockBytes;
  return total;
}

void UvmSim::mark_protected(const std::vector<ChunkId>& chunks) {
  ++current_epoch_;
  protection_active_ = true;
  for (ChunkId c : chunks) {
    if (c >= chunks_.size() || !chunks_[c].alive) continue;
    for (PageId p : chunks_[c].pages) protect_epoch_[p] = current_epoch_;
  }
}

void UvmSim::evict_one(PageId pid) {
  Page& p = pages_[pid];
  resident_by_stamp_.erase({p.lru_stamp, pid});
  p.gpu_resident = false;
  gpu_used_ -= kBlockBytes;
}

void UvmSim::make_resident(PageId pid) {
  Page& p = pages_[pid];
  p.lru_stamp = ++stamp_counter_;
  p.gpu_resident = true;
  if (!p.touched) {
    p.touched = true;
    mirror_bytes_ += kBlockBytes;
    mirror_peak_ = std::max(mirror_peak_, mirror_bytes_);
  }
  resident_by_stamp_.insert({p.lru_stamp, pid});
  gpu_used_ += kBlockBytes;
}

FaultResolution UvmSim::on_fault(AppId app, PageId page, Seconds now,
                                 const std::vector<ChunkId>& protect) {
  if (protect.empty())
    protection_active_ = false;
  else
    mark_protected(protect);
  return fault_locked(app, page, now);
}

FaultResolution UvmSim::fault_locked(AppId app, PageId page, Seconds now) {
  if (page >= pages_.size() || !pages_[page].alive)
    throw SimError(Err::UnknownChunk, "page " + std::to_string(page));
  if (pages_[page].gpu_resident)
    throw SimError(Err::InvalidState, "fault on a resident page");

  FaultResolution res;
  const UvmChunk& chunk = chunks_[pages_[page].chunk];

  // Fetch batch: the faulting page plus up to prefetch_pages following
  // non-resident pages of the same chunk.
  res.fetched.push_back(page);
  auto it = std::find(chunk.pages.begin(), chunk.pages.end(), page);
  for (auto next = it + 1;
       next != chunk.pages.end() &&
       res.fetched.size() < static_cast<std::size_t>(cfg_.prefetch_pages) + 1;
       ++next) {
    if (!pages_[*next].gpu_resident) res.fetched.push_back(*next);
  }
  Bytes fetch_bytes = res.fetched.size() * kBlockBytes;

  // Evict coldest pages until the batch fits; the faulting kernel's own
  // working set is exempt.
  while (gpu_capacity_ - gpu_used_ < fetch_bytes) {
    PageId victim = 0;
    bool found = false;
    for (const auto& [stamp, pid] : resident_by_stamp_) {
      (void)stamp;
      if (protection_active_ && protect_epoch_[pid] == current_epoch_) continue;
      victim = pid;
      found = true;
      break;
    }
    if (!found) throw SimError(Err::CapacityExceeded, "kernel working set exceeds GPU memory");
    evict_one(victim);
    res.evicted.push_back(victim);
  }

  Bytes evict_bytes = res.evicted.size() * kBlockBytes;
  Seconds evict_time = evict_bytes / pcie_.down_bw;
  Seconds fetch_time = fetch_bytes / pcie_.up_bw;
  res.service_time = cfg_.fault_latency + evict_time + fetch_time;

  // Eviction strictly precedes fetch; the two intervals never overlap.
  Seconds cursor = now + cfg_.fault_latency;
  if (transfer_log_) {
    if (evict_bytes > 0)
      transfer_log_->push_back(
          {cursor, cursor + evict_time, res.evicted.front(), TierId::Gpu, TierId::PinnedHost, evict_bytes});
    transfer_log_->push_back(
        {cursor + evict_time, cursor + evict_time + fetch_time, page, TierId::PinnedHost, TierId::Gpu, fetch_bytes});
  }
  if (fault_log_)
    fault_log_->push_back({now, app, page, evict_bytes, fetch_bytes, res.service_time});

  for (PageId pid : res.fetched) make_resident(pid);
  faulted_bytes_ += fetch_bytes;
  ++fault_count_;
  return res;
}

Seconds UvmSim::touch_kernel(AppId app, const std::vector<ChunkId>& chunks, Seconds base_duration,
                             Seconds now) {
  for (ChunkId c : chunks) {
    if (c >= chunks_.size() || !chunks_[c].alive)
      throw SimError(Err::UnknownChunk, "chunk " + std::to_string(c));
    if (chunks_[c].app != app) throw SimError(Err::UnknownChunk, "chunk not owned by app");
  }
  mark_protected(chunks);
  Seconds service = 0;
  for (ChunkId c : chunks) {
    for (PageId pid : chunks_[c].pages) {
      if (pages_[pid].gpu_resident) continue;
      FaultResolution res = fault_locked(app, pid, now + service);
      service += res.service_time;
    }
  }
  protection_active_ = false;
  return base_duration + service;
}

}  // namespace nixie
