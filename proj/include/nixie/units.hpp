#pragma once

#include <cstdint>
#include <string>

namespace nixie {

using Bytes = std::uint64_t;
using Seconds = double;
using Bandwidth = double;  // bytes per second

using AppId = std::uint32_t;
using ChunkId = std::uint64_t;
using BlockId = std::uint64_t;

inline constexpr AppId kNoApp = ~AppId{0};

inline constexpr Bytes kKiB = 1ull << 10;
inline constexpr Bytes kMiB = 1ull << 20;
inline constexpr Bytes kGiB = 1ull << 30;

// Migration unit and per-allocation placement cap.
inline constexpr Bytes kBlockBytes = 2 * kMiB;
inline constexpr Bytes kChunkMaxBytes = 128 * kMiB;
inline constexpr std::size_t kMaxBlocksPerChunk = 64;

// Sentinel for tiers without a capacity limit (disk by default).
inline constexpr Bytes kUnbounded = ~Bytes{0};

constexpr std::uint64_t block_count_for(Bytes size) {
  return (size + kBlockBytes - 1) / kBlockBytes;
}

constexpr Bytes footprint_for(Bytes size) {
  return block_count_for(size) * kBlockBytes;
}

// Parses "24GiB", "512MiB", "64GB", "1073741824", "unbounded".
// Binary suffixes are powers of 1024; decimal suffixes powers of 1000.
Bytes parse_bytes(const std::string& text);

// Parses "64GiB/s" and friends; also accepts plain byte counts.
Bandwidth parse_bandwidth(const std::string& text);

std::string format_bytes(Bytes value);

}  // namespace nixie
