// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <vector>

namespace oracle {

// Ceiling division by repeated subtraction; deliberately naive.
inline std::uint64_t ceil_div(std::uint64_t value, std::uint64_t unit) {
  std::uint64_t count = 0;
  while (value > 0) {
    value = value > unit ? value - unit : 0;
    ++count;
  }
  return count;
}

// Brute-force migration planning on tiny instances: blocks move one at a time
// between adjacent tiers, respecting per-tier capacities (in blocks). Finds
// the cheapest way to make every incoming block resident on tier 0, where the
// cost is (#non-incoming blocks moved off tier 0, total hops), lexicographic.
struct TinyInstance {
  std::vector<int> tier_of;        // per block, 0..tiers-1
  std::vector<bool> incoming;      // per block
  std::vector<int> capacity;       // per tier, in blocks
  int tiers = 3;
};

struct TinyCost {
  int evictions = std::numeric_limits<int>::max();
  int hops = std::numeric_limits<int>::max();
  bool operator<(const TinyCost& o) const {
    if (evictions != o.evictions) return evictions < o.evictions;
    return hops < o.hops;
  }
  bool operator==(const TinyCost& o) const { return evictions == o.evictions && hops == o.hops; }
};

// Returns the minimal cost, or nullopt-like {max,max} if the goal state is
// unreachable.
inline TinyCost solve_tiny(const TinyInstance& in) {
  const std::size_t n = in.tier_of.size();
  auto encode = [&](const std::vector<int>& tiers) {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < n; ++i) key = key * 4 + tiers[i];
    return key;
  };
  auto is_goal = [&](const std::vector<int>& tiers) {
    for (std::size_t i = 0; i < n; ++i)
      if (in.incoming[i] && tiers[i] != 0) return false;
    return true;
  };

  struct Node {
    TinyCost cost;
    std::vector<int> tiers;
    bool operator>(const Node& o) const { return o.cost < cost; }
  };

  std::map<std::uint64_t, TinyCost> best;
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> heap;
  heap.push({{0, 0}, in.tier_of});
  best[encode(in.tier_of)] = {0, 0};

  while (!heap.empty()) {
    Node node = heap.top();
    heap.pop();
    auto it = best.find(encode(node.tiers));
    if (it != best.end() && it->second < node.cost) continue;
    if (is_goal(node.tiers)) return node.cost;

    std::vector<int> occupancy(in.tiers, 0);
    for (std::size_t i = 0; i < n; ++i) occupancy[node.tiers[i]]++;

    for (std::size_t i = 0; i < n; ++i) {
      for (int delta : {-1, 1}) {
        int to = node.tiers[i] + delta;
        if (to < 0 || to >= in.tiers) continue;
        if (occupancy[to] >= in.capacity[to]) continue;
        Node next = node;
        next.tiers[i] = to;
        next.cost.hops = node.cost.hops + 1;
        next.cost.evictions = node.cost.evictions;
        if (!in.incoming[i] && node.tiers[i] == 0 && to == 1) next.cost.evictions++;
        auto key = encode(next.tiers);
        auto found = best.find(key);
        if (found == best.end() || next.cost < found->second) {
          best[key] = next.cost;
          heap.push(std::move(next));
        }
      }
    }
  }
  return TinyCost{};
}

}  // namespace oracle
