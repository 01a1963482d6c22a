#pragma once

#include <cstdint>
#include <vector>

#include "nirsbci/common.hpp"

namespace nirsbci {

enum class BlockMode { offline, online };

struct BlockPlan {
  int session = 1;
  int block = 1;  // 1-based within the session
  BlockMode mode = BlockMode::online;
  int trials_per_class = 8;
  std::vector<Label> order;  // presentation order
};

/// Session 1: offline (12/class), online, online; session 2: four online
/// blocks (8/class). Each block's order is a seeded permutation.
std::vector<BlockPlan> make_schedule(std::uint64_t seed);

}  // namespace nirsbci
