#pragma once

// Greedy seed detector: repeated peeling under the arithmetic-average-mass
// metric. Each run peels ids off a working block and keeps the densest
// snapshot; found blocks are removed entry-wise before the next run.

#include <cstddef>
#include <vector>

#include "augsplice/tensor.hpp"

namespace augsplice {

struct DetectParams {
  /// k + l.
  std::size_t num_blocks = 1;
  /// Threads used for per-mode mass tallies. Output does not depend on it.
  std::size_t workers = 1;
};

/// Mass of every id of a block, aligned with Block::index_set(mode).
struct ModeMassIndex {
  std::vector<std::vector<double>> masses;

  static ModeMassIndex of(const Block& block, std::size_t workers = 1);
};

/// One greedy peeling run. Each round picks the mode owning the minimum-mass
/// id and removes every id of that mode whose mass is at most M/S; if none
/// qualifies, only the minimum id goes. Ids left without entries are removed
/// at once. Returns the densest snapshot seen, earliest on ties.
Block peel_once(const Block& working, std::size_t workers = 1);

/// Up to num_blocks entry-disjoint blocks, ordered by non-increasing density.
std::vector<Block> detect_top_blocks(const Block& tensor, const DetectParams& params);

inline std::vector<Block> detect_top_blocks(const TensorSlice& slice, const DetectParams& params) {
  return detect_top_blocks(slice.data, params);
}

/// Sorts by non-increasing density; equal densities keep their input order.
void sort_by_density(std::vector<Block>& blocks);

}  // namespace augsplice
