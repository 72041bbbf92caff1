#pragma once

// Streaming top-k dense block maintenance.
//
// Each step detects k+l blocks in the incoming slice, pools them with the k+l
// blocks retained so far, splices pairs of the pool for up to max_epochs
// epochs, and keeps the densest k+l. The top k are reported.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "augsplice/tensor.hpp"

namespace augsplice {

struct EngineConfig {
  std::size_t n_modes = 3;
  /// Stride in source time units; informational for the engine, which works in bins.
  double stride = 1.0;
  std::size_t k = 10;
  std::size_t l = 5;
  std::size_t max_epochs = 5;
  std::size_t workers = 1;

  /// Throws ConfigError unless k >= 1, stride > 0, max_epochs >= 1 and the mode count fits.
  void validate() const;
};

struct EngineState {
  /// Sorted by non-increasing density; at most k+l blocks.
  std::vector<Block> retained;
  /// Next bin to process; every retained time id is below it.
  std::int64_t frontier = 0;
  std::uint64_t step_counter = 0;
  std::uint64_t nnz_processed = 0;
};

struct StepTiming {
  double detect_seconds = 0.0;
  double splice_seconds = 0.0;
};

struct StepOutput {
  std::uint64_t step = 0;
  /// Covered bins [bin_begin, bin_end).
  std::int64_t bin_begin = 0;
  std::int64_t bin_end = 0;
  std::vector<Block> top_k;
  std::uint64_t slice_nnz = 0;
  /// Number of splice epochs that ran.
  std::size_t epochs = 0;
  StepTiming timing;
};

/// Hook observed after each splicing epoch with the pool sorted by density.
using EpochObserver = std::function<void(std::size_t epoch, std::span<const Block> pool)>;

/// Advances the state by one slice. Throws OutOfOrderSlice if slice.bin != frontier.
StepOutput step(EngineState& state, const TensorSlice& slice, const EngineConfig& cfg,
                const EpochObserver& observer = {});

/// State of the re-run baseline: the whole tensor seen so far.
struct RerunState {
  Block accumulated;
  std::int64_t frontier = 0;
  std::uint64_t step_counter = 0;
};

/// Re-run baseline: adds the slice to the accumulated tensor and runs the batch
/// detector on all of it. Same output schema as step().
StepOutput rerun_step(RerunState& state, const TensorSlice& slice, const EngineConfig& cfg);

enum class Strategy { Splicing, Rerun };

/// Groups tuples into bins (bin ordinal in the last mode) and calls step once per
/// bin from the current frontier through the last bin present, including empty ones.
class StreamRunner {
 public:
  explicit StreamRunner(EngineConfig cfg, Strategy strategy = Strategy::Splicing);

  /// Feeds one tuple; completes any earlier bins first. Throws TimeRegression if
  /// the tuple's bin precedes the bin currently being collected.
  void push(const Tuple& tuple);
  /// Flushes the bin being collected.
  void finish();

  /// Outputs produced since the last call.
  std::vector<StepOutput> take_outputs();

  const EngineState& state() const { return state_; }
  const EngineConfig& config() const { return cfg_; }

 private:
  void close_bins_before(std::int64_t bin);

  void run_bin(std::int64_t bin, std::span<const Tuple> tuples);

  EngineConfig cfg_;
  Strategy strategy_;
  EngineState state_;
  RerunState rerun_;
  std::vector<Tuple> pending_;
  std::vector<StepOutput> outputs_;
};

/// Runs the whole stream. Tuples must be non-decreasing in bin.
std::vector<StepOutput> run_stream(std::span<const Tuple> tuples, const EngineConfig& cfg,
                                   Strategy strategy = Strategy::Splicing);

}  // namespace augsplice
