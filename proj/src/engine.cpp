#include "augsplice/engine.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "augsplice/detect.hpp"
#include "augsplice/errors.hpp"
#include "augsplice/splice.hpp"

namespace augsplice {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_slice(const TensorSlice& slice, std::int64_t frontier, const EngineConfig& cfg) {
  if (slice.bin != frontier) {
    throw OutOfOrderSlice("slice bin " + std::to_string(slice.bin) + " does not match frontier " +
                          std::to_string(frontier));
  }
  if (!slice.data.empty() && slice.n_modes() != cfg.n_modes) {
    throw ShapeMismatch("slice mode count differs from engine configuration");
  }
}

/// One pass over all pairs (i < j) of the density-sorted pool. Returns whether any pair merged.
bool splice_epoch(std::vector<Block>& pool) {
  bool updated = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      if (pool[i].empty() || pool[j].empty()) continue;
      // Densities move during the epoch; the denser block of the pair is always B1.
      const bool swap = pool[j].density() > pool[i].density();
      Block& dense = swap ? pool[j] : pool[i];
      Block& sparse = swap ? pool[i] : pool[j];
      auto result = splice_pair(dense, sparse);
      if (result.merges == 0) continue;
      dense = std::move(result.dense);
      sparse = std::move(result.residual);
      updated = true;
    }
  }
  return updated;
}

}  // namespace

void EngineConfig::validate() const {
  if (n_modes < 2 || n_modes > kMaxModes) throw ConfigError("mode count must be in [2, 8]");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(stride > 0.0)) throw ConfigError("stride must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
}

StepOutput step(EngineState& state, const TensorSlice& slice, const EngineConfig& cfg,
                const EpochObserver& observer) {
  cfg.validate();
  check_slice(slice, state.frontier, cfg);

  StepOutput out;
  out.step = state.step_counter;
  out.bin_begin = slice.bin;
  out.bin_end = slice.bin + 1;
  out.slice_nnz = slice.data.nnz();

  if (!slice.data.empty()) {
    auto start = Clock::now();
    auto candidates = detect_top_blocks(slice, DetectParams{cfg.k + cfg.l, cfg.workers});
    out.timing.detect_seconds = seconds_since(start);

    start = Clock::now();
    std::vector<Block> pool = std::move(state.retained);
    for (auto& c : candidates) pool.push_back(std::move(c));
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      sort_by_density(pool);
      const bool updated = splice_epoch(pool);
      ++out.epochs;
      std::erase_if(pool, [](const Block& b) { return b.empty(); });
      sort_by_density(pool);
      if (observer) observer(epoch, pool);
      if (!updated) break;
    }
    std::erase_if(pool, [](const Block& b) { return b.empty(); });
    sort_by_density(pool);
    if (pool.size() > cfg.k + cfg.l) pool.resize(cfg.k + cfg.l);
    state.retained = std::move(pool);
    out.timing.splice_seconds = seconds_since(start);
  }

  const std::size_t reported = std::min(cfg.k, state.retained.size());
  out.top_k.assign(state.retained.begin(), state.retained.begin() + static_cast<std::ptrdiff_t>(reported));
  state.frontier += 1;
  state.step_counter += 1;
  state.nnz_processed += slice.data.nnz();
  return out;
}

StepOutput rerun_step(RerunState& state, const TensorSlice& slice, const EngineConfig& cfg) {
  cfg.validate();
  check_slice(slice, state.frontier, cfg);
  if (state.accumulated.n_modes() == 0) state.accumulated = Block(cfg.n_modes);

  StepOutput out;
  out.step = state.step_counter;
  out.bin_begin = slice.bin;
  out.bin_end = slice.bin + 1;
  out.slice_nnz = slice.data.nnz();

  const auto start = Clock::now();
  if (!slice.data.empty()) state.accumulated = state.accumulated.union_with(slice.data);
  auto blocks = detect_top_blocks(state.accumulated, DetectParams{cfg.k + cfg.l, cfg.workers});
  out.timing.detect_seconds = seconds_since(start);
  if (blocks.size() > cfg.k) blocks.resize(cfg.k);
  out.top_k = std::move(blocks);
  state.frontier += 1;
  state.step_counter += 1;
  return out;
}

StreamRunner::StreamRunner(EngineConfig cfg, Strategy strategy) : cfg_(cfg), strategy_(strategy) {
  cfg_.validate();
}

void StreamRunner::run_bin(std::int64_t bin, std::span<const Tuple> tuples) {
  const auto slice = TensorSlice::from_tuples(cfg_.n_modes, bin, tuples);
  if (strategy_ == Strategy::Splicing) {
    outputs_.push_back(step(state_, slice, cfg_));
  } else {
    outputs_.push_back(rerun_step(rerun_, slice, cfg_));
  }
}

void StreamRunner::close_bins_before(std::int64_t bin) {
  auto frontier = [this] { return strategy_ == Strategy::Splicing ? state_.frontier : rerun_.frontier; };
  while (frontier() < bin) {
    run_bin(frontier(), pending_);
    pending_.clear();
  }
}

void StreamRunner::push(const Tuple& tuple) {
  const auto bin = static_cast<std::int64_t>(tuple.key[cfg_.n_modes - 1]);
  const auto frontier = strategy_ == Strategy::Splicing ? state_.frontier : rerun_.frontier;
  if (bin < frontier) {
    throw TimeRegression("tuple in bin " + std::to_string(bin) + " arrived after bin " +
                         std::to_string(frontier) + " started");
  }
  close_bins_before(bin);
  pending_.push_back(tuple);
}

void StreamRunner::finish() {
  if (pending_.empty()) return;
  const auto bin = static_cast<std::int64_t>(pending_.front().key[cfg_.n_modes - 1]);
  close_bins_before(bin + 1);
}

std::vector<StepOutput> StreamRunner::take_outputs() {
  std::vector<StepOutput> out;
  out.swap(outputs_);
  return out;
}

std::vector<StepOutput> run_stream(std::span<const Tuple> tuples, const EngineConfig& cfg,
                                   Strategy strategy) {
  StreamRunner runner(cfg, strategy);
  for (const Tuple& t : tuples) runner.push(t);
  runner.finish();
  return runner.take_outputs();
}

}  // namespace augsplice
