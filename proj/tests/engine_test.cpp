#include <gtest/gtest.h>

#include <random>
#include <set>

#include "augsplice/benchmark.hpp"
#include "augsplice/detect.hpp"
#include "augsplice/engine.hpp"
#include "augsplice/errors.hpp"
#include "augsplice/splice.hpp"
#include "test_support.hpp"

namespace augsplice {
namespace {

using testing::key_of;
using testing::make_block;

EngineConfig small_config(std::size_t k = 2, std::size_t l = 2) {
  EngineConfig cfg;
  cfg.n_modes = 3;
  cfg.k = k;
  cfg.l = l;
  return cfg;
}

// 5x5 users x objects in `bin` plus sparse noise on other ids.
std::vector<Tuple> planted_bin(std::int64_t bin, std::mt19937_64& rng) {
  std::vector<Tuple> tuples;
  const auto b = static_cast<Id>(bin);
  for (Id u = 0; u < 5; ++u) {
    for (Id o = 0; o < 5; ++o) tuples.push_back({key_of({u, o, b}), 1.0});
  }
  std::uniform_int_distribution<Id> id(10, 200);
  for (int i = 0; i < 60; ++i) tuples.push_back({key_of({id(rng), id(rng), b}), 1.0});
  return tuples;
}

TensorSlice slice_of(std::int64_t bin, const std::vector<Tuple>& tuples) {
  return TensorSlice::from_tuples(3, bin, tuples);
}

TEST(EngineTest, FirstStepKeepsDetectorOutput) {
  std::vector<Tuple> tuples;
  for (Id u = 0; u < 4; ++u) {
    for (Id o = 0; o < 3; ++o) tuples.push_back({key_of({u, o, 0}), 2.0});
  }
  const auto slice = slice_of(0, tuples);
  EngineState state;
  const auto cfg = small_config();
  const auto out = step(state, slice, cfg);
  EXPECT_EQ(out.step, 0u);
  EXPECT_EQ(out.bin_begin, 0);
  EXPECT_EQ(out.bin_end, 1);
  EXPECT_EQ(out.slice_nnz, slice.data.nnz());
  const auto detected = detect_top_blocks(slice, DetectParams{4, 1});
  EXPECT_EQ(state.retained, detected);
  ASSERT_EQ(out.top_k.size(), 1u);
  EXPECT_EQ(out.top_k[0], detected[0]);
  EXPECT_EQ(state.frontier, 1);
}

TEST(EngineTest, PlantedBlockSpanningTwoStridesIsJoined) {
  std::mt19937_64 rng(2);
  EngineState state;
  const auto cfg = small_config(1, 3);
  const auto s0 = slice_of(0, planted_bin(0, rng));
  const auto s1 = slice_of(1, planted_bin(1, rng));
  step(state, s0, cfg);
  const auto out = step(state, s1, cfg);
  ASSERT_EQ(out.top_k.size(), 1u);
  const Block& top = out.top_k[0];
  const auto oracle = detect_top_blocks(s0.data.union_with(s1.data), DetectParams{1, 1});
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_GE(top.density().value(), 0.9 * oracle[0].density().value());
  EXPECT_EQ(top.index_set(2).size(), 2u);
  for (const auto& s : {s0, s1}) {
    EXPECT_GT(top.density(), detect_top_blocks(s, DetectParams{1, 1})[0].density());
  }
}

TEST(EngineTest, EmptySliceLeavesStateUnchanged) {
  std::mt19937_64 rng(3);
  EngineState state;
  const auto cfg = small_config();
  const auto first = step(state, slice_of(0, planted_bin(0, rng)), cfg);
  const auto before = state.retained;
  const auto out = step(state, TensorSlice{Block(3), 1}, cfg);
  EXPECT_EQ(state.retained, before);
  EXPECT_EQ(out.top_k, first.top_k);
  EXPECT_EQ(out.slice_nnz, 0u);
  EXPECT_EQ(out.epochs, 0u);
  EXPECT_EQ(state.frontier, 2);
}

TEST(EngineTest, OutOfOrderSliceIsRejected) {
  EngineState state;
  const auto cfg = small_config();
  EXPECT_THROW(step(state, TensorSlice{make_block(3, {{{0, 0, 1}, 1}}), 1}, cfg), OutOfOrderSlice);
  step(state, TensorSlice{make_block(3, {{{0, 0, 0}, 1}}), 0}, cfg);
  EXPECT_THROW(step(state, TensorSlice{make_block(3, {{{0, 0, 0}, 1}}), 0}, cfg), OutOfOrderSlice);
}

TEST(EngineTest, ConfigIsValidated) {
  EngineConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EngineConfig{};
  cfg.stride = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EngineConfig{};
  cfg.max_epochs = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = EngineConfig{};
  cfg.n_modes = 9;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(EngineConfig{}.validate());
}

TEST(RunStreamTest, OneOutputPerBinIncludingGaps) {
  std::vector<Tuple> tuples{{key_of({0, 0, 0}), 1.0}, {key_of({1, 0, 0}), 1.0},
                            {key_of({0, 0, 2}), 1.0}, {key_of({0, 1, 2}), 1.0}};
  const auto outs = run_stream(tuples, small_config());
  ASSERT_EQ(outs.size(), 3u);
  EXPECT_EQ(outs[0].slice_nnz, 2u);
  EXPECT_EQ(outs[1].slice_nnz, 0u);
  EXPECT_EQ(outs[1].top_k, outs[0].top_k);
  EXPECT_EQ(outs[2].bin_begin, 2);
  for (std::size_t i = 0; i < outs.size(); ++i) EXPECT_EQ(outs[i].step, i);
}

TEST(RunStreamTest, TimeRegressionIsRejected) {
  StreamRunner runner(small_config());
  runner.push({key_of({0, 0, 1}), 1.0});
  runner.push({key_of({0, 0, 2}), 1.0});
  EXPECT_THROW(runner.push({key_of({0, 0, 1}), 1.0}), TimeRegression);
  std::vector<Tuple> bad{{key_of({0, 0, 3}), 1.0}, {key_of({0, 0, 1}), 1.0}};
  EXPECT_THROW(run_stream(bad, small_config()), TimeRegression);
}

TEST(RunStreamTest, StreamStartsAtBinZero) {
  std::vector<Tuple> tuples{{key_of({0, 0, 2}), 1.0}};
  const auto outs = run_stream(tuples, small_config());
  ASSERT_EQ(outs.size(), 3u);
  EXPECT_TRUE(outs[0].top_k.empty());
  EXPECT_EQ(outs[2].top_k.size(), 1u);
}

TEST(EngineInvariantTest, RetainedBlocksAreDisjointSubtensors) {
  std::mt19937_64 rng(4);
  EngineState state;
  const auto cfg = small_config(3, 2);
  Block seen(3);
  for (std::int64_t bin = 0; bin < 6; ++bin) {
    const auto slice = slice_of(bin, planted_bin(bin, rng));
    seen = seen.union_with(slice.data);
    step(state, slice, cfg);
    ASSERT_LE(state.retained.size(), 5u);
    Block rest = seen;
    for (const auto& b : state.retained) {
      EXPECT_FALSE(b.empty());
      rest = rest.subtract(b);  // throws unless disjoint and contained
    }
    for (std::size_t i = 1; i < state.retained.size(); ++i) {
      EXPECT_GE(state.retained[i - 1].density(), state.retained[i].density());
    }
  }
}

TEST(EngineInvariantTest, TopDensityNeverDropsAcrossEpochs) {
  std::mt19937_64 rng(5);
  EngineState state;
  const auto cfg = small_config(2, 3);
  for (std::int64_t bin = 0; bin < 5; ++bin) {
    std::vector<Density> tops;
    step(state, slice_of(bin, planted_bin(bin, rng)), cfg,
         [&](std::size_t, std::span<const Block> pool) { tops.push_back(pool.front().density()); });
    for (std::size_t i = 1; i < tops.size(); ++i) EXPECT_GE(tops[i], tops[i - 1]);
  }
}

TEST(EngineInvariantTest, ConvergedPoolIsAFixedPoint) {
  std::mt19937_64 rng(6);
  EngineState state;
  auto cfg = small_config(2, 3);
  cfg.max_epochs = 100;
  for (std::int64_t bin = 0; bin < 4; ++bin) {
    const auto out = step(state, slice_of(bin, planted_bin(bin, rng)), cfg);
    ASSERT_LT(out.epochs, cfg.max_epochs);
    const auto& pool = state.retained;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      for (std::size_t j = i + 1; j < pool.size(); ++j) {
        EXPECT_EQ(splice_pair(pool[i], pool[j]).merges, 0u) << "bin " << bin << " pair " << i << "," << j;
      }
    }
  }
}

TEST(RerunTest, MatchesDetectorOnAccumulatedTensor) {
  std::mt19937_64 rng(7);
  RerunState state;
  const auto cfg = small_config(2, 1);
  Block seen(3);
  for (std::int64_t bin = 0; bin < 3; ++bin) {
    const auto slice = slice_of(bin, planted_bin(bin, rng));
    seen = seen.union_with(slice.data);
    const auto out = rerun_step(state, slice, cfg);
    auto expected = detect_top_blocks(seen, DetectParams{3, 1});
    expected.resize(std::min<std::size_t>(expected.size(), 2));
    EXPECT_EQ(out.top_k, expected);
  }
}

TEST(InjectedStreamTest, InjectedUsersSurfaceOnceTheBlockArrives) {
  InjectionSpec spec;
  spec.block_cardinalities = {10, 10};
  spec.volume_density = 1.0;
  spec.background_cardinalities = {500, 500};
  spec.background_tuples = 2000;
  spec.bins = 10;
  spec.span_begin = 3;
  spec.span_bins = 3;
  spec.seed = 9;
  const auto stream = generate_stream(spec);
  ModeDictionary dicts;
  const auto tuples = to_tuples(stream, dicts);
  EngineConfig cfg;
  cfg.n_modes = 3;
  cfg.k = 1;
  const auto outs = run_stream(tuples, cfg);
  ASSERT_EQ(outs.size(), 10u);
  std::set<Id> injected;
  for (const auto& raw : stream.truth.injected_ids[0]) injected.insert(*dicts.find(0, raw));
  for (std::size_t s = 3; s < outs.size(); ++s) {
    ASSERT_FALSE(outs[s].top_k.empty());
    const auto users = outs[s].top_k[0].index_set(0);
    std::size_t hits = 0;
    for (Id u : users) hits += injected.count(u);
    EXPECT_EQ(hits, users.size()) << "step " << s;
    if (s < 5) continue;
    // The whole block has arrived.
    EXPECT_EQ(hits, 10u) << "step " << s;
    EXPECT_EQ(outs[s].top_k[0].index_set(2).size(), 3u) << "step " << s;
  }
}

}  // namespace
}  // namespace augsplice
