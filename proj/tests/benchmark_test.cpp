#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "augsplice/benchmark.hpp"
#include "augsplice/errors.hpp"

namespace augsplice {
namespace {

InjectionSpec tiny_spec() {
  InjectionSpec spec;
  spec.block_cardinalities = {2, 2};
  spec.background_cardinalities = {10, 10};
  spec.volume_density = 1.0;
  spec.bins = 1;
  spec.span_bins = 1;
  return spec;
}

TEST(GenerateStreamTest, FullDensityInjectsTheWholeProduct) {
  const auto stream = generate_stream(tiny_spec());
  ASSERT_EQ(stream.tuples.size(), 4u);
  std::set<std::vector<std::string>> cells;
  for (const auto& t : stream.tuples) {
    EXPECT_TRUE(t.injected);
    cells.insert(t.ids);
    EXPECT_TRUE(std::binary_search(stream.truth.injected_ids[0].begin(), stream.truth.injected_ids[0].end(), t.ids[0]));
    EXPECT_TRUE(std::binary_search(stream.truth.injected_ids[1].begin(), stream.truth.injected_ids[1].end(), t.ids[1]));
  }
  EXPECT_EQ(cells.size(), 4u);
  EXPECT_EQ(stream.truth.injected_count, 4u);
}

TEST(GenerateStreamTest, RejectsZeroAndInfeasibleDensity) {
  auto spec = tiny_spec();
  spec.volume_density = 0.0;
  EXPECT_THROW(generate_stream(spec), ConfigError);
  spec.volume_density = 1.5;
  EXPECT_THROW(generate_stream(spec), DensityInfeasible);
  spec.density_mode = DensityMode::Mass;
  EXPECT_EQ(generate_stream(spec).tuples.size(), 6u);
}

TEST(GenerateStreamTest, RejectsBadShapes) {
  auto spec = tiny_spec();
  spec.block_cardinalities = {20, 2};
  EXPECT_THROW(generate_stream(spec), ConfigError);
  spec = tiny_spec();
  spec.block_cardinalities = {2};
  EXPECT_THROW(generate_stream(spec), ConfigError);
}

TEST(GenerateStreamTest, InjectionStaysInsideItsSpanAndBinsAreOrdered) {
  InjectionSpec spec;
  spec.block_cardinalities = {5, 5};
  spec.background_cardinalities = {100, 100};
  spec.volume_density = 0.6;
  spec.background_tuples = 500;
  spec.bins = 8;
  spec.span_begin = 2;
  spec.span_bins = 3;
  spec.stride = 10;
  spec.seed = 4;
  const auto stream = generate_stream(spec);
  EXPECT_EQ(stream.tuples.size(), 515u);
  std::int64_t last_bin = 0;
  for (const auto& t : stream.tuples) {
    const auto bin = t.timestamp / spec.stride;
    EXPECT_GE(bin, last_bin);
    last_bin = bin;
    EXPECT_LT(bin, 8);
    if (t.injected) {
      EXPECT_GE(bin, 2);
      EXPECT_LE(bin, 4);
    }
  }
}

TEST(GenerateStreamTest, SameSeedSameBytes) {
  InjectionSpec spec;
  spec.block_cardinalities = {4, 3};
  spec.background_cardinalities = {50, 50};
  spec.background_tuples = 200;
  spec.bins = 5;
  spec.seed = 77;
  std::ostringstream a, b, c;
  write_tuples(a, generate_stream(spec));
  write_tuples(b, generate_stream(spec));
  spec.seed = 78;
  write_tuples(c, generate_stream(spec));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
  EXPECT_EQ(generate_stream(spec).truth.to_json(), generate_stream(spec).truth.to_json());
}

TEST(GenerateStreamTest, WrittenTuplesReadBackThroughIngestion) {
  InjectionSpec spec;
  spec.block_cardinalities = {3, 3};
  spec.background_cardinalities = {20, 20};
  spec.background_tuples = 40;
  spec.bins = 4;
  spec.stride = 7;
  spec.seed = 3;
  const auto stream = generate_stream(spec);
  std::stringstream text;
  write_tuples(text, stream);
  ModeDictionary from_text;
  ModeDictionary direct;
  EXPECT_EQ(parse_tuples(text, generated_ingest_config(spec), from_text), to_tuples(stream, direct));
}

TEST(GroundTruthTest, JsonRoundTrip) {
  InjectionSpec spec = tiny_spec();
  spec.seed = 12;
  const auto truth = generate_stream(spec).truth;
  const auto back = GroundTruth::from_json(truth.to_json());
  EXPECT_EQ(back.injected_ids, truth.injected_ids);
  EXPECT_EQ(back.injected_cells, truth.injected_cells);
  EXPECT_EQ(back.seed, truth.seed);
  EXPECT_EQ(back.to_json(), truth.to_json());
  EXPECT_THROW(GroundTruth::from_json(R"({"schema":"x"})"), ConfigError);
}

GroundTruth users_and_items() {
  GroundTruth truth;
  truth.mode_names = {"user", "item"};
  truth.injected_ids = {{"u0", "u1", "u2", "u3"}, {"i0", "i1"}};
  return truth;
}

StepRecord record_of(std::vector<std::vector<std::string>> values) {
  StepRecord::BlockRecord block;
  block.values = std::move(values);
  StepRecord rec;
  rec.blocks.push_back(block);
  return rec;
}

TEST(ScoreTest, ExactDetectionScoresOne) {
  const auto s = score(record_of({{"u0", "u1", "u2", "u3"}, {"i0", "i1"}, {"0"}}), users_and_items());
  EXPECT_DOUBLE_EQ(s.f_measure, 1.0);
}

TEST(ScoreTest, DisjointDetectionScoresZero) {
  const auto s = score(record_of({{"u8"}, {"i9"}, {"0"}}), users_and_items());
  EXPECT_DOUBLE_EQ(s.f_measure, 0.0);
  EXPECT_DOUBLE_EQ(make_score(0, 0, 5).f_measure, 0.0);
}

TEST(ScoreTest, HalfRecallFullPrecision) {
  const auto s = make_score(2, 2, 4);
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f_measure, 2.0 / 3.0);
  // Half the users and half the items found.
  const auto e = score(record_of({{"u0", "u1"}, {"i0"}, {"0"}}), users_and_items());
  EXPECT_DOUBLE_EQ(e.precision, 1.0);
  EXPECT_DOUBLE_EQ(e.recall, 0.5);
  EXPECT_DOUBLE_EQ(e.f_measure, 2.0 / 3.0);
}

TEST(ScoreTest, InvariantUnderRelabelling) {
  const auto a = score(record_of({{"u0", "u9"}, {"i1", "i7"}, {"3"}}), users_and_items());
  GroundTruth renamed = users_and_items();
  renamed.injected_ids = {{"a0", "a1", "a2", "a3"}, {"b0", "b1"}};
  const auto b = score(record_of({{"a0", "a9"}, {"b1", "b7"}, {"3"}}), renamed);
  EXPECT_EQ(a.true_positives, b.true_positives);
  EXPECT_DOUBLE_EQ(a.f_measure, b.f_measure);
  const auto reordered = score(record_of({{"u9", "u0"}, {"i7", "i1"}, {"3"}}), users_and_items());
  EXPECT_DOUBLE_EQ(a.f_measure, reordered.f_measure);
}

TEST(EvaluateTest, ScoresTheDensestBlocksFirst) {
  StepRecord rec = record_of({{"u0", "u1", "u2", "u3"}, {"i0", "i1"}, {"0"}});
  rec.blocks.push_back(record_of({{"u8", "u9"}, {"i9"}, {"0"}}).blocks[0]);
  const std::vector<StepRecord> steps{rec};
  EXPECT_DOUBLE_EQ(evaluate(steps, users_and_items()).final_score.f_measure, 1.0);
  const auto all = evaluate(steps, users_and_items(), 0).final_score;
  EXPECT_EQ(all.detected, 9u);
  EXPECT_DOUBLE_EQ(all.precision, 6.0 / 9.0);
  EXPECT_EQ(leading_blocks(rec, 5).blocks.size(), 2u);
  EXPECT_EQ(leading_blocks(rec, 1).blocks.size(), 1u);
}

TEST(ScoreEntriesTest, CountsTuplesInsideReportedBlocks) {
  GroundTruth truth = users_and_items();
  truth.stride = 10;
  truth.injected_cells = {{{"u0", "i0", "0"}, 1}, {{"u1", "i0", "0"}, 1}};
  std::vector<RawTuple> tuples{{{"u0", "i0"}, 3, true}, {{"u1", "i0"}, 5, true}, {{"u0", "i0"}, 12, false},
                               {{"u7", "i0"}, 4, false}};
  const auto s = score_entries(record_of({{"u0", "u7"}, {"i0"}, {"0"}}), tuples, truth);
  EXPECT_EQ(s.detected, 2u);
  EXPECT_EQ(s.true_positives, 1u);
  EXPECT_EQ(s.actual, 2u);
}

TEST(FitLogLogTest, MatchesReferenceRegression) {
  // Reference values from an independent OLS with a two-sided 95% t interval.
  const std::vector<double> x{1, 2, 4, 8, 16};
  const std::vector<double> y{3, 5, 13, 22, 51};
  const auto fit = fit_loglog(x, y);
  EXPECT_NEAR(fit.slope, 1.0312429206250615, 1e-9);
  EXPECT_NEAR(fit.intercept, 1.0295672831219485, 1e-9);
  EXPECT_NEAR(fit.ci_low, 0.8576344304497543, 1e-7);
  EXPECT_NEAR(fit.ci_high, 1.2048514108003687, 1e-7);
  EXPECT_EQ(fit.points, 5u);
}

TEST(ScalingRunTest, ConstantStubHasZeroSlope) {
  const std::vector<std::size_t> sizes{1000, 2000, 4000, 8000, 16000};
  const auto result = scaling_run(sizes, [](std::size_t n) {
    return ScalingPoint{static_cast<double>(n), 0.25};
  });
  EXPECT_NEAR(result.fit.slope, 0.0, 1e-9);
  EXPECT_EQ(result.points.size(), 5u);
}

TEST(ScalingRunTest, LinearStubHasUnitSlope) {
  const std::vector<std::size_t> sizes{1000, 2000, 4000, 8000, 16000};
  // Linear cost with a little deterministic jitter.
  const auto result = scaling_run(sizes, [](std::size_t n) {
    const double jitter = 1.0 + 0.05 * std::sin(static_cast<double>(n));
    return ScalingPoint{static_cast<double>(n), 1e-6 * static_cast<double>(n) * jitter};
  });
  EXPECT_NEAR(result.fit.slope, 1.0, 0.1);
}

TEST(ScalingRunTest, TimedLinearLoopHasUnitSlope) {
  const std::vector<std::size_t> sizes{1u << 21, 1u << 22, 1u << 23, 1u << 24, 1u << 25};
  const auto result = scaling_run(sizes, [](std::size_t n) {
    std::vector<double> best;
    for (int rep = 0; rep < 3; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      volatile double sink = 0.0;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(i & 7U);
      sink = acc;
      (void)sink;
      best.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return ScalingPoint{static_cast<double>(n), *std::min_element(best.begin(), best.end())};
  });
  EXPECT_NEAR(result.fit.slope, 1.0, 0.1);
}

TEST(ScalingRunTest, RequiresFourSizesOverSixteenFold) {
  auto stub = [](std::size_t n) { return ScalingPoint{static_cast<double>(n), 1.0}; };
  const std::vector<std::size_t> few{1, 4, 16};
  EXPECT_THROW(scaling_run(few, stub), ConfigError);
  const std::vector<std::size_t> narrow{10, 20, 40, 80};
  EXPECT_THROW(scaling_run(narrow, stub), ConfigError);
}

TEST(EngineStepCostTest, ProcessesAboutTheRequestedSlice) {
  EngineConfig cfg;
  cfg.k = 3;
  cfg.l = 2;
  const auto point = engine_step_cost(1000, cfg, 1, 3);
  EXPECT_GT(point.seconds, 0.0);
  EXPECT_GT(point.nnz, 800.0);
  EXPECT_LT(point.nnz, 1200.0);
}

}  // namespace
}  // namespace augsplice
