#pragma once

// Synthetic injection benchmark: stream generation with a planted dense block,
// detection scoring, and log-log runtime scaling fits.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "augsplice/engine.hpp"
#include "augsplice/ingest.hpp"

namespace augsplice {

/// How the volume density knob is read.
///  Cells: injected nnz = round(rho * volume) distinct cells, so rho <= 1.
///  Mass:  round(rho * volume) unit tuples drawn with replacement, so rho may exceed 1
///         and repeated cells accumulate values above 1.
enum class DensityMode { Cells, Mass };

struct InjectionSpec {
  /// Names of the categorical modes; the time column is appended after them.
  std::vector<std::string> mode_names{"user", "item"};
  /// Injected block cardinality per categorical mode.
  std::vector<std::size_t> block_cardinalities{50, 20};
  double volume_density = 1.0;
  std::int64_t span_begin = 0;
  std::size_t span_bins = 1;
  std::size_t background_tuples = 0;
  /// Background id space per categorical mode; injected ids are drawn from it.
  std::vector<std::size_t> background_cardinalities{1000, 1000};
  std::size_t bins = 1;
  std::int64_t stride = 100;
  std::uint64_t seed = 0;
  DensityMode density_mode = DensityMode::Cells;

  /// Product of block cardinalities.
  double block_volume() const;
  /// round(rho * volume).
  std::size_t injected_count() const;
  /// Throws ConfigError or DensityInfeasible.
  void validate() const;
};

/// One generated tuple in raw form. Source time is t0 = 0 based.
struct RawTuple {
  std::vector<std::string> ids;
  std::int64_t timestamp = 0;
  bool injected = false;
};

struct GroundTruth {
  std::vector<std::string> mode_names;
  /// Injected ids per categorical mode, sorted.
  std::vector<std::vector<std::string>> injected_ids;
  std::int64_t span_begin = 0;
  std::size_t span_bins = 0;
  double volume_density = 0.0;
  std::uint64_t seed = 0;
  std::int64_t stride = 1;
  std::int64_t t0 = 0;
  std::size_t injected_count = 0;
  /// Injected tuples keyed by categorical ids plus bin, with multiplicity.
  std::map<std::vector<std::string>, std::size_t> injected_cells;

  std::string to_json() const;
  static GroundTruth from_json(const std::string& text);
};

struct GeneratedStream {
  /// Sorted by bin; shuffled within each bin.
  std::vector<RawTuple> tuples;
  GroundTruth truth;
};

/// Throws DensityInfeasible when Cells mode asks for more cells than the block holds.
GeneratedStream generate_stream(const InjectionSpec& spec);

/// Tab-separated: categorical ids, then timestamp. With a header line naming the columns.
void write_tuples(std::ostream& out, const GeneratedStream& stream);

/// Ingestion settings matching write_tuples output.
IngestConfig generated_ingest_config(const InjectionSpec& spec);

/// Runs the generated stream through the dictionaries directly (no text round trip).
std::vector<Tuple> to_tuples(const GeneratedStream& stream, ModeDictionary& dicts);

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::size_t true_positives = 0;
  std::size_t detected = 0;
  std::size_t actual = 0;
};

/// F-measure helper: 2PR/(P+R), 0 when both are 0.
Score make_score(std::size_t true_positives, std::size_t detected, std::size_t actual);

/// Entity-level: (mode, raw id) pairs of the categorical modes. An entity is a
/// true positive if it belongs to any reported block and to the injected block.
Score score(const StepRecord& detected, const GroundTruth& truth);

/// Entry-level: a tuple is predicted positive if its ids and bin fall inside
/// some reported block; it is actually positive if it was injected.
Score score_entries(const StepRecord& detected, std::span<const RawTuple> tuples, const GroundTruth& truth);

struct EvalReport {
  Score final_score;
  std::vector<double> f_series;
  std::vector<double> top1_density;

  std::string to_json() const;
};

/// Scores each step on its first `top_blocks` blocks (all of them when 0).
EvalReport evaluate(std::span<const StepRecord> steps, const GroundTruth& truth, std::size_t top_blocks = 1);

/// `rec` keeping only its first `top_blocks` blocks (all of them when 0).
StepRecord leading_blocks(StepRecord rec, std::size_t top_blocks);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t points = 0;
};

/// OLS of log(y) on log(x) with a 95% Student-t interval for the slope.
SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y);

struct ScalingPoint {
  double nnz = 0.0;
  double seconds = 0.0;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  SlopeFit fit;
};

/// Measures seconds for a given size. Returns {nnz actually processed, seconds}.
using ScalingWorkload = std::function<ScalingPoint(std::size_t size)>;

/// Requires at least 4 sizes spanning at least 16x; throws ConfigError otherwise.
ScalingResult scaling_run(std::span<const std::size_t> sizes, const ScalingWorkload& workload);

/// Per-step splicing engine cost on a synthetic stream whose slices hold about
/// `slice_nnz` tuples: median over steps of detect + splice seconds.
ScalingPoint engine_step_cost(std::size_t slice_nnz, const EngineConfig& cfg, std::uint64_t seed,
                              std::size_t steps = 4);

/// Cumulative wall time of the re-run baseline versus cumulative nnz, one point per step.
std::vector<ScalingPoint> rerun_cumulative_cost(std::size_t slice_nnz, std::size_t steps,
                                                const EngineConfig& cfg, std::uint64_t seed);

}  // namespace augsplice
