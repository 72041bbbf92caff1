#include "augsplice/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_set>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "augsplice/errors.hpp"

namespace augsplice {

using json = nlohmann::ordered_json;

double InjectionSpec::block_volume() const {
  double volume = 1.0;
  for (auto c : block_cardinalities) volume *= static_cast<double>(c);
  return volume;
}

std::size_t InjectionSpec::injected_count() const {
  return static_cast<std::size_t>(std::llround(volume_density * block_volume()));
}

void InjectionSpec::validate() const {
  const auto n = mode_names.size();
  if (n == 0 || n + 1 > kMaxModes) throw ConfigError("injection needs 1..7 categorical modes");
  if (block_cardinalities.size() != n || background_cardinalities.size() != n) {
    throw ConfigError("cardinality lists must have one entry per categorical mode");
  }
  for (std::size_t m = 0; m < n; ++m) {
    if (block_cardinalities[m] == 0) throw ConfigError("block cardinalities must be positive");
    if (block_cardinalities[m] > background_cardinalities[m]) {
      throw ConfigError("block cardinality exceeds the background id space of mode " + mode_names[m]);
    }
  }
  if (!(volume_density > 0.0) || !std::isfinite(volume_density)) {
    throw ConfigError("volume density must be positive");
  }
  if (injected_count() < 1) throw ConfigError("volume density rounds to zero injected tuples");
  if (density_mode == DensityMode::Cells && static_cast<double>(injected_count()) > block_volume()) {
    throw DensityInfeasible("volume density " + std::to_string(volume_density) +
                            " needs more distinct cells than the block holds");
  }
  if (bins == 0 || span_bins == 0) throw ConfigError("bins and span must be positive");
  if (span_begin < 0 || span_begin + static_cast<std::int64_t>(span_bins) > static_cast<std::int64_t>(bins)) {
    throw ConfigError("injection span lies outside the stream");
  }
  if (stride <= 0) throw ConfigError("stride must be positive");
}

namespace {

/// Floyd's sampling of `count` distinct values from [0, population), ascending.
std::vector<std::uint64_t> sample_distinct(std::uint64_t population, std::uint64_t count, std::mt19937_64& rng) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = population - count; j < population; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const auto t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

std::string raw_id(const std::string& name, std::uint64_t id) { return name + std::to_string(id); }

std::int64_t bin_of(std::int64_t timestamp, std::int64_t t0, std::int64_t stride) {
  const auto shifted = timestamp - t0;
  return shifted >= 0 ? shifted / stride : -((-shifted + stride - 1) / stride);
}

}  // namespace

GeneratedStream generate_stream(const InjectionSpec& spec) {
  spec.validate();
  const auto n = spec.mode_names.size();
  std::mt19937_64 rng(spec.seed);
  GeneratedStream stream;
  GroundTruth& truth = stream.truth;
  truth.mode_names = spec.mode_names;
  truth.span_begin = spec.span_begin;
  truth.span_bins = spec.span_bins;
  truth.volume_density = spec.volume_density;
  truth.seed = spec.seed;
  truth.stride = spec.stride;
  truth.t0 = 0;
  truth.injected_count = spec.injected_count();

  std::uniform_int_distribution<std::int64_t> offset(0, spec.stride - 1);
  auto timestamp_in = [&](std::int64_t first_bin, std::size_t n_bins) {
    std::uniform_int_distribution<std::int64_t> bin(first_bin, first_bin + static_cast<std::int64_t>(n_bins) - 1);
    const auto b = bin(rng);
    return b * spec.stride + offset(rng);
  };

  // Injected ids are a random subset of each background id space.
  std::vector<std::vector<std::uint64_t>> block_ids(n);
  truth.injected_ids.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    block_ids[m] = sample_distinct(spec.background_cardinalities[m], spec.block_cardinalities[m], rng);
    for (auto id : block_ids[m]) truth.injected_ids[m].push_back(raw_id(spec.mode_names[m], id));
    std::sort(truth.injected_ids[m].begin(), truth.injected_ids[m].end());
  }

  const auto volume = static_cast<std::uint64_t>(spec.block_volume());
  std::vector<std::uint64_t> cells;
  if (spec.density_mode == DensityMode::Cells) {
    cells = sample_distinct(volume, spec.injected_count(), rng);
  } else {
    std::uniform_int_distribution<std::uint64_t> cell(0, volume - 1);
    for (std::size_t i = 0; i < spec.injected_count(); ++i) cells.push_back(cell(rng));
  }
  for (auto cell : cells) {
    RawTuple t;
    t.injected = true;
    for (std::size_t m = n; m-- > 0;) {
      const auto card = spec.block_cardinalities[m];
      t.ids.insert(t.ids.begin(), raw_id(spec.mode_names[m], block_ids[m][cell % card]));
      cell /= card;
    }
    t.timestamp = timestamp_in(spec.span_begin, spec.span_bins);
    auto key = t.ids;
    key.push_back(std::to_string(bin_of(t.timestamp, 0, spec.stride)));
    ++truth.injected_cells[key];
    stream.tuples.push_back(std::move(t));
  }

  std::vector<std::uniform_int_distribution<std::uint64_t>> background_pick;
  for (auto c : spec.background_cardinalities) background_pick.emplace_back(0, c - 1);
  for (std::size_t i = 0; i < spec.background_tuples; ++i) {
    RawTuple t;
    for (std::size_t m = 0; m < n; ++m) t.ids.push_back(raw_id(spec.mode_names[m], background_pick[m](rng)));
    t.timestamp = timestamp_in(0, spec.bins);
    stream.tuples.push_back(std::move(t));
  }

  std::shuffle(stream.tuples.begin(), stream.tuples.end(), rng);
  std::stable_sort(stream.tuples.begin(), stream.tuples.end(), [&](const RawTuple& a, const RawTuple& b) {
    return a.timestamp / spec.stride < b.timestamp / spec.stride;
  });
  return stream;
}

void write_tuples(std::ostream& out, const GeneratedStream& stream) {
  for (const auto& name : stream.truth.mode_names) out << name << '\t';
  out << "timestamp\n";
  for (const auto& t : stream.tuples) {
    for (const auto& id : t.ids) out << id << '\t';
    out << t.timestamp << '\n';
  }
}

IngestConfig generated_ingest_config(const InjectionSpec& spec) {
  IngestConfig cfg;
  for (std::size_t m = 0; m < spec.mode_names.size(); ++m) cfg.mode_columns.push_back(m);
  cfg.mode_names = spec.mode_names;
  cfg.mode_names.emplace_back("timestamp");
  cfg.time_column = spec.mode_names.size();
  cfg.stride = static_cast<double>(spec.stride);
  cfg.header = true;
  cfg.t0 = 0.0;
  return cfg;
}

std::vector<Tuple> to_tuples(const GeneratedStream& stream, ModeDictionary& dicts) {
  const auto n = stream.truth.mode_names.size();
  if (dicts.categorical_modes() == 0) dicts = ModeDictionary(n);
  std::vector<Tuple> tuples;
  tuples.reserve(stream.tuples.size());
  for (const auto& raw : stream.tuples) {
    Tuple t;
    for (std::size_t m = 0; m < n; ++m) t.key[m] = dicts.intern(m, raw.ids[m]);
    t.key[n] = static_cast<Id>(bin_of(raw.timestamp, stream.truth.t0, stream.truth.stride));
    t.value = 1.0;
    tuples.push_back(t);
  }
  return tuples;
}

std::string GroundTruth::to_json() const {
  json obj;
  obj["schema"] = "augsplice.truth/1";
  obj["mode_names"] = mode_names;
  json ids;
  for (std::size_t m = 0; m < mode_names.size(); ++m) ids[mode_names[m]] = injected_ids[m];
  obj["injected_ids"] = std::move(ids);
  obj["span_begin"] = span_begin;
  obj["span_bins"] = span_bins;
  obj["volume_density"] = volume_density;
  obj["seed"] = seed;
  obj["stride"] = stride;
  obj["t0"] = t0;
  obj["injected_count"] = injected_count;
  json cells = json::array();
  for (const auto& [key, count] : injected_cells) {
    json row = key;
    row.push_back(count);
    cells.push_back(std::move(row));
  }
  obj["injected_cells"] = std::move(cells);
  return obj.dump();
}

GroundTruth GroundTruth::from_json(const std::string& text) {
  const auto obj = json::parse(text);
  if (obj.value("schema", "") != "augsplice.truth/1") throw ConfigError("not a ground truth file");
  GroundTruth truth;
  truth.mode_names = obj.at("mode_names").get<std::vector<std::string>>();
  for (const auto& name : truth.mode_names) {
    truth.injected_ids.push_back(obj.at("injected_ids").at(name).get<std::vector<std::string>>());
  }
  truth.span_begin = obj.at("span_begin").get<std::int64_t>();
  truth.span_bins = obj.at("span_bins").get<std::size_t>();
  truth.volume_density = obj.at("volume_density").get<double>();
  truth.seed = obj.at("seed").get<std::uint64_t>();
  truth.stride = obj.at("stride").get<std::int64_t>();
  truth.t0 = obj.at("t0").get<std::int64_t>();
  truth.injected_count = obj.at("injected_count").get<std::size_t>();
  for (const auto& row : obj.at("injected_cells")) {
    std::vector<std::string> key;
    for (std::size_t i = 0; i + 1 < row.size(); ++i) key.push_back(row[i].get<std::string>());
    truth.injected_cells[key] = row.back().get<std::size_t>();
  }
  return truth;
}

Score make_score(std::size_t true_positives, std::size_t detected, std::size_t actual) {
  Score s;
  s.true_positives = true_positives;
  s.detected = detected;
  s.actual = actual;
  s.precision = detected == 0 ? 0.0 : static_cast<double>(true_positives) / static_cast<double>(detected);
  s.recall = actual == 0 ? 0.0 : static_cast<double>(true_positives) / static_cast<double>(actual);
  const double denom = s.precision + s.recall;
  s.f_measure = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

Score score(const StepRecord& detected, const GroundTruth& truth) {
  const auto n = truth.mode_names.size();
  std::set<std::pair<std::size_t, std::string>> found;
  for (const auto& block : detected.blocks) {
    for (std::size_t m = 0; m < n && m < block.values.size(); ++m) {
      for (const auto& v : block.values[m]) found.emplace(m, v);
    }
  }
  std::size_t actual = 0;
  std::size_t hits = 0;
  for (std::size_t m = 0; m < n; ++m) {
    for (const auto& id : truth.injected_ids[m]) {
      ++actual;
      if (found.contains({m, id})) ++hits;
    }
  }
  return make_score(hits, found.size(), actual);
}

Score score_entries(const StepRecord& detected, std::span<const RawTuple> tuples, const GroundTruth& truth) {
  const auto n = truth.mode_names.size();
  std::vector<std::vector<std::unordered_set<std::string>>> members;
  for (const auto& block : detected.blocks) {
    std::vector<std::unordered_set<std::string>> sets;
    for (const auto& values : block.values) sets.emplace_back(values.begin(), values.end());
    members.push_back(std::move(sets));
  }
  auto remaining = truth.injected_cells;
  std::size_t predicted = 0;
  std::size_t hits = 0;
  std::size_t actual = 0;
  for (const auto& t : tuples) {
    auto key = t.ids;
    key.push_back(std::to_string(bin_of(t.timestamp, truth.t0, truth.stride)));
    bool is_injected = false;
    if (auto it = remaining.find(key); it != remaining.end() && it->second > 0) {
      --it->second;
      is_injected = true;
    }
    bool in_block = false;
    for (const auto& sets : members) {
      if (sets.size() != n + 1) continue;
      bool inside = true;
      for (std::size_t m = 0; m <= n && inside; ++m) inside = sets[m].contains(key[m]);
      if (inside) {
        in_block = true;
        break;
      }
    }
    actual += is_injected;
    predicted += in_block;
    hits += is_injected && in_block;
  }
  return make_score(hits, predicted, actual);
}

std::string EvalReport::to_json() const {
  json obj;
  obj["schema"] = "augsplice.eval/1";
  obj["precision"] = round_significant(final_score.precision);
  obj["recall"] = round_significant(final_score.recall);
  obj["f_measure"] = round_significant(final_score.f_measure);
  obj["true_positives"] = final_score.true_positives;
  obj["detected"] = final_score.detected;
  obj["actual"] = final_score.actual;
  json fs = json::array();
  for (double f : f_series) fs.push_back(round_significant(f));
  obj["f_series"] = std::move(fs);
  json ds = json::array();
  for (double d : top1_density) ds.push_back(round_significant(d));
  obj["top1_density"] = std::move(ds);
  return obj.dump();
}

StepRecord leading_blocks(StepRecord rec, std::size_t top_blocks) {
  if (top_blocks > 0 && rec.blocks.size() > top_blocks) rec.blocks.resize(top_blocks);
  return rec;
}

EvalReport evaluate(std::span<const StepRecord> steps, const GroundTruth& truth, std::size_t top_blocks) {
  EvalReport report;
  for (const auto& step : steps) {
    report.f_series.push_back(score(leading_blocks(step, top_blocks), truth).f_measure);
    report.top1_density.push_back(step.blocks.empty() ? 0.0 : step.blocks.front().density);
  }
  if (!steps.empty()) report.final_score = score(leading_blocks(steps.back(), top_blocks), truth);
  return report;
}

SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw ConfigError("log-log fit needs at least 3 paired points");
  const auto n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("log-log fit needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("log-log fit needs distinct x values");
  SlopeFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ssr += r * r;
  }
  const double se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  const boost::math::students_t dist(static_cast<double>(n - 2));
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.slope - t * se;
  fit.ci_high = fit.slope + t * se;
  return fit;
}

ScalingResult scaling_run(std::span<const std::size_t> sizes, const ScalingWorkload& workload) {
  if (sizes.size() < 4) throw ConfigError("scaling run needs at least 4 sizes");
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  if (*lo == 0 || *hi < 16 * *lo) throw ConfigError("scaling sizes must span at least 16x");
  ScalingResult result;
  std::vector<double> xs, ys;
  for (auto size : sizes) {
    const auto point = workload(size);
    result.points.push_back(point);
    xs.push_back(point.nnz);
    ys.push_back(point.seconds);
  }
  result.fit = fit_loglog(xs, ys);
  return result;
}

namespace {

InjectionSpec scaling_spec(std::size_t slice_nnz, std::size_t steps, std::uint64_t seed) {
  InjectionSpec spec;
  // The id space grows with the whole stream, so accumulated tensors stay as sparse as one slice.
  const auto space = std::max<std::size_t>(slice_nnz * steps, 100);
  spec.background_cardinalities = {space, space};
  spec.block_cardinalities = {20, 10};
  spec.volume_density = 0.5;
  spec.background_tuples = slice_nnz * steps;
  spec.bins = steps;
  spec.span_begin = 0;
  spec.span_bins = std::min<std::size_t>(2, steps);
  spec.seed = seed;
  return spec;
}

}  // namespace

ScalingPoint engine_step_cost(std::size_t slice_nnz, const EngineConfig& cfg, std::uint64_t seed,
                              std::size_t steps) {
  const auto stream = generate_stream(scaling_spec(slice_nnz, steps, seed));
  ModeDictionary dicts;
  const auto tuples = to_tuples(stream, dicts);
  EngineConfig engine = cfg;
  engine.n_modes = stream.truth.mode_names.size() + 1;
  const auto outputs = run_stream(tuples, engine);
  std::vector<double> times;
  double nnz = 0.0;
  for (const auto& out : outputs) {
    times.push_back(out.timing.detect_seconds + out.timing.splice_seconds);
    nnz += static_cast<double>(out.slice_nnz);
  }
  std::sort(times.begin(), times.end());
  return ScalingPoint{nnz / static_cast<double>(outputs.size()), times[times.size() / 2]};
}

std::vector<ScalingPoint> rerun_cumulative_cost(std::size_t slice_nnz, std::size_t steps,
                                                const EngineConfig& cfg, std::uint64_t seed) {
  const auto stream = generate_stream(scaling_spec(slice_nnz, steps, seed));
  ModeDictionary dicts;
  const auto tuples = to_tuples(stream, dicts);
  EngineConfig engine = cfg;
  engine.n_modes = stream.truth.mode_names.size() + 1;
  const auto outputs = run_stream(tuples, engine, Strategy::Rerun);
  std::vector<ScalingPoint> points;
  double nnz = 0.0;
  double seconds = 0.0;
  for (const auto& out : outputs) {
    nnz += static_cast<double>(out.slice_nnz);
    seconds += out.timing.detect_seconds;
    points.push_back({nnz, seconds});
  }
  return points;
}

}  // namespace augsplice
