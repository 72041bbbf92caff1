#include "augsplice/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "augsplice/benchmark.hpp"
#include "augsplice/engine.hpp"
#include "augsplice/errors.hpp"
#include "augsplice/ingest.hpp"

namespace augsplice {

namespace {

struct StreamFlags {
  std::string input;
  std::string output;
  std::vector<std::string> modes;
  std::string time_col;
  std::string value_col;
  std::vector<std::string> time_binned;
  std::string delimiter = "tab";
  std::string time_format = "epoch";
  std::string on_error = "abort";
  double stride = 0.0;
  std::optional<double> t0;
  bool header = false;
  std::size_t k = 10;
  std::size_t l = 5;
  std::size_t max_epochs = 5;
  std::size_t workers = 1;
};

struct GenerateFlags {
  std::string output;
  std::string truth;
  std::vector<std::string> mode_names{"user", "item"};
  std::vector<std::size_t> background_cards{5000, 5000};
  std::vector<std::size_t> block_cards{50, 20};
  double density = 1.0;
  std::string density_mode = "cells";
  std::int64_t span_begin = 0;
  std::size_t span_bins = 1;
  std::size_t bins = 1;
  std::size_t background = 0;
  std::int64_t stride = 100;
  std::uint64_t seed = 0;
};

struct EvaluateFlags {
  std::string detections;
  std::string truth;
  std::string output;
  std::string input;
  std::string granularity = "entity";
  std::size_t top = 1;
};

struct ScaleFlags {
  std::vector<std::size_t> sizes{2000, 4000, 8000, 16000, 32000};
  std::size_t steps = 4;
  std::size_t rerun_steps = 0;
  std::size_t rerun_slice = 2000;
  std::size_t k = 10;
  std::size_t l = 5;
  std::size_t max_epochs = 5;
  std::uint64_t seed = 0;
  std::string output;
};

char parse_delimiter(const std::string& text) {
  if (text == "tab" || text == "\\t" || text == "\t") return '\t';
  if (text == "comma") return ',';
  if (text.size() != 1) throw ConfigError("delimiter must be a single character, 'tab' or 'comma'");
  return text[0];
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Output sink: the named file, or the fallback stream when no path is given.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ConfigError("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

std::vector<std::string> split_header(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, delimiter)) fields.push_back(field);
  if (!line.empty() && line.back() == delimiter) fields.emplace_back();
  return fields;
}

int cmd_stream(const StreamFlags& flags, Strategy strategy, std::ostream& out, std::ostream& err) {
  std::ifstream in(flags.input, std::ios::binary);
  if (!in) {
    err << "error: cannot open input '" << flags.input << "'\n";
    return kExitConfig;
  }

  IngestConfig ingest;
  ingest.delimiter = parse_delimiter(flags.delimiter);
  std::vector<std::string> header;
  std::uint64_t header_lines = 0;
  if (flags.header) {
    std::string line;
    if (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      header = split_header(line, ingest.delimiter);
      header_lines = 1;
    }
  }
  if (flags.modes.empty()) throw ConfigError("--modes is required");
  for (const auto& m : flags.modes) ingest.mode_columns.push_back(resolve_column(m, header));
  ingest.time_column = resolve_column(flags.time_col, header);
  if (!flags.value_col.empty()) ingest.value_column = resolve_column(flags.value_col, header);
  for (const auto& c : flags.time_binned) ingest.binned_columns.push_back(resolve_column(c, header));
  if (flags.time_format == "epoch") {
    ingest.time_format = TimeFormat::Epoch;
  } else if (flags.time_format == "iso8601") {
    ingest.time_format = TimeFormat::Iso8601;
  } else {
    throw ConfigError("--time-format must be epoch or iso8601");
  }
  if (flags.on_error == "abort") {
    ingest.on_error = ErrorPolicy::Abort;
  } else if (flags.on_error == "skip") {
    ingest.on_error = ErrorPolicy::Skip;
  } else {
    throw ConfigError("--on-error must be abort or skip");
  }
  ingest.stride = flags.stride;
  ingest.t0 = flags.t0;
  if (!header.empty()) {
    for (auto c : ingest.mode_columns) ingest.mode_names.push_back(c < header.size() ? header[c] : "mode");
    ingest.mode_names.push_back(ingest.time_column < header.size() ? header[ingest.time_column] : "time");
  }
  ingest.validate();

  EngineConfig cfg;
  cfg.n_modes = ingest.n_modes();
  cfg.stride = flags.stride;
  cfg.k = flags.k;
  cfg.l = flags.l;
  cfg.max_epochs = flags.max_epochs;
  cfg.workers = flags.workers;
  cfg.validate();

  Sink sink(flags.output, out);
  ModeDictionary dicts(ingest.mode_columns.size());
  const auto names = ingest.resolved_mode_names();
  TupleParser parser(in, ingest, dicts, header_lines);
  StreamRunner runner(cfg, strategy);

  std::uint64_t steps = 0;
  std::uint64_t nnz = 0;
  double algorithm_seconds = 0.0;
  auto flush = [&] {
    const TimeAxis axis{parser.origin().value_or(0.0), flags.stride};
    for (const auto& step : runner.take_outputs()) {
      sink.get() << emit_step_output(step, dicts, names, axis) << '\n';
      ++steps;
      nnz += step.slice_nnz;
      algorithm_seconds += step.timing.detect_seconds + step.timing.splice_seconds;
    }
  };
  try {
    while (auto tuple = parser.next()) {
      runner.push(*tuple);
      flush();
    }
    runner.finish();
    flush();
  } catch (const ParseError& e) {
    flush();
    err << "error: " << e.what() << '\n';
    return kExitParseAbort;
  } catch (const TimeRegression& e) {
    flush();
    err << "error: line " << parser.line_number() << ": " << e.what() << '\n';
    return kExitParseAbort;
  }
  sink.get().flush();
  for (const auto& w : parser.warnings()) err << "warning: " << w << '\n';
  for (const auto& s : parser.skipped()) err << "skipped: " << s.what() << '\n';
  err << "summary: steps=" << steps << " nnz=" << nnz << " algorithm_seconds=" << algorithm_seconds << '\n';
  return kExitOk;
}

int cmd_generate(const GenerateFlags& flags, std::ostream& out, std::ostream& err) {
  InjectionSpec spec;
  spec.mode_names = flags.mode_names;
  spec.background_cardinalities = flags.background_cards;
  spec.block_cardinalities = flags.block_cards;
  spec.volume_density = flags.density;
  if (flags.density_mode == "cells") {
    spec.density_mode = DensityMode::Cells;
  } else if (flags.density_mode == "mass") {
    spec.density_mode = DensityMode::Mass;
  } else {
    throw ConfigError("--density-mode must be cells or mass");
  }
  spec.span_begin = flags.span_begin;
  spec.span_bins = flags.span_bins;
  spec.bins = flags.bins;
  spec.background_tuples = flags.background;
  spec.stride = flags.stride;
  spec.seed = flags.seed;
  const auto stream = generate_stream(spec);
  {
    Sink sink(flags.output, out);
    write_tuples(sink.get(), stream);
  }
  {
    Sink sink(flags.truth, out);
    sink.get() << stream.truth.to_json() << '\n';
  }
  err << "generated: tuples=" << stream.tuples.size() << " injected=" << stream.truth.injected_count << '\n';
  return kExitOk;
}

std::vector<RawTuple> read_raw_tuples(const std::string& path, std::size_t categorical_modes) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);  // header
  std::vector<RawTuple> tuples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_header(line, '\t');
    if (fields.size() < categorical_modes + 1) throw ConfigError("malformed tuple line in '" + path + "'");
    RawTuple t;
    t.ids.assign(fields.begin(), fields.begin() + static_cast<std::ptrdiff_t>(categorical_modes));
    t.timestamp = std::stoll(fields[categorical_modes]);
    tuples.push_back(std::move(t));
  }
  return tuples;
}

int cmd_evaluate(const EvaluateFlags& flags, std::ostream& out) {
  const auto truth = GroundTruth::from_json(read_file(flags.truth));
  std::istringstream detections(read_file(flags.detections));
  std::vector<StepRecord> steps;
  std::string line;
  while (std::getline(detections, line)) {
    if (!line.empty()) steps.push_back(parse_step_line(line));
  }
  auto report = evaluate(steps, truth, flags.top);
  if (flags.granularity == "entry") {
    if (flags.input.empty()) throw ConfigError("--granularity entry needs --input");
    const auto tuples = read_raw_tuples(flags.input, truth.mode_names.size());
    report.final_score = steps.empty() ? Score{} : score_entries(leading_blocks(steps.back(), flags.top), tuples, truth);
  } else if (flags.granularity != "entity") {
    throw ConfigError("--granularity must be entity or entry");
  }
  Sink sink(flags.output, out);
  sink.get() << report.to_json() << '\n';
  return kExitOk;
}

int cmd_scale(const ScaleFlags& flags, std::ostream& out) {
  EngineConfig cfg;
  cfg.k = flags.k;
  cfg.l = flags.l;
  cfg.max_epochs = flags.max_epochs;
  const auto result = scaling_run(flags.sizes, [&](std::size_t size) {
    return engine_step_cost(size, cfg, flags.seed, flags.steps);
  });
  nlohmann::ordered_json obj;
  obj["schema"] = "augsplice.scale/1";
  obj["sizes"] = flags.sizes;
  auto points = nlohmann::ordered_json::array();
  for (const auto& p : result.points) points.push_back({{"nnz", p.nnz}, {"seconds", p.seconds}});
  obj["points"] = std::move(points);
  obj["slope"] = result.fit.slope;
  obj["slope_ci95"] = {result.fit.ci_low, result.fit.ci_high};
  if (flags.rerun_steps >= 3) {
    const auto rerun = rerun_cumulative_cost(flags.rerun_slice, flags.rerun_steps, cfg, flags.seed);
    std::vector<double> xs, ys;
    auto rpoints = nlohmann::ordered_json::array();
    for (const auto& p : rerun) {
      xs.push_back(p.nnz);
      ys.push_back(p.seconds);
      rpoints.push_back({{"cumulative_nnz", p.nnz}, {"cumulative_seconds", p.seconds}});
    }
    const auto fit = fit_loglog(xs, ys);
    obj["rerun"] = {{"points", rpoints}, {"slope", fit.slope}, {"slope_ci95", {fit.ci_low, fit.ci_high}}};
  }
  Sink sink(flags.output, out);
  sink.get() << obj.dump() << '\n';
  return kExitOk;
}

void add_stream_options(CLI::App* cmd, StreamFlags& f) {
  cmd->add_option("--input", f.input, "Tuple file (delimited text, one tuple per line)")->required();
  cmd->add_option("--modes", f.modes, "Categorical mode columns (index or header name)")
      ->required()
      ->delimiter(',');
  cmd->add_option("--time-col", f.time_col, "Streaming time column")->required();
  cmd->add_option("--value-col", f.value_col, "Value column; each tuple counts 1 when absent");
  cmd->add_option("--time-binned", f.time_binned, "Mode columns holding timestamps to bin by stride")
      ->delimiter(',');
  cmd->add_option("--stride", f.stride, "Time stride in source units (no default)")->required();
  cmd->add_option("--t0", f.t0, "Origin of bin 0; defaults to the first tuple's time");
  cmd->add_option("--delimiter", f.delimiter, "Field delimiter: tab, comma or one character")
      ->capture_default_str();
  cmd->add_option("--time-format", f.time_format, "epoch or iso8601")->capture_default_str();
  cmd->add_option("--on-error", f.on_error, "abort or skip malformed lines")->capture_default_str();
  cmd->add_flag("--header", f.header, "First line names the columns");
  cmd->add_option("--k", f.k, "Blocks reported per step")->capture_default_str();
  cmd->add_option("--l", f.l, "Slack blocks retained beyond k")->capture_default_str();
  cmd->add_option("--max-epochs", f.max_epochs, "Splicing epochs per step")->capture_default_str();
  cmd->add_option("--workers", f.workers, "Threads for per-mode mass tallies")->capture_default_str();
  cmd->add_option("--output", f.output, "Output file; standard output when omitted");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming dense-block detection by splicing"};
  app.name("augsplice");
  app.require_subcommand(1, 1);

  StreamFlags run_flags;
  auto* run = app.add_subcommand("run", "Detect top-k dense blocks per time stride (splicing engine)");
  add_stream_options(run, run_flags);

  StreamFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "Re-run the batch detector on the whole tensor at each stride");
  add_stream_options(oracle, oracle_flags);

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic stream with one injected dense block");
  generate->add_option("--output", gen.output, "Tuple file to write")->required();
  generate->add_option("--truth", gen.truth, "Ground-truth file to write")->required();
  generate->add_option("--mode-names", gen.mode_names, "Categorical mode names")->delimiter(',')->capture_default_str();
  generate->add_option("--background-cards", gen.background_cards, "Background id space per mode")
      ->delimiter(',')
      ->capture_default_str();
  generate->add_option("--block-cards", gen.block_cards, "Injected block cardinality per mode")
      ->delimiter(',')
      ->capture_default_str();
  generate->add_option("--density", gen.density, "Volume density of the injected block")->capture_default_str();
  generate->add_option("--density-mode", gen.density_mode, "cells (distinct cells) or mass (with replacement)")
      ->capture_default_str();
  generate->add_option("--span-begin", gen.span_begin, "First bin of the injection")->capture_default_str();
  generate->add_option("--span-bins", gen.span_bins, "Bins covered by the injection")->capture_default_str();
  generate->add_option("--bins", gen.bins, "Total bins in the stream")->capture_default_str();
  generate->add_option("--background", gen.background, "Background tuple count")->capture_default_str();
  generate->add_option("--stride", gen.stride, "Stride in timestamp units")->capture_default_str();
  generate->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();

  EvaluateFlags eval;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score step output against a ground-truth file");
  evaluate_cmd->add_option("--detections", eval.detections, "Step lines written by run or oracle")->required();
  evaluate_cmd->add_option("--truth", eval.truth, "Ground-truth file from generate")->required();
  evaluate_cmd->add_option("--granularity", eval.granularity, "entity or entry")->capture_default_str();
  evaluate_cmd->add_option("--input", eval.input, "Tuple file (entry granularity only)");
  evaluate_cmd->add_option("--top", eval.top, "Blocks per step to score, densest first (0 scores all)")
      ->capture_default_str();
  evaluate_cmd->add_option("--output", eval.output, "Report file; standard output when omitted");

  ScaleFlags scale;
  auto* scale_cmd = app.add_subcommand("scale", "Fit per-step runtime against slice size on synthetic streams");
  scale_cmd->add_option("--sizes", scale.sizes, "Slice sizes (>= 4, spanning >= 16x)")
      ->delimiter(',')
      ->capture_default_str();
  scale_cmd->add_option("--steps", scale.steps, "Steps per size")->capture_default_str();
  scale_cmd->add_option("--rerun-steps", scale.rerun_steps, "Steps of the re-run baseline (0 skips it)")
      ->capture_default_str();
  scale_cmd->add_option("--rerun-slice", scale.rerun_slice, "Slice size for the re-run baseline")
      ->capture_default_str();
  scale_cmd->add_option("--k", scale.k, "Blocks reported per step")->capture_default_str();
  scale_cmd->add_option("--l", scale.l, "Slack blocks retained beyond k")->capture_default_str();
  scale_cmd->add_option("--max-epochs", scale.max_epochs, "Splicing epochs per step")->capture_default_str();
  scale_cmd->add_option("--seed", scale.seed, "RNG seed")->capture_default_str();
  scale_cmd->add_option("--output", scale.output, "Report file; standard output when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_stream(run_flags, Strategy::Splicing, out, err);
    if (oracle->parsed()) return cmd_stream(oracle_flags, Strategy::Rerun, out, err);
    if (generate->parsed()) return cmd_generate(gen, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(eval, out);
    if (scale_cmd->parsed()) return cmd_scale(scale, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParseAbort;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DensityInfeasible& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace augsplice
