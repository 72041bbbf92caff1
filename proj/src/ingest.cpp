#include "augsplice/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <limits>

#include <json.hpp>

namespace augsplice {

using ordered_json = nlohmann::ordered_json;

ModeDictionary::ModeDictionary(std::size_t categorical_modes)
    : to_id_(categorical_modes), to_raw_(categorical_modes) {}

Id ModeDictionary::intern(std::size_t mode, std::string_view raw) {
  auto& ids = to_id_.at(mode);
  auto it = ids.find(std::string(raw));
  if (it != ids.end()) return it->second;
  const Id id = static_cast<Id>(to_raw_[mode].size());
  ids.emplace(std::string(raw), id);
  to_raw_[mode].emplace_back(raw);
  return id;
}

std::optional<Id> ModeDictionary::find(std::size_t mode, std::string_view raw) const {
  const auto& ids = to_id_.at(mode);
  auto it = ids.find(std::string(raw));
  if (it == ids.end()) return std::nullopt;
  return it->second;
}

const std::string& ModeDictionary::raw(std::size_t mode, Id id) const { return to_raw_.at(mode).at(id); }

void IngestConfig::validate() const {
  if (mode_columns.empty()) throw ConfigError("at least one categorical mode column is required");
  if (n_modes() > kMaxModes) throw ConfigError("too many modes (at most 8 including time)");
  if (!(stride > 0.0) || !std::isfinite(stride)) throw ConfigError("stride must be a positive number");
  auto uses = [&](std::size_t col) {
    return std::find(mode_columns.begin(), mode_columns.end(), col) != mode_columns.end();
  };
  if (uses(time_column)) throw ConfigError("time column is also listed as a mode column");
  if (value_column && (uses(*value_column) || *value_column == time_column)) {
    throw ConfigError("value column overlaps a mode or time column");
  }
  for (std::size_t i = 0; i < mode_columns.size(); ++i) {
    for (std::size_t j = i + 1; j < mode_columns.size(); ++j) {
      if (mode_columns[i] == mode_columns[j]) throw ConfigError("mode column listed twice");
    }
  }
  for (auto col : binned_columns) {
    if (!uses(col)) throw ConfigError("time-binned column must also be a mode column");
  }
  if (!mode_names.empty() && mode_names.size() != n_modes()) {
    throw ConfigError("mode_names must name every mode including time");
  }
}

std::vector<std::string> IngestConfig::resolved_mode_names() const {
  if (!mode_names.empty()) return mode_names;
  std::vector<std::string> names;
  for (std::size_t m = 0; m + 1 < n_modes(); ++m) names.push_back("mode" + std::to_string(m));
  names.emplace_back("time");
  return names;
}

std::size_t resolve_column(std::string_view spec, const std::vector<std::string>& header) {
  std::size_t index = 0;
  const auto* end = spec.data() + spec.size();
  auto [ptr, ec] = std::from_chars(spec.data(), end, index);
  if (ec == std::errc() && ptr == end) return index;
  auto it = std::find(header.begin(), header.end(), spec);
  if (it == header.end()) throw ConfigError("unknown column '" + std::string(spec) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::optional<double> parse_iso8601(std::string_view text) {
  if (!text.empty() && (text.back() == 'Z' || text.back() == 'z')) text.remove_suffix(1);
  const std::string s(text);
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &year, &month, &day, &consumed) != 3) return std::nullopt;
  if (static_cast<std::size_t>(consumed) != s.size()) {
    const char sep = s[static_cast<std::size_t>(consumed)];
    if (sep != 'T' && sep != ' ') return std::nullopt;
    int rest = 0;
    if (std::sscanf(s.c_str() + consumed + 1, "%2d:%2d:%2d%n", &hour, &minute, &second, &rest) != 3) {
      return std::nullopt;
    }
    if (static_cast<std::size_t>(consumed + 1 + rest) != s.size()) return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
    return std::nullopt;
  }
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  return static_cast<double>(timegm(&tm));
}

namespace {

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::optional<double> parse_number(std::string_view field) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_bin(std::int64_t bin) { return std::to_string(bin); }

}  // namespace

TupleParser::TupleParser(std::istream& in, IngestConfig cfg, ModeDictionary& dicts,
                         std::uint64_t lines_already_read)
    : in_(in), cfg_(std::move(cfg)), dicts_(dicts), t0_(cfg_.t0), line_no_(lines_already_read) {
  cfg_.validate();
  if (dicts_.categorical_modes() == 0) dicts_ = ModeDictionary(cfg_.mode_columns.size());
  if (dicts_.categorical_modes() != cfg_.mode_columns.size()) {
    throw ConfigError("dictionary mode count differs from the configured mode columns");
  }
  needed_columns_ = cfg_.time_column + 1;
  for (auto c : cfg_.mode_columns) needed_columns_ = std::max(needed_columns_, c + 1);
  if (cfg_.value_column) needed_columns_ = std::max(needed_columns_, *cfg_.value_column + 1);
  if (cfg_.header) {
    std::string line;
    if (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      for (auto f : split(line, cfg_.delimiter)) header_.emplace_back(f);
    }
  }
}

double TupleParser::parse_time(std::string_view field) const {
  const auto t = cfg_.time_format == TimeFormat::Epoch ? parse_number(field) : parse_iso8601(field);
  if (!t) throw ParseError(ParseErrorKind::BadTimestamp, line_no_, "cannot parse '" + std::string(field) + "'");
  return *t;
}

std::int64_t TupleParser::bin_of(double t) const {
  return static_cast<std::int64_t>(std::floor((t - *t0_) / cfg_.stride));
}

std::optional<Tuple> TupleParser::parse_line(std::string_view line) {
  const auto fields = split(line, cfg_.delimiter);
  if (fields.size() < needed_columns_) {
    throw ParseError(ParseErrorKind::MalformedLine, line_no_,
                     "expected at least " + std::to_string(needed_columns_) + " columns, got " +
                         std::to_string(fields.size()));
  }
  if (fields.size() > needed_columns_ && !warned_extra_) {
    warned_extra_ = true;
    warnings_.push_back("line " + std::to_string(line_no_) + ": ignoring " +
                        std::to_string(fields.size() - needed_columns_) + " unused column(s)");
  }

  double value = 1.0;
  if (cfg_.value_column) {
    const auto v = parse_number(fields[*cfg_.value_column]);
    if (!v) {
      throw ParseError(ParseErrorKind::MalformedLine, line_no_,
                       "value '" + std::string(fields[*cfg_.value_column]) + "' is not a number");
    }
    if (*v < 0.0) throw ParseError(ParseErrorKind::NegativeValue, line_no_, "value " + std::string(fields[*cfg_.value_column]));
    value = *v;
  }

  const double t = parse_time(fields[cfg_.time_column]);
  if (!t0_) t0_ = t;
  const auto bin = bin_of(t);
  if (bin < 0 || bin > static_cast<std::int64_t>(std::numeric_limits<Id>::max())) {
    throw ParseError(ParseErrorKind::BadTimestamp, line_no_, "timestamp falls before the bin origin");
  }

  // Validate everything before touching the dictionaries so skipped lines leave no ids behind.
  std::vector<std::string> binned(cfg_.mode_columns.size());
  for (std::size_t m = 0; m < cfg_.mode_columns.size(); ++m) {
    const auto col = cfg_.mode_columns[m];
    if (std::find(cfg_.binned_columns.begin(), cfg_.binned_columns.end(), col) != cfg_.binned_columns.end()) {
      binned[m] = format_bin(bin_of(parse_time(fields[col])));
    }
  }
  if (value == 0.0) return std::nullopt;

  Tuple tuple;
  tuple.value = value;
  for (std::size_t m = 0; m < cfg_.mode_columns.size(); ++m) {
    const auto col = cfg_.mode_columns[m];
    tuple.key[m] = dicts_.intern(m, binned[m].empty() ? fields[col] : std::string_view(binned[m]));
  }
  tuple.key[cfg_.n_modes() - 1] = static_cast<Id>(bin);
  return tuple;
}

std::optional<Tuple> TupleParser::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      if (auto tuple = parse_line(line)) return tuple;
    } catch (const ParseError& err) {
      if (cfg_.on_error == ErrorPolicy::Abort) throw;
      skipped_.push_back(err);
    }
  }
  return std::nullopt;
}

std::vector<Tuple> parse_tuples(std::istream& in, const IngestConfig& cfg, ModeDictionary& dicts) {
  TupleParser parser(in, cfg, dicts);
  std::vector<Tuple> tuples;
  while (auto t = parser.next()) tuples.push_back(*t);
  return tuples;
}

double round_significant(double value) {
  if (value == 0.0 || !std::isfinite(value)) return value;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return std::strtod(buf, nullptr);
}

std::string emit_step_output(const StepOutput& out, const ModeDictionary& dicts,
                             const std::vector<std::string>& mode_names, const TimeAxis& axis) {
  ordered_json obj;
  obj["schema"] = kStepSchema;
  obj["step"] = out.step;
  obj["bin_begin"] = out.bin_begin;
  obj["bin_end"] = out.bin_end;
  obj["time_begin"] = round_significant(axis.t0 + static_cast<double>(out.bin_begin) * axis.stride);
  obj["time_end"] = round_significant(axis.t0 + static_cast<double>(out.bin_end) * axis.stride);
  obj["slice_nnz"] = out.slice_nnz;
  ordered_json blocks = ordered_json::array();
  for (std::size_t rank = 0; rank < out.top_k.size(); ++rank) {
    const Block& b = out.top_k[rank];
    ordered_json block;
    block["rank"] = rank + 1;
    block["density"] = b.size() == 0 ? 0.0 : round_significant(b.density().value());
    block["mass"] = round_significant(b.mass());
    block["size"] = b.size();
    block["nnz"] = b.nnz();
    ordered_json modes;
    for (std::size_t m = 0; m < b.n_modes(); ++m) {
      const std::string name = m < mode_names.size() ? mode_names[m] : "mode" + std::to_string(m);
      ordered_json values = ordered_json::array();
      const bool is_time = m + 1 == b.n_modes();
      for (Id id : b.index_set(m)) {
        if (is_time) {
          values.push_back(id);
        } else {
          values.push_back(dicts.raw(m, id));
        }
      }
      modes[name] = std::move(values);
    }
    block["modes"] = std::move(modes);
    blocks.push_back(std::move(block));
  }
  obj["blocks"] = std::move(blocks);
  return obj.dump();
}

StepRecord parse_step_line(std::string_view line) {
  const auto obj = ordered_json::parse(line);
  if (!obj.contains("schema") || obj["schema"] != kStepSchema) {
    throw ConfigError("not a step record of schema " + std::string(kStepSchema));
  }
  StepRecord rec;
  rec.step = obj.at("step").get<std::uint64_t>();
  rec.bin_begin = obj.at("bin_begin").get<std::int64_t>();
  rec.bin_end = obj.at("bin_end").get<std::int64_t>();
  for (const auto& b : obj.at("blocks")) {
    StepRecord::BlockRecord block;
    block.mass = b.at("mass").get<double>();
    block.size = b.at("size").get<std::size_t>();
    block.density = b.at("density").get<double>();
    for (const auto& [name, values] : b.at("modes").items()) {
      block.mode_names.push_back(name);
      std::vector<std::string> raw;
      for (const auto& v : values) raw.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      block.values.push_back(std::move(raw));
    }
    rec.blocks.push_back(std::move(block));
  }
  return rec;
}

}  // namespace augsplice
