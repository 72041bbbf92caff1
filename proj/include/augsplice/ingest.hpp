#pragma once

// Delimited-text tuple ingestion and line-delimited JSON step output.
//
// Categorical columns become modes 0..N-2 through per-mode dictionaries that
// assign dense ids in order of first appearance. The streaming time column
// becomes mode N-1 and holds the bin ordinal floor((t - t0) / stride), so a
// bin covers [t0 + b*stride, t0 + (b+1)*stride).

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "augsplice/engine.hpp"
#include "augsplice/errors.hpp"
#include "augsplice/tensor.hpp"

namespace augsplice {

inline constexpr const char* kStepSchema = "augsplice.step/1";

class ModeDictionary {
 public:
  ModeDictionary() = default;
  explicit ModeDictionary(std::size_t categorical_modes);

  /// Returns the id of `raw` in `mode`, assigning the next dense id on first sight.
  Id intern(std::size_t mode, std::string_view raw);
  std::optional<Id> find(std::size_t mode, std::string_view raw) const;
  const std::string& raw(std::size_t mode, Id id) const;
  std::size_t cardinality(std::size_t mode) const { return to_raw_.at(mode).size(); }
  std::size_t categorical_modes() const { return to_raw_.size(); }

 private:
  std::vector<std::unordered_map<std::string, Id>> to_id_;
  std::vector<std::vector<std::string>> to_raw_;
};

enum class TimeFormat { Epoch, Iso8601 };
enum class ErrorPolicy { Abort, Skip };

struct IngestConfig {
  /// Zero-based column indices of the categorical modes, in mode order.
  std::vector<std::size_t> mode_columns;
  /// Display names, one per mode including the time mode last. Defaulted when empty.
  std::vector<std::string> mode_names;
  std::size_t time_column = 0;
  std::optional<std::size_t> value_column;
  /// Categorical columns holding timestamps; their values are replaced by bin ordinals.
  std::vector<std::size_t> binned_columns;
  TimeFormat time_format = TimeFormat::Epoch;
  double stride = 0.0;
  char delimiter = '\t';
  bool header = false;
  /// Origin of bin 0; the first tuple's timestamp when unset.
  std::optional<double> t0;
  ErrorPolicy on_error = ErrorPolicy::Abort;

  std::size_t n_modes() const { return mode_columns.size() + 1; }
  /// Throws ConfigError on an unusable configuration.
  void validate() const;
  /// mode_names, or "mode0".."modeN-2","time" when unset.
  std::vector<std::string> resolved_mode_names() const;
};

/// Resolves a column given as a zero-based index or, with a header, a column name.
std::size_t resolve_column(std::string_view spec, const std::vector<std::string>& header);

/// Seconds since the Unix epoch for "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" or the
/// same with a space separator and optional trailing 'Z'. Interpreted as UTC.
std::optional<double> parse_iso8601(std::string_view text);

/// Streams tuples out of delimited text one line at a time.
class TupleParser {
 public:
  /// `lines_already_read` offsets reported line numbers when the caller consumed a header.
  TupleParser(std::istream& in, IngestConfig cfg, ModeDictionary& dicts, std::uint64_t lines_already_read = 0);

  /// Next tuple, or nullopt at end of input. Under ErrorPolicy::Abort a bad line
  /// throws ParseError; under Skip it is recorded and skipped.
  std::optional<Tuple> next();

  const std::vector<ParseError>& skipped() const { return skipped_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::vector<std::string>& header() const { return header_; }
  const IngestConfig& config() const { return cfg_; }
  /// Bin origin once known (set by the first tuple when not configured).
  std::optional<double> origin() const { return t0_; }
  std::uint64_t line_number() const { return line_no_; }

 private:
  std::optional<Tuple> parse_line(std::string_view line);
  double parse_time(std::string_view field) const;
  std::int64_t bin_of(double t) const;

  std::istream& in_;
  IngestConfig cfg_;
  ModeDictionary& dicts_;
  std::optional<double> t0_;
  std::vector<std::string> header_;
  std::vector<ParseError> skipped_;
  std::vector<std::string> warnings_;
  std::uint64_t line_no_ = 0;
  std::size_t needed_columns_ = 0;
  bool warned_extra_ = false;
};

/// Reads every tuple from `in`.
std::vector<Tuple> parse_tuples(std::istream& in, const IngestConfig& cfg, ModeDictionary& dicts);

struct TimeAxis {
  double t0 = 0.0;
  double stride = 1.0;
};

/// Round to 12 significant digits.
double round_significant(double value);

/// One JSON object (no trailing newline) describing a step: schema, step index,
/// bin and source-time range, and per block its raw ids per mode, mass, size, density.
std::string emit_step_output(const StepOutput& out, const ModeDictionary& dicts,
                             const std::vector<std::string>& mode_names, const TimeAxis& axis);

/// A step line read back: per block, raw values per mode (time bins as decimal strings).
struct StepRecord {
  std::uint64_t step = 0;
  std::int64_t bin_begin = 0;
  std::int64_t bin_end = 0;
  struct BlockRecord {
    double mass = 0.0;
    std::size_t size = 0;
    double density = 0.0;
    std::vector<std::string> mode_names;
    std::vector<std::vector<std::string>> values;
  };
  std::vector<BlockRecord> blocks;
};

/// Parses a line produced by emit_step_output. Throws ConfigError on schema mismatch.
StepRecord parse_step_line(std::string_view line);

}  // namespace augsplice
