#pragma once

// Sparse N-mode tensors and blocks with the arithmetic-average-mass algebra.
//
// A Block is a set of non-zero entries. Its per-mode index sets are exactly the
// ids that carry at least one entry, so S(B) never counts unsupported ids and
// M(B)/S(B) is never understated. Entries are kept sorted by key, which makes
// iteration order, serialization and every derived result deterministic.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace augsplice {

/// Dense per-mode identifier. The time mode stores the bin ordinal.
using Id = std::uint32_t;

inline constexpr std::size_t kMaxModes = 8;

/// Coordinates of one entry. Slots at or beyond the owning tensor's mode count are zero.
using Key = std::array<Id, kMaxModes>;

struct KeyHash {
  std::size_t operator()(const Key& key) const noexcept;
};

struct Entry {
  Key key{};
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// One time-stamped event after id mapping and time binning.
struct Tuple {
  Key key{};
  double value = 1.0;

  friend bool operator==(const Tuple&, const Tuple&) = default;
};

/// Exact ratio M/S. Comparisons cross-multiply so integer-valued masses compare
/// without rounding (exact while products stay below 2^53).
struct Density {
  double mass = 0.0;
  std::size_t size = 0;

  double value() const { return mass / static_cast<double>(size); }

  friend bool operator==(const Density& a, const Density& b) {
    return a.mass * static_cast<double>(b.size) == b.mass * static_cast<double>(a.size);
  }
  friend std::partial_ordering operator<=>(const Density& a, const Density& b) {
    return a.mass * static_cast<double>(b.size) <=> b.mass * static_cast<double>(a.size);
  }
};

class Block {
 public:
  Block() = default;
  explicit Block(std::size_t n_modes);

  /// Builds a block from unsorted entries. Duplicate keys accumulate; zero
  /// values are dropped. Throws InvalidValue on negative or non-finite values
  /// and ShapeMismatch if a key uses a slot beyond n_modes.
  static Block from_entries(std::size_t n_modes, std::vector<Entry> entries);

  std::size_t n_modes() const { return n_modes_; }
  double mass() const { return mass_; }
  std::size_t size() const { return size_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// M(B)/S(B). Throws DegenerateBlock when the block has no indices.
  Density density() const;

  std::span<const Entry> entries() const { return entries_; }
  std::span<const Id> index_set(std::size_t mode) const;
  /// Entry-major: element e * n_modes() + m is the position of entries()[e].key[m]
  /// within index_set(m).
  std::span<const std::uint32_t> index_positions() const { return positions_; }
  bool contains_id(std::size_t mode, Id id) const;
  std::optional<double> value_at(const Key& key) const;

  /// Per-mode union of index sets; colliding keys sum their values.
  Block union_with(const Block& addition) const;

  /// Sub-block of the entries whose flag in `keep` is non-zero; one flag per entry.
  Block select(std::span<const char> keep) const;

  /// Removes `removal` entry-wise. Vacated ids are pruned.
  /// Throws NotASubblock if any removal entry is absent or exceeds the stored value.
  Block subtract(const Block& removal) const;

  friend bool operator==(const Block& a, const Block& b) {
    return a.n_modes_ == b.n_modes_ && a.entries_ == b.entries_;
  }

 private:
  struct SortedTag {};
  Block(std::size_t n_modes, std::vector<Entry> sorted_entries, SortedTag);
  struct IndexedTag {};
  Block(std::size_t n_modes, std::vector<Entry> sorted_entries, std::vector<std::vector<Id>> index_sets,
        std::vector<std::uint32_t> positions, IndexedTag);

  void rebuild_caches();
  void sum_caches();

  std::size_t n_modes_ = 0;
  std::vector<Entry> entries_;
  std::vector<std::vector<Id>> index_sets_;
  std::vector<std::uint32_t> positions_;
  double mass_ = 0.0;
  std::size_t size_ = 0;
};

/// Sparse tensor for one stride window. The window is the bin `bin`, i.e.
/// source times in [t0 + bin*stride, t0 + (bin+1)*stride).
struct TensorSlice {
  Block data;
  std::int64_t bin = 0;

  std::size_t n_modes() const { return data.n_modes(); }

  /// Every tuple's last mode must equal `bin`; throws ShapeMismatch otherwise.
  static TensorSlice from_tuples(std::size_t n_modes, std::int64_t bin,
                                 std::span<const Tuple> tuples);
};

/// Recomputes mass from entries, ignoring the cache.
double recompute_mass(const Block& block);

/// Recomputes size from entries, ignoring the cache.
std::size_t recompute_size(const Block& block);

}  // namespace augsplice
