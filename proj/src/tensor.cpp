#include "augsplice/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "augsplice/errors.hpp"

namespace augsplice {

std::size_t KeyHash::operator()(const Key& key) const noexcept {
  // 64-bit FNV-1a over the id words.
  std::uint64_t h = 1469598103934665603ULL;
  for (Id id : key) {
    h ^= id;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h ^ (h >> 32));
}

namespace {

void check_modes(std::size_t n_modes) {
  if (n_modes == 0 || n_modes > kMaxModes) {
    throw ShapeMismatch("mode count " + std::to_string(n_modes) + " outside [1, " +
                        std::to_string(kMaxModes) + "]");
  }
}

bool key_less(const Entry& a, const Entry& b) { return a.key < b.key; }

}  // namespace

Block::Block(std::size_t n_modes) : n_modes_(n_modes), index_sets_(n_modes) {
  check_modes(n_modes);
}

Block::Block(std::size_t n_modes, std::vector<Entry> sorted_entries, SortedTag)
    : n_modes_(n_modes), entries_(std::move(sorted_entries)) {
  rebuild_caches();
}

Block::Block(std::size_t n_modes, std::vector<Entry> sorted_entries, std::vector<std::vector<Id>> index_sets,
             std::vector<std::uint32_t> positions, IndexedTag)
    : n_modes_(n_modes),
      entries_(std::move(sorted_entries)),
      index_sets_(std::move(index_sets)),
      positions_(std::move(positions)) {
  sum_caches();
}

Block Block::from_entries(std::size_t n_modes, std::vector<Entry> entries) {
  check_modes(n_modes);
  for (const Entry& e : entries) {
    if (!std::isfinite(e.value) || e.value < 0.0) {
      throw InvalidValue("entry value must be finite and non-negative");
    }
    for (std::size_t m = n_modes; m < kMaxModes; ++m) {
      if (e.key[m] != 0) throw ShapeMismatch("key has ids beyond the block's mode count");
    }
  }
  if (!std::is_sorted(entries.begin(), entries.end(), key_less)) {
    std::stable_sort(entries.begin(), entries.end(), key_less);
  }
  std::vector<Entry> merged;
  merged.reserve(entries.size());
  for (const Entry& e : entries) {
    if (!merged.empty() && merged.back().key == e.key) {
      merged.back().value += e.value;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const Entry& e) { return e.value == 0.0; });
  return Block(n_modes, std::move(merged), SortedTag{});
}

void Block::rebuild_caches() {
  index_sets_.assign(n_modes_, {});
  for (auto& ids : index_sets_) ids.reserve(entries_.size());
  for (const Entry& e : entries_) {
    for (std::size_t m = 0; m < n_modes_; ++m) index_sets_[m].push_back(e.key[m]);
  }
  for (auto& ids : index_sets_) {
    if (!std::is_sorted(ids.begin(), ids.end())) std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    ids.shrink_to_fit();
  }
  positions_.resize(entries_.size() * n_modes_);
  for (std::size_t m = 0; m < n_modes_; ++m) {
    const auto& ids = index_sets_[m];
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      positions_[e * n_modes_ + m] =
          static_cast<std::uint32_t>(std::lower_bound(ids.begin(), ids.end(), entries_[e].key[m]) - ids.begin());
    }
  }
  sum_caches();
}

void Block::sum_caches() {
  mass_ = 0.0;
  for (const Entry& e : entries_) mass_ += e.value;
  size_ = 0;
  for (const auto& ids : index_sets_) size_ += ids.size();
}

Density Block::density() const {
  if (size_ == 0) throw DegenerateBlock("density of a block with no indices is undefined");
  return Density{mass_, size_};
}

std::span<const Id> Block::index_set(std::size_t mode) const {
  if (mode >= n_modes_) throw ShapeMismatch("mode out of range");
  return index_sets_[mode];
}

bool Block::contains_id(std::size_t mode, Id id) const {
  const auto ids = index_set(mode);
  return std::binary_search(ids.begin(), ids.end(), id);
}

std::optional<double> Block::value_at(const Key& key) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), Entry{key, 0.0}, key_less);
  if (it == entries_.end() || it->key != key) return std::nullopt;
  return it->value;
}

Block Block::union_with(const Block& addition) const {
  if (addition.n_modes_ != n_modes_) throw ShapeMismatch("union of blocks with different mode counts");
  const std::size_t n = n_modes_;
  // Merge index sets, remembering where each side's positions land.
  std::vector<std::vector<Id>> sets(n);
  std::vector<std::vector<std::uint32_t>> remap_a(n), remap_b(n);
  for (std::size_t m = 0; m < n; ++m) {
    const auto& ia = index_sets_[m];
    const auto& ib = addition.index_sets_[m];
    auto& out = sets[m];
    out.reserve(ia.size() + ib.size());
    remap_a[m].resize(ia.size());
    remap_b[m].resize(ib.size());
    std::size_t i = 0, j = 0;
    while (i < ia.size() || j < ib.size()) {
      const auto at = static_cast<std::uint32_t>(out.size());
      if (j == ib.size() || (i < ia.size() && ia[i] < ib[j])) {
        remap_a[m][i] = at;
        out.push_back(ia[i++]);
      } else if (i == ia.size() || ib[j] < ia[i]) {
        remap_b[m][j] = at;
        out.push_back(ib[j++]);
      } else {
        remap_a[m][i++] = at;
        remap_b[m][j] = at;
        out.push_back(ib[j++]);
      }
    }
  }
  std::vector<Entry> out;
  std::vector<std::uint32_t> positions;
  out.reserve(entries_.size() + addition.entries_.size());
  positions.reserve((entries_.size() + addition.entries_.size()) * n);
  auto place = [&](const std::vector<std::vector<std::uint32_t>>& remap, const std::vector<std::uint32_t>& pos,
                   std::size_t e) {
    for (std::size_t m = 0; m < n; ++m) positions.push_back(remap[m][pos[e * n + m]]);
  };
  std::size_t a = 0, b = 0;
  const auto& ea = entries_;
  const auto& eb = addition.entries_;
  while (a < ea.size() || b < eb.size()) {
    if (b == eb.size() || (a < ea.size() && ea[a].key < eb[b].key)) {
      out.push_back(ea[a]);
      place(remap_a, positions_, a++);
    } else if (a == ea.size() || eb[b].key < ea[a].key) {
      out.push_back(eb[b]);
      place(remap_b, addition.positions_, b++);
    } else {
      out.push_back(Entry{ea[a].key, ea[a].value + eb[b].value});
      place(remap_a, positions_, a++);
      ++b;
    }
  }
  return Block(n, std::move(out), std::move(sets), std::move(positions), IndexedTag{});
}

Block Block::select(std::span<const char> keep) const {
  if (keep.size() != entries_.size()) throw ShapeMismatch("select needs one flag per entry");
  const std::size_t n = n_modes_;
  std::vector<std::vector<std::uint32_t>> remap(n);
  for (std::size_t m = 0; m < n; ++m) remap[m].assign(index_sets_[m].size(), 0);
  std::size_t kept = 0;
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    if (!keep[e]) continue;
    ++kept;
    for (std::size_t m = 0; m < n; ++m) remap[m][positions_[e * n + m]] = 1;
  }
  std::vector<std::vector<Id>> sets(n);
  for (std::size_t m = 0; m < n; ++m) {
    std::uint32_t next = 0;
    for (std::size_t pos = 0; pos < remap[m].size(); ++pos) {
      if (remap[m][pos]) {
        sets[m].push_back(index_sets_[m][pos]);
        remap[m][pos] = next++;
      }
    }
  }
  std::vector<Entry> out;
  std::vector<std::uint32_t> positions;
  out.reserve(kept);
  positions.reserve(kept * n);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    if (!keep[e]) continue;
    out.push_back(entries_[e]);
    for (std::size_t m = 0; m < n; ++m) positions.push_back(remap[m][positions_[e * n + m]]);
  }
  return Block(n, std::move(out), std::move(sets), std::move(positions), IndexedTag{});
}

Block Block::subtract(const Block& removal) const {
  if (removal.n_modes_ != n_modes_) throw ShapeMismatch("subtracting a block with a different mode count");
  std::vector<Entry> out;
  out.reserve(entries_.size());
  auto a = entries_.begin();
  for (const Entry& r : removal.entries_) {
    while (a != entries_.end() && a->key < r.key) out.push_back(*a++);
    if (a == entries_.end() || a->key != r.key) throw NotASubblock("removal entry not present");
    if (r.value > a->value) throw NotASubblock("removal entry exceeds stored value");
    const double rest = a->value - r.value;
    if (rest > 0.0) out.push_back(Entry{a->key, rest});
    ++a;
  }
  out.insert(out.end(), a, entries_.end());
  return Block(n_modes_, std::move(out), SortedTag{});
}

TensorSlice TensorSlice::from_tuples(std::size_t n_modes, std::int64_t bin,
                                     std::span<const Tuple> tuples) {
  std::vector<Entry> entries;
  entries.reserve(tuples.size());
  for (const Tuple& t : tuples) {
    if (static_cast<std::int64_t>(t.key[n_modes - 1]) != bin) {
      throw ShapeMismatch("tuple time bin " + std::to_string(t.key[n_modes - 1]) +
                          " does not belong to slice bin " + std::to_string(bin));
    }
    entries.push_back(Entry{t.key, t.value});
  }
  return TensorSlice{Block::from_entries(n_modes, std::move(entries)), bin};
}

double recompute_mass(const Block& block) {
  double total = 0.0;
  for (const Entry& e : block.entries()) total += e.value;
  return total;
}

std::size_t recompute_size(const Block& block) {
  std::size_t total = 0;
  for (std::size_t m = 0; m < block.n_modes(); ++m) {
    std::vector<Id> ids;
    for (const Entry& e : block.entries()) ids.push_back(e.key[m]);
    std::sort(ids.begin(), ids.end());
    total += static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
  }
  return total;
}

}  // namespace augsplice
