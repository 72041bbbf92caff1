#pragma once

// Test-only oracles. Nothing here calls into the splicing or peeling code paths
// it is used to check.

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "augsplice/tensor.hpp"

namespace augsplice::testing {

inline Key key_of(std::initializer_list<Id> ids) {
  Key k{};
  std::size_t i = 0;
  for (Id id : ids) k[i++] = id;
  return k;
}

struct Cell {
  std::vector<Id> ids;
  std::int64_t value;
};

inline Block make_block(std::size_t n_modes, const std::vector<Cell>& cells) {
  std::vector<Entry> entries;
  for (const auto& c : cells) {
    Entry e;
    for (std::size_t m = 0; m < c.ids.size(); ++m) e.key[m] = c.ids[m];
    e.value = static_cast<double>(c.value);
    entries.push_back(e);
  }
  return Block::from_entries(n_modes, std::move(entries));
}

/// Integer mass and size pair compared by cross-multiplication in 128 bits.
struct Ratio {
  std::int64_t mass = 0;
  std::int64_t size = 1;

  friend bool operator<(const Ratio& a, const Ratio& b) {
    return static_cast<__int128>(a.mass) * b.size < static_cast<__int128>(b.mass) * a.size;
  }
  friend bool operator>(const Ratio& a, const Ratio& b) { return b < a; }
  friend bool operator==(const Ratio& a, const Ratio& b) {
    return static_cast<__int128>(a.mass) * b.size == static_cast<__int128>(b.mass) * a.size;
  }
  double value() const { return static_cast<double>(mass) / static_cast<double>(size); }
};

/// Integer mass of a block whose values are integral.
inline std::int64_t int_mass(const Block& b) {
  std::int64_t total = 0;
  for (const auto& e : b.entries()) total += static_cast<std::int64_t>(e.value);
  return total;
}

/// Distinct ids per mode counted from scratch.
inline std::int64_t int_size(const Block& b) {
  std::int64_t total = 0;
  for (std::size_t m = 0; m < b.n_modes(); ++m) {
    std::set<Id> ids;
    for (const auto& e : b.entries()) ids.insert(e.key[m]);
    total += static_cast<std::int64_t>(ids.size());
  }
  return total;
}

inline Ratio ratio_of(const Block& b) { return Ratio{int_mass(b), int_size(b)}; }

/// Densest block of a tiny tensor by enumerating every non-empty index subset per mode.
/// Size counts the chosen ids, so unsupported ids only lower a candidate's density.
inline Ratio brute_force_densest(const Block& tensor) {
  const std::size_t n = tensor.n_modes();
  std::vector<std::vector<Id>> ids(n);
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t pos = 0; pos < tensor.index_set(m).size(); ++pos) ids[m].push_back(tensor.index_set(m)[pos]);
  }
  Ratio best{0, 1};
  std::vector<std::uint32_t> mask(n, 1);
  while (true) {
    std::int64_t size = 0;
    for (std::size_t m = 0; m < n; ++m) size += __builtin_popcount(mask[m]);
    std::int64_t mass = 0;
    for (const auto& e : tensor.entries()) {
      bool inside = true;
      for (std::size_t m = 0; m < n && inside; ++m) {
        const auto pos = static_cast<std::size_t>(std::lower_bound(ids[m].begin(), ids[m].end(), e.key[m]) - ids[m].begin());
        inside = (mask[m] >> pos) & 1U;
      }
      if (inside) mass += static_cast<std::int64_t>(e.value);
    }
    if (Ratio{mass, size} > best) best = Ratio{mass, size};
    std::size_t m = 0;
    while (m < n) {
      if (++mask[m] < (1U << ids[m].size())) break;
      mask[m] = 1;
      ++m;
    }
    if (m == n) break;
  }
  return best;
}

/// Random block with integer values over small id ranges.
inline Block random_block(std::mt19937_64& rng, std::size_t n_modes, std::size_t max_nnz, Id id_range,
                          std::int64_t max_value, Id id_offset = 0) {
  std::uniform_int_distribution<std::size_t> count(1, max_nnz);
  std::uniform_int_distribution<Id> id(0, id_range - 1);
  std::uniform_int_distribution<std::int64_t> value(1, max_value);
  std::vector<Entry> entries;
  const auto nnz = count(rng);
  for (std::size_t i = 0; i < nnz; ++i) {
    Entry e;
    for (std::size_t m = 0; m < n_modes; ++m) e.key[m] = id(rng) + id_offset;
    e.value = static_cast<double>(value(rng));
    entries.push_back(e);
  }
  return Block::from_entries(n_modes, std::move(entries));
}

/// `b` without the cells that `other` also has.
inline Block without_cells_of(const Block& b, const Block& other) {
  std::vector<Entry> kept;
  for (const auto& e : b.entries()) {
    if (!other.value_at(e.key)) kept.push_back(e);
  }
  return Block::from_entries(b.n_modes(), std::move(kept));
}

/// Ids of `e` absent from `b1`, summed over modes, counted from scratch.
inline std::int64_t new_id_count(const Block& b1, const Block& e) {
  std::int64_t q = 0;
  for (std::size_t m = 0; m < b1.n_modes(); ++m) {
    std::set<Id> known(b1.index_set(m).begin(), b1.index_set(m).end());
    std::set<Id> fresh;
    for (const auto& entry : e.entries()) {
      if (!known.contains(entry.key[m])) fresh.insert(entry.key[m]);
    }
    q += static_cast<std::int64_t>(fresh.size());
  }
  return q;
}

/// A cell-disjoint pair with g(first) >= g(second), both non-empty. Modes are
/// shifted apart at random so that every q size occurs.
inline std::pair<Block, Block> random_pair(std::mt19937_64& rng, std::size_t n_modes, std::size_t max_nnz,
                                           Id id_range, std::int64_t max_value) {
  std::bernoulli_distribution shift(0.25);
  while (true) {
    Block a = random_block(rng, n_modes, max_nnz, id_range, max_value);
    Block b = random_block(rng, n_modes, max_nnz, id_range, max_value);
    std::vector<Entry> moved(b.entries().begin(), b.entries().end());
    for (std::size_t m = 0; m < n_modes; ++m) {
      if (!shift(rng)) continue;
      for (auto& e : moved) e.key[m] += id_range;
    }
    b = without_cells_of(Block::from_entries(n_modes, std::move(moved)), a);
    if (b.empty()) continue;
    if (ratio_of(a) < ratio_of(b)) std::swap(a, b);
    return {std::move(a), std::move(b)};
  }
}

/// Every sub-block of `b2` that takes exactly one new id (w.r.t. `b1`) in each
/// mode of `q` and only `b1`-known ids elsewhere, keyed by the new-id tuple.
/// When q is empty this lists the common-id block and every single-new-id
/// block, tagged with its Q.
struct FamilyMember {
  std::int64_t mass = 0;
  std::int64_t q = 0;
};

inline std::vector<FamilyMember> candidate_family(const Block& b1, const Block& b2) {
  const std::size_t n = b1.n_modes();
  auto known = [&](std::size_t m, Id id) {
    const auto ids = b1.index_set(m);
    return std::find(ids.begin(), ids.end(), id) != ids.end();
  };
  std::vector<std::size_t> q;
  for (std::size_t m = 0; m < n; ++m) {
    bool shared = false;
    for (Id id : b2.index_set(m)) shared = shared || known(m, id);
    if (!shared) q.push_back(m);
  }
  std::vector<FamilyMember> family;
  if (!q.empty()) {
    std::map<std::vector<Id>, std::int64_t> groups;
    for (const auto& e : b2.entries()) {
      bool ok = true;
      for (std::size_t m = 0; m < n && ok; ++m) {
        if (std::find(q.begin(), q.end(), m) == q.end()) ok = known(m, e.key[m]);
      }
      if (!ok) continue;
      std::vector<Id> tuple;
      for (auto m : q) tuple.push_back(e.key[m]);
      groups[tuple] += static_cast<std::int64_t>(e.value);
    }
    for (const auto& [tuple, mass] : groups) family.push_back({mass, static_cast<std::int64_t>(q.size())});
    return family;
  }
  std::int64_t common = 0;
  std::map<std::pair<std::size_t, Id>, std::int64_t> singles;
  for (const auto& e : b2.entries()) {
    std::vector<std::size_t> unknown;
    for (std::size_t m = 0; m < n; ++m) {
      if (!known(m, e.key[m])) unknown.push_back(m);
    }
    if (unknown.empty()) common += static_cast<std::int64_t>(e.value);
    if (unknown.size() == 1) singles[{unknown[0], e.key[unknown[0]]}] += static_cast<std::int64_t>(e.value);
  }
  if (common > 0) family.push_back({common, 0});
  for (const auto& [where, mass] : singles) family.push_back({mass, 1});
  return family;
}

}  // namespace augsplice::testing
