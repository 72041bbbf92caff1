#include "augsplice/splice.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <queue>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "augsplice/errors.hpp"

namespace augsplice {

bool splice_condition(double candidate_mass, std::size_t q_total, Density g1) {
  // M(E) > Q * M1 / S1  <=>  M(E) * S1 > Q * M1
  return candidate_mass * static_cast<double>(g1.size) > static_cast<double>(q_total) * g1.mass;
}

bool splice_condition(double candidate_mass, std::size_t q_total, double g1) {
  return candidate_mass > static_cast<double>(q_total) * g1;
}

bool MergeHeap::Order::operator()(const CandidateMerge& a, const CandidateMerge& b) const {
  if (a.block.mass() != b.block.mass()) return a.block.mass() < b.block.mass();
  return a.new_ids > b.new_ids;
}

void MergeHeap::push(CandidateMerge candidate) { heap_.push(std::move(candidate)); }

CandidateMerge MergeHeap::pop() {
  CandidateMerge top = heap_.top();
  heap_.pop();
  return top;
}

namespace {

using EntryRefs = std::vector<std::uint32_t>;
using ModeMask = std::uint32_t;

/// Mutable working copy of a (B1, B2) pair. Ids are addressed by their position
/// in B2's sorted index sets; `known_` marks the positions B1 already holds.
/// Each live B2 entry carries the mask of modes whose id B1 lacks. Masks,
/// per-mode shared counts and single-new-id masses are updated as B1 learns
/// ids, so a pass never rescans all of B2.
class SpliceState {
 public:
  SpliceState(const Block& b1, const Block& b2, const SpliceOptions& options)
      : n_(b1.n_modes()),
        b1_(b1),
        b2_(b2),
        options_(options),
        b1_mass_(b1.mass()),
        b1_size_(b1.size()),
        entries_(b2.entries()),
        alive_(entries_.size(), 1),
        alive_count_(entries_.size()),
        pos_(b2.index_positions()),
        mask_(entries_.size(), 0),
        known_(n_),
        shared_(n_, 0),
        single_mass_(n_),
        single_count_(n_) {
    for (std::size_t m = 0; m < n_; ++m) {
      const auto ids2 = b2.index_set(m);
      known_[m] = mark_known(b1.index_set(m), ids2);
      single_mass_[m].assign(ids2.size(), 0.0);
      single_count_[m].assign(ids2.size(), 0);
    }
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      ModeMask mask = 0;
      for (std::size_t m = 0; m < n_; ++m) {
        if (known_[m][pos_[e * n_ + m]]) {
          ++shared_[m];
        } else {
          mask |= ModeMask{1} << m;
        }
      }
      mask_[e] = mask;
      if (mask == 0) common_.push_back(static_cast<std::uint32_t>(e));
      if (std::has_single_bit(mask)) add_single(e, +1);
    }
  }

  Density b1_density() const { return Density{b1_mass_, b1_size_}; }
  std::size_t merges() const { return merges_; }
  bool b2_empty() const { return alive_count_ == 0; }

  std::vector<std::size_t> q_modes() const {
    std::vector<std::size_t> q;
    for (std::size_t m = 0; m < n_; ++m) {
      if (shared_[m] == 0) q.push_back(m);
    }
    return q;
  }

  /// Groups live B2 entries that agree with B1 off the q modes by their q-mode ids.
  std::map<std::vector<Id>, EntryRefs> candidate_groups(const std::vector<std::size_t>& q) const {
    ModeMask q_mask = 0;
    for (auto m : q) q_mask |= ModeMask{1} << m;
    std::map<std::vector<Id>, EntryRefs> groups;
    std::vector<Id> tuple(q.size());
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      if (!alive_[e] || (mask_[e] & ~q_mask) != 0) continue;
      const Key& key = entries_[e].key;
      for (std::size_t i = 0; i < q.size(); ++i) tuple[i] = key[q[i]];
      groups[tuple].push_back(static_cast<std::uint32_t>(e));
    }
    return groups;
  }

  double live_mass(const EntryRefs& refs) const {
    double total = 0.0;
    for (auto e : refs) {
      if (alive_[e]) total += entries_[e].value;
    }
    return total;
  }

  /// Per-mode count of distinct ids in `refs` that B1 lacks.
  std::vector<std::size_t> new_index_counts(const EntryRefs& refs) const {
    std::vector<std::size_t> counts(n_, 0);
    std::vector<Id> fresh;
    for (std::size_t m = 0; m < n_; ++m) {
      fresh.clear();
      for (auto e : refs) {
        if (mask_[e] & (ModeMask{1} << m)) fresh.push_back(entries_[e].key[m]);
      }
      std::sort(fresh.begin(), fresh.end());
      counts[m] = static_cast<std::size_t>(std::unique(fresh.begin(), fresh.end()) - fresh.begin());
    }
    return counts;
  }

  std::size_t new_index_total(const EntryRefs& refs) const {
    const auto counts = new_index_counts(refs);
    std::size_t total = 0;
    for (auto c : counts) total += c;
    return total;
  }

  void merge(const EntryRefs& refs, MergeEvent::Kind kind, std::size_t q_total) {
    MergeEvent event;
    event.kind = kind;
    event.q_total = q_total;
    event.before = b1_density();
    for (auto e : refs) {
      if (!alive_[e]) continue;
      const ModeMask fresh = mask_[e];
      retire(e);
      added_.push_back(static_cast<std::uint32_t>(e));
      b1_mass_ += entries_[e].value;
      event.merged_mass += entries_[e].value;
      ++event.merged_nnz;
      for (std::size_t m = 0; m < n_; ++m) {
        if (fresh & (ModeMask{1} << m)) learn(m, pos_[e * n_ + m]);
      }
    }
    event.after = b1_density();
    ++merges_;
    if (options_.on_merge) options_.on_merge(event);
  }

  /// One heap pass for a non-empty q. Returns whether anything merged.
  bool q_pass(const std::vector<std::size_t>& q) {
    struct Item {
      double mass;
      std::vector<Id> tuple;
      EntryRefs refs;
    };
    auto order = [](const Item& a, const Item& b) {
      if (a.mass != b.mass) return a.mass < b.mass;
      return a.tuple > b.tuple;
    };
    std::priority_queue<Item, std::vector<Item>, decltype(order)> heap(order);
    for (auto& [tuple, refs] : candidate_groups(q)) {
      const double mass = live_mass(refs);
      if (mass > 0.0) heap.push(Item{mass, tuple, std::move(refs)});
    }
    bool merged = false;
    while (!heap.empty()) {
      Item top = heap.top();
      heap.pop();
      // Re-validate against the current B2 and B1 rather than trusting heap-build values.
      const double mass = live_mass(top.refs);
      if (mass <= 0.0) continue;
      if (mass != top.mass) {
        top.mass = mass;
        heap.push(std::move(top));
        continue;
      }
      const std::size_t q_now = new_index_total(top.refs);
      if (!splice_condition(mass, q_now, b1_density())) break;
      merge(top.refs, MergeEvent::Kind::QCandidate, q_now);
      merged = true;
    }
    return merged;
  }

  struct EmptyQOutcome {
    bool moved_common = false;
    bool progressed = false;
  };

  /// One round of the empty-q procedure: move every all-common-id entry, then
  /// merge the heaviest single-new-id block if it passes with Q = 1.
  EmptyQOutcome empty_q_pass() {
    EmptyQOutcome outcome;
    EntryRefs common;
    for (auto e : common_) {
      if (alive_[e]) common.push_back(e);
    }
    common_.clear();
    if (!common.empty()) {
      std::sort(common.begin(), common.end());
      merge(common, MergeEvent::Kind::CommonEntries, 0);
      outcome.moved_common = true;
    }
    if (singles_order_.empty()) return outcome;
    const auto [neg_mass, mode, pos] = *singles_order_.begin();
    build_index();
    EntryRefs refs;
    for (auto i = offsets_[mode][pos]; i < offsets_[mode][pos + 1]; ++i) {
      const auto e = holders_[mode][i];
      if (alive_[e] && mask_[e] == (ModeMask{1} << mode)) refs.push_back(e);
    }
    const double mass = live_mass(refs);
    if (mass > 0.0 && splice_condition(mass, 1, b1_density())) {
      merge(refs, MergeEvent::Kind::SingleNewId, 1);
      outcome.progressed = true;
    }
    return outcome;
  }

  Block dense() const {
    if (added_.empty()) return b1_;
    std::vector<char> moved(entries_.size(), 0);
    for (auto e : added_) moved[e] = 1;
    return b1_.union_with(b2_.select(moved));
  }

  Block residual() const { return b2_.select(alive_); }

 private:
  using SingleKey = std::tuple<double, std::size_t, std::uint32_t>;  // (-mass, mode, position)

  /// Flags each id of `ids2` that also occurs in `ids1`; both sorted.
  static std::vector<char> mark_known(std::span<const Id> ids1, std::span<const Id> ids2) {
    std::vector<char> known(ids2.size(), 0);
    if (ids2.size() * 8 < ids1.size()) {
      for (std::size_t i = 0; i < ids2.size(); ++i) known[i] = std::binary_search(ids1.begin(), ids1.end(), ids2[i]);
      return known;
    }
    auto a = ids1.begin();
    for (std::size_t i = 0; i < ids2.size(); ++i) {
      while (a != ids1.end() && *a < ids2[i]) ++a;
      known[i] = a != ids1.end() && *a == ids2[i];
    }
    return known;
  }

  /// Adds (sign=+1) or removes (sign=-1) entry `e` from its single-new-id group.
  void add_single(std::size_t e, int sign) {
    const auto mode = static_cast<std::size_t>(std::countr_zero(mask_[e]));
    const auto pos = pos_[e * n_ + mode];
    auto& mass = single_mass_[mode][pos];
    auto& count = single_count_[mode][pos];
    if (count > 0) singles_order_.erase(SingleKey{-mass, mode, pos});
    mass += sign * entries_[e].value;
    count += sign;
    if (count > 0) {
      singles_order_.insert(SingleKey{-mass, mode, pos});
    } else {
      mass = 0.0;
    }
  }

  void retire(std::size_t e) {
    alive_[e] = 0;
    --alive_count_;
    for (std::size_t m = 0; m < n_; ++m) {
      if (!(mask_[e] & (ModeMask{1} << m))) --shared_[m];
    }
    if (std::has_single_bit(mask_[e])) add_single(e, -1);
  }

  /// Per mode, the entries holding each index position (CSR), built on first use.
  void build_index() {
    if (!offsets_.empty()) return;
    offsets_.resize(n_);
    holders_.resize(n_);
    for (std::size_t m = 0; m < n_; ++m) {
      auto& offsets = offsets_[m];
      offsets.assign(known_[m].size() + 1, 0);
      for (std::size_t e = 0; e < entries_.size(); ++e) ++offsets[pos_[e * n_ + m] + 1];
      for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
      auto fill = offsets;
      holders_[m].resize(entries_.size());
      for (std::size_t e = 0; e < entries_.size(); ++e) {
        holders_[m][fill[pos_[e * n_ + m]]++] = static_cast<std::uint32_t>(e);
      }
    }
  }

  /// B1 gained the id at `pos` in `mode`: clear that bit on every live B2 entry holding it.
  void learn(std::size_t mode, std::uint32_t pos) {
    if (known_[mode][pos]) return;
    known_[mode][pos] = 1;
    ++b1_size_;
    build_index();
    for (auto i = offsets_[mode][pos]; i < offsets_[mode][pos + 1]; ++i) {
      const auto e = holders_[mode][i];
      if (!alive_[e]) continue;
      if (std::has_single_bit(mask_[e])) add_single(e, -1);
      mask_[e] &= ~(ModeMask{1} << mode);
      ++shared_[mode];
      if (mask_[e] == 0) common_.push_back(e);
      if (std::has_single_bit(mask_[e])) add_single(e, +1);
    }
  }

  std::size_t n_;
  const Block& b1_;
  const Block& b2_;
  const SpliceOptions& options_;
  double b1_mass_;
  std::size_t b1_size_;
  std::span<const Entry> entries_;
  std::vector<char> alive_;
  std::size_t alive_count_;
  std::span<const std::uint32_t> pos_;
  std::vector<ModeMask> mask_;
  std::vector<std::vector<char>> known_;
  std::vector<std::size_t> shared_;
  std::vector<std::vector<double>> single_mass_;
  std::vector<std::vector<std::int64_t>> single_count_;
  std::set<SingleKey> singles_order_;
  std::vector<std::vector<std::uint32_t>> offsets_;
  std::vector<std::vector<std::uint32_t>> holders_;
  EntryRefs common_;
  EntryRefs added_;
  std::size_t merges_ = 0;
};

void check_shapes(const Block& b1, const Block& b2) {
  if (b1.n_modes() != b2.n_modes()) throw ShapeMismatch("splicing blocks with different mode counts");
}

}  // namespace

SpliceModesReport required_new_modes(const Block& b1, const Block& b2) {
  check_shapes(b1, b2);
  SpliceModesReport report;
  for (std::size_t m = 0; m < b1.n_modes(); ++m) {
    const auto a = b1.index_set(m);
    const auto b = b2.index_set(m);
    std::vector<Id> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    if (common.empty()) report.q_modes.push_back(m);
  }
  return report;
}

MergeHeap enumerate_candidates(const Block& b1, const Block& b2, const SpliceModesReport& report) {
  check_shapes(b1, b2);
  const SpliceOptions no_options;
  SpliceState state(b1, b2, no_options);
  MergeHeap heap;
  const auto entries = b2.entries();
  for (const auto& [tuple, refs] : state.candidate_groups(report.q_modes)) {
    if (state.live_mass(refs) <= 0.0) continue;
    CandidateMerge candidate;
    std::vector<Entry> picked;
    picked.reserve(refs.size());
    for (auto e : refs) picked.push_back(entries[e]);
    candidate.block = Block::from_entries(b2.n_modes(), std::move(picked));
    candidate.new_index_counts = state.new_index_counts(refs);
    for (auto c : candidate.new_index_counts) candidate.q_total += c;
    candidate.new_ids = tuple;
    heap.push(std::move(candidate));
  }
  return heap;
}

SpliceResult splice_pair(const Block& b1, const Block& b2, const SpliceOptions& options) {
  check_shapes(b1, b2);
  if (b2.empty()) return SpliceResult{b1, b2, 0};
  if (b1.size() == 0) throw DegenerateBlock("splicing into an empty block");
  if (b1.density() < b2.density()) throw PreconditionViolated("splice_pair requires g(b1) >= g(b2)");

  // With a non-empty q every candidate adds exactly |q| ids, so if all of B2
  // cannot pass, no candidate can.
  const auto q0 = required_new_modes(b1, b2).q_size();
  if (q0 > 0 && !splice_condition(b2.mass(), q0, b1.density())) return SpliceResult{b1, b2, 0};

  SpliceState state(b1, b2, options);
  while (!state.b2_empty()) {
    const auto q = state.q_modes();
    bool updated = false;
    if (q.empty()) {
      const auto outcome = state.empty_q_pass();
      updated = outcome.moved_common || outcome.progressed;
    } else {
      updated = state.q_pass(q);
    }
    if (!updated) break;
  }
  if (state.merges() == 0) return SpliceResult{b1, b2, 0};
  return SpliceResult{state.dense(), state.residual(), state.merges()};
}

EmptyQResult empty_q_step(const Block& b1, const Block& b2, const SpliceOptions& options) {
  check_shapes(b1, b2);
  if (b2.empty()) return EmptyQResult{b1, b2, false};
  if (!required_new_modes(b1, b2).q_modes.empty()) {
    throw PreconditionViolated("empty_q_step requires a common id in every mode");
  }
  SpliceState state(b1, b2, options);
  const auto outcome = state.empty_q_pass();
  if (state.merges() == 0) return EmptyQResult{b1, b2, false};
  return EmptyQResult{state.dense(), state.residual(), outcome.progressed};
}

}  // namespace augsplice
