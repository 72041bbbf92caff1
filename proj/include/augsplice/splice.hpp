#pragma once

// Splicing of two dense blocks.
//
// Moving a sub-block E out of B2 into B1 raises g(B1) exactly when
//
//     M(E) > Q * g(B1),   Q = sum_n |I_n(E) \ I_n(B1)|,
//
// i.e. when E carries more mass than the new indices it brings would dilute.
// splice_pair applies that test greedily: it first fixes the modes q in which
// B1 and B2 share no id (each candidate must bring one new id per such mode),
// then merges candidates in order of decreasing mass while they still pass the
// test. When every mode already overlaps, common-id entries move over for free
// and the single best one-new-id candidate is tried.

#include <cstddef>
#include <functional>
#include <queue>
#include <vector>

#include "augsplice/tensor.hpp"

namespace augsplice {

/// True iff candidate_mass > q_total * g1 (strict), evaluated without division.
bool splice_condition(double candidate_mass, std::size_t q_total, Density g1);

/// Floating-point convenience overload; prefer the Density form for exact ties.
bool splice_condition(double candidate_mass, std::size_t q_total, double g1);

struct SpliceModesReport {
  /// Modes with no id common to B1 and B2, ascending.
  std::vector<std::size_t> q_modes;

  std::size_t q_size() const { return q_modes.size(); }
};

SpliceModesReport required_new_modes(const Block& b1, const Block& b2);

struct CandidateMerge {
  Block block;
  /// r_n: ids of `block` in mode n that B1 does not have.
  std::vector<std::size_t> new_index_counts;
  std::size_t q_total = 0;
  /// The chosen new id for each q mode, in q-mode order.
  std::vector<Id> new_ids;
};

/// Max-heap by mass; equal masses pop the lexicographically smallest new-id tuple first.
class MergeHeap {
 public:
  void push(CandidateMerge candidate);
  const CandidateMerge& top() const { return heap_.top(); }
  CandidateMerge pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Order {
    bool operator()(const CandidateMerge& a, const CandidateMerge& b) const;
  };
  std::priority_queue<CandidateMerge, std::vector<CandidateMerge>, Order> heap_;
};

/// One candidate per combination of new q-mode ids that has positive mass:
/// the entries of B2 with those ids on q modes and B1-known ids elsewhere.
/// Candidates failing the condition against the current g(B1) are still included.
MergeHeap enumerate_candidates(const Block& b1, const Block& b2, const SpliceModesReport& report);

struct MergeEvent {
  enum class Kind { QCandidate, CommonEntries, SingleNewId };
  Kind kind = Kind::QCandidate;
  double merged_mass = 0.0;
  std::size_t merged_nnz = 0;
  std::size_t q_total = 0;
  Density before;
  Density after;
};

struct SpliceOptions {
  /// Called after every individual merge into B1.
  std::function<void(const MergeEvent&)> on_merge;
};

struct SpliceResult {
  Block dense;
  Block residual;
  std::size_t merges = 0;
};

/// Requires g(b1) >= g(b2) unless b2 is empty. Returns (B1', B2') with
/// g(B1') >= g(b1) and M(B1') + M(B2') == M(b1) + M(b2).
/// Throws ShapeMismatch, PreconditionViolated, or DegenerateBlock for an empty b1
/// paired with a non-empty b2.
SpliceResult splice_pair(const Block& b1, const Block& b2, const SpliceOptions& options = {});

struct EmptyQResult {
  Block dense;
  Block residual;
  bool progressed = false;
};

/// The all-modes-overlap step: move common-id entries of B2 into B1, then merge
/// the maximum-mass single-new-id candidate if it passes the condition.
/// `progressed` reports only the second merge. Throws PreconditionViolated if
/// some mode has no common id.
EmptyQResult empty_q_step(const Block& b1, const Block& b2, const SpliceOptions& options = {});

}  // namespace augsplice
