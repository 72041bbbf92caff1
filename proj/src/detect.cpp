#include "augsplice/detect.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <thread>

namespace augsplice {

namespace {

void tally_mode(const Block& block, std::size_t mode, std::vector<double>& out) {
  const std::size_t n = block.n_modes();
  const auto entries = block.entries();
  const auto positions = block.index_positions();
  out.assign(block.index_set(mode).size(), 0.0);
  for (std::size_t e = 0; e < entries.size(); ++e) out[positions[e * n + mode]] += entries[e].value;
}

struct HeapItem {
  double mass;
  std::uint32_t local;
  // min-heap on (mass, local)
  bool operator<(const HeapItem& other) const {
    if (mass != other.mass) return mass > other.mass;
    return local > other.local;
  }
};

constexpr int kNeverRemoved = std::numeric_limits<int>::max();

class Peeler {
 public:
  Peeler(const Block& block, std::size_t workers)
      : block_(block), n_(block.n_modes()), locals_(block.index_positions()) {
    nnz_ = block.nnz();
    mass_ = ModeMassIndex::of(block, workers).masses;
    alive_entry_.assign(nnz_, 1);
    lists_.resize(n_);
    offsets_.resize(n_);
    live_count_.resize(n_);
    removed_round_.resize(n_);
    heaps_.resize(n_);
    for (std::size_t m = 0; m < n_; ++m) {
      const auto ids = block.index_set(m);
      auto& offsets = offsets_[m];
      offsets.assign(ids.size() + 1, 0);
      for (std::size_t e = 0; e < nnz_; ++e) ++offsets[locals_[e * n_ + m] + 1];
      for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
      live_count_[m].assign(ids.size(), 0);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        live_count_[m][i] = offsets[i + 1] - offsets[i];
      }
      auto fill = offsets;
      lists_[m].resize(nnz_);
      for (std::size_t e = 0; e < nnz_; ++e) lists_[m][fill[locals_[e * n_ + m]]++] = static_cast<std::uint32_t>(e);
      removed_round_[m].assign(ids.size(), kNeverRemoved);
      std::vector<HeapItem> items;
      items.reserve(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) items.push_back({mass_[m][i], static_cast<std::uint32_t>(i)});
      heaps_[m] = std::priority_queue<HeapItem>(std::less<HeapItem>{}, std::move(items));
    }
    total_mass_ = block.mass();
    total_size_ = block.size();
  }

  /// Per-entry membership flags of the densest snapshot.
  std::vector<char> run() {
    Density best{total_mass_, total_size_};
    int best_round = 0;
    for (int round = 0; total_size_ > 0; ++round) {
      if (round > 0) {
        const Density now{total_mass_, total_size_};
        if (now > best) {
          best = now;
          best_round = round;
        }
      }
      peel_round(round);
    }
    return snapshot(best_round);
  }

 private:
  bool valid_top(std::size_t m) {
    auto& heap = heaps_[m];
    while (!heap.empty()) {
      const HeapItem& top = heap.top();
      if (removed_round_[m][top.local] == kNeverRemoved && top.mass == mass_[m][top.local]) return true;
      heap.pop();
    }
    return false;
  }

  bool at_or_below_average(double id_mass) const {
    return id_mass * static_cast<double>(total_size_) <= total_mass_;
  }

  void peel_round(int round) {
    std::size_t chosen = n_;
    HeapItem best{};
    for (std::size_t m = 0; m < n_; ++m) {
      if (!valid_top(m)) continue;
      const HeapItem& top = heaps_[m].top();
      if (chosen == n_ || top.mass < best.mass) {
        chosen = m;
        best = top;
      }
    }
    if (chosen == n_) {
      total_size_ = 0;
      return;
    }
    std::vector<std::uint32_t> doomed;
    // Same-mode masses do not change while this mode's ids are removed.
    while (valid_top(chosen) && at_or_below_average(heaps_[chosen].top().mass)) {
      doomed.push_back(heaps_[chosen].top().local);
      heaps_[chosen].pop();
    }
    if (doomed.empty()) doomed.push_back(best.local);
    for (auto loc : doomed) remove_id(chosen, loc, round);
  }

  void remove_id(std::size_t m, std::uint32_t loc, int round) {
    if (removed_round_[m][loc] != kNeverRemoved) return;
    removed_round_[m][loc] = round;
    --total_size_;
    const auto entries = block_.entries();
    for (auto i = offsets_[m][loc]; i < offsets_[m][loc + 1]; ++i) {
      const auto e = lists_[m][i];
      if (!alive_entry_[e]) continue;
      alive_entry_[e] = 0;
      const double v = entries[e].value;
      total_mass_ -= v;
      for (std::size_t m2 = 0; m2 < n_; ++m2) {
        if (m2 == m) continue;
        const auto loc2 = locals_[e * n_ + m2];
        mass_[m2][loc2] -= v;
        if (--live_count_[m2][loc2] == 0) {
          removed_round_[m2][loc2] = round;
          --total_size_;
        } else {
          heaps_[m2].push({mass_[m2][loc2], loc2});
        }
      }
    }
  }

  std::vector<char> snapshot(int round) const {
    std::vector<char> keep(nnz_, 1);
    for (std::size_t e = 0; e < nnz_; ++e) {
      for (std::size_t m = 0; m < n_ && keep[e]; ++m) keep[e] = removed_round_[m][locals_[e * n_ + m]] >= round;
    }
    return keep;
  }

  const Block& block_;
  std::size_t n_;
  std::size_t nnz_ = 0;
  std::vector<std::vector<double>> mass_;
  std::span<const std::uint32_t> locals_;
  std::vector<char> alive_entry_;
  std::vector<std::vector<std::uint32_t>> lists_;
  std::vector<std::vector<std::size_t>> offsets_;
  std::vector<std::vector<std::size_t>> live_count_;
  std::vector<std::vector<int>> removed_round_;
  std::vector<std::priority_queue<HeapItem>> heaps_;
  double total_mass_ = 0.0;
  std::size_t total_size_ = 0;
};

}  // namespace

ModeMassIndex ModeMassIndex::of(const Block& block, std::size_t workers) {
  ModeMassIndex index;
  const std::size_t n = block.n_modes();
  index.masses.resize(n);
  if (workers <= 1 || n <= 1) {
    for (std::size_t m = 0; m < n; ++m) tally_mode(block, m, index.masses[m]);
    return index;
  }
  // One mode per task; each mode sums in entry order, so results match the serial path.
  const std::size_t threads = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t m = t; m < n; m += threads) tally_mode(block, m, index.masses[m]);
    });
  }
  for (auto& th : pool) th.join();
  return index;
}

Block peel_once(const Block& working, std::size_t workers) {
  if (working.empty()) return working;
  return working.select(Peeler(working, workers).run());
}

void sort_by_density(std::vector<Block>& blocks) {
  std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) {
    if (a.size() == 0 || b.size() == 0) return a.size() != 0 && b.size() == 0;
    return a.density() > b.density();
  });
}

std::vector<Block> detect_top_blocks(const Block& tensor, const DetectParams& params) {
  std::vector<Block> found;
  Block working = tensor;
  for (std::size_t i = 0; i < params.num_blocks && !working.empty(); ++i) {
    auto keep = Peeler(working, params.workers).run();
    Block block = working.select(keep);
    for (auto& flag : keep) flag = !flag;
    working = working.select(keep);
    found.push_back(std::move(block));
  }
  sort_by_density(found);
  return found;
}

}  // namespace augsplice
