#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <set>
#include <unordered_map>

#include "mmtlab/metrics.hpp"

namespace mmtlab::metrics {
namespace {

using Seq = std::vector<std::uint32_t>;

struct Candidate {
  Seq seq;
  std::size_t distance;
};

using Row = std::vector<std::size_t>;

std::size_t gap(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

// Distance rows of one hypothesis against `ref`: prefix[i][k] = D(hyp[0..i), ref[0..k)),
// suffix[j][k] = D(hyp[j..n), ref[k..m)). A shifted sequence only differs
// from hyp inside one window, so its distance is the prefix row at the window
// start, advanced over the window, joined with the suffix row at its end.
class ShiftScorer {
 public:
  ShiftScorer(const Seq& hyp, const Seq& ref) : hyp_(hyp), ref_(ref), n_(hyp.size()), m_(ref.size()) {
    prefix_.assign(n_ + 1, Row(m_ + 1));
    for (std::size_t k = 0; k <= m_; ++k) prefix_[0][k] = k;
    for (std::size_t i = 1; i <= n_; ++i) advance(prefix_[i - 1], i - 1, hyp_[i - 1], prefix_[i]);
    suffix_.assign(n_ + 1, Row(m_ + 1));
    for (std::size_t k = 0; k <= m_; ++k) suffix_[n_][k] = m_ - k;
    for (std::size_t j = n_; j-- > 0;) {
      suffix_[j][m_] = n_ - j;
      for (std::size_t k = m_; k-- > 0;)
        suffix_[j][k] = std::min({suffix_[j + 1][k] + 1, suffix_[j][k + 1] + 1,
                                  suffix_[j + 1][k + 1] + (hyp_[j] == ref_[k] ? 0 : 1)});
    }
  }

  std::size_t current() const { return prefix_[n_][m_]; }

  /// Distance of hyp with `window` replacing hyp[a..a+window.size()), or
  /// nothing once it provably exceeds `limit`.
  std::optional<std::size_t> score(std::size_t a, std::span<const std::uint32_t> window, std::size_t limit) {
    row_ = prefix_[a];
    for (std::size_t t = 0; t < window.size(); ++t) {
      const std::size_t i = a + t;
      advance(row_, i, window[t], next_);
      row_.swap(next_);
      std::size_t bound = SIZE_MAX;
      for (std::size_t k = 0; k <= m_; ++k) bound = std::min(bound, row_[k] + gap(n_ - i - 1, m_ - k));
      if (bound > limit) return std::nullopt;
    }
    const Row& tail = suffix_[a + window.size()];
    std::size_t d = SIZE_MAX;
    for (std::size_t k = 0; k <= m_; ++k) d = std::min(d, row_[k] + tail[k]);
    if (d > limit) return std::nullopt;
    return d;
  }

 private:
  // Row for one more hypothesis token; `done` tokens precede it.
  void advance(const Row& prev, std::size_t done, std::uint32_t token, Row& out) const {
    out.resize(m_ + 1);
    out[0] = done + 1;
    for (std::size_t k = 1; k <= m_; ++k)
      out[k] = std::min({prev[k] + 1, out[k - 1] + 1, prev[k - 1] + (token == ref_[k - 1] ? 0 : 1)});
  }

  const Seq& hyp_;
  const Seq& ref_;
  std::size_t n_, m_;
  std::vector<Row> prefix_, suffix_;
  Row row_, next_;
};

// Every distinct sequence reachable by one block move whose distance to `ref`
// shows the largest strict improvement.
std::vector<Candidate> best_shifts(const Seq& hyp, const Seq& ref) {
  ShiftScorer scorer(hyp, ref);
  const std::size_t current = scorer.current();
  std::vector<Candidate> best;
  if (current == 0) return best;
  std::size_t limit = current - 1;
  const std::size_t n = hyp.size();
  Seq window;
  for (std::size_t start = 0; start < n; ++start) {
    const std::size_t max_len = std::min(kTerMaxShiftSpan, n - start);
    for (std::size_t len = 1; len <= max_len; ++len) {
      const auto block_begin = hyp.begin() + static_cast<std::ptrdiff_t>(start);
      const auto block_end = block_begin + static_cast<std::ptrdiff_t>(len);
      // `dest` indexes the sequence with the block removed.
      for (std::size_t dest = 0; dest + len <= n; ++dest) {
        if (dest == start) continue;
        const std::size_t a = std::min(start, dest);
        window.clear();
        if (dest < start) {
          window.insert(window.end(), block_begin, block_end);
          window.insert(window.end(), hyp.begin() + static_cast<std::ptrdiff_t>(dest), block_begin);
        } else {
          window.insert(window.end(), block_end, hyp.begin() + static_cast<std::ptrdiff_t>(dest + len));
          window.insert(window.end(), block_begin, block_end);
        }
        const auto d = scorer.score(a, window, limit);
        if (!d) continue;
        if (*d < limit || best.empty()) {
          if (!best.empty() && *d < best.front().distance) best.clear();
          limit = *d;
        }
        Seq moved(hyp.begin(), hyp.begin() + static_cast<std::ptrdiff_t>(a));
        moved.insert(moved.end(), window.begin(), window.end());
        moved.insert(moved.end(), hyp.begin() + static_cast<std::ptrdiff_t>(a + window.size()), hyp.end());
        best.push_back({std::move(moved), *d});
      }
    }
  }
  std::sort(best.begin(), best.end(), [](const Candidate& a, const Candidate& b) { return a.seq < b.seq; });
  best.erase(std::unique(best.begin(), best.end(), [](const Candidate& a, const Candidate& b) {
               return a.seq == b.seq;
             }), best.end());
  return best;
}

// No rearrangement of `hyp` gets closer to `ref` than this.
std::size_t bag_bound(const Seq& hyp, const Seq& ref) {
  std::unordered_map<std::uint32_t, std::ptrdiff_t> count;
  for (auto w : hyp) ++count[w];
  std::size_t common = 0;
  for (auto w : ref) {
    auto it = count.find(w);
    if (it != count.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  return std::max(hyp.size(), ref.size()) - common;
}

}  // namespace

std::size_t levenshtein(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

TerResult ter_segment(std::span<const std::string> hyp, std::span<const std::string> ref, std::size_t beam) {
  std::unordered_map<std::string_view, std::uint32_t> vocab;
  auto intern = [&](std::span<const std::string> words) {
    Seq ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(vocab.emplace(w, static_cast<std::uint32_t>(vocab.size())).first->second);
    return ids;
  };
  const Seq h = intern(hyp), r = intern(ref);

  TerResult best{0, levenshtein(h, r), r.size()};
  const std::size_t floor = bag_bound(h, r);
  std::set<Seq> visited{h};
  std::vector<Candidate> frontier{{h, best.edits}};
  beam = std::max<std::size_t>(beam, 1);

  for (std::size_t depth = 1; depth <= kTerMaxShifts && !frontier.empty(); ++depth) {
    std::vector<Candidate> next;
    // Another shift costs 1 and cannot beat the bag-of-words bound.
    if (depth + floor >= best.total()) break;
    for (const Candidate& state : frontier) {
      for (Candidate& c : best_shifts(state.seq, r)) {
        if (!visited.insert(c.seq).second) continue;
        if (depth + c.distance < best.total()) best = {depth, c.distance, r.size()};
        next.push_back(std::move(c));
      }
    }
    if (next.size() > beam) {
      std::stable_sort(next.begin(), next.end(), [](const Candidate& a, const Candidate& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.seq < b.seq;
      });
      next.resize(beam);
    }
    frontier = std::move(next);
  }
  return best;
}

}  // namespace mmtlab::metrics
