#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmtc/dataset.hpp"
#include "dmtc/errors.hpp"

namespace dmtc {

enum class Polarity { positive, negative };

struct Pair {
  std::size_t a = 0;
  std::size_t b = 0;
  Polarity polarity = Polarity::negative;

  friend bool operator==(const Pair&, const Pair&) = default;
};

// All unordered pairs of a batch, listed in lexicographic (a, b) order. A
// pair's position in `pairs` is its pair index everywhere downstream.
struct PairSet {
  std::vector<Pair> pairs;
  std::size_t batch_size = 0;
};

struct ScoredPair {
  std::size_t pair_index = 0;
  double similarity = 0.0;

  friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

struct SimilarityTable {
  std::vector<ScoredPair> d_pos;
  std::vector<ScoredPair> d_neg;
};

// literal: positives above the lowest negative similarity are hard, negatives
//   below the highest positive similarity are hard.
// standard: positives below the highest negative similarity are hard,
//   negatives above the lowest positive similarity are hard.
enum class MiningMode { literal, standard };

// exact: positive iff the label sets are equal. overlap: positive iff they
// share at least one label.
enum class PositiveRule { exact, overlap };

NLOHMANN_JSON_SERIALIZE_ENUM(MiningMode, {{MiningMode::literal, "literal"},
                                          {MiningMode::standard, "standard"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PositiveRule, {{PositiveRule::exact, "exact"},
                                            {PositiveRule::overlap, "overlap"}})

struct MiningConfig {
  double p = 10.0;  // percentage of refined pairs kept, in [0, 100]
  MiningMode mode = MiningMode::literal;
  PositiveRule positive_rule = PositiveRule::exact;

  void validate() const {
    if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("mining p must lie in [0, 100]");
  }
};

inline void to_json(ordered_json& j, const MiningConfig& c) {
  j = ordered_json{{"p", c.p}, {"mode", c.mode}, {"positive_rule", c.positive_rule}};
}
template <typename Json>
void from_json(const Json& j, MiningConfig& c) {
  c.p = j.value("p", 10.0);
  c.mode = j.value("mode", MiningMode::literal);
  c.positive_rule = j.value("positive_rule", PositiveRule::exact);
}

struct MiningCounts {
  std::size_t hard_pos = 0;
  std::size_t hard_neg = 0;
  std::size_t refined_pos = 0;
  std::size_t refined_neg = 0;
  std::size_t selected_pos = 0;
  std::size_t selected_neg = 0;

  friend bool operator==(const MiningCounts&, const MiningCounts&) = default;
};

struct MinedPairs {
  // Selected refined prefix first, hard pairs (ascending pair index) after.
  std::vector<ScoredPair> pos_final;
  std::vector<ScoredPair> neg_final;
  // Thresholds the hard-pair rules compared against; absent when the opposite
  // polarity had no pairs.
  std::optional<double> t_neg;
  std::optional<double> t_pos;
  MiningCounts counts;

  bool empty() const noexcept { return pos_final.empty() && neg_final.empty(); }
};

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("cosine similarity of vectors with dims " + std::to_string(a.size()) +
                          " and " + std::to_string(b.size()));
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

inline bool is_positive_pair(const LabelSet& a, const LabelSet& b, PositiveRule rule) {
  return rule == PositiveRule::exact ? a == b : a.intersects(b);
}

inline PairSet build_pairs(std::span<const LabelSet> labels, PositiveRule rule) {
  PairSet out;
  out.batch_size = labels.size();
  if (labels.size() < 2) return out;
  out.pairs.reserve(labels.size() * (labels.size() - 1) / 2);
  for (std::size_t a = 0; a < labels.size(); ++a)
    for (std::size_t b = a + 1; b < labels.size(); ++b)
      out.pairs.push_back(Pair{a, b,
                               is_positive_pair(labels[a], labels[b], rule) ? Polarity::positive
                                                                            : Polarity::negative});
  return out;
}

// `similarity(a, b)` returns the similarity of batch members a and b.
template <typename SimilarityFn>
SimilarityTable similarity_table(const PairSet& pairs, SimilarityFn&& similarity) {
  SimilarityTable t;
  for (std::size_t k = 0; k < pairs.pairs.size(); ++k) {
    const auto& p = pairs.pairs[k];
    ScoredPair s{k, similarity(p.a, p.b)};
    (p.polarity == Polarity::positive ? t.d_pos : t.d_neg).push_back(s);
  }
  return t;
}

// ceil(p/100 * k). p*k is formed first so integral percentages stay exact.
inline std::size_t selection_count(std::size_t k, double p) {
  if (k == 0 || p <= 0.0) return 0;
  const double x = std::ceil(p * static_cast<double>(k) / 100.0);
  return std::min(k, static_cast<std::size_t>(x));
}

// First ceil(p/100 * k) elements of an already sorted sequence.
inline std::vector<ScoredPair> select_top(std::span<const ScoredPair> sorted, double p) {
  const auto n = selection_count(sorted.size(), p);
  return {sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n)};
}

inline MinedPairs mine(const SimilarityTable& table, const MiningConfig& config) {
  config.validate();
  MinedPairs out;

  std::optional<double> min_neg, max_neg, min_pos, max_pos;
  for (const auto& s : table.d_neg) {
    min_neg = min_neg ? std::min(*min_neg, s.similarity) : s.similarity;
    max_neg = max_neg ? std::max(*max_neg, s.similarity) : s.similarity;
  }
  for (const auto& s : table.d_pos) {
    min_pos = min_pos ? std::min(*min_pos, s.similarity) : s.similarity;
    max_pos = max_pos ? std::max(*max_pos, s.similarity) : s.similarity;
  }

  const bool literal = config.mode == MiningMode::literal;
  out.t_neg = literal ? min_neg : max_neg;
  out.t_pos = literal ? max_pos : min_pos;

  auto hard_pos = [&](double s) {
    if (!out.t_neg) return false;
    return literal ? s > *out.t_neg : s < *out.t_neg;
  };
  auto hard_neg = [&](double s) {
    if (!out.t_pos) return false;
    return literal ? s < *out.t_pos : s > *out.t_pos;
  };

  std::vector<ScoredPair> h_pos, h_neg, o_pos, o_neg;
  for (const auto& s : table.d_pos) (hard_pos(s.similarity) ? h_pos : o_pos).push_back(s);
  for (const auto& s : table.d_neg) (hard_neg(s.similarity) ? h_neg : o_neg).push_back(s);

  auto by_index = [](const ScoredPair& x, const ScoredPair& y) { return x.pair_index < y.pair_index; };
  std::sort(h_pos.begin(), h_pos.end(), by_index);
  std::sort(h_neg.begin(), h_neg.end(), by_index);

  // Refined positives descending, refined negatives ascending; equal
  // similarities fall back to ascending pair index.
  std::sort(o_pos.begin(), o_pos.end(), [](const ScoredPair& x, const ScoredPair& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return x.pair_index < y.pair_index;
  });
  std::sort(o_neg.begin(), o_neg.end(), [](const ScoredPair& x, const ScoredPair& y) {
    if (x.similarity != y.similarity) return x.similarity < y.similarity;
    return x.pair_index < y.pair_index;
  });

  out.pos_final = select_top(o_pos, config.p);
  out.neg_final = select_top(o_neg, config.p);
  out.counts = MiningCounts{h_pos.size(), h_neg.size(), o_pos.size(), o_neg.size(),
                            out.pos_final.size(), out.neg_final.size()};
  out.pos_final.insert(out.pos_final.end(), h_pos.begin(), h_pos.end());
  out.neg_final.insert(out.neg_final.end(), h_neg.begin(), h_neg.end());
  return out;
}

}  // namespace dmtc
