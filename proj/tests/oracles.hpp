#pragma once
// Brute-force reference implementations. They build every set explicitly and
// share no code with the library beyond its plain data types.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "dmtc/metrics.hpp"
#include "dmtc/mining.hpp"

namespace oracle {

struct Mined {
  std::set<std::size_t> pos, neg;
  std::vector<std::size_t> pos_order, neg_order;  // selected prefix, then hard by index
  std::size_t hard_pos = 0, hard_neg = 0, refined_pos = 0, refined_neg = 0;
  std::size_t selected_pos = 0, selected_neg = 0;
};

// ceil(p * k / 100) for integral p, in integer arithmetic.
inline std::size_t keep_count(std::size_t k, int p) { return (static_cast<std::size_t>(p) * k + 99) / 100; }

inline Mined mine(const dmtc::SimilarityTable& t, int p, bool literal) {
  std::map<std::size_t, double> d_pos, d_neg;
  for (const auto& s : t.d_pos) d_pos[s.pair_index] = s.similarity;
  for (const auto& s : t.d_neg) d_neg[s.pair_index] = s.similarity;

  std::set<std::size_t> h_pos, h_neg;
  if (!d_neg.empty()) {
    double lo = 2, hi = -2;
    for (const auto& [i, s] : d_neg) lo = std::min(lo, s), hi = std::max(hi, s);
    for (const auto& [i, s] : d_pos)
      if (literal ? s > lo : s < hi) h_pos.insert(i);
  }
  if (!d_pos.empty()) {
    double lo = 2, hi = -2;
    for (const auto& [i, s] : d_pos) lo = std::min(lo, s), hi = std::max(hi, s);
    for (const auto& [i, s] : d_neg)
      if (literal ? s < hi : s > lo) h_neg.insert(i);
  }

  // relative complements, then sorted by (similarity, index)
  std::vector<std::pair<double, std::size_t>> o_pos, o_neg;
  for (const auto& [i, s] : d_pos)
    if (!h_pos.count(i)) o_pos.emplace_back(-s, i);
  for (const auto& [i, s] : d_neg)
    if (!h_neg.count(i)) o_neg.emplace_back(s, i);
  std::sort(o_pos.begin(), o_pos.end());
  std::sort(o_neg.begin(), o_neg.end());

  Mined m;
  m.hard_pos = h_pos.size();
  m.hard_neg = h_neg.size();
  m.refined_pos = o_pos.size();
  m.refined_neg = o_neg.size();
  m.selected_pos = keep_count(o_pos.size(), p);
  m.selected_neg = keep_count(o_neg.size(), p);
  m.pos = h_pos;
  m.neg = h_neg;
  for (std::size_t k = 0; k < m.selected_pos; ++k) m.pos.insert(o_pos[k].second), m.pos_order.push_back(o_pos[k].second);
  for (std::size_t k = 0; k < m.selected_neg; ++k) m.neg.insert(o_neg[k].second), m.neg_order.push_back(o_neg[k].second);
  m.pos_order.insert(m.pos_order.end(), h_pos.begin(), h_pos.end());
  m.neg_order.insert(m.neg_order.end(), h_neg.begin(), h_neg.end());
  return m;
}

using Grid = std::vector<std::vector<int>>;      // rows x labels, 0/1
using Scores = std::vector<std::vector<double>>;

inline double subset_accuracy(const Grid& p, const Grid& t) {
  double hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == t[i] ? 1 : 0;
  return hit / static_cast<double>(p.size());
}

inline double hamming_loss(const Grid& p, const Grid& t) {
  double wrong = 0, cells = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p[i].size(); ++j) wrong += p[i][j] != t[i][j], cells += 1;
  return wrong / cells;
}

inline double jaccard(const Grid& p, const Grid& t) {
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::set<std::size_t> a, b, u, x;
    for (std::size_t j = 0; j < p[i].size(); ++j) {
      if (p[i][j]) a.insert(j);
      if (t[i][j]) b.insert(j);
    }
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(u, u.begin()));
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(x, x.begin()));
    total += u.empty() ? 1.0 : static_cast<double>(x.size()) / static_cast<double>(u.size());
  }
  return total / static_cast<double>(p.size());
}

struct Counts {
  double tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts counts(const Grid& p, const Grid& t) {
  Counts c;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p[i].size(); ++j) {
      if (p[i][j] && t[i][j]) c.tp += 1;
      if (p[i][j] && !t[i][j]) c.fp += 1;
      if (!p[i][j] && t[i][j]) c.fn += 1;
      if (!p[i][j] && !t[i][j]) c.tn += 1;
    }
  return c;
}

inline double precision(const Grid& p, const Grid& t) {
  const auto c = counts(p, t);
  return c.tp + c.fp == 0 ? 0.0 : c.tp / (c.tp + c.fp);
}

inline double recall(const Grid& p, const Grid& t) {
  const auto c = counts(p, t);
  return c.tp + c.fn == 0 ? 0.0 : c.tp / (c.tp + c.fn);
}

inline double f1(const Grid& p, const Grid& t) {
  const double pr = precision(p, t), re = recall(p, t);
  return pr + re == 0 ? 0.0 : 2 * pr * re / (pr + re);
}

inline double mcc(const Grid& p, const Grid& t) {
  const auto c = counts(p, t);
  const double den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn);
  return den == 0 ? 0.0 : (c.tp * c.tn - c.fp * c.fn) / std::sqrt(den);
}

// Every (positive cell, negative cell) pair, ties worth one half.
inline double auc(const Scores& s, const Grid& t) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s[i].size(); ++j) (t[i][j] ? pos : neg).push_back(s[i][j]);
  double wins = 0;
  for (double a : pos)
    for (double b : neg) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline dmtc::BinaryMatrix to_matrix(const Grid& g) {
  dmtc::BinaryMatrix m(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.empty() ? 0 : g[0].size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<std::uint8_t>(g[i][j]);
  return m;
}

inline dmtc::Matrix to_matrix(const Scores& s) {
  dmtc::Matrix m(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(s.empty() ? 0 : s[0].size()));
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s[i][j];
  return m;
}

}  // namespace oracle
