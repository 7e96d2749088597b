#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dmtc/errors.hpp"
#include "dmtc/mining.hpp"

namespace dmtc {

enum class Reduction { mean, sum };
enum class LossKind { ofc, oc, cs };

NLOHMANN_JSON_SERIALIZE_ENUM(Reduction, {{Reduction::mean, "mean"}, {Reduction::sum, "sum"}})
NLOHMANN_JSON_SERIALIZE_ENUM(LossKind, {{LossKind::ofc, "ofc"}, {LossKind::oc, "oc"}, {LossKind::cs, "cs"}})

struct OFCConfig {
  double alpha = 1.0;      // weight factor, > 0
  double gamma = 2.0;      // focusing exponent, >= 0
  double margin = 0.5;     // negative margin m, in (0, 2]
  double epsilon = 1e-12;  // floor for the squared term inside the log
  Reduction reduction = Reduction::mean;

  void validate() const {
    if (!(alpha > 0.0)) throw ValidationError("OFC alpha must be > 0");
    if (!(gamma >= 0.0)) throw ValidationError("OFC gamma must be >= 0");
    if (!(margin > 0.0 && margin <= 2.0)) throw ValidationError("OFC margin must lie in (0, 2]");
    if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw ValidationError("OFC epsilon must lie in (0, 1e-3]");
  }
};

inline void to_json(ordered_json& j, const OFCConfig& c) {
  j = ordered_json{{"alpha", c.alpha}, {"gamma", c.gamma}, {"margin", c.margin},
                   {"epsilon", c.epsilon}, {"reduction", c.reduction}};
}
template <typename Json>
void from_json(const Json& j, OFCConfig& c) {
  c.alpha = j.value("alpha", 1.0);
  c.gamma = j.value("gamma", 2.0);
  c.margin = j.value("margin", 0.5);
  c.epsilon = j.value("epsilon", 1e-12);
  c.reduction = j.value("reduction", Reduction::mean);
}

struct PairGradient {
  std::size_t pair_index = 0;
  double d_sim = 0.0;  // dL/ds
};

struct LossOutput {
  double value = 0.0;
  std::vector<PairGradient> grad_wrt_sim;
};

namespace detail {

// -alpha (1-q)^gamma log q and its derivative in q, for q in (0, 1].
struct FocalTerm {
  double value;
  double d_q;
};

inline FocalTerm focal_term(double q, double alpha, double gamma) {
  const double one_minus = 1.0 - q;
  const double weight = std::pow(one_minus, gamma);
  const double log_q = std::log(q);
  const double d_weight =
      (gamma == 0.0 || one_minus == 0.0) ? 0.0 : -gamma * std::pow(one_minus, gamma - 1.0);
  return {-alpha * weight * log_q, -alpha * (d_weight * log_q + weight / q)};
}

inline void reduce(LossOutput& out, Reduction reduction) {
  if (reduction != Reduction::mean || out.grad_wrt_sim.empty()) return;
  const double inv = 1.0 / static_cast<double>(out.grad_wrt_sim.size());
  out.value *= inv;
  for (auto& g : out.grad_wrt_sim) g.d_sim *= inv;
}

}  // namespace detail

// Focal loss on positive pairs: q = max(s^2, eps), term = -a (1-q)^g log q.
inline LossOutput positive_loss(std::span<const ScoredPair> sims, const OFCConfig& c) {
  LossOutput out;
  out.grad_wrt_sim.reserve(sims.size());
  for (const auto& p : sims) {
    const double s = p.similarity;
    const double sq = s * s;
    const bool clamped = sq < c.epsilon;
    const auto t = detail::focal_term(clamped ? c.epsilon : sq, c.alpha, c.gamma);
    out.value += t.value;
    out.grad_wrt_sim.push_back({p.pair_index, clamped ? 0.0 : t.d_q * 2.0 * s});
  }
  detail::reduce(out, c.reduction);
  return out;
}

// Focal loss on negative pairs: u = min(max(0, m - s), 1), q = max(u^2, eps).
inline LossOutput negative_loss(std::span<const ScoredPair> sims, const OFCConfig& c) {
  LossOutput out;
  out.grad_wrt_sim.reserve(sims.size());
  for (const auto& p : sims) {
    const double raw = c.margin - p.similarity;
    const double u = std::clamp(raw, 0.0, 1.0);
    const double du_ds = (raw > 0.0 && raw < 1.0) ? -1.0 : 0.0;
    const double sq = u * u;
    const bool clamped = sq < c.epsilon;
    const auto t = detail::focal_term(clamped ? c.epsilon : sq, c.alpha, c.gamma);
    out.value += t.value;
    out.grad_wrt_sim.push_back({p.pair_index, clamped ? 0.0 : t.d_q * 2.0 * u * du_ds});
  }
  detail::reduce(out, c.reduction);
  return out;
}

inline LossOutput combine(LossOutput a, const LossOutput& b) {
  a.value += b.value;
  a.grad_wrt_sim.insert(a.grad_wrt_sim.end(), b.grad_wrt_sim.begin(), b.grad_wrt_sim.end());
  return a;
}

inline LossOutput ofc_loss(const MinedPairs& mined, const OFCConfig& c) {
  c.validate();
  if (mined.empty()) throw NoPairsError("OFC loss: no mined pairs of either polarity");
  return combine(positive_loss(mined.pos_final, c), negative_loss(mined.neg_final, c));
}

// Online contrastive baseline over standard-mode mined pairs:
// mean (1-s)^2 over positives + mean max(0, s-m)^2 over negatives.
inline LossOutput oc_loss(const MinedPairs& mined, double margin) {
  if (mined.empty()) throw NoPairsError("OC loss: no mined pairs of either polarity");
  LossOutput pos, neg;
  for (const auto& p : mined.pos_final) {
    const double r = 1.0 - p.similarity;
    pos.value += r * r;
    pos.grad_wrt_sim.push_back({p.pair_index, -2.0 * r});
  }
  for (const auto& p : mined.neg_final) {
    const double h = std::max(0.0, p.similarity - margin);
    neg.value += h * h;
    neg.grad_wrt_sim.push_back({p.pair_index, 2.0 * h});
  }
  detail::reduce(pos, Reduction::mean);
  detail::reduce(neg, Reduction::mean);
  return combine(std::move(pos), neg);
}

// Cosine-similarity regression baseline over every pair: mean (s - t)^2 with
// t = 1 for positives and 0 for negatives.
inline LossOutput cs_loss(const SimilarityTable& table) {
  LossOutput out;
  for (const auto& p : table.d_pos) {
    const double r = p.similarity - 1.0;
    out.value += r * r;
    out.grad_wrt_sim.push_back({p.pair_index, 2.0 * r});
  }
  for (const auto& p : table.d_neg) {
    out.value += p.similarity * p.similarity;
    out.grad_wrt_sim.push_back({p.pair_index, 2.0 * p.similarity});
  }
  detail::reduce(out, Reduction::mean);
  return out;
}

// The pairs a loss is evaluated on. OFC and OC use the mined lists; CS uses
// the full table.
struct PairSelection {
  LossKind kind = LossKind::ofc;
  MinedPairs mined;
  SimilarityTable table;
};

// The OC baseline always mines in standard mode.
inline PairSelection select_pairs(LossKind kind, const SimilarityTable& table, const MiningConfig& mining) {
  PairSelection sel{kind, {}, {}};
  switch (kind) {
    case LossKind::ofc:
      sel.mined = mine(table, mining);
      break;
    case LossKind::oc: {
      MiningConfig standard = mining;
      standard.mode = MiningMode::standard;
      sel.mined = mine(table, standard);
      break;
    }
    case LossKind::cs:
      sel.table = table;
      break;
  }
  return sel;
}

inline LossOutput selection_loss(const PairSelection& sel, const OFCConfig& ofc) {
  switch (sel.kind) {
    case LossKind::ofc: return ofc_loss(sel.mined, ofc);
    case LossKind::oc: return oc_loss(sel.mined, ofc.margin);
    case LossKind::cs:
      if (sel.table.d_pos.empty() && sel.table.d_neg.empty()) throw NoPairsError("CS loss: empty batch");
      return cs_loss(sel.table);
  }
  throw ValidationError("unknown loss kind");
}

inline LossOutput pair_loss(LossKind kind, const SimilarityTable& table, const MiningConfig& mining,
                            const OFCConfig& ofc) {
  return selection_loss(select_pairs(kind, table, mining), ofc);
}

// Replaces every similarity with `similarity(pair_index)`, keeping the
// selected pairs fixed.
template <typename SimilarityFn>
void rescore(PairSelection& sel, SimilarityFn&& similarity) {
  for (auto* list : {&sel.mined.pos_final, &sel.mined.neg_final, &sel.table.d_pos, &sel.table.d_neg})
    for (auto& p : *list) p.similarity = similarity(p.pair_index);
}

}  // namespace dmtc
