#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dmtc/artifact.hpp"
#include "dmtc/errors.hpp"

namespace dmtc {

// Rows are samples, columns are labels.
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct MicroCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  friend bool operator==(const MicroCounts&, const MicroCounts&) = default;
};

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  MicroCounts counts;
};

enum class Averaging { micro, macro };

struct EvalReport {
  double subset_accuracy = 0.0;
  double hamming_loss = 0.0;
  double jaccard = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double mcc = 0.0;
  double auc = 0.0;
  std::size_t sample_count = 0;
  std::size_t label_count = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

namespace detail {

template <typename A, typename B>
void require_same_shape(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("shape mismatch: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace detail

inline double subset_accuracy(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  detail::require_same_shape(pred, truth);
  if (pred.rows() == 0) return 0.0;
  std::size_t exact = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) exact += pred.row(i) == truth.row(i);
  return static_cast<double>(exact) / static_cast<double>(pred.rows());
}

inline double hamming_loss(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  detail::require_same_shape(pred, truth);
  if (pred.size() == 0) return 0.0;
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) wrong += (pred.data()[i] != 0) != (truth.data()[i] != 0);
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

// Mean per-row |pred & truth| / |pred | truth|; a row empty on both sides counts 1.
inline double jaccard(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  detail::require_same_shape(pred, truth);
  if (pred.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    std::size_t inter = 0, uni = 0;
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      const bool p = pred(i, j) != 0, t = truth(i, j) != 0;
      inter += p && t;
      uni += p || t;
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return total / static_cast<double>(pred.rows());
}

inline MicroCounts micro_counts(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  detail::require_same_shape(pred, truth);
  MicroCounts c;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] != 0, t = truth.data()[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

inline PrecisionRecallF1 prf_from_counts(const MicroCounts& c) {
  PrecisionRecallF1 r;
  r.counts = c;
  r.precision = detail::safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  r.recall = detail::safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  r.f1 = detail::safe_ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

inline PrecisionRecallF1 micro_prf(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  return prf_from_counts(micro_counts(pred, truth));
}

// Unweighted mean of per-label precision, recall and F1.
inline PrecisionRecallF1 macro_prf(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  detail::require_same_shape(pred, truth);
  PrecisionRecallF1 r;
  r.counts = micro_counts(pred, truth);
  if (pred.cols() == 0) return r;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    const auto per = micro_prf(pred.col(j), truth.col(j));
    r.precision += per.precision;
    r.recall += per.recall;
    r.f1 += per.f1;
  }
  const auto m = static_cast<double>(pred.cols());
  r.precision /= m;
  r.recall /= m;
  r.f1 /= m;
  return r;
}

inline double mcc_from_counts(const MicroCounts& c) {
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(den);
}

inline double mcc(const BinaryMatrix& pred, const BinaryMatrix& truth) {
  return mcc_from_counts(micro_counts(pred, truth));
}

// Mann-Whitney statistic over flattened cells: P(score_pos > score_neg) with
// ties counted one half.
inline double auc(const Matrix& scores, const BinaryMatrix& truth) {
  detail::require_same_shape(scores, truth);
  std::vector<std::pair<double, bool>> cells;
  cells.reserve(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) cells.emplace_back(scores.data()[i], truth.data()[i] != 0);
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  double wins = 0.0, negatives_below = 0.0, positives = 0.0;
  for (std::size_t g = 0; g < cells.size();) {
    std::size_t end = g;
    double pos = 0, neg = 0;
    while (end < cells.size() && cells[end].first == cells[g].first) {
      (cells[end].second ? pos : neg) += 1.0;
      ++end;
    }
    wins += pos * negatives_below + 0.5 * pos * neg;
    negatives_below += neg;
    positives += pos;
    g = end;
  }
  if (positives == 0.0 || negatives_below == 0.0)
    throw DegenerateError("degenerate AUC: truth contains a single class");
  return wins / (positives * negatives_below);
}

// Row-wise threshold with the argmax fallback used by predict.
inline BinaryMatrix threshold_scores(const Matrix& scores, double threshold) {
  BinaryMatrix out = BinaryMatrix::Zero(scores.rows(), scores.cols());
  std::vector<double> row(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) row[static_cast<std::size_t>(j)] = scores(i, j);
    const auto labels = decide_labels(row, threshold);
    for (auto l : labels.indices()) out(i, static_cast<Eigen::Index>(l)) = 1;
  }
  return out;
}

inline EvalReport evaluate(const Matrix& scores, double threshold, const BinaryMatrix& truth,
                           Averaging averaging = Averaging::micro) {
  detail::require_same_shape(scores, truth);
  const BinaryMatrix pred = threshold_scores(scores, threshold);
  EvalReport r;
  r.sample_count = static_cast<std::size_t>(truth.rows());
  r.label_count = static_cast<std::size_t>(truth.cols());
  r.subset_accuracy = subset_accuracy(pred, truth);
  r.hamming_loss = hamming_loss(pred, truth);
  r.jaccard = jaccard(pred, truth);
  const auto prf = averaging == Averaging::micro ? micro_prf(pred, truth) : macro_prf(pred, truth);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  r.mcc = mcc(pred, truth);
  r.auc = auc(scores, truth);
  return r;
}

inline ordered_json report_to_json(const EvalReport& r) {
  return ordered_json{{"subset_accuracy", r.subset_accuracy}, {"hamming_loss", r.hamming_loss},
                      {"jaccard", r.jaccard},                 {"f1", r.f1},
                      {"precision", r.precision},             {"recall", r.recall},
                      {"mcc", r.mcc},                         {"auc", r.auc},
                      {"sample_count", r.sample_count},       {"label_count", r.label_count}};
}

template <typename Json>
EvalReport report_from_json(const Json& j) {
  EvalReport r;
  try {
    r.subset_accuracy = j.at("subset_accuracy").template get<double>();
    r.hamming_loss = j.at("hamming_loss").template get<double>();
    r.jaccard = j.at("jaccard").template get<double>();
    r.f1 = j.at("f1").template get<double>();
    r.precision = j.at("precision").template get<double>();
    r.recall = j.at("recall").template get<double>();
    r.mcc = j.at("mcc").template get<double>();
    r.auc = j.at("auc").template get<double>();
    r.sample_count = j.at("sample_count").template get<std::size_t>();
    r.label_count = j.at("label_count").template get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  return r;
}

inline std::string report_to_json_string(const EvalReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline constexpr std::array<std::string_view, 8> kReportColumns = {
    "Accuracy (%)", "Hamming Loss (%)", "Jaccard Similarity (%)", "F1-Score (%)",
    "Precision (%)", "Recall (%)", "MCC (%)", "AUC (%)"};

// Tab-separated header and one row of percentages.
inline std::string report_table(const EvalReport& r, std::string_view model_name) {
  std::string out = "Model";
  for (auto c : kReportColumns) (out += '\t') += c;
  out += '\n';
  out += model_name;
  for (double v : {r.subset_accuracy, r.hamming_loss, r.jaccard, r.f1, r.precision, r.recall, r.mcc, r.auc}) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "\t%.2f", 100.0 * v);
    out += buf;
  }
  out += '\n';
  return out;
}

}  // namespace dmtc
