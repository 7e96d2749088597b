#pragma once
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmtc/config.hpp"
#include "dmtc/dataset.hpp"
#include "dmtc/embedding.hpp"
#include "dmtc/model.hpp"

namespace dmtc {

inline constexpr int kArtifactFormatVersion = 1;

struct ModelArtifact {
  int format_version = kArtifactFormatVersion;
  LabelVocabulary vocabulary;
  std::size_t embed_dim = 0;
  ProjectionHead projection;
  ClassifierHead classifier;
  double decision_threshold = 0.5;
  TrainConfig train_config;
  ProviderConfig provider;

  void validate() const {
    if (format_version != kArtifactFormatVersion)
      throw ValidationError("unknown artifact format_version " + std::to_string(format_version));
    projection.validate();
    classifier.validate();
    if (static_cast<std::size_t>(projection.d_in()) != embed_dim)
      throw ValidationError("artifact embed_dim does not match the projection input dim");
    if (projection.d_proj() != classifier.w.rows())
      throw ValidationError("projection output dim does not match the classifier input dim");
    if (static_cast<std::size_t>(classifier.w.cols()) != vocabulary.size())
      throw ValidationError("classifier label count does not match the vocabulary");
    if (provider.dim != embed_dim) throw ValidationError("provider dim does not match embed_dim");
    if (!(decision_threshold > 0.0 && decision_threshold < 1.0))
      throw ValidationError("decision_threshold must lie in (0, 1)");
  }
};

namespace detail {

inline ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ordered_json vector_to_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

template <typename Json>
Matrix matrix_from_json(const Json& j, const char* name) {
  if (!j.is_array() || j.empty()) throw ValidationError(std::string("artifact '") + name + "' must be a non-empty array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(std::string("artifact '") + name + "' has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].template get<double>();
  }
  return m;
}

template <typename Json>
Vector vector_from_json(const Json& j, const char* name) {
  if (!j.is_array()) throw ValidationError(std::string("artifact '") + name + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].template get<double>();
  return v;
}

}  // namespace detail

inline std::string artifact_to_json_string(const ModelArtifact& a) {
  ordered_json j;
  j["format_version"] = a.format_version;
  j["vocabulary"] = taxonomy_to_json(a.vocabulary);
  j["embed_dim"] = a.embed_dim;
  j["projection"] = ordered_json{{"w1", detail::matrix_to_json(a.projection.w1)},
                                 {"b1", detail::vector_to_json(a.projection.b1)},
                                 {"w2", detail::matrix_to_json(a.projection.w2)},
                                 {"b2", detail::vector_to_json(a.projection.b2)}};
  j["classifier"] = ordered_json{{"w", detail::matrix_to_json(a.classifier.w)},
                                 {"b", detail::vector_to_json(a.classifier.b)}};
  j["decision_threshold"] = a.decision_threshold;
  j["train_config"] = a.train_config;
  j["provider"] = a.provider;
  return j.dump() + "\n";
}

inline ModelArtifact artifact_from_json_string(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("malformed model artifact: ") + e.what());
  }
  ModelArtifact a;
  try {
    a.format_version = j.at("format_version").get<int>();
    if (a.format_version != kArtifactFormatVersion)
      throw ValidationError("unknown artifact format_version " + std::to_string(a.format_version));
    a.vocabulary = taxonomy_from_json(j.at("vocabulary"));
    a.embed_dim = j.at("embed_dim").get<std::size_t>();
    const auto& p = j.at("projection");
    a.projection = {detail::matrix_from_json(p.at("w1"), "w1"), detail::vector_from_json(p.at("b1"), "b1"),
                    detail::matrix_from_json(p.at("w2"), "w2"), detail::vector_from_json(p.at("b2"), "b2")};
    const auto& c = j.at("classifier");
    a.classifier = {detail::matrix_from_json(c.at("w"), "w"), detail::vector_from_json(c.at("b"), "b")};
    a.decision_threshold = j.at("decision_threshold").get<double>();
    j.at("train_config").get_to(a.train_config);
    j.at("provider").get_to(a.provider);
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("malformed model artifact: ") + e.what());
  }
  a.validate();
  return a;
}

inline void save_artifact(const ModelArtifact& a, const std::filesystem::path& path) {
  detail::write_file(path, artifact_to_json_string(a));
}

inline ModelArtifact load_artifact(const std::filesystem::path& path) {
  return artifact_from_json_string(detail::read_file(path));
}

// Stable identifier derived from the serialized artifact.
inline std::string model_version(const ModelArtifact& a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%d-%016llx", a.format_version,
                static_cast<unsigned long long>(fnv1a64(artifact_to_json_string(a))));
  return buf;
}

// Labels with probability above the threshold; when none qualifies, the single
// highest-probability label (lowest index on ties).
inline LabelSet decide_labels(std::span<const double> probs, double threshold) {
  std::vector<std::size_t> out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > threshold) out.push_back(i);
    if (probs[i] > probs[best]) best = i;
  }
  if (out.empty() && !probs.empty()) out.push_back(best);
  return LabelSet(std::move(out));
}

struct Prediction {
  LabelSet labels;
  std::vector<double> scores;  // one probability per vocabulary label
};

inline Vector score(const EmbeddingVector& embedding, const ModelArtifact& a) {
  if (embedding.dim() != a.embed_dim)
    throw ValidationError("embedding dim " + std::to_string(embedding.dim()) + " != model embed_dim " +
                          std::to_string(a.embed_dim));
  return classify(project(embedding.view(), a.projection), a.classifier);
}

inline Prediction predict(const EmbeddingVector& embedding, const ModelArtifact& a) {
  const Vector p = score(embedding, a);
  Prediction out;
  out.scores.assign(p.data(), p.data() + p.size());
  out.labels = decide_labels(out.scores, a.decision_threshold);
  return out;
}

}  // namespace dmtc
