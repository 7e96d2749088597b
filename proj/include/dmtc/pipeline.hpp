#pragma once
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmtc/artifact.hpp"
#include "dmtc/datagen.hpp"
#include "dmtc/dataset.hpp"
#include "dmtc/embedding.hpp"
#include "dmtc/llm_client.hpp"
#include "dmtc/metrics.hpp"
#include "dmtc/providers.hpp"
#include "dmtc/trainer.hpp"

namespace dmtc {

// Mirrors the JSON config file accepted by the CLI. Every field may be
// overridden by a command-line flag.
struct PipelineConfig {
  std::string taxonomy_path;
  ProviderConfig provider;
  TrainConfig train;
  std::string dataset_path;
  std::string embeddings_path;
  std::string model_path;
  std::string report_path;
  std::string loss_log_path;
  double holdout_fraction = 0.2;  // 0 disables the split
  std::uint64_t split_seed = 42;
};

template <typename Json>
void from_json(const Json& j, PipelineConfig& c) {
  c.taxonomy_path = j.value("taxonomy", c.taxonomy_path);
  if (j.contains("provider")) j.at("provider").get_to(c.provider);
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.dataset_path = p.value("dataset", c.dataset_path);
    c.embeddings_path = p.value("embeddings", c.embeddings_path);
    c.model_path = p.value("model", c.model_path);
    c.report_path = p.value("report", c.report_path);
    c.loss_log_path = p.value("loss_log", c.loss_log_path);
  }
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.split_seed = j.value("split_seed", c.split_seed);
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  PipelineConfig c;
  try {
    detail::parse_json_file(path).get_to(c);
  } catch (const json::exception& e) {
    throw ValidationError("malformed pipeline config: " + std::string(e.what()));
  }
  return c;
}

// An empty path selects the built-in maritime taxonomy.
inline LabelVocabulary resolve_taxonomy(const std::string& path) {
  return path.empty() ? maritime_taxonomy() : load_taxonomy(path);
}

struct GenerateOptions {
  std::string taxonomy_path;
  std::string combos_path;  // optional
  std::size_t pair_combo_count = 0;  // random two-label combos, used when no combos file is given
  std::size_t per_class = 40;
  std::uint64_t seed = 1;
  bool offline = true;
  std::optional<LLMClientConfig> llm;  // required when !offline
  std::string out_path;
};

inline Dataset run_generate(const GenerateOptions& o) {
  const auto vocab = resolve_taxonomy(o.taxonomy_path);
  std::vector<LabelSet> combos;
  if (!o.combos_path.empty()) combos = load_combos(o.combos_path, vocab);
  else if (o.pair_combo_count > 0) combos = pair_combos(vocab.size(), o.pair_combo_count, o.seed);
  Dataset ds;
  if (o.offline) {
    ds = offline_generate(vocab, o.per_class, combos, o.seed);
  } else {
    if (!o.llm) throw ValidationError("online generation needs an LLM endpoint");
    ds = llm_generate(vocab, o.per_class, combos, *o.llm);
  }
  ds.validate();
  save_dataset(ds, o.out_path);
  return ds;
}

// One "label<TAB>count" line per class; a composed sample counts for every label
// it carries.
inline std::string class_counts(const Dataset& ds) {
  std::vector<std::size_t> counts(ds.vocabulary.size(), 0);
  std::size_t multi = 0;
  for (const auto& s : ds.samples) {
    for (auto l : s.labels.indices()) ++counts[l];
    multi += s.labels.size() > 1;
  }
  std::string out;
  for (std::size_t c = 0; c < counts.size(); ++c) out += ds.vocabulary.at(c) + "\t" + std::to_string(counts[c]) + "\n";
  out += "multi-label samples\t" + std::to_string(multi) + "\n";
  out += "total samples\t" + std::to_string(ds.size()) + "\n";
  return out;
}

inline std::vector<EmbeddingVector> embed_dataset(const Dataset& ds, const EmbeddingProvider& provider) {
  std::vector<std::string> texts;
  texts.reserve(ds.size());
  for (const auto& s : ds.samples) texts.push_back(s.text);
  return provider.embed(texts);
}

inline std::vector<EmbeddingVector> run_embed(const std::string& dataset_path, const std::string& taxonomy_path,
                                              const ProviderConfig& provider, const std::string& out_path) {
  const auto ds = load_dataset(dataset_path, resolve_taxonomy(taxonomy_path));
  auto vectors = embed_dataset(ds, *make_provider(provider));
  save_embeddings(vectors, out_path);
  return vectors;
}

// Embeddings from the configured file when present, otherwise computed with
// the provider.
inline std::vector<EmbeddedSample> pipeline_embeddings(const PipelineConfig& c, const Dataset& ds) {
  if (!c.embeddings_path.empty()) return load_embeddings(c.embeddings_path, ds);
  return attach_embeddings(embed_dataset(ds, *make_provider(c.provider)), ds);
}

inline SplitIndices pipeline_split(const PipelineConfig& c, std::size_t n) {
  if (c.holdout_fraction == 0.0) {
    SplitIndices all;
    for (std::size_t i = 0; i < n; ++i) all.train.push_back(i), all.holdout.push_back(i);
    return all;
  }
  return split_indices(n, c.holdout_fraction, c.split_seed);
}

inline std::vector<EmbeddedSample> pick(const std::vector<EmbeddedSample>& all, std::span<const std::size_t> idx) {
  std::vector<EmbeddedSample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all.at(i));
  return out;
}

inline std::string loss_log_jsonl(const TrainResult& r) {
  std::string out;
  auto emit = [&](const char* stage, const std::vector<double>& losses) {
    for (std::size_t e = 0; e < losses.size(); ++e)
      out += ordered_json{{"stage", stage}, {"epoch", e}, {"loss", losses[e]}}.dump() + "\n";
  };
  emit("pretrain", r.pretrain_losses);
  emit("finetune", r.finetune_losses);
  return out;
}

inline TrainResult run_train(const PipelineConfig& c) {
  const auto vocab = resolve_taxonomy(c.taxonomy_path);
  const auto ds = load_dataset(c.dataset_path, vocab);
  const auto all = pipeline_embeddings(c, ds);
  const auto idx = pipeline_split(c, all.size());
  const auto train = pick(all, idx.train);
  ProviderConfig provider = c.provider;
  if (!train.empty()) provider.dim = train.front().embedding.dim();
  auto result = train_model(train, c.train, vocab, provider);
  if (!c.model_path.empty()) save_artifact(result.artifact, c.model_path);
  if (!c.loss_log_path.empty()) detail::write_file(c.loss_log_path, loss_log_jsonl(result));
  return result;
}

struct ScoredSet {
  Matrix scores;
  BinaryMatrix truth;
};

inline ScoredSet score_samples(const ModelArtifact& a, std::span<const EmbeddedSample> samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto m = static_cast<Eigen::Index>(a.vocabulary.size());
  ScoredSet out{Matrix(n, m), BinaryMatrix::Zero(n, m)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.scores.row(i) = score(samples[static_cast<std::size_t>(i)].embedding, a).transpose();
    for (auto l : samples[static_cast<std::size_t>(i)].labels.indices()) out.truth(i, static_cast<Eigen::Index>(l)) = 1;
  }
  return out;
}

// Scores the holdout part of the dataset with the artifact at `model_path`.
inline EvalReport run_eval(const PipelineConfig& c, Averaging averaging = Averaging::micro) {
  const auto artifact = load_artifact(c.model_path);
  const auto ds = load_dataset(c.dataset_path, artifact.vocabulary);
  PipelineConfig effective = c;
  if (effective.embeddings_path.empty()) effective.provider = artifact.provider;
  const auto all = pipeline_embeddings(effective, ds);
  const auto idx = pipeline_split(c, all.size());
  const auto holdout = pick(all, idx.holdout);
  const auto scored = score_samples(artifact, holdout);
  const auto report = evaluate(scored.scores, artifact.decision_threshold, scored.truth, averaging);
  if (!c.report_path.empty()) detail::write_file(c.report_path, report_to_json_string(report));
  return report;
}

}  // namespace dmtc
