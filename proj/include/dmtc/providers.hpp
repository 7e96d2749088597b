#pragma once
#include <memory>
#include <string>
#include <vector>

#include "dmtc/embedding.hpp"
#include "dmtc/http.hpp"

namespace dmtc {

// POST {"texts": [...]} -> {"vectors": [[...], ...]}, order preserved.
inline std::vector<EmbeddingVector> embed_remote(std::span<const std::string> texts,
                                                 const ProviderConfig& config) {
  if (config.kind != ProviderKind::http) throw ValidationError("embed_remote needs an http provider");
  if (texts.empty()) return {};
  nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  RetryPolicy policy{config.timeout_seconds, config.max_retries, 200};
  const auto reply = post_json(config.endpoint, body, {}, policy);
  if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array())
    throw RemoteServiceError("embedding reply lacks a 'vectors' array");
  const auto& rows = reply["vectors"];
  if (rows.size() != texts.size())
    throw RemoteServiceError("embedding reply has " + std::to_string(rows.size()) + " vectors for " +
                             std::to_string(texts.size()) + " texts");
  std::vector<EmbeddingVector> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> v;
    try {
      v = rows[i].get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw RemoteServiceError("embedding reply vector " + std::to_string(i) + " is not numeric");
    }
    const std::size_t expected = out.empty() ? config.dim : out.front().dim();
    if (v.size() != expected)
      throw RemoteServiceError("embedding reply vector " + std::to_string(i) + " has dim " +
                               std::to_string(v.size()) + ", expected " + std::to_string(expected));
    out.push_back(l2_normalize(v));
  }
  return out;
}

class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
    parse_url(config_.endpoint);
  }
  std::size_t dim() const override { return config_.dim; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    return embed_remote(texts, config_);
  }

 private:
  ProviderConfig config_;
};

inline std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  config.validate();
  switch (config.kind) {
    case ProviderKind::toy:
      return std::make_unique<ToyProvider>(config.dim, config.seed);
    case ProviderKind::http:
      return std::make_unique<RemoteProvider>(config);
    case ProviderKind::file: {
      if (config.dataset_path.empty() || config.taxonomy_path.empty())
        throw ValidationError("file provider needs dataset_path and taxonomy_path to align rows");
      const auto vocab = load_taxonomy(config.taxonomy_path);
      const auto ds = load_dataset(config.dataset_path, vocab);
      auto vectors = read_embedding_file(config.path);
      if (!vectors.empty() && vectors.front().dim() != config.dim)
        throw ValidationError("embedding file dim " + std::to_string(vectors.front().dim()) +
                              " differs from configured dim " + std::to_string(config.dim));
      return std::make_unique<FileProvider>(ds, std::move(vectors));
    }
  }
  throw ValidationError("unknown provider kind");
}

}  // namespace dmtc
