#pragma once
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dmtc/dataset.hpp"
#include "dmtc/errors.hpp"
#include "dmtc/random.hpp"

namespace dmtc {

// A unit-norm embedding. Only l2_normalize and the providers construct one
// from raw values.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> view() const noexcept { return values; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

inline EmbeddingVector l2_normalize(std::span<const double> v) {
  if (v.empty()) throw DegenerateError("degenerate embedding: empty vector");
  double sq = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError("embedding contains a non-finite value");
    sq += x * x;
  }
  if (sq == 0.0) throw DegenerateError("degenerate embedding: zero vector");
  const double inv = 1.0 / std::sqrt(sq);
  EmbeddingVector out;
  out.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = v[i] * inv;
  return out;
}

// Signed-hash bag of character trigrams over the raw bytes, bracketed by
// boundary markers so every text yields at least one trigram.
inline EmbeddingVector toy_embed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw ValidationError("toy embedding dim must be >= 2");
  std::string padded;
  padded.reserve(text.size() + 3);
  padded += '\x02';
  padded += text;
  padded += '\x03';
  while (padded.size() < 3) padded += '\x03';

  const std::uint64_t basis = mix64(seed ^ 0xCBF29CE484222325ULL);
  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = mix64(fnv1a64(std::string_view(padded).substr(i, 3), basis));
    acc[h % dim] += ((h >> 40) & 1U) ? 1.0 : -1.0;
  }
  bool any = false;
  for (double x : acc) any = any || x != 0.0;
  // Colliding trigrams with opposite signs can cancel; fall back to one
  // whole-text bucket so the map never fails.
  if (!any) {
    const std::uint64_t h = mix64(fnv1a64(padded, basis));
    acc[h % dim] = 1.0;
  }
  return l2_normalize(acc);
}

struct EmbeddedSample {
  EmbeddingVector embedding;
  LabelSet labels;
  std::size_t source_index = 0;
};

// Reads `{"index": i, "vector": [...]}` rows; vectors come back normalized.
inline std::vector<EmbeddingVector> read_embedding_file(const std::filesystem::path& path) {
  const std::string content = detail::read_file(path);
  std::vector<EmbeddingVector> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string::npos) nl = content.size();
    const std::string_view line(content.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::size_t row = rows.size();
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("embedding row " + std::to_string(row) + " (line " +
                            std::to_string(line_no) + "): malformed: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("index") || !rec.contains("vector") ||
        !rec["vector"].is_array() || !rec["index"].is_number_integer())
      throw ValidationError("embedding row " + std::to_string(row) +
                            ": expected {\"index\": int, \"vector\": [float]}");
    if (rec["index"].get<long long>() != static_cast<long long>(row))
      throw ValidationError("embedding row " + std::to_string(row) + ": index " +
                            rec["index"].dump() + " out of sequence");
    std::vector<double> v;
    v.reserve(rec["vector"].size());
    for (const auto& x : rec["vector"]) {
      if (!x.is_number()) throw ValidationError("embedding row " + std::to_string(row) + ": non-numeric entry");
      v.push_back(x.get<double>());
    }
    if (!rows.empty() && v.size() != rows.front().dim())
      throw ValidationError("dimension mismatch at embedding row " + std::to_string(row) + ": got " +
                            std::to_string(v.size()) + ", expected " + std::to_string(rows.front().dim()));
    rows.push_back(l2_normalize(v));
  }
  return rows;
}

inline std::vector<EmbeddedSample> attach_embeddings(std::vector<EmbeddingVector> vectors,
                                                     const Dataset& dataset) {
  if (vectors.size() != dataset.size())
    throw ValidationError("embedding rows (" + std::to_string(vectors.size()) +
                          ") do not align with dataset rows (" + std::to_string(dataset.size()) + ")");
  std::vector<EmbeddedSample> out;
  out.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i)
    out.push_back(EmbeddedSample{std::move(vectors[i]), dataset.samples[i].labels, i});
  return out;
}

inline std::vector<EmbeddedSample> load_embeddings(const std::filesystem::path& path,
                                                   const Dataset& dataset) {
  return attach_embeddings(read_embedding_file(path), dataset);
}

inline std::string embeddings_to_jsonl(std::span<const EmbeddingVector> vectors) {
  std::string out;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    ordered_json j;
    j["index"] = i;
    j["vector"] = vectors[i].values;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void save_embeddings(std::span<const EmbeddingVector> vectors,
                            const std::filesystem::path& path) {
  detail::write_file(path, embeddings_to_jsonl(vectors));
}

enum class ProviderKind { file, http, toy };

NLOHMANN_JSON_SERIALIZE_ENUM(ProviderKind, {
    {ProviderKind::file, "file"},
    {ProviderKind::http, "http"},
    {ProviderKind::toy, "toy"},
})

struct ProviderConfig {
  ProviderKind kind = ProviderKind::toy;
  std::size_t dim = 256;
  std::string path;      // file: embedding rows aligned with `dataset_path`
  std::string dataset_path;
  std::string taxonomy_path;
  std::string endpoint;  // http
  std::uint64_t seed = 0;  // toy
  double timeout_seconds = 30.0;
  int max_retries = 2;

  void validate() const {
    if (dim < 2) throw ValidationError("provider dim must be >= 2");
    if (kind == ProviderKind::file && path.empty())
      throw ValidationError("file provider needs an embeddings path");
    if (kind == ProviderKind::http && endpoint.empty())
      throw ValidationError("http provider needs an endpoint");
  }
};

inline void to_json(ordered_json& j, const ProviderConfig& c) {
  j = ordered_json{{"kind", c.kind}, {"dim", c.dim}, {"seed", c.seed}};
  if (!c.path.empty()) j["path"] = c.path;
  if (!c.dataset_path.empty()) j["dataset_path"] = c.dataset_path;
  if (!c.taxonomy_path.empty()) j["taxonomy_path"] = c.taxonomy_path;
  if (!c.endpoint.empty()) j["endpoint"] = c.endpoint;
  j["timeout_seconds"] = c.timeout_seconds;
  j["max_retries"] = c.max_retries;
}

template <typename Json>
void from_json(const Json& j, ProviderConfig& c) {
  c.kind = j.at("kind").template get<ProviderKind>();
  c.dim = j.at("dim").template get<std::size_t>();
  c.seed = j.value("seed", std::uint64_t{0});
  c.path = j.value("path", std::string{});
  c.dataset_path = j.value("dataset_path", std::string{});
  c.taxonomy_path = j.value("taxonomy_path", std::string{});
  c.endpoint = j.value("endpoint", std::string{});
  c.timeout_seconds = j.value("timeout_seconds", 30.0);
  c.max_retries = j.value("max_retries", 2);
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const = 0;
};

class ToyProvider final : public EmbeddingProvider {
 public:
  ToyProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ < 2) throw ValidationError("toy embedding dim must be >= 2");
  }
  std::size_t dim() const override { return dim_; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(toy_embed(t, dim_, seed_));
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Serves precomputed vectors. Only texts present in the aligned dataset can be
// embedded.
class FileProvider final : public EmbeddingProvider {
 public:
  FileProvider(const Dataset& dataset, std::vector<EmbeddingVector> vectors) {
    if (vectors.size() != dataset.size())
      throw ValidationError("embedding rows (" + std::to_string(vectors.size()) +
                            ") do not align with dataset rows (" + std::to_string(dataset.size()) + ")");
    dim_ = vectors.empty() ? 0 : vectors.front().dim();
    for (std::size_t i = 0; i < vectors.size(); ++i)
      by_text_.try_emplace(dataset.samples[i].text, std::move(vectors[i]));
  }
  std::size_t dim() const override { return dim_; }
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto it = by_text_.find(t);
      if (it == by_text_.end())
        throw ValidationError("text not present in the precomputed embedding file: '" + t + "'");
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, EmbeddingVector> by_text_;
};

}  // namespace dmtc
