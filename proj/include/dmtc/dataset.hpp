#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dmtc/errors.hpp"
#include "dmtc/random.hpp"

namespace dmtc {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace detail

// Sorted, duplicate-free indices into a LabelVocabulary.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  }
  LabelSet(std::initializer_list<std::size_t> indices)
      : LabelSet(std::vector<std::size_t>(indices)) {}

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }

  bool contains(std::size_t i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

  bool intersects(const LabelSet& other) const {
    auto a = indices_.begin();
    auto b = other.indices_.begin();
    while (a != indices_.end() && b != other.indices_.end()) {
      if (*a == *b) return true;
      if (*a < *b) ++a; else ++b;
    }
    return false;
  }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
  friend auto operator<=>(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::size_t> indices_;
};

// The ordered intent taxonomy. Label order is significant and persisted.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  LabelVocabulary(std::vector<std::string> labels,
                  std::map<std::string, std::string> descriptions = {})
      : labels_(std::move(labels)), descriptions_(std::move(descriptions)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (detail::trim(labels_[i]).empty())
        throw ValidationError("taxonomy label " + std::to_string(i) + " is empty");
      if (!index_.emplace(labels_[i], i).second)
        throw ValidationError("duplicate taxonomy label '" + labels_[i] + "'");
    }
    for (const auto& [label, _] : descriptions_) {
      if (!index_.contains(label))
        throw ValidationError("description for unknown label '" + label + "'");
    }
  }

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::map<std::string, std::string>& descriptions() const noexcept {
    return descriptions_;
  }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& at(std::size_t i) const { return labels_.at(i); }

  std::optional<std::size_t> index_of(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Empty string when no description was provided.
  std::string description(std::size_t i) const {
    auto it = descriptions_.find(labels_.at(i));
    return it == descriptions_.end() ? std::string{} : it->second;
  }

  LabelSet make_set(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) {
      auto i = index_of(n);
      if (!i) throw ValidationError("unknown label '" + n + "'");
      idx.push_back(*i);
    }
    return LabelSet(std::move(idx));
  }

  std::vector<std::string> names(const LabelSet& set) const {
    std::vector<std::string> out;
    out.reserve(set.size());
    for (auto i : set.indices()) out.push_back(labels_.at(i));
    return out;
  }

  bool validates(const LabelSet& set) const {
    return set.empty() || set.indices().back() < labels_.size();
  }

  friend bool operator==(const LabelVocabulary& a, const LabelVocabulary& b) {
    return a.labels_ == b.labels_ && a.descriptions_ == b.descriptions_;
  }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::string> descriptions_;
  std::map<std::string, std::size_t> index_;
};

inline ordered_json taxonomy_to_json(const LabelVocabulary& vocab) {
  ordered_json j;
  j["labels"] = vocab.labels();
  ordered_json desc = ordered_json::object();
  for (const auto& label : vocab.labels()) {
    auto it = vocab.descriptions().find(label);
    if (it != vocab.descriptions().end()) desc[label] = it->second;
  }
  j["descriptions"] = std::move(desc);
  return j;
}

template <typename Json>
LabelVocabulary taxonomy_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("labels") || !j["labels"].is_array())
    throw ValidationError("taxonomy must be an object with a 'labels' array");
  std::vector<std::string> labels;
  for (const auto& l : j["labels"]) {
    if (!l.is_string()) throw ValidationError("taxonomy labels must be strings");
    labels.push_back(l.template get<std::string>());
  }
  std::map<std::string, std::string> desc;
  if (j.contains("descriptions")) {
    if (!j["descriptions"].is_object())
      throw ValidationError("taxonomy 'descriptions' must be an object");
    for (auto it = j["descriptions"].begin(); it != j["descriptions"].end(); ++it) {
      if (!it.value().is_string())
        throw ValidationError("description for '" + it.key() + "' must be a string");
      desc[it.key()] = it.value().template get<std::string>();
    }
  }
  return LabelVocabulary(std::move(labels), std::move(desc));
}

inline LabelVocabulary load_taxonomy(const std::filesystem::path& path) {
  return taxonomy_from_json(detail::parse_json_file(path));
}

inline void save_taxonomy(const LabelVocabulary& vocab, const std::filesystem::path& path) {
  detail::write_file(path, taxonomy_to_json(vocab).dump(2) + "\n");
}

// Position i is 1 iff vocabulary label i is a member.
inline std::vector<std::uint8_t> encode_labels(const LabelSet& labels,
                                               const LabelVocabulary& vocab) {
  if (!vocab.validates(labels)) throw ValidationError("label index outside vocabulary");
  std::vector<std::uint8_t> hot(vocab.size(), 0);
  for (auto i : labels.indices()) hot[i] = 1;
  return hot;
}

inline LabelSet decode_labels(std::span<const std::uint8_t> hot) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < hot.size(); ++i)
    if (hot[i]) idx.push_back(i);
  return LabelSet(std::move(idx));
}

struct TextSample {
  std::string text;
  LabelSet labels;

  friend bool operator==(const TextSample&, const TextSample&) = default;
};

struct Dataset {
  LabelVocabulary vocabulary;
  std::vector<TextSample> samples;

  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      if (detail::trim(s.text).empty())
        throw ValidationError("sample " + std::to_string(i) + ": empty text");
      if (s.labels.empty())
        throw ValidationError("sample " + std::to_string(i) + ": no labels");
      if (!vocabulary.validates(s.labels))
        throw ValidationError("sample " + std::to_string(i) + ": label outside vocabulary");
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline std::string sample_to_jsonl(const TextSample& s, const LabelVocabulary& vocab) {
  ordered_json j;
  j["text"] = s.text;
  j["labels"] = vocab.names(s.labels);
  return j.dump();
}

inline std::string dataset_to_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& s : ds.samples) {
    out += sample_to_jsonl(s, ds.vocabulary);
    out += '\n';
  }
  return out;
}

inline Dataset parse_dataset(std::string_view content, const LabelVocabulary& vocab) {
  Dataset ds{vocab, {}};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    const std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (detail::trim(line).empty()) continue;

    const std::string where = "line " + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": malformed record: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string() ||
        !rec.contains("labels") || !rec["labels"].is_array())
      throw ValidationError(where + ": expected {\"text\": string, \"labels\": [string]}");

    TextSample s;
    s.text = rec["text"].get<std::string>();
    if (detail::trim(s.text).empty()) throw ValidationError(where + ": empty text");
    std::vector<std::size_t> idx;
    for (const auto& l : rec["labels"]) {
      if (!l.is_string()) throw ValidationError(where + ": labels must be strings");
      const auto name = l.get<std::string>();
      auto i = vocab.index_of(name);
      if (!i) throw ValidationError(where + ": unknown label '" + name + "'");
      idx.push_back(*i);
    }
    if (idx.empty()) throw ValidationError(where + ": empty label set");
    s.labels = LabelSet(std::move(idx));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, const LabelVocabulary& vocab) {
  return parse_dataset(detail::read_file(path), vocab);
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  detail::write_file(path, dataset_to_jsonl(ds));
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Holdout size is round-half-up(fraction * n), kept within [1, n-1]. Both
// parts list their indices in ascending (original) order.
inline SplitIndices split_indices(std::size_t n, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ValidationError("holdout fraction must lie in (0, 1)");
  if (n < 2) throw ValidationError("split needs at least 2 samples");
  auto k = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n) + 0.5));
  k = std::clamp<std::size_t>(k, 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(order));

  SplitIndices out;
  out.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(out.holdout.begin(), out.holdout.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out{ds.vocabulary, {}};
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(ds.samples.at(i));
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double holdout_fraction,
                                         std::uint64_t seed) {
  const auto idx = split_indices(ds.size(), holdout_fraction, seed);
  return {subset(ds, idx.train), subset(ds, idx.holdout)};
}

}  // namespace dmtc
