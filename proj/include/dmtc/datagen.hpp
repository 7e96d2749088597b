#pragma once
#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dmtc/dataset.hpp"
#include "dmtc/errors.hpp"
#include "dmtc/random.hpp"

namespace dmtc {

// The eight maritime intent classes used as the default taxonomy.
inline LabelVocabulary maritime_taxonomy() {
  std::vector<std::string> labels = {
      "long-range ETA in maritime",
      "arrival time to pilotage boarding ground",
      "direct berthing to port",
      "vehicular waiting time after arrival",
      "ship fuel consumption",
      "berth staying",
      "maritime risk evaluation",
      "vessel trajectory",
  };
  std::map<std::string, std::string> desc = {
      {labels[0], "estimated time of arrival for maritime vessels and ships"},
      {labels[1], "arrival time of a vessel at the pilot boarding ground before entering port waters"},
      {labels[2], "chance that a vessel berths directly at the port without waiting at anchorage"},
      {labels[3], "waiting time at anchorage for a free berth after the vessel arrives"},
      {labels[4], "fuel and bunker consumption such as LSFO or MGO burned by a ship over a period"},
      {labels[5], "berth stay duration and estimated time to unberth for a vessel alongside the quay"},
      {labels[6], "safety and security risks such as piracy, terrorism or storms along a voyage"},
      {labels[7], "predicted route and future positions of a vessel during its voyage"},
  };
  return LabelVocabulary(std::move(labels), std::move(desc));
}

struct PromptTemplate {
  std::string class_label;
  std::string description;
  std::size_t sample_count = 1;

  void validate(const LabelVocabulary& vocab) const {
    if (sample_count < 1) throw ValidationError("prompt sample_count must be >= 1");
    if (!vocab.index_of(class_label))
      throw ValidationError("prompt class label '" + class_label + "' not in taxonomy");
    if (detail::trim(description).empty())
      throw ValidationError("prompt description for '" + class_label + "' is empty");
  }
};

inline std::string build_prompt(const PromptTemplate& t) {
  const std::string n = std::to_string(t.sample_count);
  const bool one = t.sample_count == 1;
  std::string p;
  p += "You are creating training data for a user intent classifier.\n";
  p += "Class label: " + t.class_label + "\n";
  p += "Description: " + t.description + "\n";
  p += "Write exactly " + n + " distinct user " + (one ? "query" : "queries") +
       " that a user could ask for the intent class \"" + t.class_label + "\". ";
  p += "Each query must be realistic, self-contained and about this class only. ";
  p += "Output one query per line with no numbering, no quotes and no extra text.";
  return p;
}

struct GenerationResult {
  std::string class_label;
  std::vector<std::string> texts;
  std::size_t requested = 0;
  std::size_t received = 0;
};

namespace detail {

inline bool is_quote(char c) { return c == '"' || c == '\'' || c == '`'; }

// Strips one leading list marker: digits followed by '.' or ')', or '-', '*'.
inline std::string_view strip_marker(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) return s.substr(i + 1);
  if (!s.empty() && (s[0] == '-' || s[0] == '*')) return s.substr(1);
  return s;
}

inline std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Applies trimming, marker and quote stripping until nothing changes.
inline std::string clean_generated_line(std::string_view line) {
  std::string_view s = line;
  for (;;) {
    std::string_view before = s;
    s = trim(s);
    s = strip_marker(s);
    s = trim(s);
    if (s.size() >= 2 && is_quote(s.front()) && is_quote(s.back())) s = s.substr(1, s.size() - 2);
    if (s == before) break;
  }
  return std::string(s);
}

}  // namespace detail

// Splits an assistant reply into queries. Case-insensitive duplicates keep the
// first occurrence; anything past `requested` is dropped.
inline std::vector<std::string> parse_generation(std::string_view raw, std::size_t requested) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::size_t pos = 0;
  while (pos <= raw.size() && out.size() < requested) {
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    std::string line = detail::clean_generated_line(raw.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    if (seen.insert(detail::lower_ascii(line)).second) out.push_back(std::move(line));
  }
  if (out.empty()) throw RemoteServiceError("generation failure: no parseable queries in reply");
  return out;
}

// Joins the segments of every combo label in vocabulary order.
inline TextSample compose_multilabel(const std::map<std::size_t, std::string>& segments,
                                     const LabelSet& combo, const LabelVocabulary& vocab,
                                     std::string_view separator = " ") {
  if (combo.empty()) throw ValidationError("combo must contain at least one label");
  if (!vocab.validates(combo)) throw ValidationError("combo label outside vocabulary");
  std::string text;
  for (auto i : combo.indices()) {
    auto it = segments.find(i);
    if (it == segments.end())
      throw ValidationError("missing segment for combo label '" + vocab.at(i) + "'");
    if (!text.empty()) text += separator;
    text += it->second;
  }
  return TextSample{std::move(text), combo};
}

// Combos file: JSON array of arrays of label names.
inline std::vector<LabelSet> load_combos(const std::filesystem::path& path,
                                         const LabelVocabulary& vocab) {
  const json j = detail::parse_json_file(path);
  if (!j.is_array()) throw ValidationError("combos file must be a JSON array");
  std::vector<LabelSet> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_array() || j[k].empty())
      throw ValidationError("combo " + std::to_string(k) + " must be a non-empty array");
    out.push_back(vocab.make_set(j[k].get<std::vector<std::string>>()));
  }
  return out;
}

inline void save_combos(const std::vector<LabelSet>& combos, const LabelVocabulary& vocab,
                        const std::filesystem::path& path) {
  json j = json::array();
  for (const auto& c : combos) j.push_back(vocab.names(c));
  detail::write_file(path, j.dump() + "\n");
}

// `count` two-label combos cycling through a seeded order of all label pairs.
inline std::vector<LabelSet> pair_combos(std::size_t label_count, std::size_t count,
                                         std::uint64_t seed) {
  std::vector<LabelSet> pairs;
  for (std::size_t a = 0; a < label_count; ++a)
    for (std::size_t b = a + 1; b < label_count; ++b) pairs.push_back(LabelSet{a, b});
  if (pairs.empty()) return {};
  Rng rng(seed);
  rng.shuffle(std::span(pairs));
  std::vector<LabelSet> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(pairs[k % pairs.size()]);
  return out;
}

namespace detail {

// Slot tables shared by every class; the class-specific part of a query comes
// from its label and description.
struct SlotBank {
  static constexpr std::array<std::string_view, 12> openers = {
      "Please estimate", "Can you tell me", "I need to know", "Predict",
      "Give me",         "What is",         "Check",           "Report",
      "Help me find",    "Quickly estimate", "Could you provide", "Show me"};
  static constexpr std::array<std::string_view, 8> vessel_types = {
      "container ship", "tanker",     "bulk carrier", "LNG carrier",
      "ro-ro vessel",   "cargo ship", "cruise ship",  "chemical tanker"};
  static constexpr std::array<std::string_view, 16> vessel_names = {
      "MOUNT ST",   "ACHERON",       "ACTIVE",       "NYK CONSTELLATION",
      "OOCL POLAND", "ORE ITALIA",   "AETERNUM DREAD", "EVER GIVEN",
      "MAERSK ESSEN", "PACIFIC DAWN", "NORDIC STAR",  "CAPE ORCHID",
      "SEA LION",   "BLUE HORIZON",  "GOLDEN GATE",  "ARCTIC TERN"};
  static constexpr std::array<std::string_view, 3> terminals = {"?", ".", ""};
};

inline bool is_stopword(std::string_view w) {
  static const std::set<std::string_view> stop = {
      "a",  "an", "and", "as",   "at",   "by",    "for", "in",    "is",  "its", "of",
      "on", "or", "the", "their", "to",  "with", "such", "after", "over", "before",
      "without", "during", "along", "that", "this", "be"};
  return stop.contains(w);
}

inline std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !is_stopword(lower_ascii(cur))) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') cur += c; else flush();
  }
  flush();
  return out;
}

// Builds queries for one class. Free-form topics use only the class's
// distinctive words, i.e. words no other class mentions.
class ClassPhraser {
 public:
  ClassPhraser(std::string label, std::string description, const std::set<std::string>& shared)
      : label_(std::move(label)), description_(std::move(description)) {
    for (auto& w : content_words(label_ + " " + description_))
      if (!shared.contains(lower_ascii(w)) &&
          std::find(words_.begin(), words_.end(), w) == words_.end())
        words_.push_back(std::move(w));
  }

  // Either the label itself or 2 to 3 distinctive words in their original order.
  std::string topic(Rng& rng) const {
    if (words_.empty() || rng.index(2) == 0) return "the " + label_;
    const std::size_t len = std::min<std::size_t>(words_.size(), 2 + rng.index(2));
    std::vector<std::size_t> pos(words_.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    rng.shuffle(std::span(pos));
    pos.resize(len);
    std::sort(pos.begin(), pos.end());
    std::string t = "the";
    for (auto i : pos) t += " " + words_[i];
    return t;
  }

  std::string query(Rng& rng) const {
    using B = SlotBank;
    const std::string opener(rng.pick(B::openers));
    const std::string topic_text = topic(rng);
    std::string vessel(rng.pick(B::vessel_types));
    switch (rng.index(4)) {
      case 0: break;
      case 1: vessel += " " + std::string(rng.pick(B::vessel_names)); break;
      case 2: vessel += " " + std::string(rng.pick(B::vessel_names)) + " (IMO 9" + digits(rng, 6) + ")"; break;
      default: vessel += " with MMSI 5" + digits(rng, 8); break;
    }
    const std::string end(rng.pick(B::terminals));
    switch (rng.index(4)) {
      case 0: return opener + " " + topic_text + " for the " + vessel + end;
      case 1: return "For the " + vessel + ", " + lower_first(opener) + " " + topic_text + end;
      case 2: return upper_first(topic_text.substr(4)) + " of the " + vessel + end;
      default: return opener + " " + topic_text + " (" + vessel + ")" + end;
    }
  }

 private:
  static std::string digits(Rng& rng, int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += static_cast<char>('0' + rng.index(10));
    return s;
  }
  static std::string lower_first(std::string s) {
    if (!s.empty() && s != "I need to know")
      s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
  }
  static std::string upper_first(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
  }

  std::string label_;
  std::string description_;
  std::vector<std::string> words_;
};

}  // namespace detail

// Deterministic stand-in for the LLM. Emits `per_class` single-label queries per
// class (vocabulary order), then one composed sample per combo built from fresh
// segments. No query string is emitted twice.
inline Dataset offline_generate(const LabelVocabulary& vocab, std::size_t per_class,
                                const std::vector<LabelSet>& combos, std::uint64_t seed,
                                std::string_view separator = " ") {
  if (per_class < 1) throw ValidationError("per_class must be >= 1");
  Dataset ds{vocab, {}};
  std::vector<std::string> descriptions;
  std::map<std::string, std::size_t> word_classes;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    descriptions.push_back(vocab.description(c).empty() ? vocab.at(c) : vocab.description(c));
    std::set<std::string> own;
    for (const auto& w : detail::content_words(vocab.at(c) + " " + descriptions.back()))
      own.insert(detail::lower_ascii(w));
    for (const auto& w : own) ++word_classes[w];
  }
  std::set<std::string> shared;
  for (const auto& [w, k] : word_classes)
    if (k > 1) shared.insert(w);
  std::vector<detail::ClassPhraser> phrasers;
  std::vector<Rng> rngs;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    phrasers.emplace_back(vocab.at(c), descriptions[c], shared);
    rngs.emplace_back(derive_seed(seed, c));
  }

  std::unordered_set<std::string> used;
  auto fresh = [&](std::size_t c) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      std::string q = phrasers[c].query(rngs[c]);
      if (used.insert(detail::lower_ascii(q)).second) return q;
    }
    throw ValidationError("offline generator exhausted distinct queries for '" + vocab.at(c) + "'");
  };

  for (std::size_t c = 0; c < vocab.size(); ++c)
    for (std::size_t k = 0; k < per_class; ++k)
      ds.samples.push_back(TextSample{fresh(c), LabelSet{c}});

  for (const auto& combo : combos) {
    if (!vocab.validates(combo) || combo.empty())
      throw ValidationError("combo label outside vocabulary");
    std::map<std::size_t, std::string> segments;
    for (auto c : combo.indices()) segments[c] = fresh(c);
    ds.samples.push_back(compose_multilabel(segments, combo, vocab, separator));
  }
  return ds;
}

}  // namespace dmtc
