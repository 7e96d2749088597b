#pragma once
#include <cstdlib>
#include <future>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dmtc/datagen.hpp"
#include "dmtc/http.hpp"

namespace dmtc {

struct LLMClientConfig {
  std::string endpoint_url;
  std::string model_name;
  std::string auth_token_env;  // name of the variable holding the bearer token
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.7;
  int initial_backoff_ms = 500;

  void validate() const {
    if (endpoint_url.empty()) throw ValidationError("LLM endpoint URL is empty");
    if (timeout_seconds <= 0) throw ValidationError("LLM timeout must be positive");
    if (max_retries < 0) throw ValidationError("LLM max_retries must be >= 0");
    parse_url(endpoint_url);
  }
};

// Chat-completion client. Holds no connection state; every call opens its own
// connection, so one instance may serve concurrent tasks.
class ChatClient {
 public:
  explicit ChatClient(LLMClientConfig config) : config_(std::move(config)) { config_.validate(); }

  std::string complete(const std::string& prompt) const {
    nlohmann::json body = {
        {"model", config_.model_name},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", config_.temperature},
    };
    httplib::Headers headers;
    if (!config_.auth_token_env.empty()) {
      if (const char* token = std::getenv(config_.auth_token_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    RetryPolicy policy{config_.timeout_seconds, config_.max_retries, config_.initial_backoff_ms};
    const auto reply = post_json(config_.endpoint_url, body, headers, policy);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw RemoteServiceError("chat reply lacks choices[0].message.content");
    }
  }

  const LLMClientConfig& config() const noexcept { return config_; }

 private:
  LLMClientConfig config_;
};

inline GenerationResult generate_class(const ChatClient& client, const PromptTemplate& t) {
  GenerationResult r;
  r.class_label = t.class_label;
  r.requested = t.sample_count;
  r.texts = parse_generation(client.complete(build_prompt(t)), t.sample_count);
  r.received = r.texts.size();
  if (r.received < r.requested)
    detail::log_line("[dmtc] warning: class '" + t.class_label + "' received " + std::to_string(r.received) +
                     " of " + std::to_string(r.requested) + " requested queries");
  return r;
}

// LLM-backed counterpart of offline_generate. Each class is asked for
// per_class queries plus one extra per combo it appears in; the extras become
// the combo segments. Requests run concurrently, results merge in vocabulary
// order.
inline Dataset llm_generate(const LabelVocabulary& vocab, std::size_t per_class,
                            const std::vector<LabelSet>& combos, const LLMClientConfig& config,
                            std::string_view separator = " ") {
  if (per_class < 1) throw ValidationError("per_class must be >= 1");
  ChatClient client(config);
  std::vector<std::size_t> extra(vocab.size(), 0);
  for (const auto& combo : combos) {
    if (combo.empty() || !vocab.validates(combo)) throw ValidationError("combo label outside vocabulary");
    for (auto c : combo.indices()) ++extra[c];
  }

  std::vector<std::future<GenerationResult>> pending;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    PromptTemplate t{vocab.at(c), vocab.description(c), per_class + extra[c]};
    if (t.description.empty()) t.description = vocab.at(c);
    t.validate(vocab);
    pending.push_back(std::async(std::launch::async, [&client, t] { return generate_class(client, t); }));
  }
  std::vector<GenerationResult> results;
  for (auto& f : pending) results.push_back(f.get());

  Dataset ds{vocab, {}};
  std::vector<std::size_t> cursor(vocab.size(), 0);
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    const auto& texts = results[c].texts;
    const std::size_t singles = std::min(per_class, texts.size());
    for (std::size_t k = 0; k < singles; ++k) ds.samples.push_back(TextSample{texts[k], LabelSet{c}});
    cursor[c] = singles;
  }
  for (const auto& combo : combos) {
    std::map<std::size_t, std::string> segments;
    for (auto c : combo.indices()) {
      const auto& texts = results[c].texts;
      if (texts.empty()) throw RemoteServiceError("no generations for '" + vocab.at(c) + "'");
      // Reuse from the start when the model returned too few fresh segments.
      std::size_t k = cursor[c] < texts.size() ? cursor[c]++ : (cursor[c]++ % texts.size());
      segments[c] = texts[k];
    }
    ds.samples.push_back(compose_multilabel(segments, combo, vocab, separator));
  }
  return ds;
}

}  // namespace dmtc
