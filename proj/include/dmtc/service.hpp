#pragma once
#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "httplib.h"
// <resolv.h> defines `_res` as a macro, which breaks Eigen parameter names.
#undef _res

#include "dmtc/artifact.hpp"
#include "dmtc/providers.hpp"

namespace dmtc {

struct HttpReply {
  int status = 200;
  std::string body;
};

// Read-only classifier over an immutable artifact. The embedding provider is
// the one recorded in the artifact.
class ClassifyService {
 public:
  explicit ClassifyService(ModelArtifact artifact)
      : artifact_(std::move(artifact)),
        provider_(make_provider(artifact_.provider)),
        version_(model_version(artifact_)) {
    if (provider_->dim() != artifact_.embed_dim)
      throw ValidationError("provider dim does not match the model embed_dim");
  }

  const ModelArtifact& artifact() const noexcept { return artifact_; }
  const std::string& version() const noexcept { return version_; }

  // {"labels": [...], "scores": {label: p, ...}, "model_version": "..."} and a
  // trailing newline. predict prints exactly this string.
  std::string classify_body(const std::string& text) const {
    const std::string texts[] = {text};
    const auto vectors = provider_->embed(texts);
    const auto pred = predict(vectors.at(0), artifact_);
    ordered_json scores = ordered_json::object();
    for (std::size_t i = 0; i < pred.scores.size(); ++i) scores[artifact_.vocabulary.at(i)] = pred.scores[i];
    ordered_json j;
    j["labels"] = artifact_.vocabulary.names(pred.labels);
    j["scores"] = std::move(scores);
    j["model_version"] = version_;
    return j.dump() + "\n";
  }

  HttpReply handle_classify(const std::string& body) const {
    json req;
    try {
      req = json::parse(body);
    } catch (const json::parse_error&) {
      return {400, error_body("request body is not valid JSON")};
    }
    if (!req.is_object() || !req.contains("text") || !req["text"].is_string())
      return {400, error_body("expected {\"text\": string}")};
    const auto text = req["text"].get<std::string>();
    if (detail::trim(text).empty()) return {422, error_body("text is empty")};
    try {
      return {200, classify_body(text)};
    } catch (const std::exception& e) {
      return {500, error_body(e.what())};
    }
  }

  std::string health_body() const {
    return ordered_json{{"status", "ok"}, {"model_version", version_}}.dump() + "\n";
  }

  void mount(httplib::Server& server) const {
    server.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
      const auto reply = handle_classify(req.body);
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    });
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content(health_body(), "application/json");
    });
  }

 private:
  static std::string error_body(const std::string& msg) { return ordered_json{{"error", msg}}.dump() + "\n"; }

  ModelArtifact artifact_;
  std::unique_ptr<EmbeddingProvider> provider_;
  std::string version_;
};

inline std::string run_predict(const ModelArtifact& artifact, const std::string& text) {
  if (detail::trim(text).empty()) throw ValidationError("text is empty");
  return ClassifyService(artifact).classify_body(text);
}

inline std::string run_predict(const std::filesystem::path& model_path, const std::string& text) {
  return run_predict(load_artifact(model_path), text);
}

// Blocks until the server stops. `on_ready` runs once the socket is bound.
inline void serve(const ModelArtifact& artifact, const std::string& host, int port,
                  const std::function<void(int bound_port)>& on_ready = {}) {
  const ClassifyService service(artifact);
  httplib::Server server;
  service.mount(server);
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  if (on_ready) on_ready(bound);
  if (!server.listen_after_bind()) throw IoError("server on " + host + ":" + std::to_string(bound) + " stopped unexpectedly");
}

}  // namespace dmtc
