#pragma once
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dmtc/pipeline.hpp"
#include "dmtc/service.hpp"

namespace dmtc {

namespace detail {

template <typename T>
void override_with(T& target, const std::optional<T>& value) {
  if (value) target = *value;
}

// Embedding provider flags shared by embed, train and eval.
struct ProviderFlags {
  std::optional<std::string> kind;
  std::optional<std::size_t> dim;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> endpoint;
  std::optional<std::string> vectors;
  std::optional<double> timeout;
  std::optional<int> retries;

  void add_to(CLI::App& app) {
    app.add_option("--provider", kind, "Embedding provider")->check(CLI::IsMember({"toy", "file", "http"}));
    app.add_option("--dim", dim, "Embedding dimension");
    app.add_option("--embed-seed", seed, "Hash seed of the toy provider");
    app.add_option("--embed-endpoint", endpoint, "URL of the http embedding provider");
    app.add_option("--vectors", vectors, "Precomputed embedding file for the file provider");
    app.add_option("--embed-timeout", timeout, "Per-request timeout in seconds (http provider)");
    app.add_option("--embed-retries", retries, "Retries per request (http provider)");
  }

  // Applies explicit flags; the file provider also learns which dataset and
  // taxonomy its rows are aligned with.
  void apply(ProviderConfig& p, const std::string& dataset_path, const std::string& taxonomy_path) const {
    if (kind) p.kind = json(*kind).get<ProviderKind>();
    override_with(p.dim, dim);
    override_with(p.seed, seed);
    override_with(p.endpoint, endpoint);
    override_with(p.path, vectors);
    override_with(p.timeout_seconds, timeout);
    override_with(p.max_retries, retries);
    if (p.kind == ProviderKind::file) {
      if (p.dataset_path.empty()) p.dataset_path = dataset_path;
      if (p.taxonomy_path.empty()) p.taxonomy_path = taxonomy_path;
    }
  }
};

struct PipelineFlags {
  std::optional<std::string> config;
  std::optional<std::string> taxonomy;
  std::optional<std::string> dataset;
  std::optional<std::string> embeddings;
  std::optional<double> holdout;
  std::optional<std::uint64_t> split_seed;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "Pipeline config JSON; flags override its values");
    app.add_option("--taxonomy", taxonomy, "Taxonomy JSON (default: built-in maritime taxonomy)");
    app.add_option("--dataset", dataset, "Dataset JSONL");
    app.add_option("--embeddings", embeddings, "Embedding JSONL aligned with the dataset");
    app.add_option("--holdout", holdout, "Holdout fraction, 0 uses every sample for both sides");
    app.add_option("--split-seed", split_seed, "Seed of the train/holdout split");
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config ? load_pipeline_config(*config) : PipelineConfig{};
    override_with(c.taxonomy_path, taxonomy);
    override_with(c.dataset_path, dataset);
    override_with(c.embeddings_path, embeddings);
    override_with(c.holdout_fraction, holdout);
    override_with(c.split_seed, split_seed);
    return c;
  }
};

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(std::string("missing required value for ") + flag);
}

}  // namespace detail

// Parses argv and runs one subcommand. Returns the process exit code; errors
// are reported on `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Data-free multi-label intent classification", "dmtc"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  GenerateOptions g;
  g.offline = false;
  std::optional<std::string> llm_endpoint, llm_model, llm_token_env;
  std::optional<double> llm_timeout, llm_temperature;
  std::optional<int> llm_retries;
  gen->add_option("--taxonomy", g.taxonomy_path, "Taxonomy JSON (default: built-in maritime taxonomy)");
  gen->add_flag("--offline", g.offline, "Use the deterministic offline generator instead of an LLM");
  gen->add_option("--per-class", g.per_class, "Single-label queries per class");
  gen->add_option("--combos", g.combos_path, "JSON array of label-name arrays to compose");
  gen->add_option("--pair-combos", g.pair_combo_count, "Random two-label combos when --combos is absent");
  gen->add_option("--seed", g.seed, "Generator seed");
  gen->add_option("--out", g.out_path, "Output dataset JSONL")->required();
  gen->add_option("--llm-endpoint", llm_endpoint, "Chat-completions URL");
  gen->add_option("--llm-model", llm_model, "Model name sent to the endpoint");
  gen->add_option("--llm-token-env", llm_token_env, "Environment variable holding the bearer token");
  gen->add_option("--llm-timeout", llm_timeout, "Per-request timeout in seconds");
  gen->add_option("--llm-retries", llm_retries, "Retries per request");
  gen->add_option("--llm-temperature", llm_temperature, "Sampling temperature");

  // embed
  auto* emb = app.add_subcommand("embed", "Embed every dataset row");
  detail::PipelineFlags emb_flags;
  detail::ProviderFlags emb_provider;
  std::string emb_out;
  emb_flags.add_to(*emb);
  emb_provider.add_to(*emb);
  emb->add_option("--out", emb_out, "Output embedding JSONL")->required();

  // train
  auto* tr = app.add_subcommand("train", "Pretrain the projection and fine-tune the classifier");
  detail::PipelineFlags tr_flags;
  detail::ProviderFlags tr_provider;
  std::optional<std::string> tr_out, tr_loss_log, tr_loss, tr_mode, tr_rule;
  std::optional<std::uint64_t> tr_seed;
  std::optional<std::size_t> tr_epochs_pre, tr_epochs_fine, tr_batch;
  std::optional<double> tr_lr_pre, tr_lr_fine, tr_top_p, tr_clip;
  tr_flags.add_to(*tr);
  tr_provider.add_to(*tr);
  tr->add_option("--out", tr_out, "Output model artifact");
  tr->add_option("--loss-log", tr_loss_log, "Per-epoch loss log JSONL");
  tr->add_option("--loss", tr_loss, "Pretraining loss")->check(CLI::IsMember({"ofc", "oc", "cs"}));
  tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--epochs-pretrain", tr_epochs_pre);
  tr->add_option("--epochs-finetune", tr_epochs_fine);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--lr-pretrain", tr_lr_pre);
  tr->add_option("--lr-finetune", tr_lr_fine);
  tr->add_option("--grad-clip", tr_clip, "Global gradient norm cap, 0 disables");
  tr->add_option("--top-p", tr_top_p, "Percentage of refined pairs kept by mining");
  tr->add_option("--mining-mode", tr_mode)->check(CLI::IsMember({"literal", "standard"}));
  tr->add_option("--positive-rule", tr_rule)->check(CLI::IsMember({"exact", "overlap"}));

  // eval
  auto* ev = app.add_subcommand("eval", "Score the holdout split and write a report");
  detail::PipelineFlags ev_flags;
  std::optional<std::string> ev_model, ev_report;
  std::string ev_averaging = "micro";
  std::string ev_name = "DMTC";
  ev_flags.add_to(*ev);
  ev->add_option("--model", ev_model, "Model artifact");
  ev->add_option("--report", ev_report, "Output report JSON");
  ev->add_option("--averaging", ev_averaging, "Precision/recall/F1 averaging")
      ->check(CLI::IsMember({"micro", "macro"}));
  ev->add_option("--name", ev_name, "Row label of the printed table");

  // predict
  auto* pr = app.add_subcommand("predict", "Classify one query");
  std::string pr_model, pr_text;
  pr->add_option("--model", pr_model, "Model artifact")->required();
  pr->add_option("--text", pr_text, "Query text")->required();

  // serve
  auto* sv = app.add_subcommand("serve", "Serve POST /classify and GET /health");
  std::string sv_model, sv_host = "127.0.0.1";
  int sv_port = 8080;
  sv->add_option("--model", sv_model, "Model artifact")->required();
  sv->add_option("--host", sv_host, "Bind address");
  sv->add_option("--port", sv_port, "Bind port, 0 picks a free one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      out << sub->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "dmtc: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (gen->parsed()) {
      if (!g.offline) {
        LLMClientConfig llm;
        detail::override_with(llm.endpoint_url, llm_endpoint);
        detail::override_with(llm.model_name, llm_model);
        detail::override_with(llm.auth_token_env, llm_token_env);
        detail::override_with(llm.timeout_seconds, llm_timeout);
        detail::override_with(llm.max_retries, llm_retries);
        detail::override_with(llm.temperature, llm_temperature);
        if (llm.endpoint_url.empty()) throw ValidationError("online generation needs --llm-endpoint (or pass --offline)");
        g.llm = llm;
      }
      out << class_counts(run_generate(g));
    } else if (emb->parsed()) {
      const auto c = emb_flags.resolve();
      ProviderConfig provider = c.provider;
      emb_provider.apply(provider, c.dataset_path, c.taxonomy_path);
      detail::require(c.dataset_path, "--dataset");
      const auto vectors = run_embed(c.dataset_path, c.taxonomy_path, provider, emb_out);
      out << "embedded " << vectors.size() << " rows (dim " << (vectors.empty() ? provider.dim : vectors.front().dim())
          << ")\n";
    } else if (tr->parsed()) {
      auto c = tr_flags.resolve();
      tr_provider.apply(c.provider, c.dataset_path, c.taxonomy_path);
      detail::override_with(c.model_path, tr_out);
      detail::override_with(c.loss_log_path, tr_loss_log);
      auto& t = c.train;
      if (tr_loss) t.loss_kind = json(*tr_loss).get<LossKind>();
      if (tr_mode) t.mining.mode = json(*tr_mode).get<MiningMode>();
      if (tr_rule) t.mining.positive_rule = json(*tr_rule).get<PositiveRule>();
      detail::override_with(t.seed, tr_seed);
      detail::override_with(t.epochs_pretrain, tr_epochs_pre);
      detail::override_with(t.epochs_finetune, tr_epochs_fine);
      detail::override_with(t.batch_size, tr_batch);
      detail::override_with(t.lr_pretrain, tr_lr_pre);
      detail::override_with(t.lr_finetune, tr_lr_fine);
      detail::override_with(t.grad_clip_norm, tr_clip);
      detail::override_with(t.mining.p, tr_top_p);
      detail::require(c.dataset_path, "--dataset");
      detail::require(c.model_path, "--out");
      const auto r = run_train(c);
      out << "pretrain loss " << (r.pretrain_losses.empty() ? 0.0 : r.pretrain_losses.front()) << " -> "
          << (r.pretrain_losses.empty() ? 0.0 : r.pretrain_losses.back()) << "\n"
          << "finetune loss " << (r.finetune_losses.empty() ? 0.0 : r.finetune_losses.front()) << " -> "
          << (r.finetune_losses.empty() ? 0.0 : r.finetune_losses.back()) << "\n"
          << "model " << model_version(r.artifact) << " written to " << c.model_path << "\n";
    } else if (ev->parsed()) {
      auto c = ev_flags.resolve();
      detail::override_with(c.model_path, ev_model);
      detail::override_with(c.report_path, ev_report);
      detail::require(c.model_path, "--model");
      detail::require(c.dataset_path, "--dataset");
      const auto report = run_eval(c, ev_averaging == "macro" ? Averaging::macro : Averaging::micro);
      out << report_table(report, ev_name);
    } else if (pr->parsed()) {
      out << run_predict(std::filesystem::path(pr_model), pr_text);
    } else if (sv->parsed()) {
      serve(load_artifact(sv_model), sv_host, sv_port, [&](int port) {
        err << "dmtc: serving on http://" << sv_host << ":" << port << "\n";
      });
    }
  } catch (const RemoteServiceError& e) {
    err << "dmtc: remote service error: " << e.what() << "\n";
    return kExitRemote;
  } catch (const IoError& e) {
    err << "dmtc: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "dmtc: invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    err << "dmtc: invalid input: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace dmtc
