#pragma once
#include <cstddef>
#include <cstdint>

#include "dmtc/loss.hpp"
#include "dmtc/mining.hpp"

namespace dmtc {

struct TrainConfig {
  double lr_pretrain = 0.05;
  double lr_finetune = 0.5;
  double momentum = 0.9;
  // Global L2 cap on each step's gradient; 0 disables. Keeps the log terms of
  // the focal loss from throwing every projection past the margin in one step.
  double grad_clip_norm = 1.0;
  std::size_t epochs_pretrain = 30;
  std::size_t epochs_finetune = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  double decision_threshold = 0.5;
  LossKind loss_kind = LossKind::ofc;
  MiningConfig mining;
  OFCConfig ofc;
  std::size_t d_hidden = 128;
  std::size_t d_proj = 128;

  void validate() const {
    if (!(lr_pretrain > 0.0) || !(lr_finetune > 0.0)) throw ValidationError("learning rates must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
    if (!(grad_clip_norm >= 0.0)) throw ValidationError("grad_clip_norm must be >= 0");
    if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
    if (!(decision_threshold > 0.0 && decision_threshold < 1.0))
      throw ValidationError("decision_threshold must lie in (0, 1)");
    if (d_hidden < 1 || d_proj < 2) throw ValidationError("head dims must be positive (d_proj >= 2)");
    mining.validate();
    ofc.validate();
  }
};

inline void to_json(ordered_json& j, const TrainConfig& c) {
  j = ordered_json{{"lr_pretrain", c.lr_pretrain},
                   {"lr_finetune", c.lr_finetune},
                   {"momentum", c.momentum},
                   {"grad_clip_norm", c.grad_clip_norm},
                   {"epochs_pretrain", c.epochs_pretrain},
                   {"epochs_finetune", c.epochs_finetune},
                   {"batch_size", c.batch_size},
                   {"seed", c.seed},
                   {"decision_threshold", c.decision_threshold},
                   {"loss_kind", c.loss_kind},
                   {"mining", c.mining},
                   {"ofc", c.ofc},
                   {"d_hidden", c.d_hidden},
                   {"d_proj", c.d_proj}};
}

// Missing keys keep their defaults, so partial config files are accepted.
template <typename Json>
void from_json(const Json& j, TrainConfig& c) {
  const TrainConfig d;
  c.lr_pretrain = j.value("lr_pretrain", d.lr_pretrain);
  c.lr_finetune = j.value("lr_finetune", d.lr_finetune);
  c.momentum = j.value("momentum", d.momentum);
  c.grad_clip_norm = j.value("grad_clip_norm", d.grad_clip_norm);
  c.epochs_pretrain = j.value("epochs_pretrain", d.epochs_pretrain);
  c.epochs_finetune = j.value("epochs_finetune", d.epochs_finetune);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.seed = j.value("seed", d.seed);
  c.decision_threshold = j.value("decision_threshold", d.decision_threshold);
  c.loss_kind = j.value("loss_kind", d.loss_kind);
  if (j.contains("mining")) j.at("mining").get_to(c.mining);
  if (j.contains("ofc")) j.at("ofc").get_to(c.ofc);
  c.d_hidden = j.value("d_hidden", d.d_hidden);
  c.d_proj = j.value("d_proj", d.d_proj);
}

}  // namespace dmtc
