#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "dmtc/artifact.hpp"
#include "dmtc/config.hpp"
#include "dmtc/embedding.hpp"
#include "dmtc/loss.hpp"
#include "dmtc/mining.hpp"
#include "dmtc/model.hpp"

namespace dmtc {

namespace detail {

inline void sgd_momentum(Matrix& param, Matrix& velocity, const Matrix& grad, double lr, double mu) {
  velocity = mu * velocity - lr * grad;
  param += velocity;
}

inline void sgd_momentum(Vector& param, Vector& velocity, const Vector& grad, double lr, double mu) {
  velocity = mu * velocity - lr * grad;
  param += velocity;
}

inline void sgd_momentum(ProjectionHead& p, ProjectionHead& v, const ProjectionHead& g, double lr, double mu) {
  sgd_momentum(p.w1, v.w1, g.w1, lr, mu);
  sgd_momentum(p.b1, v.b1, g.b1, lr, mu);
  sgd_momentum(p.w2, v.w2, g.w2, lr, mu);
  sgd_momentum(p.b2, v.b2, g.b2, lr, mu);
}

inline void sgd_momentum(ClassifierHead& p, ClassifierHead& v, const ClassifierHead& g, double lr, double mu) {
  sgd_momentum(p.w, v.w, g.w, lr, mu);
  sgd_momentum(p.b, v.b, g.b, lr, mu);
}

inline double squared_norm(const ProjectionHead& g) {
  return g.w1.squaredNorm() + g.b1.squaredNorm() + g.w2.squaredNorm() + g.b2.squaredNorm();
}

inline double squared_norm(const ClassifierHead& g) { return g.w.squaredNorm() + g.b.squaredNorm(); }

inline void scale(ProjectionHead& g, double f) {
  g.w1 *= f;
  g.b1 *= f;
  g.w2 *= f;
  g.b2 *= f;
}

inline void scale(ClassifierHead& g, double f) {
  g.w *= f;
  g.b *= f;
}

// Rescales the gradients together so their joint L2 norm is at most `cap`.
template <typename... Grads>
void clip_global_norm(double cap, Grads&... grads) {
  if (cap <= 0.0) return;
  const double norm = std::sqrt((squared_norm(grads) + ...));
  if (norm > cap) (scale(grads, cap / norm), ...);
}

// Seeded permutation of [0, n), split into consecutive batches.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                           std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return batches;
}

inline Matrix stack_inputs(std::span<const EmbeddedSample> samples, std::span<const std::size_t> idx) {
  if (idx.empty()) return {};
  Matrix x(static_cast<Eigen::Index>(samples[idx[0]].embedding.dim()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = as_vector(samples[idx[k]].embedding.view());
  return x;
}

}  // namespace detail

// Result of one contrastive batch: loss, parameter gradient and the pairs the
// loss was evaluated on.
struct ContrastiveBatch {
  double loss = 0.0;
  ProjectionHead grad;
  PairSet pairs;
  PairSelection selection;
};

// Columns of `inputs` are batch members. Throws NoPairsError when the batch
// yields no usable pairs.
inline ContrastiveBatch contrastive_batch(const ProjectionHead& head, const Matrix& inputs,
                                          std::span<const LabelSet> labels, const TrainConfig& config) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  std::vector<ProjectionForward> fwd;
  fwd.reserve(n);
  for (std::size_t i = 0; i < n; ++i) fwd.push_back(project_forward(head, inputs.col(static_cast<Eigen::Index>(i))));

  ContrastiveBatch out;
  out.pairs = build_pairs(labels, config.mining.positive_rule);
  auto sim = [&](std::size_t a, std::size_t b) { return std::clamp(fwd[a].z.dot(fwd[b].z), -1.0, 1.0); };
  const SimilarityTable table = similarity_table(out.pairs, sim);
  out.selection = select_pairs(config.loss_kind, table, config.mining);
  const LossOutput loss = selection_loss(out.selection, config.ofc);
  out.loss = loss.value;

  std::vector<Vector> dz(n, Vector::Zero(head.d_proj()));
  for (const auto& g : loss.grad_wrt_sim) {
    const auto& p = out.pairs.pairs[g.pair_index];
    dz[p.a] += g.d_sim * fwd[p.b].z;
    dz[p.b] += g.d_sim * fwd[p.a].z;
  }
  out.grad = ProjectionHead::zeros_like(head);
  for (std::size_t i = 0; i < n; ++i)
    project_backward(head, inputs.col(static_cast<Eigen::Index>(i)), fwd[i], dz[i], out.grad);
  return out;
}

struct PretrainResult {
  ProjectionHead head;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

inline PretrainResult pretrain(std::span<const EmbeddedSample> train, const TrainConfig& config) {
  config.validate();
  if (train.size() < 2) throw ValidationError("pretrain needs at least 2 samples");
  std::set<LabelSet> distinct;
  for (const auto& s : train) distinct.insert(s.labels);
  if (distinct.size() < 2) throw ValidationError("pretrain needs at least 2 distinct label sets");
  const std::size_t d_in = train.front().embedding.dim();
  for (const auto& s : train)
    if (s.embedding.dim() != d_in) throw ValidationError("pretrain: inconsistent embedding dims");

  PretrainResult out;
  out.head = init_projection(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(config.d_hidden),
                             static_cast<Eigen::Index>(config.d_proj), config.seed);
  ProjectionHead velocity = ProjectionHead::zeros_like(out.head);

  for (std::size_t epoch = 0; epoch < config.epochs_pretrain; ++epoch) {
    double total = 0.0;
    std::size_t used = 0;
    for (const auto& batch : detail::epoch_batches(train.size(), config.batch_size,
                                                   derive_seed(config.seed, 1000 + epoch))) {
      if (batch.size() < 2) continue;
      std::vector<LabelSet> labels;
      for (auto i : batch) labels.push_back(train[i].labels);
      ContrastiveBatch step;
      try {
        step = contrastive_batch(out.head, detail::stack_inputs(train, batch), labels, config);
      } catch (const NoPairsError&) {
        continue;
      }
      detail::clip_global_norm(config.grad_clip_norm, step.grad);
      detail::sgd_momentum(out.head, velocity, step.grad, config.lr_pretrain, config.momentum);
      total += step.loss;
      ++used;
    }
    if (used == 0) throw NoPairsError("pretrain epoch " + std::to_string(epoch) + ": no batch produced pairs");
    out.epoch_losses.push_back(total / static_cast<double>(used));
  }
  return out;
}

inline Matrix multi_hot_rows(std::span<const EmbeddedSample> samples, std::span<const std::size_t> idx,
                             std::size_t labels) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(labels));
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (auto l : samples[idx[k]].labels.indices()) y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = 1.0;
  return y;
}

struct ClassifierBatch {
  double loss = 0.0;
  ProjectionHead projection_grad;
  ClassifierHead classifier_grad;
};

// Joint BCE gradient through classifier and projection. Columns of `inputs`
// are samples, rows of `targets` are their multi-hot labels.
inline ClassifierBatch classifier_batch(const ProjectionHead& proj, const ClassifierHead& cls,
                                        const Matrix& inputs, const Matrix& targets) {
  const Eigen::Index n = inputs.cols();
  std::vector<ProjectionForward> fwd;
  Matrix probs(n, cls.w.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    fwd.push_back(project_forward(proj, inputs.col(i)));
    probs.row(i) = classify(fwd.back().z, cls).transpose();
  }
  const BceOutput bce = bce_loss(probs, targets);
  ClassifierBatch out{bce.value, ProjectionHead::zeros_like(proj), ClassifierHead::zeros_like(cls)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector p = probs.row(i).transpose();
    const Vector dlogit = (bce.d_probs.row(i).transpose().array() * p.array() * (1.0 - p.array())).matrix();
    out.classifier_grad.w.noalias() += fwd[i].z * dlogit.transpose();
    out.classifier_grad.b += dlogit;
    const Vector dz = cls.w * dlogit;
    project_backward(proj, inputs.col(i), fwd[i], dz, out.projection_grad);
  }
  return out;
}

struct FinetuneResult {
  ModelArtifact artifact;
  std::vector<double> epoch_losses;  // mean batch BCE per epoch
};

inline FinetuneResult finetune(std::span<const EmbeddedSample> train, ProjectionHead projection,
                               const TrainConfig& config, const LabelVocabulary& vocabulary,
                               const ProviderConfig& provider) {
  config.validate();
  projection.validate();
  if (train.empty()) throw ValidationError("finetune needs at least 1 sample");
  for (const auto& s : train) {
    if (static_cast<Eigen::Index>(s.embedding.dim()) != projection.d_in())
      throw ValidationError("finetune: embedding dim does not match the projection input");
    if (!vocabulary.validates(s.labels)) throw ValidationError("finetune: label outside vocabulary");
  }

  FinetuneResult out;
  auto& a = out.artifact;
  a.vocabulary = vocabulary;
  a.embed_dim = static_cast<std::size_t>(projection.d_in());
  a.classifier = init_classifier(projection.d_proj(), static_cast<Eigen::Index>(vocabulary.size()), config.seed);
  a.projection = std::move(projection);
  a.decision_threshold = config.decision_threshold;
  a.train_config = config;
  a.provider = provider;

  ProjectionHead proj_velocity = ProjectionHead::zeros_like(a.projection);
  ClassifierHead cls_velocity = ClassifierHead::zeros_like(a.classifier);
  for (std::size_t epoch = 0; epoch < config.epochs_finetune; ++epoch) {
    double total = 0.0;
    std::size_t used = 0;
    for (const auto& batch : detail::epoch_batches(train.size(), config.batch_size,
                                                   derive_seed(config.seed, 2000 + epoch))) {
      auto step = classifier_batch(a.projection, a.classifier, detail::stack_inputs(train, batch),
                                         multi_hot_rows(train, batch, vocabulary.size()));
      detail::clip_global_norm(config.grad_clip_norm, step.projection_grad, step.classifier_grad);
      detail::sgd_momentum(a.projection, proj_velocity, step.projection_grad, config.lr_finetune, config.momentum);
      detail::sgd_momentum(a.classifier, cls_velocity, step.classifier_grad, config.lr_finetune, config.momentum);
      total += step.loss;
      ++used;
    }
    out.epoch_losses.push_back(total / static_cast<double>(used));
  }
  a.validate();
  return out;
}

struct TrainResult {
  ModelArtifact artifact;
  std::vector<double> pretrain_losses;
  std::vector<double> finetune_losses;
  ProjectionHead initial_projection;  // before pretraining
  ProjectionHead pretrained_projection;
};

inline TrainResult train_model(std::span<const EmbeddedSample> train, const TrainConfig& config,
                               const LabelVocabulary& vocabulary, const ProviderConfig& provider) {
  TrainResult r;
  auto pre = pretrain(train, config);
  r.initial_projection = init_projection(pre.head.d_in(), pre.head.d_hidden(), pre.head.d_proj(), config.seed);
  r.pretrained_projection = pre.head;
  r.pretrain_losses = std::move(pre.epoch_losses);
  auto fine = finetune(train, std::move(pre.head), config, vocabulary, provider);
  r.artifact = std::move(fine.artifact);
  r.finetune_losses = std::move(fine.epoch_losses);
  return r;
}

// Mean positive-pair minus mean negative-pair similarity in projection space,
// with pairs formed by the exact rule. Zero when either polarity is missing.
inline double margin_gap(const ProjectionHead& head, std::span<const EmbeddedSample> samples) {
  std::vector<Vector> z;
  std::vector<LabelSet> labels;
  for (const auto& s : samples) {
    z.push_back(project(s.embedding.view(), head));
    labels.push_back(s.labels);
  }
  double pos = 0, neg = 0;
  std::size_t np = 0, nn = 0;
  for (std::size_t a = 0; a < z.size(); ++a) {
    for (std::size_t b = a + 1; b < z.size(); ++b) {
      const double s = z[a].dot(z[b]);
      if (labels[a] == labels[b]) { pos += s; ++np; } else { neg += s; ++nn; }
    }
  }
  if (np == 0 || nn == 0) return 0.0;
  return pos / static_cast<double>(np) - neg / static_cast<double>(nn);
}

enum class GradComponent { projection_ofc, projection_oc, projection_cs, classifier_bce };

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double analytic_perturbation = 0.0;  // added to every analytic entry; detector sanity checks
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

namespace detail {

// Visits every scalar parameter of the heads in a fixed order.
inline void for_each_param(ProjectionHead& h, const std::function<void(double&)>& f) {
  for (auto* m : {&h.w1, &h.w2})
    for (Eigen::Index i = 0; i < m->size(); ++i) f(m->data()[i]);
  for (auto* v : {&h.b1, &h.b2})
    for (Eigen::Index i = 0; i < v->size(); ++i) f(v->data()[i]);
}

inline void for_each_param(ClassifierHead& h, const std::function<void(double&)>& f) {
  for (Eigen::Index i = 0; i < h.w.size(); ++i) f(h.w.data()[i]);
  for (Eigen::Index i = 0; i < h.b.size(); ++i) f(h.b.data()[i]);
}

inline std::vector<double> flatten(ProjectionHead h) {
  std::vector<double> out;
  for_each_param(h, [&](double& x) { out.push_back(x); });
  return out;
}

inline std::vector<double> flatten(ClassifierHead h) {
  std::vector<double> out;
  for_each_param(h, [&](double& x) { out.push_back(x); });
  return out;
}

// Central differences with step 1e-5 * max(1, |x|).
inline std::vector<double> numeric_gradient(std::vector<double*> params, const std::function<double()>& loss) {
  std::vector<double> out;
  out.reserve(params.size());
  for (double* x : params) {
    const double orig = *x;
    const double h = 1e-5 * std::max(1.0, std::abs(orig));
    *x = orig + h;
    const double up = loss();
    *x = orig - h;
    const double down = loss();
    *x = orig;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

}  // namespace detail

// Compares analytic gradients with central finite differences at a seeded
// random point. For the contrastive losses the mined pair selection is frozen
// at the base point, so the check measures the differentiable part only.
inline GradCheckReport grad_check(GradComponent component, const GradCheckOptions& opt) {
  constexpr Eigen::Index d_in = 8, d_hidden = 6, d_proj = 5, n = 8, m = 4;
  Rng rng(derive_seed(opt.seed, 0x67726164));

  ProjectionHead proj = init_projection(d_in, d_hidden, d_proj, opt.seed);
  for (Eigen::Index i = 0; i < d_hidden; ++i) proj.b1(i) = rng.uniform(-0.1, 0.1);
  for (Eigen::Index i = 0; i < d_proj; ++i) proj.b2(i) = rng.uniform(-0.1, 0.1);
  Matrix inputs(d_in, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < d_in; ++r) inputs(r, c) = rng.uniform(-1.0, 1.0);
    inputs.col(c).normalize();
  }

  std::vector<double> analytic;
  std::vector<double*> params;
  std::function<double()> loss;

  ClassifierHead cls;
  Matrix targets;
  std::vector<LabelSet> labels;
  TrainConfig cfg;
  PairSet pairs;
  PairSelection frozen;

  if (component == GradComponent::classifier_bce) {
    cls = init_classifier(d_proj, m, opt.seed);
    for (Eigen::Index i = 0; i < m; ++i) cls.b(i) = rng.uniform(-0.5, 0.5);
    targets = Matrix::Zero(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) targets(i, j) = rng.index(2) ? 1.0 : 0.0;
    const auto step = classifier_batch(proj, cls, inputs, targets);
    analytic = detail::flatten(step.projection_grad);
    const auto ca = detail::flatten(step.classifier_grad);
    analytic.insert(analytic.end(), ca.begin(), ca.end());
    detail::for_each_param(proj, [&](double& x) { params.push_back(&x); });
    detail::for_each_param(cls, [&](double& x) { params.push_back(&x); });
    loss = [&] { return classifier_batch(proj, cls, inputs, targets).loss; };
  } else {
    cfg.loss_kind = component == GradComponent::projection_ofc  ? LossKind::ofc
                    : component == GradComponent::projection_oc ? LossKind::oc
                                                                : LossKind::cs;
    cfg.mining.p = 50.0;
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(LabelSet{static_cast<std::size_t>(i % 3)});
    const auto step = contrastive_batch(proj, inputs, labels, cfg);
    analytic = detail::flatten(step.grad);
    pairs = step.pairs;
    frozen = step.selection;
    detail::for_each_param(proj, [&](double& x) { params.push_back(&x); });
    loss = [&] {
      std::vector<Vector> z;
      for (Eigen::Index i = 0; i < n; ++i) z.push_back(project_forward(proj, inputs.col(i)).z);
      PairSelection sel = frozen;
      rescore(sel, [&](std::size_t k) {
        const auto& p = pairs.pairs[k];
        return std::clamp(z[p.a].dot(z[p.b]), -1.0, 1.0);
      });
      return selection_loss(sel, cfg.ofc).value;
    };
  }

  const auto numeric = detail::numeric_gradient(params, loss);
  GradCheckReport report;
  report.checked = numeric.size();
  for (std::size_t i = 0; i < numeric.size(); ++i)
    report.max_relative_error = std::max(
        report.max_relative_error, detail::relative_error(analytic[i] + opt.analytic_perturbation, numeric[i]));
  report.passed = report.max_relative_error <= opt.tolerance;
  return report;
}

}  // namespace dmtc
