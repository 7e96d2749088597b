#pragma once
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "dmtc/errors.hpp"
#include "dmtc/random.hpp"

namespace dmtc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Eigen::Map<const Vector> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// x -> normalize(w2^T tanh(w1^T x + b1) + b2). Also serves as the gradient
// accumulator for its own parameters.
struct ProjectionHead {
  Matrix w1;  // d_in x d_hidden
  Vector b1;  // d_hidden
  Matrix w2;  // d_hidden x d_proj
  Vector b2;  // d_proj

  Eigen::Index d_in() const { return w1.rows(); }
  Eigen::Index d_hidden() const { return w1.cols(); }
  Eigen::Index d_proj() const { return w2.cols(); }

  static ProjectionHead zeros_like(const ProjectionHead& h) {
    return {Matrix::Zero(h.w1.rows(), h.w1.cols()), Vector::Zero(h.b1.size()),
            Matrix::Zero(h.w2.rows(), h.w2.cols()), Vector::Zero(h.b2.size())};
  }

  void validate() const {
    if (w1.rows() < 1 || w1.cols() < 1 || w2.cols() < 1 || b1.size() != w1.cols() ||
        w2.rows() != w1.cols() || b2.size() != w2.cols())
      throw ValidationError("projection head dimensions are inconsistent");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite())
      throw ValidationError("projection head has non-finite entries");
  }

  friend bool operator==(const ProjectionHead& a, const ProjectionHead& b) {
    return a.w1.rows() == b.w1.rows() && a.w1.cols() == b.w1.cols() && a.w2.cols() == b.w2.cols() &&
           a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
  }
};

// z -> sigmoid(w^T z + b).
struct ClassifierHead {
  Matrix w;  // d_proj x m
  Vector b;  // m

  static ClassifierHead zeros_like(const ClassifierHead& h) {
    return {Matrix::Zero(h.w.rows(), h.w.cols()), Vector::Zero(h.b.size())};
  }

  void validate() const {
    if (w.rows() < 1 || w.cols() < 1 || b.size() != w.cols())
      throw ValidationError("classifier head dimensions are inconsistent");
    if (!w.allFinite() || !b.allFinite()) throw ValidationError("classifier head has non-finite entries");
  }

  friend bool operator==(const ClassifierHead& a, const ClassifierHead& b) {
    return a.w.rows() == b.w.rows() && a.w.cols() == b.w.cols() && a.w == b.w && a.b == b.b;
  }
};

// Entries ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)), drawn in row-major order.
inline Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index r = 0; r < fan_in; ++r)
    for (Eigen::Index c = 0; c < fan_out; ++c) m(r, c) = rng.uniform(-a, a);
  return m;
}

inline ProjectionHead init_projection(Eigen::Index d_in, Eigen::Index d_hidden, Eigen::Index d_proj,
                                      std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x70726F6A));
  ProjectionHead h;
  h.w1 = xavier_uniform(d_in, d_hidden, rng);
  h.b1 = Vector::Zero(d_hidden);
  h.w2 = xavier_uniform(d_hidden, d_proj, rng);
  h.b2 = Vector::Zero(d_proj);
  return h;
}

inline ClassifierHead init_classifier(Eigen::Index d_proj, Eigen::Index labels, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x636C6173));
  return {xavier_uniform(d_proj, labels, rng), Vector::Zero(labels)};
}

// Intermediate values kept for the backward pass.
struct ProjectionForward {
  Vector hidden;  // tanh activations
  Vector z;       // unit-norm output
  double norm = 0.0;
};

inline ProjectionForward project_forward(const ProjectionHead& head, const Eigen::Ref<const Vector>& x) {
  if (x.size() != head.d_in())
    throw ValidationError("projection input dim " + std::to_string(x.size()) + " != " +
                          std::to_string(head.d_in()));
  ProjectionForward f;
  f.hidden = (head.w1.transpose() * x + head.b1).array().tanh().matrix();
  Vector y = head.w2.transpose() * f.hidden + head.b2;
  f.norm = y.norm();
  if (!(f.norm > 0.0) || !std::isfinite(f.norm)) throw DegenerateError("degenerate projection: zero output");
  f.z = y / f.norm;
  return f;
}

inline Vector project(std::span<const double> x, const ProjectionHead& head) {
  return project_forward(head, as_vector(x)).z;
}

// Accumulates dL/d(params) into `grad` given dL/dz.
inline void project_backward(const ProjectionHead& head, const Eigen::Ref<const Vector>& x,
                             const ProjectionForward& f, const Vector& dz, ProjectionHead& grad) {
  const Vector dy = (dz - f.z * f.z.dot(dz)) / f.norm;
  grad.w2.noalias() += f.hidden * dy.transpose();
  grad.b2 += dy;
  const Vector dpre = ((head.w2 * dy).array() * (1.0 - f.hidden.array().square())).matrix();
  grad.w1.noalias() += x * dpre.transpose();
  grad.b1 += dpre;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vector classify(const Eigen::Ref<const Vector>& z, const ClassifierHead& head) {
  if (z.size() != head.w.rows())
    throw ValidationError("classifier input dim " + std::to_string(z.size()) + " != " +
                          std::to_string(head.w.rows()));
  Vector logits = head.w.transpose() * z + head.b;
  return logits.unaryExpr([](double v) { return sigmoid(v); });
}

struct BceOutput {
  double value = 0.0;
  Matrix d_probs;  // dL/dp, zero where p was clamped
};

// Mean over samples and labels of -[y log p + (1-y) log(1-p)], p clamped to
// [eps, 1-eps]. Rows are samples.
inline BceOutput bce_loss(const Matrix& probs, const Matrix& targets, double eps = 1e-12) {
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
    throw ValidationError("bce: probability and target shapes differ");
  BceOutput out;
  out.d_probs = Matrix::Zero(probs.rows(), probs.cols());
  const double cells = static_cast<double>(probs.size());
  if (cells == 0) return out;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double raw = probs(i, j);
      const double p = std::clamp(raw, eps, 1.0 - eps);
      const double y = targets(i, j);
      out.value -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
      if (raw > eps && raw < 1.0 - eps) out.d_probs(i, j) = (-y / p + (1.0 - y) / (1.0 - p)) / cells;
    }
  }
  out.value /= cells;
  return out;
}

}  // namespace dmtc
