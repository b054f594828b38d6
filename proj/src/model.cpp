#include "dlm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dlm {
namespace {

double softplus(double z) {
  // log(1 + e^z) without overflow
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

void check_shapes(const Mat& Z, const Mat& X) {
  if (Z.rows() != X.rows() || Z.cols() != X.cols())
    throw invalid_input("loss: Z and X shapes must match");
}

void check_targets01(const Mat& X) {
  if ((X.array() < 0.0).any() || (X.array() > 1.0).any())
    throw invalid_input("loss: sigmoid matching loss needs targets in [0,1]");
}

// Huber value with knee at a: the partial minimum over the sparse noise term.
double huber(double r, double a) {
  double ar = std::abs(r);
  return ar <= a ? 0.5 * r * r : a * ar - 0.5 * a * a;
}

double huber_grad(double r, double a) { return sgn(r) * std::min(std::abs(r), a); }

double pseudo_huber_sum(const Vec& v, double mu) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::sqrt(mu * mu + v[i] * v[i]) - mu;
  return s;
}

}  // namespace

double loss_value(const LossSpec& spec, const Mat& Z, const Mat& X, bool averaged) {
  check_shapes(Z, X);
  double div = averaged ? static_cast<double>(Z.cols()) : 1.0;
  switch (spec.kind) {
    case LossKind::HalfSquaredError:
    case LossKind::MaskedHalfSquaredError:  // plain matrix: everything observed
      return 0.5 * (Z - X).squaredNorm() / div;
    case LossKind::CrossEntropySigmoid: {
      check_targets01(X);
      double v = 0.0;
      for (Index i = 0; i < Z.rows(); ++i)
        for (Index j = 0; j < Z.cols(); ++j) v += softplus(Z(i, j)) - X(i, j) * Z(i, j);
      return v / div;
    }
    case LossKind::RobustHalfSquaredError: {
      double v = 0.0;
      for (Index i = 0; i < Z.rows(); ++i)
        for (Index j = 0; j < Z.cols(); ++j) v += huber(Z(i, j) - X(i, j), spec.alpha_s);
      return v / div;
    }
  }
  throw unsupported_kind("loss_value: unknown kind");
}

double loss_value(const LossSpec& spec, const Mat& Z, const ObservedMatrix& X, bool averaged) {
  if (spec.kind != LossKind::MaskedHalfSquaredError)
    return loss_value(spec, Z, X.values, averaged);
  check_shapes(Z, X.values);
  double div = averaged ? static_cast<double>(X.observed_count()) : 1.0;
  double v = 0.0;
  for (Index i = 0; i < Z.rows(); ++i)
    for (Index j = 0; j < Z.cols(); ++j)
      if (X.mask(i, j)) {
        double r = Z(i, j) - X.values(i, j);
        v += 0.5 * r * r;
      }
  return v / div;
}

Mat loss_gradient(const LossSpec& spec, const Mat& Z, const Mat& X, bool averaged) {
  check_shapes(Z, X);
  double div = averaged ? static_cast<double>(Z.cols()) : 1.0;
  switch (spec.kind) {
    case LossKind::HalfSquaredError:
    case LossKind::MaskedHalfSquaredError:
      return (Z - X) / div;
    case LossKind::CrossEntropySigmoid: {
      check_targets01(X);
      Mat G(Z.rows(), Z.cols());
      for (Index i = 0; i < Z.rows(); ++i)
        for (Index j = 0; j < Z.cols(); ++j) G(i, j) = sigmoid(Z(i, j)) - X(i, j);
      return G / div;
    }
    case LossKind::RobustHalfSquaredError: {
      Mat G(Z.rows(), Z.cols());
      for (Index i = 0; i < Z.rows(); ++i)
        for (Index j = 0; j < Z.cols(); ++j) G(i, j) = huber_grad(Z(i, j) - X(i, j), spec.alpha_s);
      return G / div;
    }
  }
  throw unsupported_kind("loss_gradient: unknown kind");
}

Mat loss_gradient(const LossSpec& spec, const Mat& Z, const ObservedMatrix& X, bool averaged) {
  if (spec.kind != LossKind::MaskedHalfSquaredError)
    return loss_gradient(spec, Z, X.values, averaged);
  check_shapes(Z, X.values);
  double div = averaged ? static_cast<double>(X.observed_count()) : 1.0;
  Mat G = Mat::Zero(Z.rows(), Z.cols());
  for (Index i = 0; i < Z.rows(); ++i)
    for (Index j = 0; j < Z.cols(); ++j)
      if (X.mask(i, j)) G(i, j) = (Z(i, j) - X.values(i, j)) / div;
  return G;
}

double reg_vector_value(const RegularizerSpec& spec, const Vec& v) {
  switch (spec.kind) {
    case RegKind::SquaredL2:
      return v.squaredNorm();
    case RegKind::SquaredL1: {
      double l1 = v.lpNorm<1>();
      return spec.unsquared_l1 ? l1 : l1 * l1;
    }
    case RegKind::ElasticNetSq: {
      double l1 = v.lpNorm<1>();
      return spec.nu * v.squaredNorm() + (1.0 - spec.nu) * l1 * l1;
    }
    case RegKind::PseudoHuberSq: {
      double s = pseudo_huber_sum(v, spec.mu);
      return s * s;
    }
    case RegKind::WeightedSquaredL2: {
      if (spec.lambda.cols() != v.size())
        throw invalid_input("reg_vector_value: weight matrix does not fit vector");
      return (spec.lambda * v).squaredNorm();
    }
    case RegKind::NonNormElasticNet: {
      if (spec.lambda.rows() != v.size())
        throw invalid_input("reg_vector_value: weight diagonal does not fit vector");
      // Convex as written; its square root is the non-convex baseline column norm.
      return spec.nu * v.squaredNorm() + (1.0 - spec.nu) * (spec.lambda.col(0).array() * v.array()).abs().sum();
    }
    case RegKind::PartitionedMax: {
      if (spec.split >= v.size())
        throw invalid_input("reg_vector_value: partition split exceeds vector length");
      Vec top = v.head(spec.split), bot = v.tail(v.size() - spec.split);
      auto block_val = [&](const Vec& b) {
        if (spec.inner == RegKind::SquaredL2) return b.squaredNorm();
        double l1 = b.lpNorm<1>();
        return l1 * l1;
      };
      return std::max(block_val(top), block_val(bot));
    }
    default:
      throw unsupported_kind("reg_vector_value: kind couples vectors, no per-vector value");
  }
}

namespace {

Vec reg_vector_subgrad(const RegularizerSpec& spec, const Vec& v) {
  switch (spec.kind) {
    case RegKind::SquaredL2:
      return 2.0 * v;
    case RegKind::SquaredL1: {
      Vec g(v.size());
      for (Index i = 0; i < v.size(); ++i) g[i] = sgn(v[i]);
      return spec.unsquared_l1 ? g : Vec(2.0 * v.lpNorm<1>() * g);
    }
    case RegKind::ElasticNetSq: {
      Vec g(v.size());
      for (Index i = 0; i < v.size(); ++i) g[i] = sgn(v[i]);
      return spec.nu * 2.0 * v + (1.0 - spec.nu) * 2.0 * v.lpNorm<1>() * g;
    }
    case RegKind::PseudoHuberSq: {
      double s = pseudo_huber_sum(v, spec.mu);
      Vec g(v.size());
      for (Index i = 0; i < v.size(); ++i)
        g[i] = 2.0 * s * v[i] / std::sqrt(spec.mu * spec.mu + v[i] * v[i]);
      return g;
    }
    case RegKind::WeightedSquaredL2:
      return 2.0 * (spec.lambda.transpose() * (spec.lambda * v));
    case RegKind::NonNormElasticNet: {
      Vec g(v.size());
      for (Index i = 0; i < v.size(); ++i)
        g[i] = 2.0 * spec.nu * v[i] + (1.0 - spec.nu) * spec.lambda(i, 0) * sgn(v[i]);
      return g;
    }
    case RegKind::PartitionedMax: {
      Vec top = v.head(spec.split), bot = v.tail(v.size() - spec.split);
      auto block_val = [&](const Vec& b) {
        if (spec.inner == RegKind::SquaredL2) return b.squaredNorm();
        double l1 = b.lpNorm<1>();
        return l1 * l1;
      };
      auto block_grad = [&](const Vec& b) -> Vec {
        if (spec.inner == RegKind::SquaredL2) return 2.0 * b;
        Vec g(b.size());
        for (Index i = 0; i < b.size(); ++i) g[i] = sgn(b[i]);
        return Vec(2.0 * b.lpNorm<1>() * g);
      };
      Vec g = Vec::Zero(v.size());
      // ties go to the first block
      if (block_val(top) >= block_val(bot))
        g.head(spec.split) = block_grad(top);
      else
        g.tail(v.size() - spec.split) = block_grad(bot);
      return g;
    }
    default:
      throw unsupported_kind("reg_subgradient: kind couples vectors, no per-vector form");
  }
}

}  // namespace

double reg_matrix_value(const RegularizerSpec& spec, const Mat& M, Orientation orient,
                        double weight) {
  if (weight < 0.0) throw invalid_input("reg_matrix_value: weight must be nonnegative");
  spec.validate();
  double total = 0.0;
  switch (spec.kind) {
    case RegKind::CoupledRowsL1Sq:
      for (Index i = 0; i < M.rows(); ++i) {
        double l1 = M.row(i).lpNorm<1>();
        total += l1 * l1;
      }
      break;
    case RegKind::CoupledRowsL2:
      for (Index i = 0; i < M.rows(); ++i) total += M.row(i).norm();
      break;
    case RegKind::PartitionedMax:
      for (Index j = 0; j < M.cols(); ++j) total += reg_vector_value(spec, M.col(j));
      break;
    default:
      if (orient == Orientation::Columns)
        for (Index j = 0; j < M.cols(); ++j) total += reg_vector_value(spec, M.col(j));
      else
        for (Index i = 0; i < M.rows(); ++i) total += reg_vector_value(spec, M.row(i).transpose());
  }
  return weight * total;
}

Mat reg_subgradient(const RegularizerSpec& spec, const Mat& M, Orientation orient, double weight) {
  if (weight < 0.0) throw invalid_input("reg_subgradient: weight must be nonnegative");
  spec.validate();
  Mat G(M.rows(), M.cols());
  switch (spec.kind) {
    case RegKind::CoupledRowsL1Sq:
      for (Index i = 0; i < M.rows(); ++i) {
        double l1 = M.row(i).lpNorm<1>();
        for (Index j = 0; j < M.cols(); ++j) G(i, j) = 2.0 * l1 * sgn(M(i, j));
      }
      break;
    case RegKind::CoupledRowsL2:
      for (Index i = 0; i < M.rows(); ++i) {
        double n = M.row(i).norm();
        if (n > 0.0)
          G.row(i) = M.row(i) / n;
        else
          G.row(i).setZero();
      }
      break;
    case RegKind::PartitionedMax:
      for (Index j = 0; j < M.cols(); ++j) G.col(j) = reg_vector_subgrad(spec, M.col(j));
      break;
    default:
      if (orient == Orientation::Columns)
        for (Index j = 0; j < M.cols(); ++j) G.col(j) = reg_vector_subgrad(spec, M.col(j));
      else
        for (Index i = 0; i < M.rows(); ++i)
          G.row(i) = reg_vector_subgrad(spec, M.row(i).transpose()).transpose();
  }
  return weight * G;
}

Vec soft_threshold(const Vec& u, double tau) {
  if (tau < 0.0) throw invalid_input("soft_threshold: tau must be nonnegative");
  Vec z(u.size());
  for (Index i = 0; i < u.size(); ++i) z[i] = sgn(u[i]) * std::max(std::abs(u[i]) - tau, 0.0);
  return z;
}

ProxResult prox_sql1(const Vec& u, double lambda) {
  if (lambda < 0.0) throw invalid_input("prox_sql1: lambda must be nonnegative");
  ProxResult out;
  if (lambda == 0.0) {
    out.z = u;
    out.threshold_used = 0.0;
    out.support_size = static_cast<int>((u.array() != 0.0).count());
    return out;
  }
  Index n = u.size();
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  // stable: equal magnitudes keep original index order
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(u[a]) > std::abs(u[b]); });
  double C = 0.0;
  Index r = 0;
  while (r < n) {
    double next = std::abs(u[order[static_cast<size_t>(r)]]);
    if (next <= 2.0 * lambda * C / (1.0 + 2.0 * lambda * static_cast<double>(r))) break;
    C += next;
    ++r;
  }
  double theta = r == 0 ? 0.0 : 2.0 * lambda * C / (1.0 + 2.0 * lambda * static_cast<double>(r));
  out.z = soft_threshold(u, theta);
  out.threshold_used = theta;
  out.support_size = static_cast<int>((out.z.array() != 0.0).count());
  return out;
}

Vec robust_inner_solve(const Vec& residual_target, double alpha_s) {
  if (!(alpha_s > 0.0)) throw invalid_input("robust_inner_solve: weight must be positive");
  return soft_threshold(residual_target, alpha_s);
}

namespace {

// Per-sample objective pieces for the h solve. The coefficient regularizer is
// applied to the column h with weight alpha/(2 s^2); the 1/T average of the
// batch objective does not appear in the per-sample problem.
struct HProblem {
  const Mat& D;
  const Vec& x;
  const ProblemSpec& spec;
  double w;  // alpha / (2 s^2)

  double smooth_value(const Vec& h) const {
    Vec z = D * h;
    double v = 0.0;
    switch (spec.loss.kind) {
      case LossKind::HalfSquaredError:
      case LossKind::MaskedHalfSquaredError:
        v = 0.5 * (z - x).squaredNorm();
        break;
      case LossKind::CrossEntropySigmoid:
        for (Index i = 0; i < z.size(); ++i) v += softplus(z[i]) - x[i] * z[i];
        break;
      case LossKind::RobustHalfSquaredError:
        for (Index i = 0; i < z.size(); ++i) v += huber(z[i] - x[i], spec.loss.alpha_s);
        break;
    }
    if (spec.regH.kind == RegKind::SquaredL2) v += w * h.squaredNorm();
    if (spec.regH.kind == RegKind::ElasticNetSq) v += w * spec.regH.nu * h.squaredNorm();
    if (spec.regH.kind == RegKind::PseudoHuberSq) v += w * reg_vector_value(spec.regH, h);
    return v;
  }

  double nonsmooth_value(const Vec& h) const {
    if (spec.regH.kind == RegKind::SquaredL1 && spec.regH.unsquared_l1) return w * h.lpNorm<1>();
    if (spec.regH.kind == RegKind::ElasticNetSq) {
      double l1 = h.lpNorm<1>();
      return w * (1.0 - spec.regH.nu) * l1 * l1;
    }
    return 0.0;
  }

  Vec smooth_grad(const Vec& h) const {
    Vec z = D * h;
    Vec gz(z.size());
    switch (spec.loss.kind) {
      case LossKind::HalfSquaredError:
      case LossKind::MaskedHalfSquaredError:
        gz = z - x;
        break;
      case LossKind::CrossEntropySigmoid:
        for (Index i = 0; i < z.size(); ++i) gz[i] = sigmoid(z[i]) - x[i];
        break;
      case LossKind::RobustHalfSquaredError:
        for (Index i = 0; i < z.size(); ++i) gz[i] = huber_grad(z[i] - x[i], spec.loss.alpha_s);
        break;
    }
    Vec g = D.transpose() * gz;
    if (spec.regH.kind == RegKind::SquaredL2) g += 2.0 * w * h;
    if (spec.regH.kind == RegKind::ElasticNetSq) g += 2.0 * w * spec.regH.nu * h;
    if (spec.regH.kind == RegKind::PseudoHuberSq) g += w * reg_vector_subgrad(spec.regH, h);
    return g;
  }

  Vec prox(const Vec& v, double eta) const {
    if (spec.regH.kind == RegKind::SquaredL1 && spec.regH.unsquared_l1)
      return soft_threshold(v, eta * w);
    if (spec.regH.kind == RegKind::ElasticNetSq)
      return prox_sql1(v, eta * w * (1.0 - spec.regH.nu)).z;
    return v;
  }
};

}  // namespace

Vec solve_h_given_d(const Mat& D, const Vec& x, const ProblemSpec& spec,
                    const HSolveConfig& config) {
  if (D.rows() != x.size()) throw invalid_input("solve_h_given_d: D and x do not conform");
  spec.validate();
  const RegKind hk = spec.regH.kind;
  bool decoupled = hk == RegKind::SquaredL2 || hk == RegKind::ElasticNetSq ||
                   hk == RegKind::PseudoHuberSq ||
                   (hk == RegKind::SquaredL1 && spec.regH.unsquared_l1);
  if (!decoupled)
    throw unsupported_kind(
        "solve_h_given_d: coefficient regularizer must decouple across samples");
  double w = spec.alpha / (2.0 * spec.s * spec.s);

  // Pure ridge with a least-squares loss has the closed form.
  if (hk == RegKind::SquaredL2 && (spec.loss.kind == LossKind::HalfSquaredError ||
                                   spec.loss.kind == LossKind::MaskedHalfSquaredError)) {
    Eigen::MatrixXd A = (D.transpose() * D).eval();
    A.diagonal().array() += 2.0 * w;
    return A.ldlt().solve(D.transpose() * x);
  }

  HProblem prob{D, x, spec, w};
  Vec h = Vec::Zero(D.cols());
  double smax = D.norm();  // Frobenius bounds the spectral norm
  double L = smax * smax;
  if (spec.loss.kind == LossKind::CrossEntropySigmoid) L *= 0.25;
  if (hk == RegKind::SquaredL2 || hk == RegKind::ElasticNetSq) L += 2.0 * w * spec.regH.nu;
  if (hk == RegKind::PseudoHuberSq) L += 2.0 * w * (1.0 + x.size() / spec.regH.mu);
  if (L <= 0.0) L = 1.0;
  double eta = 1.0 / L;

  if (config.subgradient) {
    Vec best = h;
    double best_val = prob.smooth_value(h) + prob.nonsmooth_value(h);
    for (int it = 1; it <= config.max_iters; ++it) {
      Vec g = prob.smooth_grad(h);
      if (hk == RegKind::SquaredL1 && spec.regH.unsquared_l1)
        for (Index i = 0; i < h.size(); ++i) g[i] += w * sgn(h[i]);
      if (hk == RegKind::ElasticNetSq) {
        double l1 = h.lpNorm<1>();
        for (Index i = 0; i < h.size(); ++i)
          g[i] += 2.0 * w * (1.0 - spec.regH.nu) * l1 * sgn(h[i]);
      }
      h -= (eta / std::sqrt(static_cast<double>(it))) * g;
      double val = prob.smooth_value(h) + prob.nonsmooth_value(h);
      if (val < best_val) {
        best_val = val;
        best = h;
      }
      if (g.lpNorm<Eigen::Infinity>() <= config.tol) break;
    }
    return best;
  }

  // The analytic bound covers the common kinds exactly; pseudo-Huber squared
  // has unbounded curvature, so guard each step with the descent lemma.
  for (int it = 0; it < config.max_iters; ++it) {
    double fh = prob.smooth_value(h);
    Vec g = prob.smooth_grad(h);
    Vec next;
    for (int bt = 0; bt < 60; ++bt) {
      next = prob.prox(h - eta * g, eta);
      Vec delta = next - h;
      double quad = fh + g.dot(delta) + 0.5 * delta.squaredNorm() / eta;
      if (prob.smooth_value(next) <= quad + 1e-12 * std::abs(quad)) break;
      eta *= 0.5;
    }
    double res = (h - next).lpNorm<Eigen::Infinity>() / eta;
    h = next;
    if (res <= config.tol) break;
  }
  if (!h.allFinite()) throw numerical_failure("solve_h_given_d: diverged");
  return h;
}

}  // namespace dlm
