#include "dlm/batch.hpp"

#include "dlm/rng.hpp"

#include <cmath>
#include <type_traits>

namespace dlm {
namespace {

enum class Family { Smooth, Subgrad, ProxL1, ProxElastic, CoupledL2, CoupledL1Sq, NonNorm };

Family family_of(const RegularizerSpec& r) {
  switch (r.kind) {
    case RegKind::SquaredL2:
    case RegKind::WeightedSquaredL2:
    case RegKind::PseudoHuberSq:
      return Family::Smooth;
    case RegKind::PartitionedMax:
      return Family::Subgrad;
    case RegKind::SquaredL1:
      return r.unsquared_l1 ? Family::ProxL1 : Family::ProxElastic;
    case RegKind::ElasticNetSq:
      // nu = 1 is literally the squared l2; dispatching it to the matrix step
      // keeps the reduction exact instead of per-column-equivalent.
      return r.nu >= 1.0 ? Family::Smooth : Family::ProxElastic;
    case RegKind::CoupledRowsL2:
      return Family::CoupledL2;
    case RegKind::CoupledRowsL1Sq:
      return Family::CoupledL1Sq;
    case RegKind::NonNormElasticNet:
      return Family::NonNorm;
  }
  throw unsupported_kind("batch: unknown regularizer kind");
}

bool per_column(Family f) { return f == Family::ProxL1 || f == Family::ProxElastic; }

// Weight on the squared-l2 part, entering the smooth curvature as 2*w*nu.
double l2_fraction(const RegularizerSpec& r) {
  switch (r.kind) {
    case RegKind::SquaredL2:
      return 1.0;
    case RegKind::ElasticNetSq:
    case RegKind::NonNormElasticNet:
      return r.nu;
    default:
      return 0.0;
  }
}

double sigma_max_sq(const Mat& M, LipschitzMode mode) {
  if (M.size() == 0) return 0.0;
  const bool wide = M.cols() >= M.rows();
  Eigen::MatrixXd G =
      wide ? Eigen::MatrixXd(M * M.transpose()) : Eigen::MatrixXd(M.transpose() * M);
  if (mode == LipschitzMode::Analytic) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    return std::max(es.eigenvalues().maxCoeff(), 0.0);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Ones(G.rows()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd w = G * v;
    lam = w.norm();
    if (lam == 0.0) return 0.0;
    v = w / lam;
  }
  return lam * 1.05;  // mild inflation; matrix steps also carry a descent guard in this mode
}

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

const Mat& values_of(const Mat& X) { return X; }
const Mat& values_of(const ObservedMatrix& X) { return X.values; }

template <class XT>
double divisor_of(const XT& X, const ProblemSpec& spec) {
  if (!spec.averaged) return 1.0;
  if constexpr (std::is_same_v<XT, ObservedMatrix>) {
    if (spec.loss.kind == LossKind::MaskedHalfSquaredError)
      return static_cast<double>(X.observed_count());
  }
  return static_cast<double>(values_of(X).cols());
}

// Local curvature bound for the smooth regularizer families. Pseudo-Huber has
// no global constant (its square grows like l1 squared), so the bound is taken
// at the current point and the step is guarded by a descent check.
double smooth_reg_curvature(const RegularizerSpec& r, const Mat& M, Orientation orient,
                            double w) {
  switch (r.kind) {
    case RegKind::SquaredL2:
    case RegKind::ElasticNetSq:
      return 2.0 * w * l2_fraction(r);
    case RegKind::WeightedSquaredL2: {
      Eigen::MatrixXd G = Eigen::MatrixXd(r.lambda.transpose() * r.lambda);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
      return 2.0 * w * std::max(es.eigenvalues().maxCoeff(), 0.0);
    }
    case RegKind::PseudoHuberSq: {
      double worst = 0.0;
      auto bound = [&](const Vec& v) {
        double phi = 0.0;
        for (Index i = 0; i < v.size(); ++i)
          phi += std::sqrt(r.mu * r.mu + v[i] * v[i]) - r.mu;
        worst = std::max(worst, 2.0 * (static_cast<double>(v.size()) + phi / r.mu));
      };
      if (orient == Orientation::Columns)
        for (Index j = 0; j < M.cols(); ++j) bound(M.col(j));
      else
        for (Index i = 0; i < M.rows(); ++i) bound(M.row(i).transpose());
      return w * worst;
    }
    default:
      return 2.0 * w;  // subgradient family heuristic; no descent guarantee claimed
  }
}

template <class XT>
class Core {
 public:
  Core(const XT& X, const ProblemSpec& spec, const SolverConfig& cfg, bool force_subgrad = false)
      : X_(X), spec_(spec), cfg_(cfg) {
    spec_.validate();
    cfg_.validate();
    dl_ = divisor_of(X, spec);
    T_ = values_of(X).cols();
    double dh = spec.averaged ? static_cast<double>(T_) : 1.0;
    wD_ = spec.alpha / 2.0;
    wH_ = spec.alpha / (2.0 * spec.s * spec.s * dh);
    famD_ = family_of(spec.regD);
    famH_ = family_of(spec.regH);
    if (force_subgrad) {
      if (famD_ != Family::Smooth) famD_ = Family::Subgrad;
      if (famH_ != Family::Smooth) famH_ = Family::Subgrad;
    }
    least_squares_ = spec.loss.least_squares_family();
    if (!least_squares_ && (per_column(famD_) || per_column(famH_)))
      throw unsupported_kind("batch: per-column proximal sweeps need a least-squares loss");
    if constexpr (std::is_same_v<XT, ObservedMatrix>) {
      if (spec.loss.kind == LossKind::MaskedHalfSquaredError)
        maskd_ = X.mask.template cast<double>();
    }
  }

  double objective(const Factorization& f) const {
    return loss_value(spec_.loss, f.D * f.H, X_, spec_.averaged) +
           reg_matrix_value(spec_.regD, f.D, Orientation::Columns, wD_) +
           reg_matrix_value(spec_.regH, f.H, Orientation::Rows, wH_);
  }

  void begin_iteration(const Factorization& f) {
    // full refresh once per outer iteration kills rank-one drift
    if (least_squares_) refresh_residual(f);
  }

  void step_D(Factorization& f) {
    if (per_column(famD_))
      column_sweep_D(f);
    else
      matrix_step_D(f);
  }

  void step_H(Factorization& f) {
    if (per_column(famH_))
      row_sweep_H(f);
    else
      matrix_step_H(f);
  }

 private:
  void apply_mask(Mat& M) const {
    if constexpr (std::is_same_v<XT, ObservedMatrix>) {
      if (spec_.loss.kind == LossKind::MaskedHalfSquaredError)
        M = M.cwiseProduct(maskd_);
    }
  }

  void refresh_residual(const Factorization& f) {
    R_ = values_of(X_) - f.D * f.H;
    apply_mask(R_);
  }

  Mat loss_grad(const Factorization& f) const {
    if (!least_squares_)
      return loss_gradient(spec_.loss, Mat(f.D * f.H), values_of(X_), spec_.averaged);
    if (spec_.loss.kind == LossKind::RobustHalfSquaredError) {
      Mat G(R_.rows(), R_.cols());
      for (Index i = 0; i < R_.rows(); ++i)
        for (Index j = 0; j < R_.cols(); ++j)
          G(i, j) = -sgn(R_(i, j)) * std::min(std::abs(R_(i, j)), spec_.loss.alpha_s) / dl_;
      return G;
    }
    return Mat(-R_ / dl_);
  }

  double loss_curvature(const Mat& fixed) const {
    double c = sigma_max_sq(fixed, cfg_.lipschitz_mode) / dl_;
    if (spec_.loss.kind == LossKind::CrossEntropySigmoid) c *= 0.25;
    return c;
  }

  bool guard_needed(const RegularizerSpec& r) const {
    return r.kind == RegKind::PseudoHuberSq || cfg_.lipschitz_mode == LipschitzMode::PowerIteration;
  }

  // One gradient step on the smooth composite, halving the step while the
  // descent lemma fails (only armed for kinds without exact global curvature).
  template <class Phi>
  void guarded_step(Mat& V, const Mat& grad, double& eta, Phi&& phi, bool guard) {
    if (!guard) {
      V -= eta * grad;
      return;
    }
    double base = phi(V);
    double g2 = grad.squaredNorm();
    for (int bt = 0; bt < 40; ++bt) {
      Mat cand = V - eta * grad;
      if (phi(cand) <= base - 0.5 * eta * g2 + 1e-12 * std::abs(base)) {
        V = cand;
        return;
      }
      eta *= 0.5;
    }
    V -= eta * grad;
  }

  void matrix_step_D(Factorization& f) {
    Mat G = loss_grad(f);
    Mat GD = G * f.H.transpose();
    double Lloss = std::max(loss_curvature(f.H), 1e-12);
    Mat old = f.D;
    switch (famD_) {
      case Family::Smooth:
      case Family::Subgrad: {
        double L = Lloss + smooth_reg_curvature(spec_.regD, f.D, Orientation::Columns, wD_);
        double eta = cfg_.step_D > 0.0 ? cfg_.step_D : 1.0 / L;
        Mat full = GD + reg_subgradient(spec_.regD, f.D, Orientation::Columns, wD_);
        bool guard = famD_ == Family::Smooth && guard_needed(spec_.regD);
        guarded_step(f.D, full, eta,
                     [&](const Mat& D) {
                       return loss_value(spec_.loss, D * f.H, X_, spec_.averaged) +
                              reg_matrix_value(spec_.regD, D, Orientation::Columns, wD_);
                     },
                     guard);
        break;
      }
      case Family::CoupledL2: {
        double eta = cfg_.step_D > 0.0 ? cfg_.step_D : 1.0 / Lloss;
        Mat V = f.D - eta * GD;
        for (Index i = 0; i < V.rows(); ++i) {
          double n = V.row(i).norm();
          double scale = n > 0.0 ? std::max(0.0, 1.0 - eta * wD_ / n) : 0.0;
          f.D.row(i) = scale * V.row(i);
        }
        break;
      }
      case Family::CoupledL1Sq: {
        double eta = cfg_.step_D > 0.0 ? cfg_.step_D : 1.0 / Lloss;
        Mat V = f.D - eta * GD;
        for (Index i = 0; i < V.rows(); ++i)
          f.D.row(i) = prox_sql1(V.row(i).transpose(), eta * wD_).z.transpose();
        break;
      }
      case Family::NonNorm: {
        double nu = spec_.regD.nu;
        double eta = cfg_.step_D > 0.0 ? cfg_.step_D : 1.0 / (Lloss + 2.0 * wD_ * nu);
        Mat V = f.D - eta * (GD + 2.0 * wD_ * nu * f.D);
        for (Index i = 0; i < V.rows(); ++i) {
          double tau = eta * wD_ * (1.0 - nu) * spec_.regD.lambda(i, 0);
          for (Index j = 0; j < V.cols(); ++j)
            f.D(i, j) = sgn(V(i, j)) * std::max(std::abs(V(i, j)) - tau, 0.0);
        }
        break;
      }
      default:
        throw unsupported_kind("batch: bad dispatch");
    }
    if (least_squares_) {
      Mat upd = (f.D - old) * f.H;
      apply_mask(upd);
      R_ -= upd;
    }
  }

  void matrix_step_H(Factorization& f) {
    Mat G = loss_grad(f);
    Mat GH = f.D.transpose() * G;
    double Lloss = std::max(loss_curvature(f.D), 1e-12);
    Mat old = f.H;
    switch (famH_) {
      case Family::Smooth:
      case Family::Subgrad: {
        double L = Lloss + smooth_reg_curvature(spec_.regH, f.H, Orientation::Rows, wH_);
        double eta = cfg_.step_H > 0.0 ? cfg_.step_H : 1.0 / L;
        Mat full = GH + reg_subgradient(spec_.regH, f.H, Orientation::Rows, wH_);
        bool guard = famH_ == Family::Smooth && guard_needed(spec_.regH);
        guarded_step(f.H, full, eta,
                     [&](const Mat& H) {
                       return loss_value(spec_.loss, f.D * H, X_, spec_.averaged) +
                              reg_matrix_value(spec_.regH, H, Orientation::Rows, wH_);
                     },
                     guard);
        break;
      }
      case Family::CoupledL2: {
        double eta = cfg_.step_H > 0.0 ? cfg_.step_H : 1.0 / Lloss;
        Mat V = f.H - eta * GH;
        for (Index i = 0; i < V.rows(); ++i) {
          double n = V.row(i).norm();
          double scale = n > 0.0 ? std::max(0.0, 1.0 - eta * wH_ / n) : 0.0;
          f.H.row(i) = scale * V.row(i);
        }
        break;
      }
      case Family::CoupledL1Sq: {
        double eta = cfg_.step_H > 0.0 ? cfg_.step_H : 1.0 / Lloss;
        Mat V = f.H - eta * GH;
        for (Index i = 0; i < V.rows(); ++i)
          f.H.row(i) = prox_sql1(V.row(i).transpose(), eta * wH_).z.transpose();
        break;
      }
      case Family::NonNorm: {
        double nu = spec_.regH.nu;
        double eta = cfg_.step_H > 0.0 ? cfg_.step_H : 1.0 / (Lloss + 2.0 * wH_ * nu);
        Mat V = f.H - eta * (GH + 2.0 * wH_ * nu * f.H);
        for (Index i = 0; i < V.rows(); ++i) {
          for (Index j = 0; j < V.cols(); ++j) {
            double tau = eta * wH_ * (1.0 - nu) * spec_.regH.lambda(j, 0);
            f.H(i, j) = sgn(V(i, j)) * std::max(std::abs(V(i, j)) - tau, 0.0);
          }
        }
        break;
      }
      default:
        throw unsupported_kind("batch: bad dispatch");
    }
    if (least_squares_) {
      Mat upd = f.D * (f.H - old);
      apply_mask(upd);
      R_ -= upd;
    }
  }

  Vec grad_col_D(const Factorization& f, Index j) const {
    if (spec_.loss.kind == LossKind::RobustHalfSquaredError)
      return loss_grad(f) * f.H.row(j).transpose();
    return -(R_ * f.H.row(j).transpose()) / dl_;
  }

  Vec grad_row_H(const Factorization& f, Index i) const {
    if (spec_.loss.kind == LossKind::RobustHalfSquaredError)
      return loss_grad(f).transpose() * f.D.col(i);
    return -(R_.transpose() * f.D.col(i)) / dl_;
  }

  // Gauss-Seidel over columns of D with exact per-column curvature. The other
  // columns are frozen, so (H H^T)_jj / div IS the Hessian of the restricted
  // loss, not just a bound; the l1-squared form is the conventional looser one
  // exposed by lipschitz_bound.
  void column_sweep_D(Factorization& f) {
    const int sweeps = std::max(1, cfg_.inner_prox_iters);
    const double nu = l2_fraction(spec_.regD);
    for (int s = 0; s < sweeps; ++s) {
      for (Index j = 0; j < f.k(); ++j) {
        if (cfg_.full_refresh) refresh_residual(f);
        Vec g = grad_col_D(f, j);
        double lhalf = std::max(f.H.row(j).squaredNorm() / dl_ + 2.0 * wD_ * nu, 1e-12);
        Vec u = f.D.col(j) - (g + 2.0 * wD_ * nu * f.D.col(j)) / lhalf;
        Vec z = famD_ == Family::ProxL1 ? soft_threshold(u, wD_ / lhalf)
                                        : prox_sql1(u, wD_ * (1.0 - nu) / lhalf).z;
        Vec delta = z - f.D.col(j);
        if (!delta.isZero(0.0)) {
          Mat upd = delta * f.H.row(j);
          apply_mask(upd);
          R_ -= upd;
          f.D.col(j) = z;
        }
      }
    }
  }

  void row_sweep_H(Factorization& f) {
    const int sweeps = std::max(1, cfg_.inner_prox_iters);
    const double nu = l2_fraction(spec_.regH);
    for (int s = 0; s < sweeps; ++s) {
      for (Index i = 0; i < f.k(); ++i) {
        if (cfg_.full_refresh) refresh_residual(f);
        Vec g = grad_row_H(f, i);
        double lhalf = std::max(f.D.col(i).squaredNorm() / dl_ + 2.0 * wH_ * nu, 1e-12);
        Vec u = f.H.row(i).transpose() - (g + 2.0 * wH_ * nu * f.H.row(i).transpose()) / lhalf;
        Vec z = famH_ == Family::ProxL1 ? soft_threshold(u, wH_ / lhalf)
                                        : prox_sql1(u, wH_ * (1.0 - nu) / lhalf).z;
        Vec delta = z - f.H.row(i).transpose();
        if (!delta.isZero(0.0)) {
          Mat upd = f.D.col(i) * delta.transpose();
          apply_mask(upd);
          R_ -= upd;
          f.H.row(i) = z.transpose();
        }
      }
    }
  }

  const XT& X_;
  ProblemSpec spec_;
  SolverConfig cfg_;
  double dl_ = 1.0;
  Index T_ = 0;
  double wD_ = 0.0;
  double wH_ = 0.0;
  Family famD_ = Family::Smooth;
  Family famH_ = Family::Smooth;
  bool least_squares_ = true;
  Mat R_;
  Mat maskd_;
};

bool numerically_full_rank(const Mat& M) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(M)};
  return qr.rank() == std::min(M.rows(), M.cols());
}

template <class XT>
SolveResult am_dlm_solve_impl(const XT& X, const ProblemSpec& spec, const SolverConfig& config,
                              std::optional<Factorization> init) {
  spec.validate();
  config.validate();
  const Mat& xv = values_of(X);
  const Index d = xv.rows(), T = xv.cols();
  Factorization f;
  if (init) {
    f = std::move(*init);
    if (f.d() != d || f.k() != spec.k || f.T() != T)
      throw invalid_input("am_dlm_solve: init shapes do not match data and spec");
    if (!numerically_full_rank(f.D) || !numerically_full_rank(f.H))
      throw invalid_input("am_dlm_solve: init factors must be numerically full rank");
  } else {
    Rng rng(config.seed);
    double sd = 1.0 / std::sqrt(static_cast<double>(spec.k));
    bool ok = false;
    for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
      Mat D0 = rng.gaussian(d, spec.k, 0.0, sd);
      Mat H0 = rng.gaussian(spec.k, T, 0.0, sd);
      if (numerically_full_rank(D0) && numerically_full_rank(H0)) {
        f = Factorization(std::move(D0), std::move(H0));
        ok = true;
      }
    }
    if (!ok) throw numerical_failure("am_dlm_solve: could not draw a full-rank start");
  }

  Core<XT> core(X, spec, config);
  TrialReport report;
  report.seed = config.seed;
  double prev = core.objective(f);
  report.objective_trace.emplace_back(0, prev);

  auto converge_variable = [&](auto&& one_step) {
    if (!config.exact_alternation) {
      one_step();
      return;
    }
    double before = core.objective(f);
    for (int rep = 0; rep < 1000; ++rep) {
      one_step();
      double after = core.objective(f);
      if (std::abs(before - after) < config.tol) break;
      before = after;
    }
  };

  for (int it = 1; it <= config.max_iters; ++it) {
    core.begin_iteration(f);
    converge_variable([&] { core.step_D(f); });
    converge_variable([&] { core.step_H(f); });
    double cur = core.objective(f);
    if (!std::isfinite(cur))
      throw numerical_failure("am_dlm_solve: objective non-finite at iteration " +
                              std::to_string(it));
    report.objective_trace.emplace_back(it, cur);
    report.iterations = it;
    if (std::abs(cur - prev) < config.tol) {
      report.converged = true;
      prev = cur;
      break;
    }
    prev = cur;
  }
  report.final_objective = prev;
  return {std::move(f), std::move(report)};
}

void require_family(bool cond, const char* msg) {
  if (!cond) throw unsupported_kind(msg);
}

template <class XT>
Factorization one_outer_iteration(const XT& X, const Factorization& fact, const ProblemSpec& spec,
                                  const SolverConfig& config, bool force_subgrad) {
  Core<XT> core(X, spec, config, force_subgrad);
  Factorization f = fact;
  core.begin_iteration(f);
  core.step_D(f);
  core.step_H(f);
  return f;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iters < 1) throw invalid_input("solver config: max_iters must be at least 1");
  if (!(tol > 0.0)) throw invalid_input("solver config: tol must be positive");
  if (step_D < 0.0 || step_H < 0.0) throw invalid_input("solver config: steps must be nonnegative");
  if (inner_prox_iters < 1) throw invalid_input("solver config: inner_prox_iters must be at least 1");
}

double objective_value(const Factorization& fact, const Mat& X, const ProblemSpec& spec) {
  spec.validate();
  double dh = spec.averaged ? static_cast<double>(X.cols()) : 1.0;
  return loss_value(spec.loss, fact.D * fact.H, X, spec.averaged) +
         reg_matrix_value(spec.regD, fact.D, Orientation::Columns, spec.alpha / 2.0) +
         reg_matrix_value(spec.regH, fact.H, Orientation::Rows,
                          spec.alpha / (2.0 * spec.s * spec.s * dh));
}

double objective_value(const Factorization& fact, const ObservedMatrix& X,
                       const ProblemSpec& spec) {
  spec.validate();
  double dh = spec.averaged ? static_cast<double>(X.cols()) : 1.0;
  return loss_value(spec.loss, fact.D * fact.H, X, spec.averaged) +
         reg_matrix_value(spec.regD, fact.D, Orientation::Columns, spec.alpha / 2.0) +
         reg_matrix_value(spec.regH, fact.H, Orientation::Rows,
                          spec.alpha / (2.0 * spec.s * spec.s * dh));
}

double lipschitz_bound(const ProblemSpec& spec, const Mat& fixed, Target which,
                       std::optional<Index> column, double loss_divisor) {
  if (!spec.loss.least_squares_family())
    throw unsupported_kind("lipschitz_bound: least-squares family only");
  double div = loss_divisor;
  if (div <= 0.0) {
    if (!spec.averaged)
      div = 1.0;
    else if (which == Target::D)
      div = static_cast<double>(fixed.cols());  // fixed factor is H: columns are samples
    else
      throw invalid_input("lipschitz_bound: averaged bound for H needs loss_divisor");
  }
  if (!column) return std::max(sigma_max_sq(fixed, LipschitzMode::Analytic) / div, 1e-12);

  Index i = *column;
  const RegularizerSpec& reg = which == Target::D ? spec.regD : spec.regH;
  double l1, regterm;
  if (which == Target::D) {
    if (i < 0 || i >= fixed.rows()) throw invalid_input("lipschitz_bound: column out of range");
    l1 = fixed.row(i).lpNorm<1>();
    regterm = l2_fraction(reg) * spec.alpha;
  } else {
    if (i < 0 || i >= fixed.cols()) throw invalid_input("lipschitz_bound: column out of range");
    l1 = fixed.col(i).lpNorm<1>();
    regterm = l2_fraction(reg) * spec.alpha / (spec.s * spec.s * div);
  }
  if (reg.kind == RegKind::WeightedSquaredL2) {
    Eigen::MatrixXd G = Eigen::MatrixXd(reg.lambda.transpose() * reg.lambda);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    regterm = spec.alpha * std::max(es.eigenvalues().maxCoeff(), 0.0) *
              (which == Target::D ? 1.0 : 1.0 / (spec.s * spec.s * div));
  }
  return std::max(2.0 * (l1 * l1 / div + regterm), 1e-12);
}

Factorization step_smooth(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                          const SolverConfig& config) {
  bool both_smooth =
      family_of(spec.regD) == Family::Smooth && family_of(spec.regH) == Family::Smooth;
  if (!both_smooth && !config.allow_subgradient)
    throw unsupported_kind("step_smooth: nonsmooth regularizer without subgradient mode");
  return one_outer_iteration(X, fact, spec, config, /*force_subgrad=*/!both_smooth);
}

Factorization step_prox_l1(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                           const SolverConfig& config) {
  Family fd = family_of(spec.regD), fh = family_of(spec.regH);
  require_family(fd == Family::ProxL1 || fh == Family::ProxL1,
                 "step_prox_l1: needs the plain l1 mode on at least one factor");
  require_family((fd == Family::ProxL1 || fd == Family::Smooth) &&
                     (fh == Family::ProxL1 || fh == Family::Smooth),
                 "step_prox_l1: factors must be plain-l1 or smooth");
  return one_outer_iteration(X, fact, spec, config, false);
}

Factorization step_prox_elastic(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                                const SolverConfig& config) {
  Family fd = family_of(spec.regD), fh = family_of(spec.regH);
  require_family(fd == Family::ProxElastic || fh == Family::ProxElastic ||
                     (fd == Family::Smooth && fh == Family::Smooth),
                 "step_prox_elastic: needs an elastic-net style factor");
  require_family((fd == Family::ProxElastic || fd == Family::Smooth) &&
                     (fh == Family::ProxElastic || fh == Family::Smooth),
                 "step_prox_elastic: factors must be elastic or smooth");
  return one_outer_iteration(X, fact, spec, config, false);
}

SolveResult am_dlm_solve(const Mat& X, const ProblemSpec& spec, const SolverConfig& config,
                         std::optional<Factorization> init) {
  return am_dlm_solve_impl(X, spec, config, std::move(init));
}

SolveResult am_dlm_solve(const ObservedMatrix& X, const ProblemSpec& spec,
                         const SolverConfig& config, std::optional<Factorization> init) {
  return am_dlm_solve_impl(X, spec, config, std::move(init));
}

}  // namespace dlm
