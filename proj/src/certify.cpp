#include "dlm/certify.hpp"

#include "dlm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

namespace dlm {

namespace {

void check_data_shape(const Factorization& fact, const Mat& X, const char* who) {
  if (fact.d() != X.rows() || fact.T() != X.cols())
    throw invalid_input(std::string(who) + ": factor shapes do not match the data");
}

// Norm recovered from the squared-norm kinds; the non-norm baselines and the
// smoothed kinds have no exact norm to rebalance with.
double factor_norm(const RegularizerSpec& spec, const Vec& v) {
  switch (spec.kind) {
    case RegKind::SquaredL1:
      if (spec.unsquared_l1) break;
      [[fallthrough]];
    case RegKind::SquaredL2:
    case RegKind::ElasticNetSq:
    case RegKind::WeightedSquaredL2:
    case RegKind::PartitionedMax:
      return std::sqrt(reg_vector_value(spec, v));
    default:
      break;
  }
  throw unsupported_kind("rebalance_factors: regularizer is not a squared norm");
}

}  // namespace

std::pair<double, double> stationarity_residual(const Factorization& fact, const Mat& X,
                                                const ProblemSpec& spec) {
  spec.validate();
  check_data_shape(fact, X, "stationarity_residual");
  Mat G = loss_gradient(spec.loss, fact.product(), X, spec.averaged);
  double dh = spec.averaged ? static_cast<double>(X.cols()) : 1.0;
  double wD = spec.alpha / 2.0;
  double wH = spec.alpha / (2.0 * spec.s * spec.s * dh);
  Mat gD = G * fact.H.transpose() + reg_subgradient(spec.regD, fact.D, Orientation::Columns, wD);
  Mat gH = fact.D.transpose() * G + reg_subgradient(spec.regH, fact.H, Orientation::Rows, wH);
  double scale = std::max(1.0, X.norm());
  return {gD.norm() / scale, gH.norm() / scale};
}

Certificate global_certificate(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                               double tol) {
  spec.validate();
  check_data_shape(fact, X, "global_certificate");
  if (!(tol >= 0.0)) throw invalid_input("global_certificate: tol must be nonnegative");
  bool weighted = spec.regD.kind == RegKind::WeightedSquaredL2;
  if ((spec.regD.kind != RegKind::SquaredL2 && !weighted) ||
      spec.regH.kind != RegKind::SquaredL2)
    throw unsupported_kind(
        "global_certificate: needs (weighted) squared l2 on D and squared l2 on H");

  auto [res_d, res_h] = stationarity_residual(fact, X, spec);
  Eigen::MatrixXd dual = loss_gradient(spec.loss, fact.product(), X, spec.averaged);
  if (weighted)
    dual = Eigen::MatrixXd(spec.regD.lambda.transpose()).fullPivLu().solve(dual).eval();
  double sigma = Eigen::BDCSVD<Eigen::MatrixXd>(dual).singularValues()(0);

  double dh = spec.averaged ? static_cast<double>(X.cols()) : 1.0;
  Certificate cert;
  cert.grad_D_norm = res_d;
  cert.grad_H_norm = res_h;
  cert.dual_sigma_max = sigma;
  cert.alpha = spec.alpha / (spec.s * std::sqrt(dh));
  cert.globally_optimal =
      res_d <= tol && res_h <= tol && sigma <= cert.alpha * (1.0 + tol);
  return cert;
}

double hessian_min_eigenvalue(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                              double fd_step) {
  spec.validate();
  check_data_shape(fact, X, "hessian_min_eigenvalue");
  const Index d = fact.d(), k = fact.k(), T = fact.T();
  const Index n = d * k + k * T;
  if (n > 400)
    throw invalid_input("hessian_min_eigenvalue: dk + kT exceeds the dense difference cap 400");

  Eigen::VectorXd x0(n);
  Eigen::Map<Eigen::VectorXd>(x0.data(), d * k) =
      Eigen::Map<const Eigen::VectorXd>(fact.D.data(), d * k);
  Eigen::Map<Eigen::VectorXd>(x0.data() + d * k, k * T) =
      Eigen::Map<const Eigen::VectorXd>(fact.H.data(), k * T);

  auto eval = [&](const Eigen::VectorXd& x) {
    Factorization f;
    f.D = Eigen::Map<const Mat>(x.data(), d, k);
    f.H = Eigen::Map<const Mat>(x.data() + d * k, k, T);
    return objective_value(f, X, spec);
  };

  Eigen::VectorXd h(n);
  for (Index i = 0; i < n; ++i)
    h[i] = fd_step > 0.0 ? fd_step : std::max(1e-5, 1e-5 * std::abs(x0[i]));

  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd x = x0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      double v = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          x = x0;
          x[i] += si * h[i];
          x[j] += sj * h[j];
          v += si * sj * eval(x);
        }
      v /= 4.0 * h[i] * h[j];
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  if (es.info() != Eigen::Success)
    throw numerical_failure("hessian_min_eigenvalue: eigendecomposition failed");
  return es.eigenvalues()(0);
}

double induced_reg_estimate(const Mat& Z, const RegularizerSpec& regD,
                            const RegularizerSpec& regH, int k, const RhoSchedule& rho) {
  regD.validate();
  regH.validate();
  if (Z.size() == 0) throw invalid_input("induced_reg_estimate: empty target");
  require_finite(Z, "induced_reg_estimate target");
  if (k < 1) throw invalid_input("induced_reg_estimate: k must be positive");
  if (!(rho.start > 0.0) || !(rho.stop >= rho.start) || !(rho.factor > 1.0))
    throw invalid_input("induced_reg_estimate: need 0 < start <= stop and factor > 1");

  const double zn = Z.norm();
  if (zn == 0.0) return 0.0;  // the zero factorization is exact and free

  // minimize over rho of rho ||DH - Z||_F^2 + R_D + R_H, which is 2 rho times
  // the standard objective at alpha = 1/rho, unaveraged, unit scale.
  ProblemSpec spec;
  spec.loss = LossSpec::half_squared();
  spec.regD = regD;
  spec.regH = regH;
  spec.k = k;
  spec.s = 1.0;
  spec.averaged = false;

  double best = std::numeric_limits<double>::infinity();
  double best_resid = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 5; ++trial) {
    Rng reseed(0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(trial));
    std::optional<Factorization> warm;
    for (double r = rho.start;; r *= rho.factor) {
      r = std::min(r, rho.stop);
      spec.alpha = 1.0 / r;
      // Only the last stage decides feasibility, so it gets a near-machine
      // tolerance; earlier stages stay loose.
      bool last = r >= rho.stop;
      SolverConfig cfg;
      cfg.max_iters = last ? 20000 : 4000;
      cfg.tol = (last ? 1e-16 : 1e-12) * std::max(1.0, zn * zn);
      cfg.seed = static_cast<std::uint64_t>(trial);
      warm = am_dlm_solve(Z, spec, cfg, std::move(warm)).fact;
      if (r >= rho.stop) break;
      // Rank-deficient factors are absorbing under alternating minimization:
      // components annihilated by the heavily shrunk early stages (or folded
      // into collinear columns) could never return, and the handoff would be
      // rejected as rank deficient. A small full perturbation restores
      // numerical rank and seeds every direction the later, weakly shrunk
      // stages may need to recover. The absolute floor sqrt(zn) is the
      // balanced-factor scale, covering the all-shrunk case D = H = 0.
      double sd = 1e-4 * std::max(warm->D.norm(), std::sqrt(zn)) /
                  std::sqrt(static_cast<double>(warm->D.size()));
      double sh = 1e-4 * std::max(warm->H.norm(), std::sqrt(zn)) /
                  std::sqrt(static_cast<double>(warm->H.size()));
      warm->D += reseed.gaussian(warm->D.rows(), warm->D.cols(), 0.0, sd);
      warm->H += reseed.gaussian(warm->H.rows(), warm->H.cols(), 0.0, sh);
    }
    double resid = (warm->product() - Z).norm();
    best_resid = std::min(best_resid, resid);
    if (resid <= 1e-6 * zn) {
      double reg = reg_matrix_value(regD, warm->D, Orientation::Columns, 1.0) +
                   reg_matrix_value(regH, warm->H, Orientation::Rows, 1.0);
      best = std::min(best, reg);
    }
  }
  if (!std::isfinite(best)) {
    std::ostringstream msg;
    msg << "induced_reg_estimate: no start reached feasibility; best relative residual "
        << best_resid / zn;
    throw numerical_failure(msg.str());
  }
  return best;
}

double convexity_probe(const RegularizerSpec& regD, const RegularizerSpec& regH, int k,
                       Index rows, Index cols, int n_segments, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw invalid_input("convexity_probe: dimensions must be positive");
  if (n_segments < 1) throw invalid_input("convexity_probe: need at least one segment");
  Rng rng(seed);
  double worst = -std::numeric_limits<double>::infinity();
  for (int seg = 0; seg < n_segments; ++seg) {
    Mat Z1 = rng.gaussian(rows, cols, 0.0, 1.0);
    Mat Z2 = rng.gaussian(rows, cols, 0.0, 1.0);
    double r1 = induced_reg_estimate(Z1, regD, regH, k);
    double r2 = induced_reg_estimate(Z2, regD, regH, k);
    for (double eta : {0.25, 0.5, 0.75}) {
      double rm = induced_reg_estimate(eta * Z1 + (1.0 - eta) * Z2, regD, regH, k);
      worst = std::max(worst, rm - eta * r1 - (1.0 - eta) * r2);
    }
  }
  return worst;
}

Factorization rebalance_factors(const Factorization& fact, const RegularizerSpec& regD,
                                const RegularizerSpec& regH, RebalanceDirection direction) {
  regD.validate();
  regH.validate();
  std::vector<Index> kept;
  std::vector<double> gamma;
  kept.reserve(fact.k());
  gamma.reserve(fact.k());
  for (Index i = 0; i < fact.k(); ++i) {
    double c = factor_norm(regD, fact.D.col(i));
    double r = factor_norm(regH, Vec(fact.H.row(i).transpose()));
    if (c == 0.0 || r == 0.0) continue;  // zero rank-one term: dropping keeps D H exact
    kept.push_back(i);
    gamma.push_back(r / c);
  }
  if (kept.empty())
    throw invalid_input("rebalance_factors: every column/row pair has zero norm");

  Mat D(fact.d(), static_cast<Index>(kept.size()));
  Mat H(static_cast<Index>(kept.size()), fact.T());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    // summed form to producted form divides column i by gamma_i; the reverse
    // splits the producted balance with the cube root.
    double g = direction == RebalanceDirection::SummedToProducted ? 1.0 / gamma[j]
                                                                  : std::cbrt(gamma[j]);
    Index c = static_cast<Index>(j);
    D.col(c) = fact.D.col(kept[j]) * g;
    H.row(c) = fact.H.row(kept[j]) / g;
  }
  return Factorization(std::move(D), std::move(H));
}

Factorization scaling_transport(const Factorization& fact, double s) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw invalid_input("scaling_transport: scale must be positive and finite");
  double rs = std::sqrt(s);
  return Factorization(fact.D / rs, fact.H * rs);
}

}  // namespace dlm
