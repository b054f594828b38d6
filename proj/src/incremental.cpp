#include "dlm/incremental.hpp"

#include "dlm/rng.hpp"

#include <cmath>
#include <numeric>

namespace dlm {
namespace {

bool decoupled_h(const RegularizerSpec& r) {
  return r.kind == RegKind::SquaredL2 || r.kind == RegKind::ElasticNetSq ||
         r.kind == RegKind::PseudoHuberSq ||
         (r.kind == RegKind::SquaredL1 && r.unsquared_l1);
}

// epoch permutations are seeded independently of the sample loop so epoch e
// reshuffles identically no matter what computation preceded it
std::vector<Index> epoch_order(Index T, std::uint64_t seed, int epoch) {
  std::vector<Index> order(static_cast<size_t>(T));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(epoch + 1));
  rng.shuffle(order);
  return order;
}

Mat draw_init(Index d, int k, std::uint64_t seed) {
  Rng rng(seed);
  return rng.gaussian(d, k, 0.0, 1.0 / std::sqrt(static_cast<double>(k)));
}

}  // namespace

void IncrementalConfig::validate() const {
  if (!(eta0 > 0.0)) throw invalid_input("incremental config: eta0 must be positive");
  if (epochs < 1) throw invalid_input("incremental config: epochs must be at least 1");
  if (momentum_beta < 0.0) throw invalid_input("incremental config: momentum must be nonnegative");
  if (max_inner < 1) throw invalid_input("incremental config: max_inner must be at least 1");
  if (!(inner_tol > 0.0)) throw invalid_input("incremental config: inner_tol must be positive");
}

double schedule_step_size(ScheduleKind kind, double eta0, int t) {
  if (!(eta0 > 0.0)) throw invalid_input("schedule_step_size: eta0 must be positive");
  if (t < 1) throw invalid_input("schedule_step_size: t must be at least 1");
  switch (kind) {
    case ScheduleKind::Type1:
      return eta0;
    case ScheduleKind::Type2:
      return eta0 / std::sqrt(static_cast<double>(t));
    case ScheduleKind::Type3:
      return eta0 / static_cast<double>(t);
  }
  throw invalid_input("schedule_step_size: unknown kind");
}

double accelerated_step(SgdState& state, const Mat& grad_t, ScheduleKind kind, double eta0) {
  if (state.grad_prev.size() == 0 || grad_t.size() == 0) return state.eta;
  double ip = (grad_t.array() * state.grad_prev.array()).sum();
  if (ip >= 0.0) return state.eta;
  ++state.decrease_count;
  // the min keeps the sequence non-increasing even for the flat schedule
  return std::min(state.eta, schedule_step_size(kind, eta0, std::max(state.t, 1)));
}

double full_objective_given_d(const Mat& D, const Mat& X, const ProblemSpec& spec,
                              const HSolveConfig& config) {
  if (D.rows() != X.rows()) throw invalid_input("full_objective_given_d: D and X do not conform");
  Mat H(D.cols(), X.cols());
  HSolveConfig exact = config;
  exact.subgradient = false;  // evaluation always re-solves exactly
  for (Index j = 0; j < X.cols(); ++j) H.col(j) = solve_h_given_d(D, X.col(j), spec, exact);
  return objective_value(Factorization(D, H), X, spec);
}

IncrementalResult sgd_am_dlm(const Mat& X, const ProblemSpec& spec,
                             const IncrementalConfig& config) {
  spec.validate();
  config.validate();
  if (!decoupled_h(spec.regH))
    throw unsupported_kind("sgd_am_dlm: coefficient regularizer must decouple across samples");
  const Index d = X.rows(), T = X.cols();
  const double wD = spec.alpha / 2.0;

  SgdState st;
  st.D = draw_init(d, spec.k, config.seed);
  st.D_prev = st.D;
  st.eta = config.eta0;

  HSolveConfig hcfg = config.h_solve;
  hcfg.subgradient = true;  // proximal per-sample solves degrade stochastic D updates

  TrialReport report;
  report.seed = config.seed;
  const int eval_every = config.eval_every > 0 ? config.eval_every : static_cast<int>(T);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (Index idx : epoch_order(T, config.seed, epoch)) {
      ++st.t;
      Vec x = X.col(idx);
      Vec h = solve_h_given_d(st.D, x, spec, hcfg);
      // Danskin: the per-sample loss gradient at the solved coefficients
      Mat grad = (st.D * h - x) * h.transpose() +
                 reg_subgradient(spec.regD, st.D, Orientation::Columns, wD);
      double eta = config.accelerate && st.t >= 2
                       ? accelerated_step(st, grad, config.schedule, config.eta0)
                       : schedule_step_size(config.schedule, config.eta0, st.t);
      Mat next = st.D - eta * grad;
      if (config.momentum_beta > 0.0) next += config.momentum_beta * (st.D - st.D_prev);
      st.D_prev = st.D;
      st.D = next;
      st.grad_prev = grad;
      st.eta = eta;
      if (!st.D.allFinite())
        throw numerical_failure("sgd_am_dlm: factor non-finite at step " + std::to_string(st.t));
      if (st.t % eval_every == 0)
        report.objective_trace.emplace_back(st.t, full_objective_given_d(st.D, X, spec));
    }
  }
  if (report.objective_trace.empty() || report.objective_trace.back().first != st.t)
    report.objective_trace.emplace_back(st.t, full_objective_given_d(st.D, X, spec));
  report.final_objective = report.objective_trace.back().second;
  report.iterations = st.t;
  report.converged = true;
  return {std::move(st.D), std::move(report)};
}

namespace {

void check_online_spec(const ProblemSpec& spec) {
  if (spec.loss.kind != LossKind::HalfSquaredError &&
      spec.loss.kind != LossKind::MaskedHalfSquaredError)
    throw unsupported_kind("online_am_dlm: quadratic sufficient statistics need a squared loss");
  if (!decoupled_h(spec.regH))
    throw unsupported_kind("online_am_dlm: coefficient regularizer must decouple across samples");
  const RegKind dk = spec.regD.kind;
  if (dk != RegKind::SquaredL2 && dk != RegKind::ElasticNetSq &&
      !(dk == RegKind::SquaredL1 && spec.regD.unsquared_l1))
    throw unsupported_kind("online_am_dlm: dictionary update supports l2/elastic/l1 kinds");
}

}  // namespace

Vec online_update(OnlineState& st, const Vec& x, const ProblemSpec& spec,
                  const IncrementalConfig& config, int* sweeps_out) {
  spec.validate();
  config.validate();
  check_online_spec(spec);
  const int k = spec.k;
  if (st.D.rows() != x.size() || st.D.cols() != k || st.A.rows() != k || st.A.cols() != k ||
      st.B.rows() != x.size() || st.B.cols() != k)
    throw invalid_input("online_update: state shapes do not match the sample and spec");
  const RegKind dk = spec.regD.kind;
  const double wD = spec.alpha / 2.0;
  const double nuD =
      dk == RegKind::ElasticNetSq ? spec.regD.nu : (dk == RegKind::SquaredL2 ? 1.0 : 0.0);
  HSolveConfig hcfg = config.h_solve;
  hcfg.subgradient = false;

  ++st.t;
  Vec h = solve_h_given_d(st.D, x, spec, hcfg);
  double beta = std::max(1.0 / static_cast<double>(st.t), 0.01);
  // materialize the outer product so scaling cannot break exact symmetry of A
  Mat hh = h * h.transpose();
  st.A = (1.0 - beta) * st.A + beta * hh;
  st.B = (1.0 - beta) * st.B + beta * (x * h.transpose());

  // block-coordinate descent on 1/2 tr(D'DA) - tr(D'B) + wD * R_D, warm start
  int sweeps = 0;
  for (; sweeps < config.max_inner; ++sweeps) {
    double change2 = 0.0, norm2 = 0.0;
    for (int j = 0; j < k; ++j) {
      Vec rhs = st.B.col(j) - (st.D * st.A.col(j) - st.A(j, j) * st.D.col(j));
      double c = st.A(j, j) + 2.0 * wD * nuD;
      Vec z;
      if (dk == RegKind::SquaredL2) {
        z = rhs / std::max(c, 1e-12);
      } else if (dk == RegKind::ElasticNetSq) {
        c = std::max(c, 1e-12);
        z = prox_sql1(Vec(rhs / c), wD * (1.0 - nuD) / c).z;
      } else {  // plain l1
        c = std::max(st.A(j, j), 1e-12);
        z = soft_threshold(rhs, wD);
        z /= c;
      }
      change2 += (z - st.D.col(j)).squaredNorm();
      norm2 += z.squaredNorm();
      st.D.col(j) = z;
    }
    if (std::sqrt(change2) <= config.inner_tol * std::max(std::sqrt(norm2), 1.0)) {
      ++sweeps;
      break;
    }
  }
  if (sweeps_out) *sweeps_out = sweeps;
  if (!st.D.allFinite())
    throw numerical_failure("online_am_dlm: factor non-finite at step " + std::to_string(st.t));
  return h;
}

IncrementalResult online_am_dlm(const Mat& X, const ProblemSpec& spec,
                                const IncrementalConfig& config) {
  spec.validate();
  config.validate();
  check_online_spec(spec);
  const Index d = X.rows(), T = X.cols();
  const int k = spec.k;

  OnlineState st;
  st.D = draw_init(d, k, config.seed);
  st.A = Mat::Zero(k, k);
  st.B = Mat::Zero(d, k);

  TrialReport report;
  report.seed = config.seed;
  const int eval_every = config.eval_every > 0 ? config.eval_every : static_cast<int>(T);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (Index idx : epoch_order(T, config.seed, epoch)) {
      int sweeps = 0;
      online_update(st, X.col(idx), spec, config, &sweeps);
      report.inner_iters.push_back(sweeps);
      if (st.t % eval_every == 0)
        report.objective_trace.emplace_back(st.t, full_objective_given_d(st.D, X, spec));
    }
  }
  if (report.objective_trace.empty() || report.objective_trace.back().first != st.t)
    report.objective_trace.emplace_back(st.t, full_objective_given_d(st.D, X, spec));
  report.final_objective = report.objective_trace.back().second;
  report.iterations = st.t;
  report.converged = true;
  return {std::move(st.D), std::move(report)};
}

}  // namespace dlm
