// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit status is the number of failed criteria. Tolerances are pinned
// here rather than configurable so a run is a yes/no answer.

#include "dlm/certify.hpp"
#include "dlm/harness.hpp"
#include "dlm/incremental.hpp"
#include "dlm/model.hpp"
#include "dlm/rng.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace {

using namespace dlm;

// Pinned gates.
constexpr double kProxGap = 1e-6;           // prox vs oracle, sup norm
constexpr double kProxResidual = 1e-10;     // optimality-condition residual
constexpr double kOracleRel = 1e-3;         // solver objective vs closed form
constexpr double kCertResidual = 1e-6;      // stationarity at certified points
constexpr double kCertDualSlack = 1e-4;     // sigma_max <= alpha * (1 + slack)
constexpr double kInducedRelDiff = 2e-3;    // multi-init spread, induced rows
constexpr double kCoupledRelDiff = 5e-2;    // baseline must exceed somewhere
constexpr double kNonNormRelDiff = 1e-2;    // non-norm must exceed somewhere
constexpr double kSweepStdOverMean = 1e-3;  // per-k init spread
constexpr double kSweepGapSlack = 1e-3;     // gap monotone up to this
constexpr double kFdRel = 1e-5;             // finite-difference gradient match
constexpr double kProductRel = 1e-13;       // rebalance product drift
constexpr double kTransportRel = 1e-12;     // scaling-transport objective match
constexpr double kProbeViolation = 1e-4;    // induced-objective midpoint convexity

struct Line {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

Line prox_against_oracle() {
  Line line;
  Rng rng(1);
  double worst_gap = 0.0, worst_res = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Index n = 1 + static_cast<Index>(rng.below(5));
    double scale = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    double lambda = std::pow(10.0, 4.0 * rng.uniform() - 3.0);
    Vec u = rng.gaussian(n, 1, 0.0, scale).col(0);
    Vec z = prox_sql1(u, lambda).z;
    Vec ref = oracle::prox_sql1_bisect(u, lambda);
    worst_gap = std::max(worst_gap, (z - ref).lpNorm<Eigen::Infinity>());
    worst_res = std::max(worst_res, oracle::sql1_condition_residual(u, lambda, z));
  }
  if (worst_gap >= kProxGap) line.fail("max oracle gap " + num(worst_gap));
  if (worst_res > kProxResidual) line.fail("max condition residual " + num(worst_res));
  if (line.ok)
    line.detail = "1000 trials, gap " + num(worst_gap) + ", residual " + num(worst_res);
  return line;
}

// ------------------------------------------------------------ criteria 2 + 3

struct SolvedInstance {
  Mat X;
  ProblemSpec spec;
  Factorization fact;
};

std::vector<SolvedInstance> g_solved;

Line solver_against_shrinkage_oracle() {
  Line line;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    Rng rng(100 + i);
    int d = 2 + static_cast<int>(rng.below(9));
    int T = 2 + static_cast<int>(rng.below(19));
    int k = std::min(d, T);
    bool averaged = (i % 2) == 0;
    double alpha = averaged ? 0.3 / std::sqrt(static_cast<double>(T)) : 0.3;
    Mat X = rng.gaussian(d, T, 0.0, 1.0);
    ProblemSpec spec = subspace_spec(alpha, k, averaged);
    oracle::ShrinkOracle ref = oracle::subspace_shrinkage(X, alpha, averaged, 1.0, k);

    SolverConfig cfg;
    cfg.tol = 1e-14;
    cfg.max_iters = 400000;
    cfg.seed = static_cast<std::uint64_t>(i);
    SolveResult res = am_dlm_solve(X, spec, cfg);
    double obj = objective_value(res.fact, X, spec);
    double rel = std::abs(obj - ref.objective) / std::max(ref.objective, 1e-12);
    worst = std::max(worst, rel);
    if (rel > kOracleRel)
      line.fail("instance " + std::to_string(i) + " off by " + num(rel));
    g_solved.push_back({std::move(X), spec, std::move(res.fact)});
  }
  if (line.ok) line.detail = "20 instances, worst relative gap " + num(worst);
  return line;
}

Line certificates_on_oracle_solutions() {
  Line line;
  if (g_solved.empty()) {
    line.fail("no solved instances to certify");
    return line;
  }
  int broken = 0;
  double worst_res = 0.0, worst_sigma = 0.0;
  for (std::size_t i = 0; i < g_solved.size(); ++i) {
    const SolvedInstance& inst = g_solved[i];
    Certificate cert = global_certificate(inst.fact, inst.X, inst.spec, kCertResidual);
    worst_res = std::max({worst_res, cert.grad_D_norm, cert.grad_H_norm});
    worst_sigma = std::max(worst_sigma, cert.dual_sigma_max / cert.alpha);
    if (cert.grad_D_norm > kCertResidual || cert.grad_H_norm > kCertResidual)
      line.fail("instance " + std::to_string(i) + " residual " +
                num(std::max(cert.grad_D_norm, cert.grad_H_norm)));
    if (cert.dual_sigma_max > cert.alpha * (1.0 + kCertDualSlack))
      line.fail("instance " + std::to_string(i) + " dual sigma " + num(cert.dual_sigma_max) +
                " vs threshold " + num(cert.alpha));

    Rng rng(900 + static_cast<std::uint64_t>(i));
    Factorization bad = inst.fact;
    bad.D += rng.gaussian(bad.D.rows(), bad.D.cols(), 0.0, 0.1);
    bad.H += rng.gaussian(bad.H.rows(), bad.H.cols(), 0.0, 0.1);
    Certificate nope = global_certificate(bad, inst.X, inst.spec, kCertResidual);
    bool certified = nope.grad_D_norm <= kCertResidual && nope.grad_H_norm <= kCertResidual &&
                     nope.dual_sigma_max <= nope.alpha * (1.0 + kCertDualSlack);
    if (!certified) ++broken;
  }
  if (broken != static_cast<int>(g_solved.size()))
    line.fail("perturbation only rejected " + std::to_string(broken) + "/" +
              std::to_string(g_solved.size()));
  if (line.ok)
    line.detail = "20 certified (residual " + num(worst_res) + ", sigma/alpha " +
                  num(worst_sigma) + "), perturbed 20/20 rejected";
  return line;
}

// ---------------------------------------------------------------- criterion 4

Line multi_init_spread() {
  Line line;
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::MultiInit;
  cfg.specs = {SpecRow{"subspace", 0.5, 0.5}, SpecRow{"sparse", 0.5, 0.5},
               SpecRow{"elastic", 0.5, 0.5}, SpecRow{"non_norm", 0.5, 0.5},
               SpecRow{"coupled_l2", 0.5, 0.5}};
  cfg.seed = 7;
  cfg.solver.tol = 1e-9;
  cfg.solver.max_iters = 100000;
  ExperimentReport rep = multi_init_experiment(cfg);

  double induced_max = 0.0, coupled_max = 0.0, non_norm_max = 0.0;
  for (const CellRecord& cell : rep.cells) {
    if (cell.failed) {
      line.fail(cell.family + " cell failed: " + cell.failure);
      continue;
    }
    if (cell.family == "coupled_l2") {
      coupled_max = std::max(coupled_max, cell.rel_diff_max);
    } else if (cell.family == "non_norm") {
      non_norm_max = std::max(non_norm_max, cell.rel_diff_max);
    } else {
      induced_max = std::max(induced_max, cell.rel_diff_max);
      if (cell.rel_diff_max > kInducedRelDiff)
        line.fail(cell.family + " alpha=" + num(cell.alpha) + " d=" + std::to_string(cell.d) +
                  " k=" + std::to_string(cell.k) + " spread " + num(cell.rel_diff_max));
    }
  }
  if (coupled_max <= kCoupledRelDiff)
    line.fail("coupled_l2 spread only " + num(coupled_max));
  if (non_norm_max <= kNonNormRelDiff)
    line.fail("non_norm spread only " + num(non_norm_max));
  if (line.ok)
    line.detail = "induced max spread " + num(induced_max) + ", coupled_l2 " +
                  num(coupled_max) + ", non_norm " + num(non_norm_max);
  return line;
}

// ---------------------------------------------------------------- criterion 5

Line k_sweep_consistency() {
  Line line;
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::KSweep;
  cfg.ds = {50};
  cfg.ks = {3, 5, 10, 25, 50, 100};
  cfg.nus = {0.0, 0.5, 1.0};
  cfg.seed = 7;
  ExperimentReport rep = k_sweep_experiment(cfg);

  double worst_std = 0.0;
  for (const KSweepRecord& rec : rep.sweep) {
    if (rec.failed) {
      line.fail("nu=" + num(rec.nu) + " k=" + std::to_string(rec.k) + " failed: " + rec.failure);
      continue;
    }
    double ratio = rec.obj_std / std::max(rec.obj_mean, 1e-12);
    worst_std = std::max(worst_std, ratio);
    if (ratio > kSweepStdOverMean)
      line.fail("nu=" + num(rec.nu) + " k=" + std::to_string(rec.k) + " std/mean " + num(ratio));
  }
  for (const double nu : cfg.nus) {
    const KSweepRecord* prev = nullptr;
    for (const KSweepRecord& rec : rep.sweep) {
      if (rec.nu != nu || rec.failed) continue;
      if (prev && rec.gap > prev->gap + kSweepGapSlack)
        line.fail("nu=" + num(nu) + " gap rises " + num(prev->gap) + " -> " + num(rec.gap) +
                  " at k=" + std::to_string(rec.k));
      prev = &rec;
    }
  }
  if (line.ok)
    line.detail = std::to_string(rep.sweep.size()) + " sweep points, worst std/mean " +
                  num(worst_std) + ", gaps monotone";
  return line;
}

// ---------------------------------------------------------------- criterion 6

Line incremental_vs_batch() {
  Line line;
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::IncrementalCompare;
  cfg.ds = {50};
  cfg.incremental.epochs = 50;
  cfg.seed = 7;
  ExperimentReport rep = incremental_compare(cfg);

  auto find = [&](const std::string& name) -> const MethodRecord* {
    for (const MethodRecord& rec : rep.methods)
      if (rec.name == name) return &rec;
    return nullptr;
  };
  const MethodRecord* sgd = find("sgd_type2");
  const MethodRecord* online = find("online");
  const MethodRecord* accel = find("sgd_type2_accel");
  if (!sgd || !online || !accel) {
    line.fail("missing method records");
    return line;
  }
  for (const MethodRecord* rec : {sgd, online, accel})
    if (rec->failed) line.fail(rec->name + " failed: " + rec->failure);
  if (!line.ok) return line;

  if (sgd->hit_epoch < 0 || sgd->hit_epoch > cfg.incremental.epochs)
    line.fail("sgd_type2 never reached 5% of batch (hit_epoch " +
              std::to_string(sgd->hit_epoch) + ")");
  if (online->hit_epoch < 0 || (sgd->hit_epoch >= 0 && online->hit_epoch > sgd->hit_epoch))
    line.fail("online hit_epoch " + std::to_string(online->hit_epoch) + " vs sgd " +
              std::to_string(sgd->hit_epoch));
  if (accel->hit_step < 0 || (sgd->hit_step >= 0 && accel->hit_step > sgd->hit_step))
    line.fail("accelerated hit_step " + std::to_string(accel->hit_step) + " vs sgd " +
              std::to_string(sgd->hit_step));

  // The stored accelerated rates must never increase, whatever the gradients.
  Rng rng(42);
  SgdState st;
  st.eta = 0.5;
  st.grad_prev = rng.gaussian(8, 3, 0.0, 1.0);
  double prev_eta = st.eta;
  for (int t = 1; t <= 500; ++t) {
    st.t = t;
    Mat g = rng.gaussian(8, 3, 0.0, 1.0);
    double eta = accelerated_step(st, g, ScheduleKind::Type2, 0.5);
    if (eta > prev_eta) {
      line.fail("accelerated step rose at t=" + std::to_string(t));
      break;
    }
    st.eta = eta;
    st.grad_prev = g;
    prev_eta = eta;
  }
  if (line.ok)
    line.detail = "sgd hit epoch " + std::to_string(sgd->hit_epoch) + ", online " +
                  std::to_string(online->hit_epoch) + ", accel step " +
                  std::to_string(accel->hit_step) + " <= " + std::to_string(sgd->hit_step) +
                  ", rates non-increasing";
  return line;
}

// ---------------------------------------------------------------- criterion 7

Line property_bundle() {
  Line line;
  Rng rng(11);

  // Finite-difference agreement for every smooth loss gradient.
  double worst_fd = 0.0;
  for (bool averaged : {true, false}) {
    for (LossKind kind : {LossKind::HalfSquaredError, LossKind::CrossEntropySigmoid,
                          LossKind::RobustHalfSquaredError}) {
      LossSpec loss;
      loss.kind = kind;
      loss.alpha_s = 0.7;
      Mat X = kind == LossKind::CrossEntropySigmoid
                  ? Mat((rng.gaussian(4, 6, 0.0, 1.0).array().tanh() + 1.0) / 2.0)
                  : rng.gaussian(4, 6, 0.0, 1.0);
      Mat Z = rng.gaussian(4, 6, 0.0, 1.0);
      Mat grad = loss_gradient(loss, Z, X, averaged);
      Mat fd = oracle::fd_gradient([&](const Mat& M) { return loss_value(loss, M, X, averaged); },
                                   Z, 1e-6);
      worst_fd = std::max(worst_fd, oracle::rel_err(grad, fd));
    }
  }
  if (worst_fd > kFdRel) line.fail("loss gradient fd error " + num(worst_fd));

  // Online second-moment matrix stays symmetric positive semidefinite.
  ProblemSpec spec = subspace_spec(0.1, 4, true);
  IncrementalConfig icfg;
  OnlineState st;
  st.D = rng.gaussian(8, 4, 0.0, 1.0);
  st.A = Mat::Zero(4, 4);
  st.B = Mat::Zero(8, 4);
  double asym = 0.0, min_eig = 0.0;
  for (int t = 0; t < 100; ++t) {
    Vec x = rng.gaussian(8, 1, 0.0, 1.0).col(0);
    online_update(st, x, spec, icfg);
    asym = std::max(asym, (st.A - st.A.transpose()).lpNorm<Eigen::Infinity>());
    Eigen::SelfAdjointEigenSolver<Mat> eig(st.A);
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
  }
  if (asym > 1e-12) line.fail("online moment asymmetry " + num(asym));
  if (min_eig < -1e-10) line.fail("online moment min eigenvalue " + num(min_eig));

  // Rebalancing preserves the product to rounding error.
  double worst_drift = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Factorization f;
    f.D = rng.gaussian(5, 3, 0.0, 1.0);
    f.H = rng.gaussian(3, 7, 0.0, 1.0);
    Mat before = f.product();
    RebalanceDirection dir =
        rep % 2 ? RebalanceDirection::ProductedToSummed : RebalanceDirection::SummedToProducted;
    Factorization g = rebalance_factors(f, RegularizerSpec::squared_l2(),
                                        RegularizerSpec::squared_l2(), dir);
    worst_drift = std::max(worst_drift, (g.product() - before).norm() / before.norm());
  }
  if (worst_drift > kProductRel) line.fail("rebalance product drift " + num(worst_drift));

  // Dividing D by sqrt(s) and scaling H up is the same problem at strength s.
  double worst_transport = 0.0;
  for (double s : {3.0, 4.0}) {
    for (bool averaged : {true, false}) {
      Factorization f;
      f.D = rng.gaussian(5, 3, 0.0, 1.0);
      f.H = rng.gaussian(3, 7, 0.0, 1.0);
      Mat X = rng.gaussian(5, 7, 0.0, 1.0);
      ProblemSpec scaled = subspace_spec(0.4, 3, averaged);
      scaled.s = s;
      ProblemSpec plain = subspace_spec(0.4 / s, 3, averaged);
      double a = objective_value(scaling_transport(f, s), X, scaled);
      double b = objective_value(f, X, plain);
      worst_transport = std::max(worst_transport, std::abs(a - b) / std::abs(b));
    }
  }
  if (worst_transport > kTransportRel)
    line.fail("scaling transport mismatch " + num(worst_transport));

  // Pseudo-Huber squared sits under the squared l1 norm, within n*mu of it.
  for (double mu : {1e-1, 1e-3}) {
    RegularizerSpec ph = RegularizerSpec::pseudo_huber_sq(mu);
    RegularizerSpec l1 = RegularizerSpec::squared_l1();
    for (int rep = 0; rep < 30; ++rep) {
      Index n = 2 + static_cast<Index>(rng.below(6));
      Vec v = rng.gaussian(n, 1, 0.0, 2.0).col(0);
      double ph2 = reg_vector_value(ph, v);
      double l12 = reg_vector_value(l1, v);
      double upper = std::sqrt(ph2) + static_cast<double>(n) * mu;
      if (ph2 > l12 + 1e-12 || l12 > upper * upper + 1e-12) {
        line.fail("pseudo-huber sandwich violated at mu=" + num(mu));
        break;
      }
    }
  }

  // Midpoint convexity of the induced subspace objective on random segments.
  double violation = convexity_probe(RegularizerSpec::squared_l2(), RegularizerSpec::squared_l2(),
                                     5, 5, 5, 2, 99);
  if (violation > kProbeViolation) line.fail("convexity probe violation " + num(violation));

  if (line.ok)
    line.detail = "fd " + num(worst_fd) + ", drift " + num(worst_drift) + ", transport " +
                  num(worst_transport) + ", probe " + num(violation);
  return line;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Line (*run)();
  };
  const Entry entries[] = {
      {"squared-l1 prox matches bisection oracle", prox_against_oracle},
      {"batch solver matches shrinkage closed form", solver_against_shrinkage_oracle},
      {"certificates accept optima, reject perturbations", certificates_on_oracle_solutions},
      {"multi-init spread: induced tight, baselines loose", multi_init_spread},
      {"k-sweep objectives stable, gap monotone", k_sweep_consistency},
      {"incremental arms reach the batch objective", incremental_vs_batch},
      {"gradient, moment, rebalance, transport properties", property_bundle},
  };

  int failures = 0;
  int idx = 0;
  for (const Entry& entry : entries) {
    ++idx;
    auto t0 = std::chrono::steady_clock::now();
    Line line;
    try {
      line = entry.run();
    } catch (const std::exception& e) {
      line.fail(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%d] %-52s %s  (%s; %.1fs)\n", idx, entry.name, line.ok ? "PASS" : "FAIL",
                line.detail.c_str(), secs);
    std::fflush(stdout);
    if (!line.ok) ++failures;
  }
  std::printf("acceptance: %d/7 criteria passed\n", 7 - failures);
  return failures;
}
