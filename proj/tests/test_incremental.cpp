#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dlm/batch.hpp"
#include "dlm/incremental.hpp"
#include "dlm/model.hpp"
#include "dlm/rng.hpp"
#include "dlm/types.hpp"

#include <cmath>
#include <vector>

using namespace dlm;

TEST_CASE("step-size schedules") {
  CHECK(schedule_step_size(ScheduleKind::Type1, 0.25, 100) == 0.25);
  CHECK(schedule_step_size(ScheduleKind::Type2, 0.5, 1) == 0.5);
  CHECK(schedule_step_size(ScheduleKind::Type2, 0.5, 16) == 0.125);
  CHECK(schedule_step_size(ScheduleKind::Type3, 1.0, 4) == 0.25);
  CHECK_THROWS_AS(schedule_step_size(ScheduleKind::Type2, 0.5, 0), invalid_input);
  CHECK_THROWS_AS(schedule_step_size(ScheduleKind::Type2, 0.0, 1), invalid_input);
}

TEST_CASE("accelerated step keeps the rate under correlation and drops on reversal") {
  SgdState st;
  st.eta = 0.5;
  st.t = 16;
  Mat g = Mat::Ones(2, 2);

  // No history yet: rate untouched.
  CHECK(accelerated_step(st, g, ScheduleKind::Type2, 0.5) == 0.5);
  CHECK(st.decrease_count == 0);

  st.grad_prev = g;
  CHECK(accelerated_step(st, g, ScheduleKind::Type2, 0.5) == 0.5);  // aligned
  CHECK(st.decrease_count == 0);
  CHECK(accelerated_step(st, Mat(Mat::Zero(2, 2)), ScheduleKind::Type2, 0.5) == 0.5);  // ip = 0

  CHECK(accelerated_step(st, Mat(-g), ScheduleKind::Type2, 0.5) == 0.125);  // 0.5/sqrt(16)
  CHECK(st.decrease_count == 1);

  // Already below the schedule: reversal cannot raise the rate.
  st.eta = 0.01;
  CHECK(accelerated_step(st, Mat(-g), ScheduleKind::Type2, 0.5) == 0.01);

  // Random gradient stream: stored rates never increase.
  Rng rng(3);
  st = SgdState{};
  st.eta = 1.0;
  st.grad_prev = rng.gaussian(2, 2, 0.0, 1.0);
  double prev = st.eta;
  for (int t = 1; t <= 200; ++t) {
    st.t = t;
    Mat gt = rng.gaussian(2, 2, 0.0, 1.0);
    double eta = accelerated_step(st, gt, ScheduleKind::Type2, 1.0);
    CHECK(eta <= prev + 1e-15);
    st.eta = eta;
    st.grad_prev = gt;
    prev = eta;
  }
  CHECK(st.decrease_count > 0);
}

TEST_CASE("incremental config validation") {
  IncrementalConfig cfg;
  cfg.eta0 = 0.0;
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
  cfg = IncrementalConfig{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
  cfg = IncrementalConfig{};
  cfg.momentum_beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
  cfg = IncrementalConfig{};
  cfg.inner_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
}

TEST_CASE("full objective re-solves every column exactly") {
  Rng rng(7);
  Mat X = rng.gaussian(3, 5, 0.0, 1.0);
  Mat D = rng.gaussian(3, 2, 0.0, 1.0);
  ProblemSpec spec = subspace_spec(0.2, 2, true);

  Mat H(2, 5);
  for (Index j = 0; j < 5; ++j) H.col(j) = solve_h_given_d(D, X.col(j), spec);
  double direct = objective_value(Factorization(D, H), X, spec);
  CHECK(full_objective_given_d(D, X, spec) == doctest::Approx(direct).epsilon(1e-14));

  // Subgradient-mode evaluation requests are overridden: traces stay exact.
  HSolveConfig sloppy;
  sloppy.subgradient = true;
  CHECK(full_objective_given_d(D, X, spec, sloppy) ==
        doctest::Approx(full_objective_given_d(D, X, spec)).epsilon(1e-12));

  CHECK_THROWS_AS(full_objective_given_d(rng.gaussian(4, 2, 0.0, 1.0), X, spec), invalid_input);
}

TEST_CASE("sgd fits a repeated sample to vanishing loss") {
  Rng rng(11);
  Vec x = rng.gaussian(3, 1, 0.0, 1.0).col(0);
  Mat X(3, 8);
  for (Index j = 0; j < 8; ++j) X.col(j) = x;
  ProblemSpec spec = subspace_spec(0.0, 1, true);
  IncrementalConfig cfg;
  cfg.schedule = ScheduleKind::Type2;
  cfg.eta0 = 0.5;
  cfg.epochs = 100;
  cfg.seed = 13;
  IncrementalResult res = sgd_am_dlm(X, spec, cfg);
  CHECK(res.report.final_objective < 1e-4);
  CHECK(res.report.iterations == 100 * 8);
}

TEST_CASE("sgd runs are bit-deterministic and trace on the requested cadence") {
  Rng rng(17);
  Mat X = rng.gaussian(3, 6, 0.0, 1.0);
  ProblemSpec spec = subspace_spec(0.1, 2, true);
  IncrementalConfig cfg;
  cfg.eta0 = 0.3;
  cfg.epochs = 4;
  cfg.seed = 19;
  cfg.eval_every = 3;

  IncrementalResult a = sgd_am_dlm(X, spec, cfg);
  IncrementalResult b = sgd_am_dlm(X, spec, cfg);
  CHECK(a.D == b.D);
  REQUIRE(a.report.objective_trace.size() == b.report.objective_trace.size());
  for (size_t i = 0; i < a.report.objective_trace.size(); ++i)
    CHECK(a.report.objective_trace[i].second == b.report.objective_trace[i].second);

  REQUIRE(!a.report.objective_trace.empty());
  for (size_t i = 0; i < a.report.objective_trace.size(); ++i) {
    int step = a.report.objective_trace[i].first;
    CHECK((step % 3 == 0 || step == 24));  // cadence plus the appended final point
  }
  CHECK(a.report.objective_trace.back().first == 24);
  CHECK(a.report.final_objective == a.report.objective_trace.back().second);

  // Exact-evaluation contract: each trace value is the full objective of some
  // dictionary, so it can never undercut the batch optimum.
  SolverConfig scfg;
  scfg.tol = 1e-12;
  scfg.seed = 23;
  double batch = am_dlm_solve(X, spec, scfg).report.final_objective;
  for (const auto& [step, obj] : a.report.objective_trace) CHECK(obj >= batch - 1e-8);
}

TEST_CASE("sgd momentum and acceleration variants stay finite and improve") {
  Rng rng(29);
  Mat X = rng.gaussian(4, 10, 0.0, 1.0);
  ProblemSpec spec = subspace_spec(0.05, 2, true);

  IncrementalConfig base;
  base.eta0 = 0.5;
  base.epochs = 30;
  base.seed = 31;

  double start = 0.0;
  {
    IncrementalConfig probe = base;
    probe.epochs = 1;
    Rng init(probe.seed);
    Mat D0 = init.gaussian(4, 2, 0.0, 1.0 / std::sqrt(2.0));
    start = full_objective_given_d(D0, X, spec);
  }

  IncrementalConfig mom = base;
  mom.momentum_beta = 0.01;
  IncrementalConfig acc = base;
  acc.accelerate = true;
  for (const IncrementalConfig& cfg : {base, mom, acc}) {
    IncrementalResult res = sgd_am_dlm(X, spec, cfg);
    CHECK(std::isfinite(res.report.final_objective));
    CHECK(all_finite(res.D));
    CHECK(res.report.final_objective < start);
  }
}

TEST_CASE("online update keeps exact symmetric statistics with the documented decay") {
  Rng rng(37);
  ProblemSpec spec = subspace_spec(0.1, 2, true);
  IncrementalConfig cfg;
  cfg.seed = 41;

  OnlineState st;
  st.D = rng.gaussian(3, 2, 0.0, 1.0);
  st.A = Mat::Zero(2, 2);
  st.B = Mat::Zero(3, 2);

  Mat A_ref = Mat::Zero(2, 2);
  Mat B_ref = Mat::Zero(3, 2);
  for (int t = 1; t <= 250; ++t) {
    Vec x = rng.gaussian(3, 1, 0.0, 1.0).col(0);
    Mat D_before = st.D;
    int sweeps = 0;
    Vec h = online_update(st, x, spec, cfg, &sweeps);
    CHECK(sweeps >= 1);

    // The coefficients are solved against the incoming dictionary.
    Vec expect_h = solve_h_given_d(D_before, x, spec);
    CHECK((h - expect_h).lpNorm<Eigen::Infinity>() < 1e-12);

    // beta_t = max(1/t, 0.01): past t = 100 the decay floors at 0.01.
    double beta = std::max(1.0 / static_cast<double>(t), 0.01);
    A_ref = (1.0 - beta) * A_ref + beta * (h * h.transpose());
    B_ref = (1.0 - beta) * B_ref + beta * (x * h.transpose());
    CHECK((st.A - A_ref).lpNorm<Eigen::Infinity>() < 1e-14);
    CHECK((st.B - B_ref).lpNorm<Eigen::Infinity>() < 1e-14);

    CHECK((st.A - st.A.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(st.A),
                                                      Eigen::EigenvaluesOnly};
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    CHECK(st.t == t);
  }
}

TEST_CASE("online update validates shapes and kinds") {
  ProblemSpec spec = subspace_spec(0.1, 2, true);
  IncrementalConfig cfg;
  OnlineState st;
  st.D = Mat::Identity(3, 2);
  st.A = Mat::Zero(2, 2);
  st.B = Mat::Zero(3, 2);

  Vec wrong = Vec::Ones(4);
  CHECK_THROWS_AS(online_update(st, wrong, spec, cfg), invalid_input);
  OnlineState bad = st;
  bad.A = Mat::Zero(3, 3);
  CHECK_THROWS_AS(online_update(bad, Vec::Ones(3), spec, cfg), invalid_input);

  ProblemSpec ce = spec;
  ce.loss = LossSpec::cross_entropy_sigmoid();
  CHECK_THROWS_AS(online_update(st, Vec::Ones(3), ce, cfg), unsupported_kind);
  ProblemSpec part = spec;
  part.regD = RegularizerSpec::partitioned_max(1);
  CHECK_THROWS_AS(online_update(st, Vec::Ones(3), part, cfg), unsupported_kind);
}

TEST_CASE("online solver on one sample matches the batch solution") {
  Rng rng(43);
  Vec x = rng.gaussian(3, 1, 0.0, 1.0).col(0);
  Mat X = x;
  ProblemSpec spec = subspace_spec(0.2, 2, true);

  IncrementalConfig cfg;
  cfg.epochs = 4000;
  cfg.seed = 47;
  cfg.inner_tol = 1e-10;
  cfg.max_inner = 500;
  IncrementalResult res = online_am_dlm(X, spec, cfg);

  SolverConfig scfg;
  scfg.tol = 1e-14;
  scfg.seed = 53;
  double batch = am_dlm_solve(X, spec, scfg).report.final_objective;
  double online = full_objective_given_d(res.D, X, spec);
  CHECK(online <= batch * (1.0 + 1e-4) + 1e-10);
  CHECK(online >= batch - 1e-8);
  CHECK(res.report.inner_iters.size() == static_cast<size_t>(res.report.iterations));
}

TEST_CASE("online solver is deterministic and traces finite objectives") {
  Rng rng(59);
  Mat X = rng.gaussian(3, 7, 0.0, 1.0);
  ProblemSpec spec = subspace_spec(0.1, 2, true);
  IncrementalConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 61;

  IncrementalResult a = online_am_dlm(X, spec, cfg);
  IncrementalResult b = online_am_dlm(X, spec, cfg);
  CHECK(a.D == b.D);
  CHECK(!a.report.objective_trace.empty());
  for (const auto& [step, obj] : a.report.objective_trace) {
    CHECK(step >= 1);
    CHECK(std::isfinite(obj));
  }

  // Sparse-coding dictionaries are l1-prox updates in the same surrogate loop.
  ProblemSpec sc = sparse_coding_spec(0.3, 2, true);
  sc.regD = RegularizerSpec::squared_l1(true);
  sc.regH = RegularizerSpec::squared_l2();
  IncrementalResult lres = online_am_dlm(X, sc, cfg);
  CHECK(all_finite(lres.D));
}
