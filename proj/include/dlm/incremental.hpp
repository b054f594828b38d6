#pragma once

#include "dlm/batch.hpp"
#include "dlm/model.hpp"
#include "dlm/types.hpp"

namespace dlm {

enum class ScheduleKind { Type1, Type2, Type3 };  // eta0, eta0/sqrt(t), eta0/t

struct OnlineState {
  Mat D;   // d x k
  Mat A;   // k x k second moment of codes
  Mat B;   // d x k data-code cross moment
  int t = 0;
};

struct SgdState {
  Mat D;
  Mat D_prev;
  Mat grad_prev;
  double eta = 0.0;
  int decrease_count = 0;
  int t = 0;
};

double schedule_step_size(ScheduleKind kind, double eta0, int t);

// Keep the current step while successive stochastic gradients correlate
// (trace of the inner product >= 0); on anti-correlation drop to the schedule
// value at the current step index. Mutates decrease_count only; the caller
// stores the returned step. The returned sequence is non-increasing.
double accelerated_step(SgdState& state, const Mat& grad_t, ScheduleKind kind, double eta0);

struct IncrementalConfig {
  ScheduleKind schedule = ScheduleKind::Type2;
  double eta0 = 0.5;
  double momentum_beta = 0.0;  // constant momentum weight; 0 disables
  bool accelerate = false;
  int epochs = 10;
  int eval_every = 0;  // trace cadence in samples; 0 = once per epoch
  double inner_tol = 1e-6;  // online D-update stop on relative change
  int max_inner = 100;
  std::uint64_t seed = 0;
  HSolveConfig h_solve;  // per-sample coefficient subproblem

  void validate() const;
};

// One observed sample: solve the coefficient vector, decay (A, B) toward
// (h h^T, x h^T) with beta_t = max(1/t, 0.01), then warm-started block
// coordinate descent on the quadratic surrogate. Returns the coefficients;
// sweeps_out, when given, receives the inner sweep count.
Vec online_update(OnlineState& state, const Vec& x, const ProblemSpec& spec,
                  const IncrementalConfig& config, int* sweeps_out = nullptr);

// Evaluation objective for traces and cross-method comparison: the full-data
// objective with every coefficient column re-solved exactly for this D.
double full_objective_given_d(const Mat& D, const Mat& X, const ProblemSpec& spec,
                              const HSolveConfig& config = {});

struct IncrementalResult {
  Mat D;
  TrialReport report;
};

// Stochastic subgradient alternation: per sample, solve the coefficient
// vector, then one subgradient step on D; reshuffles every pass.
IncrementalResult sgd_am_dlm(const Mat& X, const ProblemSpec& spec,
                             const IncrementalConfig& config);

// Sufficient-statistics alternation: per sample, solve the coefficient
// vector, decay (A, B) with beta_t = max(1/t, 0.01), then block-coordinate
// descent on the quadratic surrogate from a warm start. Per-sample inner
// sweep counts land in TrialReport::inner_iters.
IncrementalResult online_am_dlm(const Mat& X, const ProblemSpec& spec,
                                const IncrementalConfig& config);

}  // namespace dlm
