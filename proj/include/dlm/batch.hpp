#pragma once

#include "dlm/model.hpp"
#include "dlm/types.hpp"

#include <optional>

namespace dlm {

enum class LipschitzMode { Analytic, PowerIteration };
enum class Target { D, H };

struct SolverConfig {
  int max_iters = 50000;
  double tol = 1e-8;  // absolute objective-change stopping threshold
  double step_D = 0.0;  // 0 = automatic 1/L
  double step_H = 0.0;
  LipschitzMode lipschitz_mode = LipschitzMode::Analytic;
  int inner_prox_iters = 1;
  std::uint64_t seed = 0;
  bool exact_alternation = false;  // iterate each variable's step to convergence (A/B only)
  bool allow_subgradient = false;  // let step_smooth run nonsmooth kinds via subgradients
  bool full_refresh = false;       // recompute the residual per column instead of rank-one updates

  void validate() const;
};

double objective_value(const Factorization& fact, const Mat& X, const ProblemSpec& spec);
double objective_value(const Factorization& fact, const ObservedMatrix& X,
                       const ProblemSpec& spec);

// Curvature bounds for the smooth part of one variable's subproblem, the other
// factor held fixed. Full-matrix form: sigma_max(fixed)^2 over the loss divisor
// (the half-squared convention's exact Hessian bound, regularizer excluded).
// Per-column form: the conventional doubled bound 2(||fixed row/col||_1^2 / div
// + nu * alpha-term); solvers step with half of it, which majorizes the
// half-convention curvature. Floored at 1e-12 for zero fixed factors.
//
// The averaged loss divisor is the sample count T: inferred from fixed.cols()
// when updating D, but required via loss_divisor when updating H (D does not
// carry T). Masked losses pass their observed count the same way.
double lipschitz_bound(const ProblemSpec& spec, const Mat& fixed, Target which,
                       std::optional<Index> column = std::nullopt, double loss_divisor = 0.0);

// One outer iteration (D update, then H update against the new D).
Factorization step_smooth(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                          const SolverConfig& config);
Factorization step_prox_l1(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                           const SolverConfig& config);
Factorization step_prox_elastic(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                                const SolverConfig& config);

struct SolveResult {
  Factorization fact;
  TrialReport report;
};

SolveResult am_dlm_solve(const Mat& X, const ProblemSpec& spec, const SolverConfig& config,
                         std::optional<Factorization> init = std::nullopt);
SolveResult am_dlm_solve(const ObservedMatrix& X, const ProblemSpec& spec,
                         const SolverConfig& config,
                         std::optional<Factorization> init = std::nullopt);

}  // namespace dlm
