#pragma once

#include "dlm/batch.hpp"
#include "dlm/types.hpp"

#include <utility>

namespace dlm {

// Frobenius norms of the two gradient blocks of the full objective, scaled by
// 1/max(1, ||X||_F). Nonsmooth kinds use the deterministic subgradient
// selections, so a small residual is sufficient but not necessary there.
std::pair<double, double> stationarity_residual(const Factorization& fact, const Mat& X,
                                                const ProblemSpec& spec);

// Dual-feasibility test for the (weighted) squared-l2 pair: at a stationary
// point, sigma_max(Lambda^-T grad L(DH)) at or below the effective threshold
// certifies a global minimum. The threshold is sqrt(a*b) for block weights
// a = alpha, b = alpha/(s^2 T); it reduces to alpha for the unaveraged plain
// case and is stored in Certificate::alpha.
Certificate global_certificate(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                               double tol = 1e-6);

// Minimum eigenvalue of the symmetrized central-difference Hessian over
// vectorized (D, H). Guarded to dk + kT <= 400. fd_step <= 0 selects the
// default per-coordinate step max(1e-5, 1e-5 |x|).
double hessian_min_eigenvalue(const Factorization& fact, const Mat& X, const ProblemSpec& spec,
                              double fd_step = 0.0);

struct RhoSchedule {
  double start = 1.0;
  double stop = 1e8;
  double factor = 10.0;
};

// Estimate of the induced regularizer at Z: the minimum of the summed column
// and row penalties over rank-k factorizations of Z, via a quadratic-penalty
// homotopy with warm starts and 5 random restarts. Throws numerical_failure
// (with the best residual in the message) if no start reaches feasibility
// ||DH - Z||_F <= 1e-6 ||Z||_F.
double induced_reg_estimate(const Mat& Z, const RegularizerSpec& regD,
                            const RegularizerSpec& regH, int k, const RhoSchedule& rho = {});

// Max convexity violation of the induced-regularizer estimate over random
// segments: positive values beyond estimator noise witness non-convexity.
double convexity_probe(const RegularizerSpec& regD, const RegularizerSpec& regH, int k,
                       Index rows, Index cols, int n_segments, std::uint64_t seed);

enum class RebalanceDirection { SummedToProducted, ProductedToSummed };

// Per-index rescaling between the summed and producted regularizer forms,
// Gamma_i = ||H_i:||_r / ||D_:i||_c from the input factors. Indices whose
// column or row norm vanishes are dropped first (their product contribution
// is zero); the product D*H is preserved exactly. Norm-inducing regularizer
// kinds only.
Factorization rebalance_factors(const Factorization& fact, const RegularizerSpec& regD,
                                const RegularizerSpec& regH, RebalanceDirection direction);

// (D / sqrt(s), sqrt(s) H): transports a solution of the unscaled objective to
// the objective with coefficient scale s, preserving the product.
Factorization scaling_transport(const Factorization& fact, double s);

}  // namespace dlm
