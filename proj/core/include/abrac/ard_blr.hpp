#pragma once

#include <optional>
#include <span>
#include <vector>

#include "abrac/matrix.hpp"

namespace abrac {

/// Bayesian linear regression head with one prior precision per basis
/// function (ARD) plus a noise precision.
struct ArdHead {
  std::vector<double> alpha;  // per-basis precisions, length b, all > 0
  double beta = 1.0;          // noise precision, > 0
  std::size_t truncation = 0; // b

  bool operator==(const ArdHead&) const = default;
};

/// Box constraints on the log-precisions during fitting.
struct FitBounds {
  double log_alpha_lo = -12.0;
  double log_alpha_hi = 12.0;
  double log_beta_lo = -12.0;
  double log_beta_hi = 12.0;
};

struct PosteriorPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct HeadFitResult {
  ArdHead head;
  double nll = 0.0;  // optimized negative log marginal likelihood
  std::vector<double> posterior_weight_mean;  // m, length b
  DenseMatrix cholesky_factor;  // L with L L^T = Phi^T Phi + (1/beta) Diag(alpha)
  bool converged = true;
};

struct NllResult {
  double nll = 0.0;
  DenseMatrix cholesky_factor;
};

/// Negative log marginal likelihood of y ~ Normal(0, beta^-1 I + Phi A^-1 Phi^T)
/// in the reduced Cholesky form
///   -((N-b)/2) log beta - 1/2 sum_i log alpha_i + sum_i log L_ii
///   + (beta/2) (||y||^2 - ||L^-1 Phi^T y||^2),
/// L L^T = Phi^T Phi + (1/beta) Diag(alpha). Cost O(b^2 max{N, b}). The
/// additive constant (N/2) log(2 pi) is dropped.
NllResult nll_fast(const DenseMatrix& phi, std::span<const double> y,
                   const ArdHead& head);

/// Gradient of nll_fast with respect to (log alpha_1..b, log beta), in that
/// order (length b + 1).
std::vector<double> nll_gradient(const DenseMatrix& phi,
                                 std::span<const double> y,
                                 const ArdHead& head);

struct FitOptions {
  FitBounds bounds;
  /// Tie all alpha_i to one shared value during fitting (the non-ARD head).
  bool shared_alpha = false;
  /// Replace analytic gradients with central finite differences.
  bool finite_difference_gradients = false;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  int lbfgs_memory = 10;
};

/// Maximizes the marginal likelihood over (log alpha, log beta) with
/// box-clamped L-BFGS and Armijo backtracking. phi must already be truncated
/// to its leading b columns. Never returns an nll above the starting point;
/// a failed line search returns the best iterate with converged == false.
HeadFitResult fit(const DenseMatrix& phi, std::span<const double> y,
                  std::size_t b, const FitOptions& options = {},
                  const std::optional<ArdHead>& init = std::nullopt);

/// Predictive posterior at feature vector f (length b):
///   mean     = f^T m
///   variance = f^T K^-1 f + 1/beta,  K = beta (Phi^T Phi) + Diag(alpha)
/// computed through the stored Cholesky factor.
PosteriorPrediction predict(const HeadFitResult& result,
                            std::span<const double> features);

/// Posterior-mean magnitudes scaled to [0, 1] by the largest one; an all-zero
/// mean maps to all zeros.
std::vector<double> relative_weights(const HeadFitResult& result);

}  // namespace abrac
