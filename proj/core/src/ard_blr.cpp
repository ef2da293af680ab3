#include "abrac/ard_blr.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "abrac/errors.hpp"

namespace abrac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Data-dependent pieces of the marginal likelihood, computed once per fit:
/// G = Phi^T Phi, v = Phi^T y, ||y||^2. Every objective evaluation after that
/// is O(b^3) regardless of N.
struct NllWorkspace {
  DenseMatrix gram;
  std::vector<double> phi_t_y;
  double y_squared_norm = 0.0;
  std::size_t n = 0;
  std::size_t b = 0;

  NllWorkspace(const DenseMatrix& phi, std::span<const double> y) {
    if (phi.rows() != y.size()) {
      throw std::invalid_argument("nll: row count of phi must match y");
    }
    if (phi.rows() < 1 || phi.cols() < 1) {
      throw std::invalid_argument("nll: need N >= 1 and b >= 1");
    }
    n = phi.rows();
    b = phi.cols();
    gram = phi.gram();
    phi_t_y = phi.matvec_transposed(y);
    y_squared_norm = squared_norm(y);
  }

  DenseMatrix penalized_gram(std::span<const double> alpha,
                             double beta) const {
    DenseMatrix m = gram;
    for (std::size_t i = 0; i < b; ++i) m(i, i) += alpha[i] / beta;
    return m;
  }

  NllResult evaluate(std::span<const double> alpha, double beta) const {
    NllResult res;
    res.cholesky_factor = cholesky(penalized_gram(alpha, beta));
    const DenseMatrix& l = res.cholesky_factor;

    double log_alpha_sum = 0.0;
    for (double a : alpha) log_alpha_sum += std::log(a);
    double log_l_diag_sum = 0.0;
    for (std::size_t i = 0; i < b; ++i) log_l_diag_sum += std::log(l(i, i));

    const auto whitened = solve_lower_triangular(l, phi_t_y);
    const double data_term =
        0.5 * beta * (y_squared_norm - squared_norm(whitened));

    const double n_minus_b =
        static_cast<double>(n) - static_cast<double>(b);
    res.nll = -0.5 * n_minus_b * std::log(beta) - 0.5 * log_alpha_sum +
              log_l_diag_sum + data_term;
    return res;
  }

  /// Gradient with respect to (log alpha_1..b, log beta), reusing the factor
  /// from evaluate().
  std::vector<double> gradient(std::span<const double> alpha, double beta,
                               const DenseMatrix& l) const {
    const auto weight_mean = solve_cholesky(l, phi_t_y);  // M^-1 Phi^T y

    // Diagonal of M^-1 via one forward solve per basis column.
    std::vector<double> inv_diag(b);
    std::vector<double> unit(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      unit[i] = 1.0;
      const auto col = solve_lower_triangular(l, unit);
      inv_diag[i] = squared_norm(col);
      unit[i] = 0.0;
    }

    std::vector<double> grad(b + 1, 0.0);
    double alpha_inv_diag = 0.0;
    double alpha_mean_sq = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      grad[i] = -0.5 + 0.5 * alpha[i] * inv_diag[i] / beta +
                0.5 * alpha[i] * weight_mean[i] * weight_mean[i];
      alpha_inv_diag += alpha[i] * inv_diag[i];
      alpha_mean_sq += alpha[i] * weight_mean[i] * weight_mean[i];
    }
    const double v_dot_mean = dot(phi_t_y, weight_mean);
    const double n_minus_b =
        static_cast<double>(n) - static_cast<double>(b);
    grad[b] = -0.5 * n_minus_b - 0.5 * alpha_inv_diag / beta +
              0.5 * beta * (y_squared_norm - v_dot_mean) -
              0.5 * alpha_mean_sq;
    return grad;
  }
};

void validate_head(const ArdHead& head, std::size_t b) {
  if (head.truncation != b || head.alpha.size() != b) {
    throw std::invalid_argument("head dimensions do not match phi");
  }
  if (head.beta <= 0.0) {
    throw std::invalid_argument("head: beta must be positive");
  }
  for (double a : head.alpha) {
    if (a <= 0.0) throw std::invalid_argument("head: alpha must be positive");
  }
}

double norm2(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

/// Box-clamped L-BFGS minimizer with Armijo backtracking. The objective
/// returns +inf for infeasible points (failed factorizations); such trial
/// points are simply rejected by the line search.
struct BoxedLbfgs {
  std::vector<double> lower;
  std::vector<double> upper;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  int memory = 10;

  template <typename Eval>
  std::pair<std::vector<double>, bool> minimize(Eval&& eval,
                                                std::vector<double> theta) {
    const std::size_t p = theta.size();
    clamp(theta);
    std::vector<double> grad(p);
    double f = eval(theta, grad);

    std::vector<double> best_theta = theta;
    double best_f = f;
    bool converged = false;

    std::deque<std::vector<double>> s_hist, y_hist;

    for (int iter = 0; iter < max_iterations; ++iter) {
      const auto pg = projected_gradient(theta, grad);
      if (norm2(pg) < gradient_tolerance) {
        converged = true;
        break;
      }

      auto direction = two_loop(grad, s_hist, y_hist);
      for (double& v : direction) v = -v;
      if (dot(direction, grad) >= 0.0) {
        direction = pg;
        for (double& v : direction) v = -v;
      }

      bool accepted = line_search(eval, theta, f, grad, direction, s_hist,
                                  y_hist);
      if (!accepted) {
        // One retry along steepest descent before giving up.
        direction = pg;
        for (double& v : direction) v = -v;
        accepted = line_search(eval, theta, f, grad, direction, s_hist,
                               y_hist);
        if (!accepted) break;
      }
      if (f < best_f) {
        best_f = f;
        best_theta = theta;
      }
    }
    return {best_theta, converged};
  }

 private:
  void clamp(std::vector<double>& theta) const {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] = std::min(upper[i], std::max(lower[i], theta[i]));
    }
  }

  std::vector<double> projected_gradient(const std::vector<double>& theta,
                                         const std::vector<double>& grad)
      const {
    std::vector<double> pg = grad;
    for (std::size_t i = 0; i < pg.size(); ++i) {
      const bool blocked_low = theta[i] <= lower[i] && grad[i] > 0.0;
      const bool blocked_high = theta[i] >= upper[i] && grad[i] < 0.0;
      if (blocked_low || blocked_high) pg[i] = 0.0;
    }
    return pg;
  }

  static std::vector<double> two_loop(const std::vector<double>& grad,
                                      const std::deque<std::vector<double>>& s,
                                      const std::deque<std::vector<double>>& y) {
    std::vector<double> q = grad;
    const std::size_t m = s.size();
    std::vector<double> rho(m), a(m);
    for (std::size_t k = 0; k < m; ++k) rho[k] = 1.0 / dot(y[k], s[k]);
    for (std::size_t k = m; k-- > 0;) {
      a[k] = rho[k] * dot(s[k], q);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] -= a[k] * y[k][i];
    }
    if (m > 0) {
      const double gamma = dot(s[m - 1], y[m - 1]) / dot(y[m - 1], y[m - 1]);
      for (double& v : q) v *= gamma;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double bk = rho[k] * dot(y[k], q);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] += s[k][i] * (a[k] - bk);
    }
    return q;
  }

  template <typename Eval>
  bool line_search(Eval&& eval, std::vector<double>& theta, double& f,
                   std::vector<double>& grad,
                   const std::vector<double>& direction,
                   std::deque<std::vector<double>>& s_hist,
                   std::deque<std::vector<double>>& y_hist) {
    const std::size_t p = theta.size();
    std::vector<double> trial(p), trial_grad(p), step(p);
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      double moved = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        trial[i] = std::min(upper[i],
                            std::max(lower[i], theta[i] + t * direction[i]));
        step[i] = trial[i] - theta[i];
        moved += std::fabs(step[i]);
      }
      if (moved == 0.0) return false;
      const double ft = eval(trial, trial_grad);
      const double directional = dot(grad, step);
      if (ft < f && ft <= f + 1e-4 * directional) {
        std::vector<double> dg(p);
        for (std::size_t i = 0; i < p; ++i) dg[i] = trial_grad[i] - grad[i];
        const double sy = dot(step, dg);
        if (sy > 1e-12 * norm2(step) * norm2(dg)) {
          s_hist.push_back(step);
          y_hist.push_back(dg);
          if (static_cast<int>(s_hist.size()) > memory) {
            s_hist.pop_front();
            y_hist.pop_front();
          }
        }
        theta = trial;
        f = ft;
        grad = trial_grad;
        return true;
      }
    }
    return false;
  }
};

}  // namespace

NllResult nll_fast(const DenseMatrix& phi, std::span<const double> y,
                   const ArdHead& head) {
  const NllWorkspace ws(phi, y);
  validate_head(head, ws.b);
  return ws.evaluate(head.alpha, head.beta);
}

std::vector<double> nll_gradient(const DenseMatrix& phi,
                                 std::span<const double> y,
                                 const ArdHead& head) {
  const NllWorkspace ws(phi, y);
  validate_head(head, ws.b);
  const NllResult res = ws.evaluate(head.alpha, head.beta);
  return ws.gradient(head.alpha, head.beta, res.cholesky_factor);
}

HeadFitResult fit(const DenseMatrix& phi, std::span<const double> y,
                  std::size_t b, const FitOptions& options,
                  const std::optional<ArdHead>& init) {
  if (phi.cols() != b) {
    throw std::invalid_argument("fit: phi must have exactly b columns");
  }
  const NllWorkspace ws(phi, y);
  const std::size_t n_params = options.shared_alpha ? 2 : b + 1;

  // theta -> (alpha, beta)
  auto unpack = [&](const std::vector<double>& theta,
                    std::vector<double>& alpha, double& beta) {
    if (options.shared_alpha) {
      alpha.assign(b, std::exp(theta[0]));
      beta = std::exp(theta[1]);
    } else {
      alpha.resize(b);
      for (std::size_t i = 0; i < b; ++i) alpha[i] = std::exp(theta[i]);
      beta = std::exp(theta[b]);
    }
  };

  auto eval_exact = [&](const std::vector<double>& theta,
                        std::vector<double>& grad_out) -> double {
    std::vector<double> alpha;
    double beta = 1.0;
    unpack(theta, alpha, beta);
    NllResult res;
    try {
      res = ws.evaluate(alpha, beta);
    } catch (const DecompositionError&) {
      std::fill(grad_out.begin(), grad_out.end(), 0.0);
      return kInf;
    }
    if (!std::isfinite(res.nll)) {
      std::fill(grad_out.begin(), grad_out.end(), 0.0);
      return kInf;
    }
    const auto g = ws.gradient(alpha, beta, res.cholesky_factor);
    if (options.shared_alpha) {
      grad_out[0] = 0.0;
      for (std::size_t i = 0; i < b; ++i) grad_out[0] += g[i];
      grad_out[1] = g[b];
    } else {
      std::copy(g.begin(), g.end(), grad_out.begin());
    }
    return res.nll;
  };

  auto value_only = [&](const std::vector<double>& theta) -> double {
    std::vector<double> alpha;
    double beta = 1.0;
    unpack(theta, alpha, beta);
    try {
      return ws.evaluate(alpha, beta).nll;
    } catch (const DecompositionError&) {
      return kInf;
    }
  };

  auto eval_fd = [&](const std::vector<double>& theta,
                     std::vector<double>& grad_out) -> double {
    const double f0 = value_only(theta);
    const double h = 1e-5;
    std::vector<double> t = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      t[i] = theta[i] + h;
      const double fp = value_only(t);
      t[i] = theta[i] - h;
      const double fm = value_only(t);
      t[i] = theta[i];
      grad_out[i] = (fp - fm) / (2.0 * h);
    }
    return f0;
  };

  // Initialization: alpha = 1, beta = 1/var(y) (1 if degenerate), or the
  // caller-supplied warm start clamped into bounds.
  std::vector<double> theta(n_params, 0.0);
  if (init.has_value()) {
    validate_head(*init, b);
    if (options.shared_alpha) {
      double mean_log_alpha = 0.0;
      for (double a : init->alpha) mean_log_alpha += std::log(a);
      theta[0] = mean_log_alpha / static_cast<double>(b);
      theta[1] = std::log(init->beta);
    } else {
      for (std::size_t i = 0; i < b; ++i) theta[i] = std::log(init->alpha[i]);
      theta[b] = std::log(init->beta);
    }
  } else {
    double mean = 0.0;
    for (std::size_t i = 0; i < ws.n; ++i) mean += y[i];
    mean /= static_cast<double>(ws.n);
    double var = 0.0;
    for (std::size_t i = 0; i < ws.n; ++i) var += (y[i] - mean) * (y[i] - mean);
    var /= static_cast<double>(ws.n);
    theta.back() = var > 0.0 ? -std::log(var) : 0.0;
  }

  BoxedLbfgs solver;
  solver.max_iterations = options.max_iterations;
  solver.gradient_tolerance = options.gradient_tolerance;
  solver.memory = options.lbfgs_memory;
  if (options.shared_alpha) {
    solver.lower = {options.bounds.log_alpha_lo, options.bounds.log_beta_lo};
    solver.upper = {options.bounds.log_alpha_hi, options.bounds.log_beta_hi};
  } else {
    solver.lower.assign(b + 1, options.bounds.log_alpha_lo);
    solver.upper.assign(b + 1, options.bounds.log_alpha_hi);
    solver.lower[b] = options.bounds.log_beta_lo;
    solver.upper[b] = options.bounds.log_beta_hi;
  }

  std::pair<std::vector<double>, bool> solution =
      options.finite_difference_gradients
          ? solver.minimize(eval_fd, std::move(theta))
          : solver.minimize(eval_exact, std::move(theta));

  HeadFitResult result;
  result.converged = solution.second;
  std::vector<double> alpha;
  double beta = 1.0;
  unpack(solution.first, alpha, beta);
  result.head = ArdHead{std::move(alpha), beta, b};
  const NllResult final_eval = ws.evaluate(result.head.alpha, result.head.beta);
  result.nll = final_eval.nll;
  result.cholesky_factor = final_eval.cholesky_factor;
  result.posterior_weight_mean =
      solve_cholesky(result.cholesky_factor, ws.phi_t_y);
  return result;
}

PosteriorPrediction predict(const HeadFitResult& result,
                            std::span<const double> features) {
  const std::size_t b = result.head.truncation;
  if (features.size() != b) {
    throw std::invalid_argument("predict: feature length must equal b");
  }
  PosteriorPrediction out;
  out.mean = dot(features, result.posterior_weight_mean);
  // f^T K^-1 f with K = beta L L^T: one forward solve.
  const auto u = solve_lower_triangular(result.cholesky_factor, features);
  out.variance = (squared_norm(u) + 1.0) / result.head.beta;
  return out;
}

std::vector<double> relative_weights(const HeadFitResult& result) {
  const auto& m = result.posterior_weight_mean;
  double max_abs = 0.0;
  for (double v : m) max_abs = std::max(max_abs, std::fabs(v));
  std::vector<double> r(m.size(), 0.0);
  if (max_abs == 0.0) return r;
  for (std::size_t i = 0; i < m.size(); ++i) r[i] = std::fabs(m[i]) / max_abs;
  return r;
}

}  // namespace abrac
