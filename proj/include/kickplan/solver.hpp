#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <string>
#include <vector>

#include "kickplan/transcription.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

struct SolverOptions {
  int max_outer = 40;
  int max_inner = 800;  // inner-minimization iterations per outer round
  double eq_tol = 1e-4;
  double ineq_tol = 1e-6;
  double stationarity_tol = 1e-4;
  double penalty_init = 100.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e6;
  int lbfgs_memory = 12;
  bool verbose = false;
};

struct SolveReport {
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double cost = 0.0;
  double eq_violation = 0.0;
  double ineq_violation = 0.0;
  double stationarity = 0.0;
  double penalty = 0.0;
  std::string message;
};

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Augmented-Lagrangian merit for bounded residual blocks l <= c <= u.
/// The slack attains its closed-form optimum s* = clamp(c + lambda/mu, l, u);
/// by the envelope theorem the gradient treats s* as constant.
class AlMerit {
 public:
  AlMerit(const NlpProblem& nlp, double mu) : nlp_(nlp), mu_(mu) {
    for (const ResidualBlock& b : nlp.blocks)
      lambda_.push_back(VecX::Zero(b.lower.size()));
  }

  /// Merit value; optionally the gradient, and optionally Gauss-Newton
  /// curvature triplets (mu * J^T J over the active constraint rows plus
  /// 2 w * J^T J for every cost exposing a residual).
  double value(const VecX& x, VecX* grad = nullptr,
               std::vector<Triplet>* hess = nullptr) const {
    double f = nlp_.cost(x, grad);
    if (hess) {
      hess->clear();
      for (const CostTerm& c : nlp_.costs) {
        if (!c.residual || c.res_weight <= 0.0) continue;
        MatX J;
        c.residual(nlp_.gather(c.xidx, x), &J);
        add_jtj(*hess, 2.0 * c.res_weight * (J.transpose() * J), c.xidx);
      }
    }
    for (size_t i = 0; i < nlp_.blocks.size(); ++i) {
      const ResidualBlock& b = nlp_.blocks[i];
      const VecX xs = nlp_.gather(b.xidx, x);
      const VecX c = b.eval(xs);
      const VecX shifted = c + lambda_[i] / mu_;
      const VecX d = c - shifted.cwiseMax(b.lower).cwiseMin(b.upper);
      f += lambda_[i].dot(d) + 0.5 * mu_ * d.squaredNorm();
      const VecX y = lambda_[i] + mu_ * d;
      const bool want_grad = grad && y.cwiseAbs().maxCoeff() > 0.0;
      if (!want_grad && !hess) continue;

      const MatX J = nlp_.block_jacobian(b, xs);
      if (want_grad) {
        const VecX g = J.transpose() * y;
        for (size_t k = 0; k < b.xidx.size(); ++k)
          (*grad)[b.xidx[k]] += g[k];
      }
      if (hess) {
        // A row contributes quadratic penalty curvature when its shifted
        // value sits outside [l, u]; equality rows always do. Rows within a
        // small margin inside a bound contribute too: otherwise the model
        // Hessian flips by mu*J^T J as a row crosses its bound, and the
        // inner iteration chatters at exactly the accuracy we target.
        constexpr double kMargin = 1e-3;
        MatX Ja(c.size(), J.cols());
        int na = 0;
        for (int r = 0; r < c.size(); ++r) {
          if (b.lower[r] == b.upper[r] ||
              shifted[r] < b.lower[r] + kMargin ||
              shifted[r] > b.upper[r] - kMargin)
            Ja.row(na++) = J.row(r);
        }
        if (na > 0)
          add_jtj(*hess,
                  mu_ * (Ja.topRows(na).transpose() * Ja.topRows(na)),
                  b.xidx);
      }
    }
    return f;
  }

  void update_multipliers(const VecX& x) {
    for (size_t i = 0; i < nlp_.blocks.size(); ++i) {
      const ResidualBlock& b = nlp_.blocks[i];
      const VecX c = b.eval(nlp_.gather(b.xidx, x));
      const VecX s =
          (c + lambda_[i] / mu_).cwiseMax(b.lower).cwiseMin(b.upper);
      lambda_[i] += mu_ * (c - s);
    }
  }

  double mu() const { return mu_; }
  void set_mu(double mu) { mu_ = mu; }
  int num_vars() const { return nlp_.num_vars; }

 private:
  static void add_jtj(std::vector<Triplet>& hess, const MatX& H,
                      const std::vector<int>& idx) {
    for (int a = 0; a < H.rows(); ++a)
      for (int bcol = 0; bcol < H.cols(); ++bcol)
        if (H(a, bcol) != 0.0)
          hess.emplace_back(idx[a], idx[bcol], H(a, bcol));
  }

  const NlpProblem& nlp_;
  double mu_;
  std::vector<VecX> lambda_;
};

/// Limited-memory BFGS with Armijo backtracking, for problems without
/// least-squares structure. Returns the number of iterations used; x is
/// updated in place.
inline int lbfgs_minimize(const AlMerit& merit, VecX& x, int max_iters,
                          double grad_tol, int memory,
                          double* final_grad_norm = nullptr) {
  std::deque<VecX> s_hist, y_hist;
  VecX g(x.size());
  double f = merit.value(x, &g);
  int it = 0;
  for (; it < max_iters; ++it) {
    const double gnorm = g.cwiseAbs().maxCoeff();
    if (final_grad_norm) *final_grad_norm = gnorm;
    if (gnorm <= grad_tol) break;

    // Two-loop recursion.
    VecX q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
      alpha[i] = rho * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) /
                           y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
      const double beta = rho * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    VecX d = -q;
    double dir_deriv = d.dot(g);
    if (dir_deriv > -1e-14 * d.norm() * g.norm()) {
      d = -g;  // fall back to steepest descent
      dir_deriv = -g.squaredNorm();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    double f_new = f;
    VecX x_new = x;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * d;
      f_new = merit.value(x_new);
      if (f_new <= f + 1e-4 * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled line search

    VecX g_new(x.size());
    merit.value(x_new, &g_new);
    const VecX s = x_new - x;
    const VecX y = g_new - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }
  return it;
}

/// Levenberg-Marquardt on the merit's Gauss-Newton model: solves
/// (H + nu I) d = -g with a sparse LDLT and adapts the damping nu by
/// accept/reject. Robust to the ill-conditioning of large penalties, where
/// quasi-Newton methods stall.
inline int gn_minimize(const AlMerit& merit, VecX& x, int max_iters,
                       double grad_tol, double* final_grad_norm = nullptr) {
  const int n = merit.num_vars();
  VecX g(n);
  std::vector<Triplet> trips;
  double f = merit.value(x, &g, &trips);
  double nu = 1e-4;
  int it = 0;
  int stalled = 0;
  const bool debug = std::getenv("KICKPLAN_GN_DEBUG") != nullptr;
  int accepts = 0;
  for (; it < max_iters; ++it) {
    const double gnorm = g.cwiseAbs().maxCoeff();
    if (final_grad_norm) *final_grad_norm = gnorm;
    if (gnorm <= grad_tol) break;
    if (debug && it % 50 == 0) {
      std::fprintf(stderr, "    gn %4d: f %.6g gnorm %.3g nu %.2g acc %d\n",
                   it, f, gnorm, nu, accepts);
      accepts = 0;
    }

    // Marquardt scaling: damp each variable in proportion to its model
    // curvature, so directions whose curvature spans many orders of
    // magnitude shrink uniformly instead of the flat ones freezing.
    VecX diag = VecX::Zero(n);
    for (const Triplet& t : trips)
      if (t.row() == t.col()) diag[t.row()] += t.value();
    for (int i = 0; i < n; ++i) diag[i] = std::max(diag[i], 1e-8);

    std::vector<Triplet> damped = trips;
    for (int i = 0; i < n; ++i) damped.emplace_back(i, i, nu * diag[i]);
    SpMat H(n, n);
    H.setFromTriplets(damped.begin(), damped.end());

    Eigen::SimplicialLDLT<SpMat> ldlt(H);
    if (ldlt.info() != Eigen::Success) {
      nu *= 4.0;
      if (nu > 1e12) break;
      continue;
    }
    const VecX d = ldlt.solve(-g);
    // Backtrack along the step before rejecting outright: a merit
    // evaluation is much cheaper than refactorizing with larger damping,
    // and overshoot on the nonlinear rows is common.
    double step = 1.0;
    double f_new = merit.value(x + d);
    for (int ls = 0; ls < 3 && !(std::isfinite(f_new) && f_new < f); ++ls) {
      step *= 0.5;
      f_new = merit.value(x + step * d);
    }
    // Full-step model decrease predicted by the damped quadratic; the gain
    // ratio actual/predicted steers the damping (only used when step == 1).
    const double pred = 0.5 * d.dot(nu * diag.cwiseProduct(d) - g);
    if (std::isfinite(f_new) && f_new < f) {
      ++accepts;
      const double actual = f - f_new;
      x += step * d;
      f = f_new;
      merit.value(x, &g, &trips);
      // Shrink the damping on every full accepted step (faster when the
      // model fits well); a backtracked or clearly poor step grows it. A
      // dead band here lets nu freeze at a value that crawls.
      const double rho =
          step < 1.0 ? 0.0 : (pred > 0.0 ? actual / pred : 1.0);
      if (step < 1.0 || rho < 0.25)
        nu = std::min(nu * 4.0, 1e12);
      else
        nu = std::max(1e-8, nu * (rho > 0.75 ? 0.1 : 0.5));
      stalled = actual <= 1e-12 * (1.0 + std::abs(f)) ? stalled + 1 : 0;
      if (stalled >= 3) break;  // merit has flatlined
    } else {
      nu *= 4.0;
      if (nu > 1e12) break;  // no descent left in the model
    }
  }
  if (final_grad_norm && it == max_iters)
    *final_grad_norm = g.cwiseAbs().maxCoeff();
  return it;
}

}  // namespace detail

/// Solves the NLP by an augmented-Lagrangian outer loop. The inner
/// minimization is Levenberg-Marquardt when the problem carries constraint
/// blocks or residual-structured costs, and L-BFGS otherwise. Starts from
/// nlp.x0 unless `x` is pre-sized, in which case its content is the warm
/// start; on return x holds the solution.
inline SolveReport solve_nlp(const NlpProblem& nlp, VecX& x,
                             const SolverOptions& opts = {}) {
  if (x.size() != nlp.num_vars) x = nlp.x0;
  if (x.size() != nlp.num_vars)
    throw ValidationError("solver needs an initial point of the right size");

  bool has_structure = !nlp.blocks.empty();
  for (const CostTerm& c : nlp.costs)
    if (c.residual && c.res_weight > 0.0) has_structure = true;

  detail::AlMerit merit(nlp, opts.penalty_init);
  SolveReport report;
  double inner_tol = std::max(1e-2, opts.stationarity_tol);
  double best_viol = 1e30;
  int no_progress = 0;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    report.outer_iterations = outer + 1;
    double gnorm = 0.0;
    report.inner_iterations +=
        has_structure
            ? detail::gn_minimize(merit, x, opts.max_inner, inner_tol, &gnorm)
            : detail::lbfgs_minimize(merit, x, opts.max_inner, inner_tol,
                                     opts.lbfgs_memory, &gnorm);

    const auto [eq_viol, ineq_viol] = nlp.constraint_violation(x);
    report.eq_violation = eq_viol;
    report.ineq_violation = ineq_viol;
    report.stationarity = gnorm;
    report.cost = nlp.cost(x);
    if (opts.verbose)
      std::fprintf(stderr,
                   "  outer %2d: cost %.4g eq %.3g ineq %.3g stat %.3g mu %.1g "
                   "inner %d\n",
                   outer + 1, report.cost, eq_viol, ineq_viol, gnorm,
                   merit.mu(), report.inner_iterations);

    if (eq_viol <= opts.eq_tol && ineq_viol <= opts.ineq_tol &&
        gnorm <= opts.stationarity_tol) {
      report.converged = true;
      report.message = "converged";
      break;
    }

    const double viol =
        std::max(eq_viol, ineq_viol / opts.ineq_tol * opts.eq_tol);
    // Refresh the multipliers when the point can be trusted: either the
    // inner minimization actually reached its tolerance, or feasibility
    // made clear progress. Updating at an unconverged, badly infeasible
    // point lets lambda absorb the violation and stalls feasibility.
    const bool inner_ok = gnorm <= inner_tol;
    const bool improved = viol <= 0.5 * best_viol || viol <= opts.eq_tol;
    const bool any_progress = viol <= 0.9 * best_viol;
    if (inner_ok || improved) {
      merit.update_multipliers(x);
      best_viol = std::min(best_viol, viol);
      no_progress = 0;
    } else if (any_progress) {
      // At the penalty cap the multipliers are the only mechanism left, so
      // keep refreshing them as long as feasibility inches forward.
      if (merit.mu() >= opts.penalty_max) merit.update_multipliers(x);
      best_viol = std::min(best_viol, viol);
      no_progress = 0;
    } else if (++no_progress >= 3) {
      report.message = "feasibility stalled";
      break;
    }
    if (!improved && merit.mu() < opts.penalty_max)
      merit.set_mu(std::min(merit.mu() * opts.penalty_growth,
                            opts.penalty_max));
    inner_tol = std::max(opts.stationarity_tol, inner_tol * 0.5);
  }
  report.penalty = merit.mu();
  if (!report.converged && report.message.empty())
    report.message = "iteration limit reached";
  return report;
}

}  // namespace kickplan
