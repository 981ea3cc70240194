// Log-barrier interior-point method for small dense smooth convex
// programs: minimize f0(x) subject to fi(x) <= 0. Damped Newton inner
// iterations with a feasibility-preserving backtracking line search.
//
// The Program type supplies dimensions, the objective, and the constraint
// set:
//   int dim() const;
//   int num_constraints() const;
//   double objective(const VectorXd& x) const;
//   void objective_gradient(const VectorXd& x, VectorXd& g) const;
//   void objective_hessian(const VectorXd& x, MatrixXd& h) const;
//   double constraint(int i, const VectorXd& x) const;
//   void constraint_gradient(int i, const VectorXd& x, VectorXd& g) const;
//   void constraint_hessian(int i, const VectorXd& x, MatrixXd& h) const;
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "semlink/errors.hpp"

namespace semlink {

struct BarrierOptions {
  double t0 = 1.0;           // initial barrier weight
  double mu = 10.0;          // barrier weight growth per outer stage
  double gap = 1e-7;         // stop when m / t <= gap
  double newton_tol = 1e-9;  // stop centering when decrement^2 / 2 <= tol
  int max_newton = 80;       // Newton steps per centering stage
  int max_stages = 64;       // outer barrier stages
  double ls_alpha = 0.25;
  double ls_beta = 0.5;
};

struct BarrierResult {
  Eigen::VectorXd x;
  bool converged = false;
  int newton_steps = 0;
  double gap = 0.0;  // final m / t
};

template <class Program>
BarrierResult barrier_solve(const Program& prog, Eigen::VectorXd x,
                            const BarrierOptions& opt = {}) {
  const int n = prog.dim();
  const int m = prog.num_constraints();
  if (x.size() != n) throw infeasible_error("barrier_solve: start has wrong dimension");

  auto strictly_feasible = [&](const Eigen::VectorXd& p) {
    for (int i = 0; i < m; ++i) {
      if (!(prog.constraint(i, p) < 0.0)) return false;
    }
    return true;
  };
  if (!strictly_feasible(x))
    throw infeasible_error("barrier_solve: start is not strictly feasible");

  auto barrier_value = [&](double t, const Eigen::VectorXd& p) {
    double v = t * prog.objective(p);
    for (int i = 0; i < m; ++i) v -= std::log(-prog.constraint(i, p));
    return v;
  };

  Eigen::VectorXd grad(n), cg(n);
  Eigen::MatrixXd hess(n, n), ch(n, n);
  BarrierResult result;

  double t = opt.t0;
  for (int stage = 0; stage < opt.max_stages; ++stage) {
    // Centering: damped Newton on t f0(x) - sum log(-fi(x)).
    for (int step = 0; step < opt.max_newton; ++step) {
      prog.objective_gradient(x, grad);
      grad *= t;
      prog.objective_hessian(x, hess);
      hess *= t;
      for (int i = 0; i < m; ++i) {
        const double fi = prog.constraint(i, x);
        prog.constraint_gradient(i, x, cg);
        prog.constraint_hessian(i, x, ch);
        grad += cg / (-fi);
        hess += ch / (-fi) + (cg * cg.transpose()) / (fi * fi);
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      Eigen::VectorXd dx = ldlt.solve(-grad);
      if (ldlt.info() != Eigen::Success || !dx.allFinite()) {
        // Regularize once; the barrier Hessian is PSD up to rounding.
        hess.diagonal().array() += 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
        dx = hess.ldlt().solve(-grad);
        if (!dx.allFinite()) throw sca_error("barrier_solve: Newton system unsolvable");
      }
      const double decrement2 = -grad.dot(dx);
      if (decrement2 * 0.5 <= opt.newton_tol) break;

      const double base = barrier_value(t, x);
      const double slope = grad.dot(dx);
      double s = 1.0;
      bool moved = false;
      while (s > 1e-14) {
        const Eigen::VectorXd trial = x + s * dx;
        if (strictly_feasible(trial) &&
            barrier_value(t, trial) <= base + opt.ls_alpha * s * slope) {
          x = trial;
          moved = true;
          break;
        }
        s *= opt.ls_beta;
      }
      ++result.newton_steps;
      if (!moved) break;  // stuck against the boundary at this stage
    }
    result.gap = static_cast<double>(m) / t;
    if (result.gap <= opt.gap) {
      result.converged = true;
      break;
    }
    t *= opt.mu;
  }
  result.x = std::move(x);
  return result;
}

// Convenience std::function-backed program for tests and one-off solves.
struct FunctionalProgram {
  struct Term {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
  };

  int n = 0;
  Term obj;
  std::vector<Term> cons;

  int dim() const { return n; }
  int num_constraints() const { return static_cast<int>(cons.size()); }
  double objective(const Eigen::VectorXd& x) const { return obj.value(x); }
  void objective_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    g = obj.gradient(x);
  }
  void objective_hessian(const Eigen::VectorXd& x, Eigen::MatrixXd& h) const {
    h = obj.hessian(x);
  }
  double constraint(int i, const Eigen::VectorXd& x) const { return cons[i].value(x); }
  void constraint_gradient(int i, const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    g = cons[i].gradient(x);
  }
  void constraint_hessian(int i, const Eigen::VectorXd& x, Eigen::MatrixXd& h) const {
    h = cons[i].hessian(x);
  }
};

}  // namespace semlink
