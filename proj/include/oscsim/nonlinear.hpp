#pragma once

// Damped quasi-Newton iteration for the discrete device problems.

#include <string>
#include <vector>

#include "oscsim/linear_solver.hpp"

namespace osc {

/// Time-derivative approximation du/dt ~ w0 u + d (d in dof numbering).
/// w0 = 0 with an empty d selects the stationary problem.
struct TimeDiscretization {
  double w0 = 0.0;
  Vector d;
  bool steady() const { return w0 == 0.0; }
};

class NonlinearProblem {
 public:
  virtual ~NonlinearProblem() = default;
  virtual int size() const = 0;
  /// Residual with Dirichlet rows replaced by (y - target); J (when given)
  /// is the quasi-Newton Jacobian with identity Dirichlet rows.
  virtual void evaluate(const Vector& y, const TimeDiscretization& td, Vector& R, SparseMatrix* J) = 0;
  /// Positive per-dof reference magnitudes.
  virtual Vector variable_scales(const Vector& y) const = 0;
  /// Hook applied to every accepted or trial iterate.
  virtual void post_update(Vector& /*y*/, const TimeDiscretization& /*td*/) {}
};

struct NewtonOptions {
  double tol = 1e-6;            // on ||delta / scale||_inf
  double residual_tol = 1e-12;  // on the row-scaled residual
  int max_iter = 200;
  /// Stop early when the merit falls by less than this factor over the window.
  int stagnation_window = 10;
  double stagnation_ratio = 0.9;
  /// Anderson mixing depth (0 disables); mixing starts once the merit ratio
  /// of successive iterations exceeds anderson_onset.
  int anderson_depth = 5;
  double anderson_onset = 0.3;
  int max_halvings = 8;
  /// A damped step is accepted when its merit is below the largest merit of
  /// the last nonmonotone_window iterations (1 gives a monotone search).
  int nonmonotone_window = 5;
  bool damping = true;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double step_norm = 0.0;      // last ||delta / scale||_inf
  double residual_norm = 0.0;  // last row-scaled ||R||_inf
  std::vector<double> history; // scaled residual 2-norm per iteration
  std::string message;
};

/// Iterates y <- y + lambda delta until ||delta/scale||_inf < tol or the
/// row-scaled residual drops below residual_tol. The Newton matrix is solved
/// in the variables y / scale. The frozen-coefficient Jacobian converges
/// linearly under strong field coupling, so iteration continues as long as
/// the merit keeps contracting. Does not throw on non-convergence;
/// a NaN/Inf state or a singular Jacobian ends the iteration with a message.
NewtonReport newton_solve(NonlinearProblem& problem, Vector& y, const TimeDiscretization& td,
                          const NewtonOptions& opt = {});

}  // namespace osc
