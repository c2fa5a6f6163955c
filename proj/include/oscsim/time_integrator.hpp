#pragma once

// Adaptive BDF1/BDF2 marching with step-doubling error control, and the
// stationary driver.

#include <array>
#include <functional>
#include <limits>
#include <stdexcept>

#include "oscsim/nonlinear.hpp"

namespace osc {

class TimeIntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// du/dt(t_N) ~ w[0] u_N + w[1] u_{N-1} + w[2] u_{N-2}; k = t_N - t_{N-1},
/// k_prev = t_{N-1} - t_{N-2} (order 2 only).
struct BdfWeights {
  int order = 1;
  std::array<double, 3> w{0.0, 0.0, 0.0};
};
BdfWeights bdf_weights(int order, double k, double k_prev = 0.0);

struct MarchOptions {
  double t_end = 1e-6;
  double dt0 = 1e-15;
  double rtol = 1e-3;
  double atol = 0.0;  // added to rtol * scale, in the units of each unknown
  double min_dt = 1e-24;
  double max_dt = std::numeric_limits<double>::infinity();
  double steady_tol = 1e-8;
  /// The steady metric must stay below steady_tol while t grows by this factor.
  double steady_span = 10.0;
  bool stop_at_steady = true;
  int max_steps = 100000;
  NewtonOptions newton;
};

/// One accepted point of the trajectory with the weights that produced it.
struct StepRecord {
  double t = 0.0;
  double dt = 0.0;
  BdfWeights weights;
};

using StepObserver = std::function<void(const StepRecord&, const Vector& y)>;

struct MarchResult {
  Vector y;
  double t = 0.0;
  int accepted = 0;
  int rejected = 0;
  bool reached_steady = false;
  double steady_metric = 0.0;  // t * max |dy/dt| / scale at the last point
};

/// Integrates from y0 at t = 0. Each accepted doubling step contributes its
/// two half-step points to the trajectory (and to the observer).
MarchResult march(NonlinearProblem& problem, const Vector& y0, const MarchOptions& opt,
                  const StepObserver& observer = {});

struct SteadyOptions {
  NewtonOptions newton;
  bool pseudo_transient = true;
  double pseudo_t_end = 1.0;
};

/// Stationary solve from the guess in y. Throws TimeIntegrationError when
/// Newton and the pseudo-transient fallback both fail.
NewtonReport steady_solve(NonlinearProblem& problem, Vector& y, const SteadyOptions& opt = {});

}  // namespace osc
