#include "oscsim/time_integrator.hpp"

#include <algorithm>
#include <cmath>

namespace osc {

BdfWeights bdf_weights(int order, double k, double k_prev) {
  if (!(k > 0)) throw std::invalid_argument("bdf_weights: step must be positive");
  BdfWeights b;
  b.order = order;
  if (order == 1) {
    b.w = {1.0 / k, -1.0 / k, 0.0};
  } else if (order == 2) {
    if (!(k_prev > 0)) throw std::invalid_argument("bdf_weights: previous step must be positive");
    const double s = k + k_prev;
    b.w = {1.0 / k + 1.0 / s, -s / (k * k_prev), k / (k_prev * s)};
  } else {
    throw std::invalid_argument("bdf_weights: unsupported order " + std::to_string(order));
  }
  return b;
}

namespace {

struct History {
  Vector y0, y1;  // y_N, y_{N-1}
  double k = 0.0; // t_N - t_{N-1}
};

TimeDiscretization discretization(const BdfWeights& b, const Vector& y0, const Vector& y1) {
  TimeDiscretization td;
  td.w0 = b.w[0];
  td.d = b.w[1] * y0;
  if (b.order == 2) td.d += b.w[2] * y1;
  return td;
}

bool step(NonlinearProblem& problem, const History& h, double k, int order, const NewtonOptions& nopt, Vector& out,
          BdfWeights& used) {
  used = bdf_weights(order, k, h.k);
  const auto td = discretization(used, h.y0, h.y1);
  out = h.y0;
  return newton_solve(problem, out, td, nopt).converged;
}

double steady_metric(NonlinearProblem& problem, const BdfWeights& b, const Vector& y, const History& h, double t) {
  const Vector s = problem.variable_scales(y);
  const auto td = discretization(b, h.y0, h.y1);
  const Vector dydt = td.w0 * y + td.d;
  return t * dydt.cwiseQuotient(s).lpNorm<Eigen::Infinity>();
}

}  // namespace

MarchResult march(NonlinearProblem& problem, const Vector& y0, const MarchOptions& opt, const StepObserver& observer) {
  MarchResult res;
  History h{y0, y0, 0.0};
  double t = 0.0;
  double k = std::min(opt.dt0, opt.max_dt);
  int order = 1;
  if (observer) observer(StepRecord{0.0, 0.0, {}}, y0);

  Vector big, half, fine;
  BdfWeights wb, w1, w2;
  double t_quiet = -1.0;  // start of the current run of steady-looking points
  while (t < opt.t_end * (1 - 1e-12)) {
    if (res.accepted + res.rejected >= opt.max_steps) throw TimeIntegrationError("maximum number of steps reached");
    k = std::min({k, opt.max_dt, opt.t_end - t});
    if (k < opt.min_dt) throw TimeIntegrationError("step size underflow at t = " + std::to_string(t));
    const int p = order;
    bool ok = step(problem, h, k, p, opt.newton, big, wb);
    if (ok) ok = step(problem, h, 0.5 * k, p, opt.newton, half, w1);
    History hh{half, h.y0, 0.5 * k};
    if (ok) ok = step(problem, hh, 0.5 * k, p, opt.newton, fine, w2);
    if (!ok) {
      ++res.rejected;
      k *= 0.5;
      continue;
    }
    const Vector s = problem.variable_scales(fine);
    const Vector tol = (opt.rtol * s).array() + opt.atol;
    const double err = ((fine - big).cwiseAbs().array() / tol.array()).maxCoeff() / (std::pow(2.0, p) - 1.0);
    const double fac = err > 0 ? std::clamp(0.9 * std::pow(err, -1.0 / (p + 1)), 0.2, 2.0) : 2.0;
    if (!(err <= 1.0)) {
      ++res.rejected;
      k *= std::min(fac, 0.5);
      continue;
    }
    ++res.accepted;
    if (observer) {
      observer(StepRecord{t + 0.5 * k, 0.5 * k, w1}, half);
      observer(StepRecord{t + k, 0.5 * k, w2}, fine);
    }
    t += k;
    res.steady_metric = steady_metric(problem, w2, fine, hh, t);
    h = History{fine, half, 0.5 * k};
    if (res.accepted >= 2) order = 2;
    if (res.steady_metric < opt.steady_tol) {
      if (t_quiet < 0) t_quiet = t;
      if (opt.stop_at_steady && t >= opt.steady_span * t_quiet) {
        res.reached_steady = true;
        break;
      }
    } else {
      t_quiet = -1.0;
    }
    k *= fac;
  }
  res.y = h.y0;
  res.t = t;
  return res;
}

NewtonReport steady_solve(NonlinearProblem& problem, Vector& y, const SteadyOptions& opt) {
  Vector guess = y;
  auto rep = newton_solve(problem, y, TimeDiscretization{}, opt.newton);
  if (rep.converged) return rep;
  if (!opt.pseudo_transient) throw TimeIntegrationError("steady solve did not converge: " + rep.message);
  MarchOptions mo;
  mo.t_end = opt.pseudo_t_end;
  mo.rtol = 1e-2;
  mo.steady_span = 1e3;  // the start is often already close to steady
  mo.newton = opt.newton;
  MarchResult mr;
  try {
    mr = march(problem, guess, mo);
  } catch (const TimeIntegrationError& e) {
    throw TimeIntegrationError(std::string("steady solve: pseudo-transient fallback failed: ") + e.what());
  }
  y = mr.y;
  rep = newton_solve(problem, y, TimeDiscretization{}, opt.newton);
  if (!rep.converged) throw TimeIntegrationError("steady solve did not converge after pseudo-transient: " + rep.message);
  return rep;
}

}  // namespace osc
