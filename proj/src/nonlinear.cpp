#include "oscsim/nonlinear.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>

namespace osc {

namespace {

Vector row_weights(const SparseMatrix& J, const Vector& scale) {
  Vector w = Vector::Zero(J.rows());
  for (int k = 0; k < J.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(J, k); it; ++it)
      w[it.row()] = std::max(w[it.row()], std::abs(it.value()) * scale[it.col()]);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = w[i] > 0 ? 1.0 / w[i] : 1.0;
  return w;
}

}  // namespace

NewtonReport newton_solve(NonlinearProblem& problem, Vector& y, const TimeDiscretization& td,
                          const NewtonOptions& opt) {
  NewtonReport rep;
  problem.post_update(y, td);
  Vector R;
  SparseMatrix J;
  std::deque<std::pair<Vector, Vector>> past;  // (y, delta) of recent full steps
  for (int it = 0; it < opt.max_iter; ++it) {
    problem.evaluate(y, td, R, &J);
    if (!R.allFinite()) {
      rep.message = "non-finite residual";
      return rep;
    }
    const Vector scale = problem.variable_scales(y);
    const Vector w = row_weights(J, scale);
    const double merit = w.cwiseProduct(R).norm();
    rep.residual_norm = w.cwiseProduct(R).lpNorm<Eigen::Infinity>();
    rep.history.push_back(merit);
    // nonmonotone acceptance: below the largest of the recent merits
    double reference = merit;
    for (int k = std::max<int>(0, static_cast<int>(rep.history.size()) - opt.nonmonotone_window);
         k < static_cast<int>(rep.history.size()); ++k)
      reference = std::max(reference, rep.history[k]);
    if (rep.residual_norm < opt.residual_tol) {
      rep.converged = true;
      return rep;
    }
    const int n = static_cast<int>(rep.history.size());
    if (opt.stagnation_window > 0 && n > 2 * opt.stagnation_window &&
        merit > opt.stagnation_ratio * rep.history[n - 1 - opt.stagnation_window]) {
      rep.message = "stagnated";
      return rep;
    }
    Vector delta;
    try {
      SparseMatrix Js = J * scale.asDiagonal();
      delta = scale.cwiseProduct(solve_equilibrated(std::move(Js), -R));
    } catch (const LinearSolverError& e) {
      rep.message = std::string("linear solver: ") + e.what();
      return rep;
    }
    if (!delta.allFinite()) {
      rep.message = "non-finite Newton increment";
      return rep;
    }
    rep.iterations = it + 1;
    rep.step_norm = delta.cwiseQuotient(scale).lpNorm<Eigen::Infinity>();

    // Anderson mixing of the fixed-point map y -> y + delta once full steps
    // contract only linearly.
    const bool linear_regime = n >= 3 && merit > opt.anderson_onset * rep.history[n - 2];
    if (opt.anderson_depth > 0 && linear_regime && !past.empty()) {
      const int m = static_cast<int>(past.size());
      Eigen::MatrixXd dF(y.size(), m), dX(y.size(), m);
      const Vector* yk = &y;
      const Vector* fk = &delta;
      for (int c = m - 1; c >= 0; --c) {
        dX.col(c) = *yk - past[c].first;
        dF.col(c) = *fk - past[c].second;
        yk = &past[c].first;
        fk = &past[c].second;
      }
      const Vector inv = scale.cwiseInverse();
      const Eigen::MatrixXd A = inv.asDiagonal() * dF;
      const Vector gamma = A.colPivHouseholderQr().solve(inv.cwiseProduct(delta));
      Vector trial = y + delta - (dX + dF) * gamma;
      problem.post_update(trial, td);
      Vector Rt;
      problem.evaluate(trial, td, Rt, nullptr);
      if (gamma.allFinite() && Rt.allFinite() && w.cwiseProduct(Rt).norm() < reference) {
        past.emplace_back(y, delta);
        if (static_cast<int>(past.size()) > opt.anderson_depth) past.pop_front();
        y = trial;
        if (rep.step_norm < opt.tol) {
          rep.converged = true;
          return rep;
        }
        continue;
      }
      past.clear();
    }

    double lambda = 1.0;
    Vector trial = y + delta;
    problem.post_update(trial, td);
    if (opt.damping) {
      Vector Rt;
      for (int h = 0; h < opt.max_halvings; ++h) {
        problem.evaluate(trial, td, Rt, nullptr);
        if (Rt.allFinite() && w.cwiseProduct(Rt).norm() < reference) break;
        lambda *= 0.5;
        trial = y + lambda * delta;
        problem.post_update(trial, td);
      }
    }
    if (lambda == 1.0) {
      past.emplace_back(y, delta);
      if (static_cast<int>(past.size()) > opt.anderson_depth) past.pop_front();
    } else {
      past.clear();
    }
    y = trial;
    if (rep.step_norm < opt.tol) {
      rep.converged = true;
      return rep;
    }
  }
  rep.message = "maximum iterations reached";
  return rep;
}

}  // namespace osc
