#include "oscsim/micro_model.hpp"

#include <cmath>
#include <stdexcept>

namespace osc {

MicroModel::MicroModel(Mesh mesh, const DeviceParams& params) : DeviceProblem(std::move(mesh), params, false) {
  if (mesh_.dimension() != 1) throw std::invalid_argument("micro model: mesh must be 1D");
  const std::size_t ne = mesh_.num_elements(), nn = mesh_.num_nodes();
  n_elems_.assign(ne, 0);
  p_elems_.assign(ne, 0);
  DofMap::Support s;
  s[idx(Field::exciton)].assign(nn, 1);
  s[idx(Field::potential)].assign(nn, 1);
  for (Field f : {Field::polaron, Field::electron, Field::hole}) s[idx(f)].assign(nn, 0);
  for (std::size_t k = 0; k < ne; ++k) {
    const Region r = mesh_.region(k);
    const bool slab = is_slab(r);
    if (slab) slab_elems_.push_back(static_cast<int>(k));
    n_elems_[k] = slab || r == Region::acceptor;
    p_elems_[k] = slab || r == Region::donor;
    for (int a = 0; a < 2; ++a) {
      const int i = mesh_.element(k)[a];
      if (slab) s[idx(Field::polaron)][i] = 1;
      if (n_elems_[k]) s[idx(Field::electron)][i] = 1;
      if (p_elems_[k]) s[idx(Field::hole)][i] = 1;
    }
  }
  if (slab_elems_.empty()) throw std::invalid_argument("micro model: mesh has no slab elements");
  init(s);
}

double MicroModel::slab_measure() const {
  double m = 0;
  for (int k : slab_elems_) m += mesh_.geometry(k).measure;
  return m;
}

void MicroModel::assemble(const Vector& y, const TimeDiscretization& td, Accumulator& acc) {
  add_bulk_terms(acc, y, td);
  const auto e = nodal(Field::exciton, y);
  const auto P = nodal(Field::polaron, y);
  const auto n = nodal(Field::electron, y);
  const auto p = nodal(Field::hole, y);
  const auto E = element_fields(nodal(Field::potential, y));
  const double ek = params_.eta * params_.k_rec;
  for (int k : slab_elems_) {
    const double Ex = E[k][0];
    const double eps = eps_elem_[k];
    const double kd = kdiss(params_, FieldSample{Ex, 0.0}, Ex, eps);
    const double mu_n = mobility(params_, Carrier::n, std::abs(Ex));
    const double mu_p = mobility(params_, Carrier::p, std::abs(Ex));
    const double g = bimolecular_gamma(params_, mu_n, mu_p, eps);
    const double w = 0.5 * mesh_.geometry(k).measure;
    for (int a = 0; a < 2; ++a) {
      const int i = mesh_.element(k)[a];
      acc.res(Field::exciton, i, w * (e[i] / params_.tau_diss - ek * P[i]));
      acc.jac(Field::exciton, i, Field::exciton, i, w / params_.tau_diss);
      acc.jac(Field::exciton, i, Field::polaron, i, -w * ek);

      const double rec = g * n[i] * p[i];
      for (Field f : {Field::electron, Field::hole}) {
        acc.res(f, i, w * (-kd * P[i] + rec));
        acc.jac(f, i, Field::polaron, i, -w * kd);
        acc.jac(f, i, Field::electron, i, w * g * p[i]);
        acc.jac(f, i, Field::hole, i, w * g * n[i]);
      }

      acc.res(Field::polaron, i, w * (-e[i] / params_.tau_diss - rec + (kd + params_.k_rec) * P[i]));
      acc.jac(Field::polaron, i, Field::exciton, i, -w / params_.tau_diss);
      acc.jac(Field::polaron, i, Field::electron, i, -w * g * p[i]);
      acc.jac(Field::polaron, i, Field::hole, i, -w * g * n[i]);
      acc.jac(Field::polaron, i, Field::polaron, i, w * (kd + params_.k_rec));
      if (!td.steady()) {
        const int d = dm_.dof(Field::polaron, i);
        acc.res(Field::polaron, i, w * (td.w0 * y[d] + td.d[d]));
        acc.jac(Field::polaron, i, Field::polaron, i, w * td.w0);
      }
    }
  }
}

}  // namespace osc
