#include "oscsim/macro_model.hpp"

#include <cmath>
#include <map>

namespace osc {

MacroModel::MacroModel(Mesh mesh, const DeviceParams& params, bool periodic)
    : DeviceProblem(std::move(mesh), params, periodic) {
  iface_ = extract_interface(mesh_);
  lump_ = lump_interface(mesh_, iface_);
  const std::size_t ne = mesh_.num_elements(), nn = mesh_.num_nodes();
  n_elems_.assign(ne, 0);
  p_elems_.assign(ne, 0);
  DofMap::Support s;
  s[idx(Field::exciton)].assign(nn, 1);
  s[idx(Field::potential)].assign(nn, 1);
  s[idx(Field::polaron)].assign(nn, 0);
  s[idx(Field::electron)].assign(nn, 0);
  s[idx(Field::hole)].assign(nn, 0);
  for (int i : iface_.nodes) s[idx(Field::polaron)][i] = 1;
  for (std::size_t k = 0; k < ne; ++k) {
    const bool acc = is_acceptor_side(mesh_.region(k));
    (acc ? n_elems_ : p_elems_)[k] = 1;
    for (int a = 0; a < mesh_.vertices_per_element(); ++a)
      s[idx(acc ? Field::electron : Field::hole)][mesh_.element(k)[a]] = 1;
  }
  init(s);
}

void MacroModel::set_params(const DeviceParams& p) {
  DeviceProblem::set_params(p);
  cache_valid_ = false;
}

InterfaceFields MacroModel::compute_interface_fields(const Vector& y) const {
  const auto E = element_fields(nodal(Field::potential, y));
  InterfaceFields out;
  const int axis = mesh_.dimension() == 1 ? 0 : 1;
  double num = 0, den = 0;
  for (const auto& f : iface_.facets) {
    const double ed = eps_elem_[f.donor_element], ea = eps_elem_[f.acceptor_element];
    const auto& Ed = E[f.donor_element];
    const auto& Ea = E[f.acceptor_element];
    const Point Ef{(ed * Ed[0] + ea * Ea[0]) / (ed + ea), (ed * Ed[1] + ea * Ea[1]) / (ed + ea)};
    const double En = Ef[0] * f.normal[0] + Ef[1] * f.normal[1];
    const double Et = std::hypot(Ef[0] - En * f.normal[0], Ef[1] - En * f.normal[1]);
    out.facet.push_back({En, Et});
    out.eps.push_back(0.5 * (ed + ea));
    num += f.measure * Ef[axis];
    den += f.measure;
  }
  out.mean_Ey = num / den;
  return out;
}

void MacroModel::refresh_coefficients(const Vector& y) {
  const auto phi_block = y.segment(dm_.offset(Field::potential), dm_.count(Field::potential));
  if (cache_valid_ && cache_phi_.size() == phi_block.size() && cache_phi_ == phi_block) return;
  const auto fields = compute_interface_fields(y);
  const auto E = element_fields(nodal(Field::potential, y));
  const std::size_t nf = iface_.facets.size();
  cache_kdiss_.resize(nf);
  cache_gamma_.resize(nf);
  double eps_mean = 0;
  for (double e : fields.eps) eps_mean += e / nf;
  const double kA =
      params_.kdiss_model == KdissModel::A ? kdiss_averaged_A(params_, fields.mean_Ey, eps_mean) : 0.0;
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& fc = iface_.facets[f];
    cache_kdiss_[f] =
        params_.kdiss_model == KdissModel::A ? kA : kdiss(params_, fields.facet[f], fields.mean_Ey, fields.eps[f]);
    const auto& Ea = E[fc.acceptor_element];
    const auto& Ed = E[fc.donor_element];
    const double mun = mobility(params_, Carrier::n, std::hypot(Ea[0], Ea[1]));
    const double mup = mobility(params_, Carrier::p, std::hypot(Ed[0], Ed[1]));
    cache_gamma_[f] = bimolecular_gamma(params_, mun, mup, fields.eps[f]);
  }
  cache_mean_Ey_ = fields.mean_Ey;
  cache_phi_ = phi_block;
  cache_valid_ = true;
}

std::vector<double> MacroModel::facet_kdiss(const Vector& y) {
  refresh_coefficients(y);
  return cache_kdiss_;
}

InterfaceCoefficients MacroModel::interface_coefficients(const Vector& y) {
  refresh_coefficients(y);
  InterfaceCoefficients c;
  c.W = lump_.weight;
  c.Wkdiss = lump_.lump(cache_kdiss_);
  c.Wgamma = lump_.lump(cache_gamma_);
  c.two_H = 2 * params_.H;
  c.tau_diss = params_.tau_diss;
  c.eta_krec = params_.eta * params_.k_rec;
  c.k_rec = params_.k_rec;
  return c;
}

void MacroModel::eliminate_polaron_steady(Vector& y) {
  const auto c = interface_coefficients(y);
  const auto e = nodal(Field::exciton, y);
  const auto n = nodal(Field::electron, y);
  const auto p = nodal(Field::hole, y);
  std::map<int, std::pair<double, double>> acc;  // dof -> (numerator, denominator)
  for (std::size_t k = 0; k < lump_.nodes.size(); ++k) {
    const int i = lump_.nodes[k];
    auto& [num, den] = acc[dm_.dof(Field::polaron, i)];
    num += c.W[k] * c.two_H / c.tau_diss * e[i] + c.two_H * c.Wgamma[k] * n[i] * p[i];
    den += c.Wkdiss[k] + c.W[k] * c.k_rec;
  }
  for (auto [d, nd] : acc) y[d] = nd.first / nd.second;
}

void MacroModel::post_update(Vector& y, const TimeDiscretization& td) {
  if (td.steady() && eliminate_polaron) eliminate_polaron_steady(y);
}

void MacroModel::assemble(const Vector& y, const TimeDiscretization& td, Accumulator& acc) {
  add_bulk_terms(acc, y, td);
  const auto c = interface_coefficients(y);
  const auto P = nodal(Field::polaron, y);
  add_interface_terms(acc, lump_, c, nodal(Field::exciton, y), P, nodal(Field::electron, y), nodal(Field::hole, y));
  if (td.steady()) return;
  for (std::size_t k = 0; k < lump_.nodes.size(); ++k) {
    const int i = lump_.nodes[k];
    const int d = dm_.dof(Field::polaron, i);
    acc.res(Field::polaron, i, c.W[k] * (td.w0 * y[d] + td.d[d]));
    acc.jac(Field::polaron, i, Field::polaron, i, c.W[k] * td.w0);
  }
}

double eliminate_polaron_steady(double e, double n, double p, const DeviceParams& params, double kdiss, double gamma) {
  const double two_H = 2 * params.H;
  return (two_H / params.tau_diss * e + two_H * gamma * n * p) / (kdiss + params.k_rec);
}

}  // namespace osc
