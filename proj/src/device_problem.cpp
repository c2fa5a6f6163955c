#include <cmath>
#include <map>
#include <stdexcept>

#include "oscsim/macro_model.hpp"

namespace osc {

DeviceProblem::DeviceProblem(Mesh mesh, const DeviceParams& params, bool periodic)
    : mesh_(std::move(mesh)), params_(params) {
  params_.validate();
  if (periodic) pairing_ = pair_periodic(mesh_);
}

void DeviceProblem::init(const DofMap::Support& support) {
  dm_ = DofMap::build(mesh_, support, pairing_);
  const std::size_t ne = mesh_.num_elements(), nn = mesh_.num_nodes();
  eps_elem_.resize(ne);
  for (std::size_t k = 0; k < ne; ++k) eps_elem_[k] = params_.permittivity(mesh_.region(k));
  const int nv = mesh_.vertices_per_element();
  mass_all_.assign(nn, 0.0);
  mass_n_.assign(nn, 0.0);
  mass_p_.assign(nn, 0.0);
  for (std::size_t k = 0; k < ne; ++k) {
    const double w = mesh_.geometry(k).measure / nv;
    for (int a = 0; a < nv; ++a) {
      const int i = mesh_.element(k)[a];
      mass_all_[i] += w;
      if (n_elems_[k]) mass_n_[i] += w;
      if (p_elems_[k]) mass_p_[i] += w;
    }
  }
  update_weight_potential();
}

namespace {

Vector contact_laplace(const Mesh& mesh, const DofMap& sdm, const std::vector<double>& eps, double cathode,
                       double anode) {
  LinearSystem sys{assemble_stiffness(mesh, sdm, Field::exciton, eps), Vector::Zero(sdm.size())};
  std::map<int, double> fixed;
  for (int i : mesh.boundary_nodes(BoundaryTag::cathode)) fixed[sdm.dof(Field::exciton, i)] = cathode;
  for (int i : mesh.boundary_nodes(BoundaryTag::anode)) fixed[sdm.dof(Field::exciton, i)] = anode;
  std::vector<int> dofs;
  std::vector<double> values;
  for (auto [d, v] : fixed) {
    dofs.push_back(d);
    values.push_back(v);
  }
  apply_dirichlet(sys, dofs, values, Vector::Zero(sdm.size()));
  return solve_equilibrated(sys.A, sys.rhs);
}

}  // namespace

void DeviceProblem::update_weight_potential() {
  const DofMap sdm = DofMap::scalar(mesh_, pairing_);
  psi_ = sdm.expand(Field::exciton, contact_laplace(mesh_, sdm, eps_elem_, 1.0, 0.0));
}

double DeviceProblem::terminal_current(const Vector& y) {
  const Vector R = raw_residual(y, TimeDiscretization{});
  double s = 0;
  for (Field f : {Field::electron, Field::hole}) {
    const double sign = f == Field::electron ? 1.0 : -1.0;
    const auto& nodes = dm_.nodes_of(f);
    const int off = dm_.offset(f);
    for (std::size_t k = 0; k < nodes.size(); ++k) s += sign * psi_[nodes[k]] * R[off + static_cast<int>(k)];
  }
  return constants::q * s;
}

void DeviceProblem::set_params(const DeviceParams& p) {
  p.validate();
  params_ = p;
  for (std::size_t k = 0; k < mesh_.num_elements(); ++k) eps_elem_[k] = params_.permittivity(mesh_.region(k));
  update_weight_potential();
}

void DeviceProblem::dirichlet(std::vector<int>& dofs, std::vector<double>& values) const {
  std::map<int, double> fixed;
  const auto cathode = mesh_.boundary_nodes(BoundaryTag::cathode);
  const auto anode = mesh_.boundary_nodes(BoundaryTag::anode);
  auto set = [&](Field f, const std::vector<int>& nodes, double v) {
    for (int i : nodes)
      if (dm_.has(f, i)) fixed[dm_.dof(f, i)] = v;
  };
  set(Field::exciton, cathode, 0.0);
  set(Field::exciton, anode, 0.0);
  if (params_.kappa_n == 0) set(Field::electron, cathode, params_.beta_n / params_.alpha_n);
  if (params_.kappa_p == 0) set(Field::hole, anode, params_.beta_p / params_.alpha_p);
  set(Field::potential, cathode, 0.0);
  set(Field::potential, anode, params_.V_bi + params_.V_appl);
  dofs.clear();
  values.clear();
  for (auto [d, v] : fixed) {
    dofs.push_back(d);
    values.push_back(v);
  }
}

void DeviceProblem::apply_dirichlet_values(Vector& y) const {
  std::vector<int> dofs;
  std::vector<double> values;
  dirichlet(dofs, values);
  for (std::size_t k = 0; k < dofs.size(); ++k) y[dofs[k]] = values[k];
}

Vector DeviceProblem::initial_state() const {
  Vector y = Vector::Zero(dm_.size());
  // charge-free Poisson problem on the potential
  const DofMap sdm = DofMap::scalar(mesh_, pairing_);
  const Vector phi = contact_laplace(mesh_, sdm, eps_elem_, 0.0, params_.V_bi + params_.V_appl);
  dm_.fold(Field::potential, sdm.expand(Field::exciton, phi), y);
  apply_dirichlet_values(y);
  return y;
}

Vector DeviceProblem::variable_scales(const Vector& y) const {
  Vector s(dm_.size());
  for (int f = 0; f < kNumFields; ++f) {
    const Field fld = static_cast<Field>(f);
    const int off = dm_.offset(fld), cnt = dm_.count(fld);
    if (cnt == 0) continue;
    double ref;
    if (fld == Field::potential) {
      ref = params_.thermal_voltage();
    } else {
      const double floor = fld == Field::polaron ? 1e10 * 2 * params_.H : 1e10;
      ref = y.segment(off, cnt).cwiseAbs().maxCoeff() + floor;
    }
    s.segment(off, cnt).setConstant(ref);
  }
  return s;
}

std::vector<Point> DeviceProblem::element_fields(const std::vector<double>& phi) const {
  std::vector<Point> E(mesh_.num_elements());
  const int nv = mesh_.vertices_per_element();
  for (std::size_t k = 0; k < mesh_.num_elements(); ++k) {
    const auto& g = mesh_.geometry(k);
    Point v{0.0, 0.0};
    for (int a = 0; a < nv; ++a) {
      const double u = phi[mesh_.element(k)[a]];
      v[0] -= u * g.grad[a][0];
      v[1] -= u * g.grad[a][1];
    }
    E[k] = v;
  }
  return E;
}

void DeviceProblem::add_bulk_terms(Accumulator& acc, const Vector& y, const TimeDiscretization& td) {
  const auto e = nodal(Field::exciton, y);
  const auto n = nodal(Field::electron, y);
  const auto p = nodal(Field::hole, y);
  const auto phi = nodal(Field::potential, y);
  const auto E = element_fields(phi);
  const int nv = mesh_.vertices_per_element();
  const std::size_t ne = mesh_.num_elements(), nn = mesh_.num_nodes();
  const double Vt = params_.thermal_voltage();
  const double q = constants::q;

  std::vector<double> Dn(ne, 0.0), Dp(ne, 0.0);
  for (std::size_t k = 0; k < ne; ++k) {
    const auto& el = mesh_.element(k);
    const auto ke = element_stiffness(mesh_.geometry(k));
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b) {
        const double kab = ke[a][b];
        acc.res(Field::exciton, el[a], params_.D_e * kab * e[el[b]]);
        acc.jac(Field::exciton, el[a], Field::exciton, el[b], params_.D_e * kab);
        acc.res(Field::potential, el[a], eps_elem_[k] * kab * phi[el[b]]);
        acc.jac(Field::potential, el[a], Field::potential, el[b], eps_elem_[k] * kab);
      }
    const double Emag = std::hypot(E[k][0], E[k][1]);
    if (n_elems_[k]) Dn[k] = diffusivity(params_, Carrier::n, Emag);
    if (p_elems_[k]) Dp[k] = diffusivity(params_, Carrier::p, Emag);
  }
  add_drift_diffusion(acc, mesh_, Field::electron, Dn, n, phi, Vt, +1);
  add_drift_diffusion(acc, mesh_, Field::hole, Dp, p, phi, Vt, -1);

  const bool transient = !td.steady();
  for (std::size_t i = 0; i < nn; ++i) {
    const int node = static_cast<int>(i);
    const double m = mass_all_[i];
    acc.res(Field::exciton, node, m * (e[i] / params_.tau_e - params_.Q));
    acc.jac(Field::exciton, node, Field::exciton, node, m / params_.tau_e);
    acc.res(Field::potential, node, q * (mass_n_[i] * n[i] - mass_p_[i] * p[i]));
    if (mass_n_[i] > 0) acc.jac(Field::potential, node, Field::electron, node, q * mass_n_[i]);
    if (mass_p_[i] > 0) acc.jac(Field::potential, node, Field::hole, node, -q * mass_p_[i]);
    if (!transient) continue;
    for (auto [f, mm] : {std::pair{Field::exciton, m}, {Field::electron, mass_n_[i]}, {Field::hole, mass_p_[i]}}) {
      const int d = dm_.dof(f, node);
      if (d < 0 || mm == 0) continue;
      acc.res(f, node, mm * (td.w0 * y[d] + td.d[d]));
      acc.jac(f, node, f, node, mm * td.w0);
    }
  }
  if (!with_robin_) return;
  if (params_.kappa_n > 0)
    add_robin(acc, mesh_, Field::electron, BoundaryTag::cathode, params_.kappa_n, params_.alpha_n, params_.beta_n, n);
  if (params_.kappa_p > 0)
    add_robin(acc, mesh_, Field::hole, BoundaryTag::anode, params_.kappa_p, params_.alpha_p, params_.beta_p, p);
}

void DeviceProblem::evaluate(const Vector& y, const TimeDiscretization& td, Vector& R, SparseMatrix* J) {
  Accumulator acc(dm_, J != nullptr);
  assemble(y, td, acc);
  R = acc.residual();
  std::vector<int> dofs;
  std::vector<double> values;
  dirichlet(dofs, values);
  for (std::size_t k = 0; k < dofs.size(); ++k) R[dofs[k]] = y[dofs[k]] - values[k];
  if (J) {
    LinearSystem sys{acc.jacobian(), Vector::Zero(dm_.size())};
    apply_dirichlet(sys, dofs, values, y);
    *J = std::move(sys.A);
  }
}

Vector DeviceProblem::raw_residual(const Vector& y, const TimeDiscretization& td) {
  Accumulator acc(dm_, false);
  with_robin_ = false;
  assemble(y, td, acc);
  with_robin_ = true;
  return acc.residual();
}

ContactFluxes DeviceProblem::contact_fluxes(const Vector& y, const TimeDiscretization& td) {
  const Vector R = raw_residual(y, td);
  auto sum = [&](Field f, BoundaryTag tag) {
    std::map<int, double> unique;
    for (int i : mesh_.boundary_nodes(tag))
      if (dm_.has(f, i)) unique[dm_.dof(f, i)] = R[dm_.dof(f, i)];
    double s = 0;
    for (auto [d, v] : unique) s += v;
    return s;
  };
  ContactFluxes c;
  c.I_cathode = constants::q * sum(Field::electron, BoundaryTag::cathode);
  c.I_anode = -constants::q * sum(Field::hole, BoundaryTag::anode);
  c.D_cathode = -sum(Field::potential, BoundaryTag::cathode);
  c.cathode_measure = mesh_.boundary_measure(BoundaryTag::cathode);
  c.anode_measure = mesh_.boundary_measure(BoundaryTag::anode);
  return c;
}

double DeviceProblem::field_integral(Field f, const Vector& y) const {
  const auto& m = f == Field::electron ? mass_n_ : f == Field::hole ? mass_p_ : mass_all_;
  if (f == Field::polaron || f == Field::potential) throw std::invalid_argument("field_integral: bulk densities only");
  const auto u = nodal(f, y);
  double s = 0;
  for (std::size_t i = 0; i < u.size(); ++i) s += m[i] * u[i];
  return s;
}

LinearSystem DeviceProblem::quasi_newton_system(const Vector& y, const TimeDiscretization& td) {
  Vector R;
  SparseMatrix J;
  evaluate(y, td, R, &J);
  return {std::move(J), -R};
}

}  // namespace osc
