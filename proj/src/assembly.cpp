#include "oscsim/assembly.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace osc {

DofMap DofMap::build(const Mesh& mesh, const Support& support, const PeriodicPairing& pairing) {
  DofMap dm;
  const int nn = static_cast<int>(mesh.num_nodes());
  dm.master_.resize(nn);
  for (int i = 0; i < nn; ++i) dm.master_[i] = i;
  for (auto [m, s] : pairing.node_pairs) {
    if (m < 0 || m >= nn || s < 0 || s >= nn) throw std::invalid_argument("periodic pair references a missing node");
    dm.master_[s] = m;
  }
  for (int i = 0; i < nn; ++i)
    if (dm.master_[dm.master_[i]] != dm.master_[i]) throw std::invalid_argument("chained periodic pairs");
  int offset = 0;
  for (int f = 0; f < kNumFields; ++f) {
    if (!support[f].empty() && static_cast<int>(support[f].size()) != nn)
      throw std::invalid_argument("support mask size mismatch");
    std::vector<char> on(nn, 0);
    for (int i = 0; i < nn && !support[f].empty(); ++i)
      if (support[f][i]) on[dm.master_[i]] = 1;
    dm.offset_[f] = offset;
    dm.node_dof_[f].assign(nn, -1);
    for (int i = 0; i < nn; ++i)
      if (dm.master_[i] == i && on[i]) {
        dm.node_dof_[f][i] = offset++;
        dm.dof_node_[f].push_back(i);
      }
    for (int i = 0; i < nn; ++i)
      if (dm.master_[i] != i) dm.node_dof_[f][i] = dm.node_dof_[f][dm.master_[i]];
    dm.count_[f] = offset - dm.offset_[f];
  }
  dm.size_ = offset;
  return dm;
}

DofMap DofMap::scalar(const Mesh& mesh, const PeriodicPairing& pairing) {
  Support s;
  s[0].assign(mesh.num_nodes(), 1);
  return build(mesh, s, pairing);
}

Field DofMap::field_of(int dof) const {
  for (int f = kNumFields - 1; f >= 0; --f)
    if (dof >= offset_[f] && count_[f] > 0) return static_cast<Field>(f);
  return Field::exciton;
}

std::vector<double> DofMap::expand(Field f, const Vector& y) const {
  std::vector<double> out(master_.size(), 0.0);
  for (std::size_t i = 0; i < master_.size(); ++i) {
    const int d = node_dof_[idx(f)][i];
    if (d >= 0) out[i] = y[d];
  }
  return out;
}

void DofMap::fold(Field f, const std::vector<double>& nodal, Vector& y) const {
  for (int k = 0; k < count_[idx(f)]; ++k) y[offset_[idx(f)] + k] = nodal[dof_node_[idx(f)][k]];
}

std::vector<double> expand_periodic(const PeriodicPairing& pairing, std::vector<double> nodal) {
  for (auto [m, s] : pairing.node_pairs) nodal[s] = nodal[m];
  return nodal;
}

// ---------------------------------------------------------------------------

double bernoulli(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x / 2.0 + x * x / 12.0;
  if (x > 0) {
    const double t = std::exp(-x);
    return x * t / -std::expm1(-x);
  }
  return x / std::expm1(x);
}

double bernoulli_derivative(double x) {
  if (std::abs(x) < 1e-2) {
    const double x2 = x * x;
    return -0.5 + x / 6.0 - x * x2 / 180.0 + x * x2 * x2 / 5040.0;
  }
  if (x > 0) {
    const double t = std::exp(-x);
    const double om = -std::expm1(-x);
    return t * (om - x) / (om * om);
  }
  const double em = std::expm1(x);
  return (em - x * std::exp(x)) / (em * em);
}

Accumulator::Accumulator(const DofMap& dm, bool with_jacobian)
    : dm_(dm), with_jac_(with_jacobian), R_(Vector::Zero(dm.size())) {}

SparseMatrix Accumulator::jacobian() const {
  SparseMatrix J(dm_.size(), dm_.size());
  J.setFromTriplets(T_.begin(), T_.end());
  J.makeCompressed();
  return J;
}

std::array<std::array<double, 3>, 3> element_stiffness(const ElementGeometry& g) {
  std::array<std::array<double, 3>, 3> k{};
  for (int i = 0; i < g.n_vertices; ++i)
    for (int j = 0; j < g.n_vertices; ++j)
      k[i][j] = g.measure * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1]);
  return k;
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& coeff) {
  Accumulator acc(dm, true);
  const int nv = mesh.vertices_per_element();
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    if (coeff[k] == 0) continue;
    const auto& el = mesh.element(k);
    const auto ke = element_stiffness(mesh.geometry(k));
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) acc.jac(f, el[i], f, el[j], coeff[k] * ke[i][j]);
  }
  return acc.jacobian();
}

Vector lumped_mass(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& coeff) {
  Vector m = Vector::Zero(dm.size());
  const int nv = mesh.vertices_per_element();
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    if (coeff[k] == 0) continue;
    const double w = coeff[k] * mesh.geometry(k).measure / nv;
    for (int i = 0; i < nv; ++i) {
      const int d = dm.dof(f, mesh.element(k)[i]);
      if (d >= 0) m[d] += w;
    }
  }
  return m;
}

SparseMatrix assemble_lumped_mass(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& coeff) {
  const Vector m = lumped_mass(mesh, dm, f, coeff);
  SparseMatrix M(dm.size(), dm.size());
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < dm.size(); ++i)
    if (m[i] != 0) t.emplace_back(i, i, m[i]);
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

void add_drift_diffusion(Accumulator& acc, const Mesh& mesh, Field f, const std::vector<double>& D,
                         const std::vector<double>& u, const std::vector<double>& phi, double Vt, int sign) {
  const int nv = mesh.vertices_per_element();
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    if (!(D[k] > 0)) continue;
    const auto& el = mesh.element(k);
    const auto ke = element_stiffness(mesh.geometry(k));
    for (int a = 0; a < nv; ++a)
      for (int b = a + 1; b < nv; ++b) {
        const int i = el[a], j = el[b];
        const double c = -ke[a][b] * D[k];
        if (c == 0) continue;
        const double delta = (phi[j] - phi[i]) / Vt;
        // flux from i to j in "row i" form; row j receives the negative
        double Fi, dFi_dui, dFi_duj, dFi_ddelta;
        if (sign > 0) {
          const double bm = bernoulli(-delta), bp = bernoulli(delta);
          Fi = c * (bm * u[i] - bp * u[j]);
          dFi_dui = c * bm;
          dFi_duj = -c * bp;
          dFi_ddelta = c * (-bernoulli_derivative(-delta) * u[i] - bernoulli_derivative(delta) * u[j]);
        } else {
          const double bm = bernoulli(-delta), bp = bernoulli(delta);
          Fi = c * (bp * u[i] - bm * u[j]);
          dFi_dui = c * bp;
          dFi_duj = -c * bm;
          dFi_ddelta = c * (bernoulli_derivative(delta) * u[i] + bernoulli_derivative(-delta) * u[j]);
        }
        acc.res(f, i, Fi);
        acc.res(f, j, -Fi);
        if (!acc.with_jacobian()) continue;
        acc.jac(f, i, f, i, dFi_dui);
        acc.jac(f, i, f, j, dFi_duj);
        acc.jac(f, j, f, i, -dFi_dui);
        acc.jac(f, j, f, j, -dFi_duj);
        const double dphi = dFi_ddelta / Vt;  // d delta / d phi_j = 1/Vt
        acc.jac(f, i, Field::potential, j, dphi);
        acc.jac(f, i, Field::potential, i, -dphi);
        acc.jac(f, j, Field::potential, j, -dphi);
        acc.jac(f, j, Field::potential, i, dphi);
      }
  }
}

SparseMatrix assemble_drift_diffusion(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& D,
                                      const std::vector<double>& phi, double Vt, int sign) {
  // the transport residual is linear in u: its u-Jacobian is the matrix
  Accumulator acc(dm, true);
  const std::vector<double> zero(mesh.num_nodes(), 0.0);
  add_drift_diffusion(acc, mesh, f, D, zero, phi, Vt, sign);
  SparseMatrix J = acc.jacobian();
  // drop potential-column couplings (zero for u = 0, kept out of the block)
  J.prune([&](int, int c, double) { return dm.field_of(c) == f; });
  return J;
}

int count_negative_edge_weights(const Mesh& mesh) {
  int bad = 0;
  const int nv = mesh.vertices_per_element();
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const auto ke = element_stiffness(mesh.geometry(k));
    for (int a = 0; a < nv; ++a)
      for (int b = a + 1; b < nv; ++b)
        if (ke[a][b] > 1e-12 * std::abs(ke[a][a])) {
          ++bad;
          a = nv;
          break;
        }
  }
  return bad;
}

// ---------------------------------------------------------------------------

std::vector<double> InterfaceLumping::lump(const std::vector<double>& per_facet) const {
  std::vector<double> out(nodes.size(), 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (auto [f, w] : facets[i]) out[i] += w * per_facet[static_cast<std::size_t>(f)];
  return out;
}

InterfaceLumping lump_interface(const Mesh& mesh, const InterfaceSet& iface) {
  InterfaceLumping L;
  L.nodes = iface.nodes;
  std::map<int, std::size_t> pos;
  for (std::size_t i = 0; i < L.nodes.size(); ++i) pos[L.nodes[i]] = i;
  L.weight.assign(L.nodes.size(), 0.0);
  L.facets.resize(L.nodes.size());
  const int per = mesh.dimension();
  for (std::size_t f = 0; f < iface.facets.size(); ++f) {
    const auto& fc = iface.facets[f];
    const double w = fc.measure / per;
    for (int a = 0; a < per; ++a) {
      const std::size_t i = pos.at(fc.nodes[a]);
      L.weight[i] += w;
      L.facets[i].emplace_back(static_cast<int>(f), w);
    }
  }
  return L;
}

void add_interface_terms(Accumulator& acc, const InterfaceLumping& lump, const InterfaceCoefficients& c,
                         const std::vector<double>& e, const std::vector<double>& P, const std::vector<double>& n,
                         const std::vector<double>& p) {
  const double g_e = c.two_H / c.tau_diss;
  for (std::size_t k = 0; k < lump.nodes.size(); ++k) {
    const int i = lump.nodes[k];
    const double W = c.W[k], Wk = c.Wkdiss[k], Wg = c.Wgamma[k];
    // exciton row
    acc.res(Field::exciton, i, W * g_e * e[i] - W * c.eta_krec * P[i]);
    acc.jac(Field::exciton, i, Field::exciton, i, W * g_e);
    acc.jac(Field::exciton, i, Field::polaron, i, -W * c.eta_krec);
    // polaron row
    const double np = n[i] * p[i];
    acc.res(Field::polaron, i, -W * g_e * e[i] - c.two_H * Wg * np + (Wk + W * c.k_rec) * P[i]);
    acc.jac(Field::polaron, i, Field::exciton, i, -W * g_e);
    acc.jac(Field::polaron, i, Field::polaron, i, Wk + W * c.k_rec);
    acc.jac(Field::polaron, i, Field::electron, i, -c.two_H * Wg * p[i]);
    acc.jac(Field::polaron, i, Field::hole, i, -c.two_H * Wg * n[i]);
    // carrier rows: generation minus recombination enters both with the same sign
    for (Field f : {Field::electron, Field::hole}) {
      acc.res(f, i, -Wk * P[i] + c.two_H * Wg * np);
      acc.jac(f, i, Field::polaron, i, -Wk);
      acc.jac(f, i, Field::electron, i, c.two_H * Wg * p[i]);
      acc.jac(f, i, Field::hole, i, c.two_H * Wg * n[i]);
    }
  }
}

void add_robin(Accumulator& acc, const Mesh& mesh, Field f, BoundaryTag tag, double kappa, double alpha, double beta,
               const std::vector<double>& u) {
  if (!(kappa > 0)) throw std::invalid_argument("Robin term requires kappa > 0; impose u = beta/alpha as Dirichlet");
  if (alpha == 0 && beta == 0) return;
  const int per = mesh.dimension();
  for (const auto& fc : mesh.boundary_facets()) {
    if (fc.tag != tag) continue;
    double len = 1.0;
    if (per == 2) {
      const auto& a = mesh.node(fc.nodes[0]);
      const auto& b = mesh.node(fc.nodes[1]);
      len = std::hypot(b[0] - a[0], b[1] - a[1]);
    }
    for (int k = 0; k < per; ++k) {
      const int i = fc.nodes[k];
      const double w = len / per;
      acc.res(f, i, w * (alpha * u[i] - beta) / kappa);
      acc.jac(f, i, f, i, w * alpha / kappa);
    }
  }
}

void apply_dirichlet(LinearSystem& sys, const std::vector<int>& dofs, const std::vector<double>& values,
                     const Vector& current) {
  if (dofs.size() != values.size()) throw std::invalid_argument("Dirichlet dofs/values size mismatch");
  std::vector<char> fixed(static_cast<std::size_t>(sys.A.rows()), 0);
  for (int d : dofs) {
    if (d < 0 || d >= sys.A.rows()) throw std::invalid_argument("Dirichlet dof outside the dof map");
    fixed[d] = 1;
  }
  sys.A.prune([&](int r, int, double) { return !fixed[r]; });
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    t.emplace_back(dofs[k], dofs[k], 1.0);
    sys.rhs[dofs[k]] = values[k] - current[dofs[k]];
  }
  SparseMatrix I(sys.A.rows(), sys.A.cols());
  I.setFromTriplets(t.begin(), t.end(), [](double a, double) { return a; });
  sys.A += I;
}

LinearSystem apply_periodic(const LinearSystem& sys, const PeriodicPairing& pairing, std::vector<int>* kept) {
  const int n = static_cast<int>(sys.A.rows());
  std::vector<int> master(n);
  for (int i = 0; i < n; ++i) master[i] = i;
  for (auto [m, s] : pairing.node_pairs) {
    if (m >= n || s >= n) throw std::invalid_argument("pairing references a node outside the system");
    master[s] = m;
  }
  std::vector<int> new_index(n, -1);
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (master[i] == i) {
      new_index[i] = static_cast<int>(keep.size());
      keep.push_back(i);
    }
  for (int i = 0; i < n; ++i)
    if (master[i] != i) {
      if (master[master[i]] != master[i]) throw std::invalid_argument("pairing references an eliminated node");
      new_index[i] = new_index[master[i]];
    }
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(sys.A, k); it; ++it)
      t.emplace_back(new_index[it.row()], new_index[it.col()], it.value());
  LinearSystem out;
  const int m = static_cast<int>(keep.size());
  out.A.resize(m, m);
  out.A.setFromTriplets(t.begin(), t.end());
  out.rhs = Vector::Zero(m);
  for (int i = 0; i < n; ++i) out.rhs[new_index[i]] += sys.rhs[i];
  if (kept) *kept = keep;
  return out;
}

}  // namespace osc
