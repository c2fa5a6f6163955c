#pragma once

// P1 assembly on labelled meshes: degree-of-freedom maps with periodic folding,
// stiffness and lumped mass, exponentially fitted (edge-averaged) transport,
// lumped interface and Robin terms, Dirichlet rows.

#include <Eigen/Sparse>
#include <array>
#include <vector>

#include "oscsim/linear_solver.hpp"
#include "oscsim/mesh.hpp"

namespace osc {

enum class Field : int { exciton = 0, polaron = 1, electron = 2, hole = 3, potential = 4 };
inline constexpr int kNumFields = 5;
inline constexpr int idx(Field f) { return static_cast<int>(f); }

/// Block-ordered unknown numbering (e | P | n | p | phi). A node carries a
/// field when it is in that field's support; periodic slave nodes share the
/// master node's degree of freedom.
class DofMap {
 public:
  using Support = std::array<std::vector<char>, kNumFields>;  // per field, per node

  static DofMap build(const Mesh& mesh, const Support& support, const PeriodicPairing& pairing = {});
  /// Field `exciton` on every node, all other fields empty.
  static DofMap scalar(const Mesh& mesh, const PeriodicPairing& pairing = {});

  int size() const { return size_; }
  int num_nodes() const { return static_cast<int>(master_.size()); }
  int offset(Field f) const { return offset_[idx(f)]; }
  int count(Field f) const { return count_[idx(f)]; }
  /// Global dof of (field, node) or -1 when the node does not carry the field.
  int dof(Field f, int node) const { return node_dof_[idx(f)][static_cast<std::size_t>(node)]; }
  bool has(Field f, int node) const { return dof(f, node) >= 0; }
  int master(int node) const { return master_[static_cast<std::size_t>(node)]; }
  /// Field of a global dof.
  Field field_of(int dof) const;
  /// Representative (master) node of every dof of a field, in dof order.
  const std::vector<int>& nodes_of(Field f) const { return dof_node_[idx(f)]; }

  /// Nodal values of one field (0 where unsupported).
  std::vector<double> expand(Field f, const Vector& y) const;
  /// Writes nodal values of master nodes into the field block of y.
  void fold(Field f, const std::vector<double>& nodal, Vector& y) const;

 private:
  std::vector<int> master_;
  std::array<std::vector<int>, kNumFields> node_dof_;
  std::array<std::vector<int>, kNumFields> dof_node_;
  std::array<int, kNumFields> offset_{}, count_{};
  int size_ = 0;
};

/// Expands a folded (master-only) nodal vector to every node, and folds back
/// by taking master values. Used by single-field node-space systems.
std::vector<double> expand_periodic(const PeriodicPairing& pairing, std::vector<double> nodal);

double bernoulli(double x);
double bernoulli_derivative(double x);

/// Residual vector and Jacobian triplets addressed by (field, node).
class Accumulator {
 public:
  Accumulator(const DofMap& dm, bool with_jacobian);
  void res(Field f, int node, double v) {
    const int r = dm_.dof(f, node);
    if (r >= 0) R_[r] += v;
  }
  void jac(Field fr, int nr, Field fc, int nc, double v) {
    if (!with_jac_) return;
    const int r = dm_.dof(fr, nr), c = dm_.dof(fc, nc);
    if (r >= 0 && c >= 0) T_.emplace_back(r, c, v);
  }
  bool with_jacobian() const { return with_jac_; }
  const DofMap& dofmap() const { return dm_; }
  Vector& residual() { return R_; }
  SparseMatrix jacobian() const;

 private:
  const DofMap& dm_;
  bool with_jac_;
  Vector R_;
  std::vector<Eigen::Triplet<double>> T_;
};

/// Newton system J * delta = rhs (rhs = -residual).
struct LinearSystem {
  SparseMatrix A;
  Vector rhs;
};

/// Element matrix of the Laplacian with unit coefficient: |K| grad(l_i).grad(l_j).
std::array<std::array<double, 3>, 3> element_stiffness(const ElementGeometry& g);

SparseMatrix assemble_stiffness(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& coeff);
/// Diagonal of the vertex-lumped mass matrix, in dof numbering.
Vector lumped_mass(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& coeff);
SparseMatrix assemble_lumped_mass(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& coeff);

/// Discretization of -div(D grad u - s mu u grad phi) with s = +1 for electrons
/// and s = -1 for holes; Einstein relation D = Vt mu assumed. Elements with
/// D = 0 are skipped.
SparseMatrix assemble_drift_diffusion(const Mesh& mesh, const DofMap& dm, Field f, const std::vector<double>& D,
                                      const std::vector<double>& phi, double Vt, int sign);

/// Adds the edge-averaged transport residual (and Jacobian w.r.t. u and phi)
/// for the field `f` on elements with D > 0.
void add_drift_diffusion(Accumulator& acc, const Mesh& mesh, Field f, const std::vector<double>& D,
                         const std::vector<double>& u, const std::vector<double>& phi, double Vt, int sign);

/// Counts elements with a negative edge conductance (non-Delaunay edges).
int count_negative_edge_weights(const Mesh& mesh);

/// Trapezoidal lumping of interface integrals: weight(i) = sum over facets of
/// |facet| / 2 at each endpoint (1 for the 1D point interface).
struct InterfaceLumping {
  std::vector<int> nodes;
  std::vector<double> weight;
  std::vector<std::vector<std::pair<int, double>>> facets;  // per node: (facet, weight share)
  /// Nodal lumping of a per-facet coefficient: sum of share * c_f.
  std::vector<double> lump(const std::vector<double>& per_facet) const;
};
InterfaceLumping lump_interface(const Mesh& mesh, const InterfaceSet& iface);

/// Per-node coefficients of the interface coupling, already lumped.
struct InterfaceCoefficients {
  std::vector<double> W;       // lumped measure
  std::vector<double> Wkdiss;  // lumped k_diss
  std::vector<double> Wgamma;  // lumped bimolecular rate
  double two_H = 0, tau_diss = 1, eta_krec = 0, k_rec = 0;
};

/// Interface couplings: e <-> P exchange, the P row (without time terms) and
/// the carrier source -k_diss P + 2H gamma n p in both the n and p rows.
/// Indexing of coefficient vectors follows `lump.nodes`.
void add_interface_terms(Accumulator& acc, const InterfaceLumping& lump, const InterfaceCoefficients& c,
                         const std::vector<double>& e, const std::vector<double>& P, const std::vector<double>& n,
                         const std::vector<double>& p);

/// Weak Robin term (alpha u - beta)/kappa on the tagged contact (kappa > 0).
void add_robin(Accumulator& acc, const Mesh& mesh, Field f, BoundaryTag tag, double kappa, double alpha, double beta,
               const std::vector<double>& u);

/// Replaces rows of the given dofs by identity; rhs = value - current.
void apply_dirichlet(LinearSystem& sys, const std::vector<int>& dofs, const std::vector<double>& values,
                     const Vector& current);

/// Folds a node-space system onto master nodes: slave rows are added to the
/// master rows, slave columns to the master columns; slaves are removed.
/// `kept` receives the node index of each row of the folded system.
LinearSystem apply_periodic(const LinearSystem& sys, const PeriodicPairing& pairing, std::vector<int>* kept = nullptr);

}  // namespace osc
