#pragma once

// Interface-lumped macroscale model: excitons e, interfacial polaron-pair
// density P (per area), electrons n (acceptor), holes p (donor), potential phi.

#include <vector>

#include "oscsim/assembly.hpp"
#include "oscsim/nonlinear.hpp"
#include "oscsim/params.hpp"

namespace osc {

struct InterfaceFields {
  std::vector<FieldSample> facet;  // per interface facet
  std::vector<double> eps;         // facet permittivity (mean of the two sides)
  double mean_Ey = 0.0;            // length-weighted mean field along the contact axis
};

/// Contact quantities extracted from the raw residual at Dirichlet rows.
struct ContactFluxes {
  double I_cathode = 0.0;         // q * sum of electron-row residuals on the cathode [A per unit depth]
  double I_anode = 0.0;           // -q * sum of hole-row residuals on the anode
  double D_cathode = 0.0;         // -sum of potential-row residuals on the cathode [C per unit depth]
  double cathode_measure = 1.0;
  double anode_measure = 1.0;
};

/// Shared machinery of the device problems: Dirichlet data, scales and the
/// transient-current bookkeeping.
class DeviceProblem : public NonlinearProblem {
 public:
  const Mesh& mesh() const { return mesh_; }
  const DofMap& dofmap() const { return dm_; }
  const DeviceParams& params() const { return params_; }
  virtual void set_params(const DeviceParams& p);
  int size() const override { return dm_.size(); }

  /// Zero densities, Dirichlet values, potential from the charge-free Poisson problem.
  Vector initial_state() const;
  /// Writes the Dirichlet targets into y.
  void apply_dirichlet_values(Vector& y) const;
  Vector variable_scales(const Vector& y) const override;
  void evaluate(const Vector& y, const TimeDiscretization& td, Vector& R, SparseMatrix* J) override;
  /// Residual before Dirichlet replacement and without the Robin contact
  /// terms, so that contact rows hold the outward boundary flux.
  Vector raw_residual(const Vector& y, const TimeDiscretization& td);
  ContactFluxes contact_fluxes(const Vector& y, const TimeDiscretization& td);
  /// Total (conduction + displacement) current into the cathode per unit
  /// depth at fixed bias: q sum_i psi_i (R_n - R_p)_i of the stationary raw
  /// residual, psi being the discrete eps-harmonic function equal to 1 on the
  /// cathode and 0 on the anode. Equals I_cathode + dD_cathode/dt.
  double terminal_current(const Vector& y);
  /// Newton system (J, -R) in increment form.
  LinearSystem quasi_newton_system(const Vector& y, const TimeDiscretization& td);
  /// Lumped integral of e, n or p over its support (per unit depth in 2D).
  double field_integral(Field f, const Vector& y) const;
  /// Nodal values of a field.
  std::vector<double> nodal(Field f, const Vector& y) const { return dm_.expand(f, y); }

 protected:
  DeviceProblem(Mesh mesh, const DeviceParams& params, bool periodic);
  void init(const DofMap::Support& support);
  virtual void assemble(const Vector& y, const TimeDiscretization& td, Accumulator& acc) = 0;
  /// Per-element |E| from nodal phi.
  std::vector<Point> element_fields(const std::vector<double>& phi) const;
  /// Exciton, carrier transport and Poisson terms on the element sets
  /// n_elems_ / p_elems_, with lumped time derivatives and space charge.
  void add_bulk_terms(Accumulator& acc, const Vector& y, const TimeDiscretization& td);
  void dirichlet(std::vector<int>& dofs, std::vector<double>& values) const;
  void update_weight_potential();

  Mesh mesh_;
  DeviceParams params_;
  PeriodicPairing pairing_;
  DofMap dm_;
  std::vector<double> eps_elem_;
  std::vector<char> n_elems_, p_elems_;
  std::vector<double> mass_all_, mass_n_, mass_p_;  // nodal lumped masses
  std::vector<double> psi_;                           // nodal weight potential
  bool with_robin_ = true;
};

class MacroModel : public DeviceProblem {
 public:
  MacroModel(Mesh mesh, const DeviceParams& params, bool periodic = true);

  const InterfaceSet& interface() const { return iface_; }
  const InterfaceLumping& lumping() const { return lump_; }
  double interface_measure() const { return interface_length(iface_); }

  /// Replace P by its stationary value after every update of a steady solve.
  bool eliminate_polaron = true;

  InterfaceFields compute_interface_fields(const Vector& y) const;
  /// Lumped interface coefficients at the current iterate (frozen k_diss, gamma).
  InterfaceCoefficients interface_coefficients(const Vector& y);
  /// Stationary polaron density at the interface nodes from e, n, p of y.
  void eliminate_polaron_steady(Vector& y);
  void post_update(Vector& y, const TimeDiscretization& td) override;
  void set_params(const DeviceParams& p) override;
  /// Per-facet k_diss at the iterate.
  std::vector<double> facet_kdiss(const Vector& y);
  /// Mean interface field of the last coefficient refresh.
  double last_mean_field() const { return cache_mean_Ey_; }

 protected:
  void assemble(const Vector& y, const TimeDiscretization& td, Accumulator& acc) override;

 private:
  void refresh_coefficients(const Vector& y);
  InterfaceSet iface_;
  InterfaceLumping lump_;
  // coefficient cache keyed on the potential block
  Vector cache_phi_;
  std::vector<double> cache_kdiss_, cache_gamma_;
  double cache_mean_Ey_ = 0.0;
  bool cache_valid_ = false;
};

/// Stationary polaron balance for scalar data.
double eliminate_polaron_steady(double e, double n, double p, const DeviceParams& params, double kdiss, double gamma);

}  // namespace osc
