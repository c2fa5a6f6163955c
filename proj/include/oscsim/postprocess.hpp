#pragma once

// Device observables: terminal current, J-V sweeps, Voc/Jsc, transients and
// field export.

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "oscsim/macro_model.hpp"
#include "oscsim/time_integrator.hpp"

namespace osc {

/// |total cathode current| / |Gamma_C| in A/m^2 (A/m in 1D per unit area).
double total_current(DeviceProblem& problem, const Vector& y);
/// Extracted photocurrent minus injected current, positive at short circuit.
double signed_current(DeviceProblem& problem, const Vector& y);
/// (I_cathode + I_anode) / max(|I_cathode|, |I_anode|) of the stationary raw residual.
double contact_balance(DeviceProblem& problem, const Vector& y);

struct JVPoint {
  double V = 0.0;
  double j = 0.0;      // signed current density
  double j_tot = 0.0;  // |j|
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  std::string message;
};

struct JVCurve {
  std::string kdiss_model;
  std::vector<JVPoint> points;
};

/// Bias list from v_begin to v_end with step dv, refined to fine_dv within
/// fine_halfwidth of v_flat. Always contains both end points.
std::vector<double> bias_grid(double v_begin, double v_end, double dv, double v_flat = 0.6, double fine_dv = 0.005,
                              double fine_halfwidth = 0.05);

struct SweepOptions {
  SteadyOptions steady;
  /// Called after every bias point with the state it produced.
  std::function<void(const JVPoint&, const Vector&)> on_point;
};

/// Steady solves along increasing biases with warm starts. A failed point is
/// recorded and the sweep continues from the last converged state. The
/// problem's params are left at the last bias.
JVCurve jv_sweep(DeviceProblem& problem, const std::vector<double>& biases, Vector& y, const SweepOptions& opt = {});

class VocUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VocJsc {
  double voc = 0.0;
  double jsc = 0.0;
};

/// Jsc = |j(V = 0)|, Voc at the first sign change of the signed current by
/// linear interpolation between the bracketing points.
VocJsc extract_voc_jsc(const JVCurve& curve);

/// Short-circuit solve followed by a bracket search in steps of dv and
/// bisection of the sign change down to tol_v. Throws VocUndefined when no
/// sign change occurs up to v_max.
VocJsc find_voc_jsc(DeviceProblem& problem, Vector& y, double dv = 0.05, double v_max = 2.0, double tol_v = 1e-4,
                    const SteadyOptions& opt = {});

struct Transient {
  std::vector<double> t;
  std::vector<double> j_tot;
  MarchResult result;
};

/// Turn-on transient from y0 with j_tot recorded at every accepted point.
Transient run_transient(DeviceProblem& problem, const Vector& y0, const MarchOptions& opt);

/// Largest relative deviation of b from a at the times of a where
/// a.j_tot >= threshold * final a.j_tot, b interpolated linearly in t.
double max_pointwise_deviation(const Transient& a, const Transient& b, double threshold = 0.01);

/// Node table: index, x, y, e, P, n, p, phi (P only on interface or slab nodes).
void export_fields(const DeviceProblem& problem, const Vector& y, const std::filesystem::path& path);

struct FieldTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
FieldTable read_fields(const std::filesystem::path& path);

/// Integrals of n and p over their supports (per unit depth).
struct CarrierTotals {
  double electrons = 0.0;
  double holes = 0.0;
};
CarrierTotals carrier_totals(const DeviceProblem& problem, const Vector& y);

}  // namespace osc
