#pragma once

// Experiment suites: typed drivers and the JSON-configured runner used by the CLI.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "oscsim/micro_model.hpp"
#include "oscsim/postprocess.hpp"

namespace osc {

std::string code_version();

DeviceParams with_model(DeviceParams p, KdissModel m);

// ---- 1D micro vs macro ----

struct LineDevice {
  double length = 100e-9;
  double interface_position = 50e-9;
  int n_elements = 400;
  int min_elements_per_subslab = 4;
};
Mesh build_line_device(const LineDevice& d, double H);

struct MicroMacroRow {
  double H = 0.0;
  double j_micro = 0.0;
  double j_macro = 0.0;
  double rel = 0.0;
  double balance_micro = 0.0;
  double balance_macro = 0.0;
};
std::vector<MicroMacroRow> micro_macro_1d(const DeviceParams& params, const LineDevice& device,
                                          const std::vector<double>& H_values);

struct TransientComparison {
  double V = 0.0;
  Transient micro, macro;
  double deviation = 0.0;
};
TransientComparison transient_1d(const DeviceParams& params, const LineDevice& device, const MarchOptions& opt,
                                 double threshold = 0.01);

// ---- 2D rod devices ----

/// Fresh device, sweep from the charge-free initial state.
JVCurve rod_jv(const DeviceParams& params, const Mesh& mesh, const std::vector<double>& biases,
               const SweepOptions& opt = {});

/// Signed short-circuit current density of a fresh device.
double short_circuit_current(const DeviceParams& params, const Mesh& mesh, const SteadyOptions& opt = {});

struct VocJscRow {
  KdissModel model = KdissModel::B;
  double Q = 0.0;
  double voc = 0.0;
  double jsc = 0.0;
};
/// Q continuation per model on one mesh (Q values ascending).
std::vector<VocJscRow> voc_jsc_vs_q(const DeviceParams& params, const Mesh& mesh, const std::vector<KdissModel>& models,
                                    const std::vector<double>& Q_values);

struct LengthRow {
  int n_rods = 0;
  double rod_width = 0.0;
  double interface_length = 0.0;
  KdissModel model = KdissModel::B;
  double jsc = 0.0;
};
/// Rod width L_elec / (2 n) for each rod count (0 = biplanar); target_h is
/// min(h_max, W_R / 4).
std::vector<LengthRow> interface_length_sweep(const DeviceParams& params, const RodGeometry& base,
                                              const std::vector<int>& n_rods, const std::vector<KdissModel>& models,
                                              double h_max);

struct AngleRow {
  double alpha_deg = 90.0;
  double interface_length = 0.0;
  KdissModel model = KdissModel::B;
  double jsc = 0.0;
};
std::vector<AngleRow> angle_sweep(const DeviceParams& params, const RodGeometry& base, const std::vector<double>& angles,
                                  const std::vector<KdissModel>& models);

// ---- k_diss tables ----

struct KdissRow {
  double E = 0.0;    // field magnitude
  double chi = 0.0;  // angle between E and the interface normal
  double A = 0.0, B = 0.0, C = 0.0;  // normalized to k_diss0
};
std::vector<KdissRow> kdiss_table(const DeviceParams& params, const std::vector<double>& E_values,
                                  const std::vector<double>& chi_values);

/// max/min of k_diss / k_diss0 over the inclinations, for model B or C.
double inclination_spread(const std::vector<KdissRow>& rows, double E, KdissModel model);

// ---- JSON runner ----

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the experiment described by cfg["kind"] and writes CSV tables and
/// manifest.json into outdir. Returns the manifest.
nlohmann::json run_experiment(const nlohmann::json& cfg, const std::filesystem::path& outdir);

/// Parameter set from {"table": "table1"|"table2", "V_appl": .., "params": {..}}.
DeviceParams params_from_config(const nlohmann::json& cfg);
RodGeometry rod_geometry_from_json(const nlohmann::json& j, RodGeometry base = {});
MorphologyGeometry morphology_from_json(const nlohmann::json& j, MorphologyGeometry base = {});
nlohmann::json to_json(const RodGeometry& g);
nlohmann::json to_json(const MorphologyGeometry& g);

}  // namespace osc
