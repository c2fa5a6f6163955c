#pragma once

// Device coefficients and constitutive laws: Poole-Frenkel mobility, Einstein
// diffusivity, Langevin recombination and the polaron-pair dissociation rates.

#include <numbers>
#include <string>
#include <string_view>

#include "json.hpp"
#include "oscsim/mesh.hpp"

namespace osc {

namespace constants {
inline constexpr double q = 1.602176634e-19;      // C
inline constexpr double k_B = 1.380649e-23;       // J/K
inline constexpr double eps0 = 8.8541878128e-12;  // F/m
}  // namespace constants

enum class Carrier { n, p };
enum class MobilityMode { constant, poole_frenkel };
enum class GammaMode { constant, langevin };
/// A: hemisphere average driven by the interface-mean vertical field,
/// B: hemisphere average of the local field, C: normal-direction only,
/// constant: k_diss0 everywhere.
enum class KdissModel { A, B, C, constant };

struct DeviceParams {
  double eps_r_a = 4.0;
  double eps_r_d = 4.0;
  double V_bi = -0.6;      // V
  double V_appl = 0.0;     // V
  double T = 298.0;        // K
  double mu_n0 = 3e-10;    // m^2/(V s)
  double mu_p0 = 1e-10;
  double gamma_a = 1.55e-3;  // (m/V)^(1/2), electrons
  double gamma_d = 3e-4;     // holes
  double D_e = 1e-7;       // m^2/s
  double tau_e = 1e-9;     // s
  double tau_diss = 1e-12; // s
  double k_rec = 1e6;      // 1/s
  double eta = 0.25;
  double k_diss0 = 1e5;    // 1/s
  double H = 1e-9;         // m
  double gamma_bi = 1e-19; // m^3/s
  double Q = 1.53e23;      // 1/(m^3 s)
  double kappa_n = 0.0, alpha_n = 1.0, beta_n = 3.4995e18;
  double kappa_p = 0.0, alpha_p = 1.0, beta_p = 3.4995e18;
  double theta_max = std::numbers::pi / 2;
  MobilityMode mobility_mode = MobilityMode::poole_frenkel;
  GammaMode gamma_mode = GammaMode::langevin;
  KdissModel kdiss_model = KdissModel::B;

  double thermal_voltage() const { return constants::k_B * T / constants::q; }
  double permittivity(Region r) const {
    return constants::eps0 * (is_donor_side(r) ? eps_r_d : eps_r_a);
  }
  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

/// 1D validation set; k_diss is the per-bias constant (1e7 at 0 V, 2e5 at 0.6 V).
DeviceParams table1_params(double V_appl = 0.0);
/// Rod-device set with Poole-Frenkel mobilities and Langevin recombination.
DeviceParams table2_params(double V_appl = 0.0);

std::string_view to_string(KdissModel m);
KdissModel parse_kdiss_model(std::string_view s);

/// Applies the keys present in `j` on top of `base`; unknown keys are rejected.
DeviceParams params_from_json(const nlohmann::json& j, DeviceParams base = {});
nlohmann::json params_to_json(const DeviceParams& p);

double mobility(const DeviceParams& p, Carrier c, double field_magnitude);
double diffusivity(const DeviceParams& p, Carrier c, double field_magnitude);
double bimolecular_gamma(const DeviceParams& p, double mu_n, double mu_p, double eps);

struct FieldSample {
  double E_n = 0.0;
  double E_t = 0.0;
};

/// A = q^3 / (4 pi eps (k_B T)^2), units m/V.
double dissociation_A(double eps, double T);
double beta_factor(double z, double A);

/// Integral of the cone weight over its support with the k_diss quadrature.
double cone_normalization(double theta_max);

double kdiss_normal(const DeviceParams& p, const FieldSample& fs, double eps);
double kdiss_cone(const DeviceParams& p, const FieldSample& fs, double theta_max, double eps);
double kdiss_hemisphere(const DeviceParams& p, const FieldSample& fs, double eps);
double kdiss_averaged_A(const DeviceParams& p, double mean_Ey, double eps);

/// Dispatch on p.kdiss_model; model A ignores `fs` and uses `mean_Ey`.
double kdiss(const DeviceParams& p, const FieldSample& fs, double mean_Ey, double eps);

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace osc
