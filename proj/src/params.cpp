#include "oscsim/params.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace osc {

void DeviceParams::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument(std::string(key) + " must be positive and finite");
  };
  positive(eps_r_a, "eps_r_a");
  positive(eps_r_d, "eps_r_d");
  positive(T, "T");
  positive(mu_n0, "mu_n0");
  positive(mu_p0, "mu_p0");
  positive(D_e, "D_e");
  positive(tau_e, "tau_e");
  positive(tau_diss, "tau_diss");
  positive(k_rec, "k_rec");
  positive(k_diss0, "k_diss0");
  positive(H, "H");
  positive(gamma_bi, "gamma_bi");
  if (!(gamma_a >= 0) || !(gamma_d >= 0)) throw std::invalid_argument("gamma_a/gamma_d must be nonnegative");
  if (!(Q >= 0) || !std::isfinite(Q)) throw std::invalid_argument("Q must be nonnegative");
  if (!(eta >= 0 && eta <= 1)) throw std::invalid_argument("eta must lie in [0, 1]");
  if (!(theta_max > 0 && theta_max <= std::numbers::pi / 2 + 1e-15))
    throw std::invalid_argument("theta_max must lie in (0, pi/2]");
  if (!std::isfinite(V_bi) || !std::isfinite(V_appl)) throw std::invalid_argument("V_bi/V_appl must be finite");
  for (auto [kappa, alpha, beta, name] : {std::tuple{kappa_n, alpha_n, beta_n, "n"}, {kappa_p, alpha_p, beta_p, "p"}}) {
    if (kappa < 0 || alpha < 0 || beta < 0)
      throw std::invalid_argument(std::string("Robin coefficients for ") + name + " must be nonnegative");
    if (kappa == 0 && !(alpha > 0))
      throw std::invalid_argument(std::string("alpha_") + name + " must be positive when kappa_" + name + " = 0");
  }
}

DeviceParams table1_params(double V_appl) {
  DeviceParams p;
  p.eps_r_a = p.eps_r_d = 2.5;
  p.V_bi = -0.6;
  p.V_appl = V_appl;
  p.T = 298;
  p.mu_n0 = 4e-8;
  p.mu_p0 = 2e-8;
  p.gamma_a = p.gamma_d = 0;
  p.D_e = 1e-7;
  p.tau_e = 1e-9;
  p.tau_diss = 1e-12;
  p.k_rec = 1e6;
  p.eta = 0.25;
  p.k_diss0 = std::abs(V_appl - 0.6) < 1e-12 ? 2e5 : 1e7;
  p.H = 0.25e-9;
  p.gamma_bi = 1e-19;
  p.Q = 1e25;
  p.kappa_n = p.kappa_p = 0;
  p.alpha_n = p.alpha_p = 1;
  p.beta_n = p.beta_p = 0;
  p.mobility_mode = MobilityMode::constant;
  p.gamma_mode = GammaMode::constant;
  p.kdiss_model = KdissModel::constant;
  return p;
}

DeviceParams table2_params(double V_appl) {
  DeviceParams p;
  p.V_appl = V_appl;
  return p;
}

std::string_view to_string(KdissModel m) {
  switch (m) {
    case KdissModel::A: return "A";
    case KdissModel::B: return "B";
    case KdissModel::C: return "C";
    case KdissModel::constant: return "constant";
  }
  return "?";
}

KdissModel parse_kdiss_model(std::string_view s) {
  if (s == "A") return KdissModel::A;
  if (s == "B") return KdissModel::B;
  if (s == "C") return KdissModel::C;
  if (s == "constant") return KdissModel::constant;
  throw std::invalid_argument("kdiss_model must be one of A, B, C, constant (got '" + std::string(s) + "')");
}

namespace {

struct Field {
  const char* key;
  double DeviceParams::*member;
};

constexpr Field kFields[] = {
    {"eps_r_a", &DeviceParams::eps_r_a},   {"eps_r_d", &DeviceParams::eps_r_d},
    {"V_bi", &DeviceParams::V_bi},         {"V_appl", &DeviceParams::V_appl},
    {"T", &DeviceParams::T},               {"mu_n0", &DeviceParams::mu_n0},
    {"mu_p0", &DeviceParams::mu_p0},       {"gamma_a", &DeviceParams::gamma_a},
    {"gamma_d", &DeviceParams::gamma_d},   {"D_e", &DeviceParams::D_e},
    {"tau_e", &DeviceParams::tau_e},       {"tau_diss", &DeviceParams::tau_diss},
    {"k_rec", &DeviceParams::k_rec},       {"eta", &DeviceParams::eta},
    {"k_diss0", &DeviceParams::k_diss0},   {"H", &DeviceParams::H},
    {"gamma_bi", &DeviceParams::gamma_bi}, {"Q", &DeviceParams::Q},
    {"kappa_n", &DeviceParams::kappa_n},   {"alpha_n", &DeviceParams::alpha_n},
    {"beta_n", &DeviceParams::beta_n},     {"kappa_p", &DeviceParams::kappa_p},
    {"alpha_p", &DeviceParams::alpha_p},   {"beta_p", &DeviceParams::beta_p},
    {"theta_max", &DeviceParams::theta_max},
};

}  // namespace

DeviceParams params_from_json(const nlohmann::json& j, DeviceParams p) {
  if (!j.is_object()) throw std::invalid_argument("params: expected an object");
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (const auto& f : kFields) {
      if (key != f.key) continue;
      if (!value.is_number()) throw std::invalid_argument("params." + key + ": expected a number");
      p.*f.member = value.get<double>();
      found = true;
    }
    if (found) continue;
    if (key == "mobility_mode") {
      const auto s = value.get<std::string>();
      if (s == "constant") p.mobility_mode = MobilityMode::constant;
      else if (s == "poole_frenkel") p.mobility_mode = MobilityMode::poole_frenkel;
      else throw std::invalid_argument("params.mobility_mode: expected constant|poole_frenkel");
    } else if (key == "gamma_mode") {
      const auto s = value.get<std::string>();
      if (s == "constant") p.gamma_mode = GammaMode::constant;
      else if (s == "langevin") p.gamma_mode = GammaMode::langevin;
      else throw std::invalid_argument("params.gamma_mode: expected constant|langevin");
    } else if (key == "q" || key == "k_B" || key == "eps0") {
      // manifests echo the constants; they are fixed, not configurable
      const double fixed = key == "q" ? constants::q : key == "k_B" ? constants::k_B : constants::eps0;
      if (!value.is_number() || value.get<double>() != fixed)
        throw std::invalid_argument("params." + key + ": physical constants cannot be overridden");
    } else if (key == "kdiss_model") {
      p.kdiss_model = parse_kdiss_model(value.get<std::string>());
    } else {
      throw std::invalid_argument("params." + key + ": unknown key");
    }
  }
  p.validate();
  return p;
}

nlohmann::json params_to_json(const DeviceParams& p) {
  nlohmann::json j;
  for (const auto& f : kFields) j[f.key] = p.*f.member;
  j["mobility_mode"] = p.mobility_mode == MobilityMode::constant ? "constant" : "poole_frenkel";
  j["gamma_mode"] = p.gamma_mode == GammaMode::constant ? "constant" : "langevin";
  j["kdiss_model"] = std::string(to_string(p.kdiss_model));
  j["q"] = constants::q;
  j["k_B"] = constants::k_B;
  j["eps0"] = constants::eps0;
  return j;
}

double mobility(const DeviceParams& p, Carrier c, double field_magnitude) {
  const double mu0 = c == Carrier::n ? p.mu_n0 : p.mu_p0;
  if (p.mobility_mode == MobilityMode::constant) return mu0;
  const double g = c == Carrier::n ? p.gamma_a : p.gamma_d;
  return mu0 * std::exp(g * std::sqrt(std::abs(field_magnitude)));
}

double diffusivity(const DeviceParams& p, Carrier c, double field_magnitude) {
  return p.thermal_voltage() * mobility(p, c, field_magnitude);
}

double bimolecular_gamma(const DeviceParams& p, double mu_n, double mu_p, double eps) {
  if (p.gamma_mode == GammaMode::constant) return p.gamma_bi;
  return constants::q * (mu_n + mu_p) / eps;
}

double dissociation_A(double eps, double T) {
  const double kT = constants::k_B * T;
  return constants::q * constants::q * constants::q / (4 * std::numbers::pi * eps * kT * kT);
}

double beta_factor(double z, double A) {
  if (z >= 0) return std::exp(-A * z);
  return std::exp(2 * std::sqrt(-A * z));
}

// ---------------------------------------------------------------------------
// Cone quadrature. Every subinterval is mapped through the smoothstep
// s(u) = 3u^2 - 2u^3, whose vanishing end derivatives absorb the square-root
// behaviour of beta at z = 0 and at the theta endpoints.

namespace {

struct Rule {
  std::vector<double> x, w;  // on [0, 1], smoothstep already applied
};

Rule gauss_legendre_smoothstep(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2 / ((1 - x * x) * dp * dp);
    for (double xi : {-x, x}) {
      const int idx = xi < 0 ? i : n - 1 - i;
      const double u = 0.5 * (xi + 1);
      r.x[idx] = u * u * (3 - 2 * u);
      r.w[idx] = 0.5 * w * 6 * u * (1 - u);
    }
  }
  return r;
}

const Rule& rule(int n) {
  static const std::array<Rule, 5> rules = {gauss_legendre_smoothstep(32), gauss_legendre_smoothstep(64),
                                            gauss_legendre_smoothstep(128), gauss_legendre_smoothstep(256),
                                            gauss_legendre_smoothstep(512)};
  switch (n) {
    case 32: return rules[0];
    case 64: return rules[1];
    case 128: return rules[2];
    case 256: return rules[3];
    default: return rules[4];
  }
}

template <class F>
double integrate(double a, double b, const Rule& r, F&& f) {
  double s = 0;
  for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(a + (b - a) * r.x[i]);
  return s * (b - a);
}

// (1/pi) * integral over psi in [0, pi] of beta(a + b cos psi), b >= 0.
double psi_average(double a, double b, double A, const Rule& r) {
  auto f = [&](double psi) { return beta_factor(a + b * std::cos(psi), A); };
  if (b <= std::abs(a) || b == 0) return integrate(0.0, std::numbers::pi, r, f) / std::numbers::pi;
  const double psi_star = std::acos(std::clamp(-a / b, -1.0, 1.0));
  return (integrate(0.0, psi_star, r, f) + integrate(psi_star, std::numbers::pi, r, f)) / std::numbers::pi;
}

double cone_integral(double En, double Et, double theta_max, double A, int n) {
  const Rule& r = rule(n);
  const double Et_abs = std::abs(Et);
  std::vector<double> breaks{0.0};
  if (Et_abs > 0 && En != 0) {
    const double theta_star = std::atan2(std::abs(En), Et_abs);
    if (theta_star > 0 && theta_star < theta_max) breaks.push_back(theta_star);
  }
  breaks.push_back(theta_max);
  double s = 0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
    s += integrate(breaks[k], breaks[k + 1], r, [&](double th) {
      return std::sin(th) * psi_average(En * std::cos(th), Et_abs * std::sin(th), A, r);
    });
  return s / (1 - std::cos(theta_max));
}

}  // namespace

double cone_normalization(double theta_max) { return cone_integral(0.0, 0.0, theta_max, 0.0, 64); }

double kdiss_normal(const DeviceParams& p, const FieldSample& fs, double eps) {
  return p.k_diss0 * beta_factor(fs.E_n, dissociation_A(eps, p.T));
}

double kdiss_cone(const DeviceParams& p, const FieldSample& fs, double theta_max, double eps) {
  if (fs.E_n == 0 && fs.E_t == 0) return p.k_diss0;
  const double A = dissociation_A(eps, p.T);
  double coarse = cone_integral(fs.E_n, fs.E_t, theta_max, A, 32);
  for (int n = 64; n <= 512; n *= 2) {
    const double fine = cone_integral(fs.E_n, fs.E_t, theta_max, A, n);
    if (std::abs(fine - coarse) <= 1e-6 * std::abs(fine)) return p.k_diss0 * fine;
    coarse = fine;
  }
  throw QuadratureError("k_diss cone quadrature did not converge at E_n = " + std::to_string(fs.E_n) +
                        ", E_t = " + std::to_string(fs.E_t));
}

double kdiss_hemisphere(const DeviceParams& p, const FieldSample& fs, double eps) {
  return kdiss_cone(p, fs, std::numbers::pi / 2, eps);
}

double kdiss_averaged_A(const DeviceParams& p, double mean_Ey, double eps) {
  return kdiss_cone(p, {mean_Ey, 0.0}, std::numbers::pi / 2, eps);
}

double kdiss(const DeviceParams& p, const FieldSample& fs, double mean_Ey, double eps) {
  switch (p.kdiss_model) {
    case KdissModel::A: return kdiss_averaged_A(p, mean_Ey, eps);
    case KdissModel::B: return kdiss_cone(p, fs, p.theta_max, eps);
    case KdissModel::C: return kdiss_normal(p, fs, eps);
    case KdissModel::constant: return p.k_diss0;
  }
  return p.k_diss0;
}

}  // namespace osc
