#include "approx.hpp"
#include "doctest.h"
#include "oscsim/params.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace osc;

namespace {

constexpr double kPi = std::numbers::pi;

// Trapezoid oracle for the theta_max = pi/2, E_t = 0 hemisphere average.
double hemisphere_trapezoid(double En, double A, int n) {
  const double h = 0.5 * kPi / n;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double th = i * h;
    const double z = En * std::cos(th);
    const double beta = z >= 0 ? std::exp(-A * z) : std::exp(2 * std::sqrt(-A * z));
    s += (i == 0 || i == n ? 0.5 : 1.0) * std::sin(th) * beta;
  }
  return s * h;
}

}  // namespace

TEST_CASE("mobility and diffusivity") {
  auto p = table2_params();
  CHECK(mobility(p, Carrier::n, 0) == 3e-10);
  CHECK(std::abs(mobility(p, Carrier::n, 1e6) / (3e-10 * std::exp(1.55e-3 * 1e3)) - 1) < 1e-12);
  CHECK(mobility(p, Carrier::n, 1e14) == 3e-10 * std::exp(1.55e-3 * 1e7));
  CHECK(std::abs(mobility(p, Carrier::p, 4e6) / (1e-10 * std::exp(3e-4 * 2e3)) - 1) < 1e-12);
  const auto t1 = table1_params();
  CHECK(mobility(t1, Carrier::p, 1e9) == 2e-8);
  // thermal voltage at 298 K
  CHECK(t1.thermal_voltage() == rel(0.02567965312119263).epsilon(1e-14));
  CHECK(diffusivity(t1, Carrier::n, 0) / mobility(t1, Carrier::n, 0) ==
        rel(diffusivity(t1, Carrier::p, 0) / mobility(t1, Carrier::p, 0)).epsilon(1e-15));
  auto hot = t1;
  hot.T *= 2;
  CHECK(diffusivity(hot, Carrier::n, 0) == rel(2 * diffusivity(t1, Carrier::n, 0)).epsilon(1e-15));
}

TEST_CASE("bimolecular recombination") {
  const auto t1 = table1_params();
  CHECK(bimolecular_gamma(t1, 1, 1, 1) == 1e-19);
  const auto t2 = table2_params();
  const double eps = t2.permittivity(Region::donor);
  CHECK(bimolecular_gamma(t2, 0, 0, eps) == 0);
  CHECK(bimolecular_gamma(t2, 3e-10, 1e-10, eps) == rel(1.809512817972783e-18).epsilon(1e-13));
}

TEST_CASE("beta factor") {
  const double A = dissociation_A(4 * constants::eps0, 300);
  CHECK(A == rel(5.386461017803762e-07).epsilon(1e-13));
  CHECK(beta_factor(0, A) == 1);
  CHECK(beta_factor(1e6, A) < 1);
  CHECK(beta_factor(-1e6, A) > 1);
  const double e = 1e-6 * 1e7;
  CHECK(std::abs(beta_factor(e, A) - beta_factor(-e, A)) < 1e-2);
  CHECK(std::abs(beta_factor(1e-3 * e, A) - beta_factor(-1e-3 * e, A)) < 1e-3);
}

TEST_CASE("k_diss models at zero field return k_diss0 exactly") {
  auto p = table2_params();
  const double eps = p.permittivity(Region::donor);
  CHECK(kdiss_normal(p, {0, 0}, eps) == p.k_diss0);
  CHECK(kdiss_hemisphere(p, {0, 0}, eps) == p.k_diss0);
  CHECK(kdiss_averaged_A(p, 0, eps) == p.k_diss0);
  CHECK(kdiss_cone(p, {0, 0}, 0.3, eps) == p.k_diss0);
}

TEST_CASE("cone weight normalization") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> th(1e-3, kPi / 2);
  for (int i = 0; i < 20; ++i) CHECK(std::abs(cone_normalization(th(rng)) - 1) < 1e-8);
  CHECK(std::abs(cone_normalization(kPi / 2) - 1) < 1e-8);
}

TEST_CASE("cone: small aperture reduces to the normal model") {
  auto p = table2_params();
  const double eps = 4 * constants::eps0;
  p.T = 300;
  for (double En : {-1e8, -1e7, -1e5, 1e5, 1e7, 3e7})
    for (double Et : {0.0, 0.1 * std::abs(En), std::abs(En)}) {
      const double cone = kdiss_cone(p, {En, Et}, 1e-3, eps);
      const double normal = kdiss_normal(p, {En, Et}, eps);
      CHECK(std::abs(cone / normal - 1) < 1e-3);
    }
  // E_t independence of the normal model
  CHECK(kdiss_normal(p, {-1e7, 0}, eps) == kdiss_normal(p, {-1e7, 3e7}, eps));
  CHECK(kdiss_normal(p, {-1e7, 0}, eps) ==
        rel(p.k_diss0 * std::exp(2 * std::sqrt(dissociation_A(eps, 300) * 1e7))).epsilon(1e-14));
}

TEST_CASE("hemisphere at E_t = 0 matches an independent 1D oracle") {
  auto p = table2_params();
  p.T = 300;
  const double eps = 4 * constants::eps0;
  const double A = dissociation_A(eps, 300);
  for (double En : {-5e7, -1e6, 2e5, 1e7, 1e8}) {
    const double oracle = p.k_diss0 * hemisphere_trapezoid(En, A, 2'000'000);
    CHECK(std::abs(kdiss_hemisphere(p, {En, 0}, eps) / oracle - 1) < 1e-6);
  }
}

TEST_CASE("monotonicity and symmetry") {
  auto p = table2_params();
  const double eps = p.permittivity(Region::acceptor);
  double prev_c = 1e300, prev_b = 1e300;
  for (double En = -1e8; En <= 1e8; En += 5e6) {
    const double c = kdiss_normal(p, {En, 0}, eps);
    const double b = kdiss_hemisphere(p, {En, 0}, eps);
    CHECK(c < prev_c);
    CHECK(b < prev_b);
    prev_c = c;
    prev_b = b;
  }
  CHECK(kdiss_hemisphere(p, {3e7, 2e7}, eps) == kdiss_hemisphere(p, {3e7, -2e7}, eps));
}

TEST_CASE("config round trip and validation") {
  const auto p = table1_params(0.6);
  CHECK(p.k_diss0 == 2e5);
  const auto r = params_from_json(params_to_json(p));
  CHECK(r.k_diss0 == p.k_diss0);
  CHECK(r.kdiss_model == KdissModel::constant);
  CHECK(r.eps_r_a == 2.5);
  CHECK_THROWS_AS(params_from_json({{"bogus", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(params_from_json({{"eta", 1.5}}), std::invalid_argument);
  CHECK_THROWS_AS(params_from_json({{"kappa_n", 0}, {"alpha_n", 0}}), std::invalid_argument);
  CHECK_THROWS_AS(params_from_json({{"kdiss_model", "D"}}), std::invalid_argument);
  CHECK_THROWS_AS(params_from_json({{"q", 1.6e-19}}), std::invalid_argument);
}
