#include "doctest.h"
#include "oscsim/linear_solver.hpp"

#include <Eigen/Dense>
#include <cstring>
#include <random>
#include <vector>

using namespace osc;

namespace {

std::vector<double> thomas(std::vector<double> a, std::vector<double> b, std::vector<double> c, std::vector<double> d) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    d[i] -= m * d[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = d[n - 1] / b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

}  // namespace

TEST_CASE("identity") {
  SparseMatrix I(5, 5);
  I.setIdentity();
  SparseLU lu(I);
  CHECK(!lu.singular());
  Vector b(5);
  b << 1, 2, 3, 4, 5;
  CHECK(lu.solve(b) == b);
  CHECK(lu.solve(Vector::Zero(5)) == Vector::Zero(5));
}

TEST_CASE("1D Poisson with Dirichlet rows matches the Thomas algorithm") {
  const int n = 50;
  const double h = 1.0 / (n - 1);
  std::vector<Eigen::Triplet<double>> t;
  std::vector<double> a(n, 0), b(n, 0), c(n, 0), d(n, 0);
  for (int i = 0; i < n; ++i) {
    if (i == 0 || i == n - 1) {
      t.emplace_back(i, i, 1.0);
      b[i] = 1;
      d[i] = i == 0 ? 0.3 : -1.2;
      continue;
    }
    t.emplace_back(i, i - 1, -1 / h);
    t.emplace_back(i, i, 2 / h);
    t.emplace_back(i, i + 1, -1 / h);
    a[i] = c[i] = -1 / h;
    b[i] = 2 / h;
    d[i] = h * std::sin(3.0 * i * h);
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  SparseLU lu(A);
  const Vector x = lu.solve(Eigen::Map<Vector>(d.data(), n));
  const auto oracle = thomas(a, b, c, d);
  for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - oracle[i]) < 1e-12 * (1 + std::abs(oracle[i])));
}

TEST_CASE("pure Neumann Laplacian is flagged singular") {
  const int n = 20;
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i + 1 < n; ++i) {
    t.emplace_back(i, i, 1.0);
    t.emplace_back(i + 1, i + 1, 1.0);
    t.emplace_back(i, i + 1, -1.0);
    t.emplace_back(i + 1, i, -1.0);
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  SparseLU lu(A);
  CHECK(lu.singular());
  CHECK_THROWS_AS(solve_equilibrated(A, Vector::Ones(n)), LinearSolverError);
}

TEST_CASE("random sparse system vs dense LU, determinism, badly scaled rows") {
  const int n = 100;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> col(0, n - 1);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 8.0 + u(rng));
    for (int k = 0; k < 4; ++k) t.emplace_back(i, col(rng), u(rng));
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = u(rng);
  const Eigen::MatrixXd dense(A);
  const Vector oracle = dense.partialPivLu().solve(b);
  SparseLU lu(A);
  const Vector x = lu.solve(b);
  CHECK((x - oracle).cwiseAbs().maxCoeff() < 1e-9 * oracle.cwiseAbs().maxCoeff());
  CHECK((A * x - b).norm() / b.norm() < 1e-10);
  const Vector x2 = lu.solve(b);
  CHECK(std::memcmp(x.data(), x2.data(), sizeof(double) * n) == 0);

  // 20 orders of magnitude between row blocks
  Vector s(n);
  for (int i = 0; i < n; ++i) s[i] = i < n / 2 ? 1e-20 : 1e3;
  SparseMatrix As = s.asDiagonal() * A;
  const Vector xs = solve_equilibrated(As, s.cwiseProduct(b));
  CHECK((xs - oracle).cwiseAbs().maxCoeff() < 1e-9 * oracle.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(lu.solve(Vector::Ones(3)), LinearSolverError);
}
