#pragma once

// Sparse direct LU (UMFPACK) with optional row/column equilibration.

#include <Eigen/Sparse>
#include <memory>
#include <stdexcept>

namespace osc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vector = Eigen::VectorXd;

class LinearSolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable LU factorization. Solves apply one step of iterative refinement.
class SparseLU {
 public:
  /// Throws LinearSolverError for non-square input or allocation failure;
  /// numerical singularity is reported through singular().
  explicit SparseLU(const SparseMatrix& A);
  ~SparseLU();
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;

  bool singular() const { return singular_; }
  /// Ratio of smallest to largest |U_ii|.
  double rcond() const { return rcond_; }
  int size() const { return static_cast<int>(A_.rows()); }

  Vector solve(const Vector& b) const;

 private:
  Vector raw_solve(const Vector& b) const;
  SparseMatrix A_;
  void* numeric_ = nullptr;
  bool singular_ = false;
  double rcond_ = 0.0;
};

struct Equilibration {
  Vector row, col;  // solve (R A C) y = R b, x = C y
};

/// Row max-scaling followed by column max-scaling.
Equilibration equilibrate(SparseMatrix& A);

/// Equilibrate, factorize and solve. Throws LinearSolverError when singular.
Vector solve_equilibrated(SparseMatrix A, const Vector& b, double* rcond = nullptr);

}  // namespace osc
