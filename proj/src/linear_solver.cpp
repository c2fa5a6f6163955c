#include "oscsim/linear_solver.hpp"

#include <umfpack.h>

#include <cmath>
#include <string>

namespace osc {

SparseLU::SparseLU(const SparseMatrix& A) : A_(A) {
  if (A_.rows() != A_.cols()) throw LinearSolverError("matrix is not square");
  A_.makeCompressed();
  const int n = static_cast<int>(A_.rows());
  double control[UMFPACK_CONTROL], info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  control[UMFPACK_PIVOT_TOLERANCE] = 1.0;
  void* symbolic = nullptr;
  int status = umfpack_di_symbolic(n, n, A_.outerIndexPtr(), A_.innerIndexPtr(), A_.valuePtr(), &symbolic, control, info);
  if (status == UMFPACK_ERROR_out_of_memory) throw LinearSolverError("UMFPACK: out of memory in symbolic analysis");
  if (status != UMFPACK_OK) throw LinearSolverError("UMFPACK symbolic analysis failed, status " + std::to_string(status));
  status = umfpack_di_numeric(A_.outerIndexPtr(), A_.innerIndexPtr(), A_.valuePtr(), symbolic, &numeric_, control, info);
  umfpack_di_free_symbolic(&symbolic);
  if (status == UMFPACK_ERROR_out_of_memory) throw LinearSolverError("UMFPACK: out of memory in factorization");
  if (status != UMFPACK_OK && status != UMFPACK_WARNING_singular_matrix)
    throw LinearSolverError("UMFPACK factorization failed, status " + std::to_string(status));
  rcond_ = info[UMFPACK_RCOND];
  singular_ = status == UMFPACK_WARNING_singular_matrix || !(rcond_ > 1e-13);
}

SparseLU::~SparseLU() {
  if (numeric_) umfpack_di_free_numeric(&numeric_);
}

Vector SparseLU::raw_solve(const Vector& b) const {
  Vector x(b.size());
  double control[UMFPACK_CONTROL], info[UMFPACK_INFO];
  umfpack_di_defaults(control);
  control[UMFPACK_IRSTEP] = 0;
  const int status = umfpack_di_solve(UMFPACK_A, A_.outerIndexPtr(), A_.innerIndexPtr(), A_.valuePtr(), x.data(),
                                      b.data(), numeric_, control, info);
  if (status != UMFPACK_OK && status != UMFPACK_WARNING_singular_matrix)
    throw LinearSolverError("UMFPACK solve failed, status " + std::to_string(status));
  return x;
}

Vector SparseLU::solve(const Vector& b) const {
  if (b.size() != A_.rows()) throw LinearSolverError("right-hand side dimension mismatch");
  if (b.squaredNorm() == 0) return Vector::Zero(b.size());
  Vector x = raw_solve(b);
  const Vector r = b - A_ * x;
  const Vector dx = raw_solve(r);
  const Vector x1 = x + dx;
  if (x1.allFinite() && (b - A_ * x1).norm() <= r.norm()) return x1;
  return x;
}

Equilibration equilibrate(SparseMatrix& A) {
  Equilibration eq{Vector::Zero(A.rows()), Vector::Zero(A.cols())};
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      eq.row[it.row()] = std::max(eq.row[it.row()], std::abs(it.value()));
  for (Eigen::Index i = 0; i < eq.row.size(); ++i) eq.row[i] = eq.row[i] > 0 ? 1.0 / eq.row[i] : 1.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      it.valueRef() *= eq.row[it.row()];
      eq.col[it.col()] = std::max(eq.col[it.col()], std::abs(it.value()));
    }
  for (Eigen::Index j = 0; j < eq.col.size(); ++j) eq.col[j] = eq.col[j] > 0 ? 1.0 / eq.col[j] : 1.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) it.valueRef() *= eq.col[it.col()];
  return eq;
}

Vector solve_equilibrated(SparseMatrix A, const Vector& b, double* rcond) {
  const auto eq = equilibrate(A);
  SparseLU lu(A);
  if (rcond) *rcond = lu.rcond();
  if (lu.singular()) throw LinearSolverError("matrix is numerically singular (rcond " + std::to_string(lu.rcond()) + ")");
  const Vector y = lu.solve(eq.row.cwiseProduct(b));
  return eq.col.cwiseProduct(y);
}

}  // namespace osc
