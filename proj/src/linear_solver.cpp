#include "pftopo/linear_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "pftopo/errors.hpp"

namespace pftopo {

LinearSolverKind parse_linear_solver(const std::string& name) {
  if (name == "sparse_lu") return LinearSolverKind::SparseLU;
  if (name == "bicgstab") return LinearSolverKind::BiCGSTAB;
  throw InvalidArgument("unknown linear solver '" + name + "' (expected sparse_lu or bicgstab)");
}

struct LinearSolver::Impl {
  LinearSolverKind kind;
  double tol;
  std::string context;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> iterative;
  SparseMatrix A;
};

LinearSolver::LinearSolver(LinearSolverKind kind, double iterative_tolerance)
    : impl_(std::make_unique<Impl>()) {
  impl_->kind = kind;
  impl_->tol = iterative_tolerance;
}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

void LinearSolver::factorize(const SparseMatrix& A, const std::string& context) {
  impl_->context = context;
  if (A.rows() != A.cols()) throw SolverFailure(context + ": matrix is not square");
  if (A.rows() == 0) return;
  if (impl_->kind == LinearSolverKind::SparseLU) {
    impl_->lu.analyzePattern(A);
    impl_->lu.factorize(A);
    if (impl_->lu.info() != Eigen::Success)
      throw SolverFailure(context + ": sparse LU factorization failed (" +
                          impl_->lu.lastErrorMessage() + ")");
  } else {
    impl_->A = A;
    impl_->iterative.setTolerance(impl_->tol);
    impl_->iterative.setMaxIterations(10 * static_cast<int>(A.rows()) + 100);
    impl_->iterative.compute(impl_->A);
    if (impl_->iterative.info() != Eigen::Success)
      throw SolverFailure(context + ": preconditioner setup failed");
  }
}

Eigen::VectorXd LinearSolver::solve(const Eigen::VectorXd& b) const {
  if (b.size() == 0) return b;
  Eigen::VectorXd x;
  if (impl_->kind == LinearSolverKind::SparseLU) {
    x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success)
      throw SolverFailure(impl_->context + ": sparse LU solve failed");
  } else {
    x = impl_->iterative.solve(b);
    if (impl_->iterative.info() != Eigen::Success)
      throw SolverFailure(impl_->context + ": BiCGSTAB did not converge (error " +
                          std::to_string(impl_->iterative.error()) + ")");
  }
  if (!x.allFinite()) throw SolverFailure(impl_->context + ": non-finite solution (singular system?)");
  return x;
}

Eigen::VectorXd solve_sparse(const SparseMatrix& A, const Eigen::VectorXd& b,
                             const std::string& context, LinearSolverKind kind) {
  LinearSolver s(kind);
  s.factorize(A, context);
  return s.solve(b);
}

}  // namespace pftopo
