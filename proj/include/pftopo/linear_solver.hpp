#pragma once

#include <Eigen/SparseCore>
#include <memory>
#include <string>

namespace pftopo {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class LinearSolverKind { SparseLU, BiCGSTAB };

LinearSolverKind parse_linear_solver(const std::string& name);

// Factor once, solve many. Failures raise SolverFailure with the context label.
class LinearSolver {
 public:
  explicit LinearSolver(LinearSolverKind kind = LinearSolverKind::SparseLU,
                        double iterative_tolerance = 1e-12);
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  void factorize(const SparseMatrix& A, const std::string& context);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Eigen::VectorXd solve_sparse(const SparseMatrix& A, const Eigen::VectorXd& b,
                             const std::string& context,
                             LinearSolverKind kind = LinearSolverKind::SparseLU);

}  // namespace pftopo
