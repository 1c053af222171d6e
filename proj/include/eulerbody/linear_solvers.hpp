#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <memory>
#include <vector>

namespace eulerbody {

using SpMat = Eigen::SparseMatrix<double>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// LDL^T of a symmetric positive semidefinite matrix whose null space is the
/// constants, made definite by pinning one unknown. For b orthogonal to the
/// constants, solve() returns a solution of K x = b with x(pin) = 0.
/// A negative pin factors the matrix as given.
class PinnedLdlt {
 public:
  void compute(const SpMat& K, int pin = 0);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  int rows() const { return n_; }

 private:
  int n_{0};
  int pin_{0};
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
};

/// Solver for (K + F D F^T) x = b with K as in PinnedLdlt, F an n x 6 matrix with
/// columns orthogonal to the constants and D symmetric positive definite.
class LowRankUpdatedSolver {
 public:
  void compute(const SpMat& K, const Eigen::MatrixXd& F, const Matrix6d& D, int pin = 0);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// Direct solve followed by `refine` steps of iterative refinement.
  Eigen::VectorXd solve_refined(const Eigen::VectorXd& b, int refine) const;

  const SpMat& K() const { return K_; }
  const Eigen::MatrixXd& F() const { return F_; }
  const Matrix6d& D() const { return D_; }

 private:
  SpMat K_;
  Eigen::MatrixXd F_;
  Matrix6d D_;
  PinnedLdlt base_;
  Eigen::MatrixXd SF_;
  Eigen::LDLT<Matrix6d> cap_;
};

struct CgResult {
  Eigen::VectorXd x;
  std::vector<double> history;
  bool converged{false};
  int iterations{0};
};

/// Preconditioned conjugate gradients for a symmetric semidefinite system whose
/// null space is the constants; iterates are kept mean-free.
CgResult pcg(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& A,
             const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& M_inv, const Eigen::VectorXd& b,
             const Eigen::VectorXd& x0, double rel_tol, int max_iter);

}  // namespace eulerbody
