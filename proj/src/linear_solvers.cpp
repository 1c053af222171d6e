#include "eulerbody/linear_solvers.hpp"

#include "eulerbody/errors.hpp"

namespace eulerbody {

using Eigen::VectorXd;

void PinnedLdlt::compute(const SpMat& K, int pin) {
  n_ = static_cast<int>(K.rows());
  pin_ = pin;
  SpMat A = K;
  if (pin >= 0) {
    A.prune([pin](const Eigen::Index& r, const Eigen::Index& c, const double&) { return r != pin && c != pin; });
    A.coeffRef(pin, pin) = 1.0;
  }
  A.makeCompressed();
  ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  ldlt_->compute(A);
  if (ldlt_->info() != Eigen::Success) throw AssemblyError("PinnedLdlt: factorization failed");
}

VectorXd PinnedLdlt::solve(const VectorXd& b) const {
  if (pin_ < 0) return ldlt_->solve(b);
  VectorXd r = b;
  r(pin_) = 0.0;
  VectorXd x = ldlt_->solve(r);
  x(pin_) = 0.0;
  return x;
}

void LowRankUpdatedSolver::compute(const SpMat& K, const Eigen::MatrixXd& F, const Matrix6d& D, int pin) {
  K_ = K;
  F_ = F;
  D_ = D;
  base_.compute(K, pin);
  SF_.resize(K.rows(), F.cols());
  for (int c = 0; c < F.cols(); ++c) SF_.col(c) = base_.solve(F.col(c));
  const Matrix6d cap = D.inverse() + F.transpose() * SF_;
  cap_.compute(cap);
}

VectorXd LowRankUpdatedSolver::solve(const VectorXd& b) const {
  const VectorXd sb = base_.solve(b);
  const Eigen::Matrix<double, 6, 1> c = cap_.solve(F_.transpose() * sb);
  return sb - SF_ * c;
}

VectorXd LowRankUpdatedSolver::apply(const VectorXd& x) const {
  return K_ * x + F_ * (D_ * (F_.transpose() * x));
}

VectorXd LowRankUpdatedSolver::solve_refined(const VectorXd& b, int refine) const {
  VectorXd x = solve(b);
  for (int it = 0; it < refine; ++it) x += solve(b - apply(x));
  return x;
}

CgResult pcg(const std::function<VectorXd(const VectorXd&)>& A, const std::function<VectorXd(const VectorXd&)>& M_inv,
             const VectorXd& b, const VectorXd& x0, double rel_tol, int max_iter) {
  CgResult res;
  const double bn = b.norm();
  res.x = x0;
  res.x.array() -= res.x.mean();
  if (bn == 0.0) {
    res.x.setZero();
    res.converged = true;
    res.history.push_back(0.0);
    return res;
  }
  VectorXd r = b - A(res.x);
  r.array() -= r.mean();
  res.history.push_back(r.norm() / bn);
  if (res.history.back() <= rel_tol) {
    res.converged = true;
    return res;
  }
  VectorXd z = M_inv(r);
  z.array() -= z.mean();
  VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_iter; ++it) {
    const VectorXd Ap = A(p);
    const double alpha = rz / p.dot(Ap);
    res.x += alpha * p;
    r -= alpha * Ap;
    r.array() -= r.mean();
    res.iterations = it;
    res.history.push_back(r.norm() / bn);
    if (res.history.back() <= rel_tol) {
      res.converged = true;
      break;
    }
    z = M_inv(r);
    z.array() -= z.mean();
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return res;
}

}  // namespace eulerbody
