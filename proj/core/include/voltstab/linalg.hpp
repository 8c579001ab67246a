#pragma once

#include <Eigen/Core>

namespace voltstab::linalg {

inline constexpr double kSymmetryTolerance = 1e-9;

/// Largest |m(i,j) - m(j,i)|. Throws DimensionError for non-square input.
double asymmetry(const Eigen::MatrixXd& m);

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations. Throws if `m` is not square or not symmetric within
/// kSymmetryTolerance.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m);

/// Minimum eigenvalue of a symmetric matrix; positive means positive definite.
double min_eigenvalue(const Eigen::MatrixXd& m);

/// Spectral norm of a symmetric matrix (max |eigenvalue|).
double symmetric_norm(const Eigen::MatrixXd& m);

/// Lower-triangular Cholesky factor L with m = L L^T.
class Cholesky {
 public:
  /// Returns false from ok() if a non-positive pivot is met.
  explicit Cholesky(const Eigen::MatrixXd& m);

  bool ok() const { return ok_; }
  const Eigen::MatrixXd& factor() const { return lower_; }

  /// Solves m x = b. Requires ok().
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

 private:
  Eigen::MatrixXd lower_;
  bool ok_ = false;
};

/// Cholesky-based definiteness verdict; same symmetry precondition.
bool is_positive_definite(const Eigen::MatrixXd& m);

}  // namespace voltstab::linalg
