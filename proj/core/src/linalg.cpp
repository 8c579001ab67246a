#include "voltstab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "voltstab/error.hpp"

namespace voltstab::linalg {

namespace {

void require_symmetric(const Eigen::MatrixXd& m) {
  const double gap = asymmetry(m);
  if (gap > kSymmetryTolerance) {
    throw ValidationError("matrix", "not symmetric (max asymmetry " + std::to_string(gap) + ")");
  }
}

}  // namespace

double asymmetry(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         ", expected square");
  }
  double gap = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      gap = std::max(gap, std::abs(m(i, j) - m(j, i)));
    }
  }
  return gap;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  require_symmetric(m);
  const Eigen::Index n = m.rows();
  // Work on the exactly symmetrized copy so rotations preserve symmetry.
  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  if (n == 0) return Eigen::VectorXd(0);

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    const double scale = a.diagonal().squaredNorm() + off;
    if (off <= 1e-30 * scale || off == 0.0) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the (p,q) rotation.
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }
  Eigen::VectorXd eig = a.diagonal();
  std::sort(eig.data(), eig.data() + eig.size());
  return eig;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd eig = symmetric_eigenvalues(m);
  if (eig.size() == 0) throw DimensionError("empty matrix has no eigenvalues");
  return eig(0);
}

double symmetric_norm(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd eig = symmetric_eigenvalues(m);
  if (eig.size() == 0) return 0.0;
  return std::max(std::abs(eig(0)), std::abs(eig(eig.size() - 1)));
}

Cholesky::Cholesky(const Eigen::MatrixXd& m) {
  require_symmetric(m);
  const Eigen::Index n = m.rows();
  lower_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= lower_(j, k) * lower_(j, k);
    if (!(pivot > 0.0)) return;
    const double root = std::sqrt(pivot);
    lower_(j, j) = root;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double sum = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) sum -= lower_(i, k) * lower_(j, k);
      lower_(i, j) = sum / root;
    }
  }
  ok_ = true;
}

Eigen::VectorXd Cholesky::solve(const Eigen::VectorXd& b) const {
  if (!ok_) throw Error("Cholesky::solve on a matrix that is not positive definite");
  const Eigen::Index n = lower_.rows();
  if (b.size() != n) throw DimensionError("Cholesky::solve: right-hand side has wrong length");
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = b(i);
    for (Eigen::Index k = 0; k < i; ++k) sum -= lower_(i, k) * y(k);
    y(i) = sum / lower_(i, i);
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double sum = y(i);
    for (Eigen::Index k = i + 1; k < n; ++k) sum -= lower_(k, i) * x(k);
    x(i) = sum / lower_(i, i);
  }
  return x;
}

bool is_positive_definite(const Eigen::MatrixXd& m) { return Cholesky(m).ok(); }

}  // namespace voltstab::linalg
