#include "stiffavg/linalg.hpp"

namespace stiffavg {

double min_eigenvalue(const Mat& a) {
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool symmetric_sqrt(const Mat& q, double floor, Mat& out) {
  const Mat sym = 0.5 * (q + q.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.info() != Eigen::Success) return false;
  const auto& lambda = es.eigenvalues();
  if (lambda.minCoeff() < floor) return false;
  out = es.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return true;
}

}  // namespace stiffavg
