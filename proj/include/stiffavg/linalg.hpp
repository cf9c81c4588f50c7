#pragma once

#include <Eigen/Dense>

namespace stiffavg {

// Phase spaces here are at most 6-D (gyrokinetic x,v). Bounded-size Eigen
// types keep every point/matrix on the stack.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Mat identity(int dim) { return Mat::Identity(dim, dim); }

/// Frobenius product A:B = tr(A^T B).
inline double frobenius_dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

/// max |A - A^T| entry.
inline double asymmetry(const Mat& a) { return (a - a.transpose()).cwiseAbs().maxCoeff(); }

/// Smallest eigenvalue of the symmetric part of `a`.
double min_eigenvalue(const Mat& a);

/// Symmetric PSD square root. Returns false when the smallest eigenvalue is
/// below `floor` (the caller decides how to report it).
bool symmetric_sqrt(const Mat& q, double floor, Mat& out);

}  // namespace stiffavg
