#pragma once

#include <functional>
#include <span>
#include <vector>

namespace stiffavg {

/// y = Op(x) on flat node vectors.
using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct KrylovStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradients for SPD `op`. `x` holds the initial guess.
/// Throws SolverError if ||b - Op x|| > tol ||b|| after max_iter iterations.
KrylovStats conjugate_gradient(const LinearOperator& op, std::span<const double> b, std::span<double> x, double tol,
                               int max_iter);

/// Restarted GMRES(restart) with modified Gram-Schmidt and Givens rotations.
KrylovStats gmres(const LinearOperator& op, std::span<const double> b, std::span<double> x, double tol,
                  int restart, int max_iter);

}  // namespace stiffavg
