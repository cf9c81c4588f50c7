#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial::` is the
// straightforward reference (scatter loops, plain accumulation) and `omp::`
// is the OpenMP gather/reduction form used by the library. Tests check the
// two against each other; bench/ times them.

#include <array>
#include <cstddef>
#include <span>

namespace stiffavg::kernels {

/// Cell-centred tensor grid on [-L, L]^dim, dim in {1, 2}, n nodes per
/// axis, node index i + n*j. Dirichlet grids read zero outside the box.
struct StencilGrid {
  int dim = 2;
  int n = 0;
  double h = 0.0;
  bool periodic = true;

  std::size_t size() const { return dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n; }
};

/// Symmetric 2x2 tensor (1-D grids use xx only).
struct SymTensor {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
};

using Velocity = std::array<double, 2>;

namespace serial {

/// out = A u, with A the positive semidefinite discretisation of -div(D grad u).
void diffusion_apply(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                     std::span<double> out);
/// a(u, w) = (A u, w)_h computed cell by cell.
double diffusion_form(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                      std::span<const double> w);
/// out = T u, skew-symmetric centred form of 1/2 [b.grad u + div(b u)]
/// with second- or fourth-order central differences.
void transport_apply(const StencilGrid& g, std::span<const Velocity> b, std::span<const double> u,
                     std::span<double> out, int order = 2);
double dot(std::span<const double> a, std::span<const double> b);
void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y);
/// sum_i w_i * |M_i|_F^2 for row-major dim x dim blocks stored contiguously.
double weighted_frobenius_sq(int dim, std::span<const double> weights, std::span<const double> blocks);
double max_frobenius(int dim, std::span<const double> blocks);

}  // namespace serial

namespace omp {

void diffusion_apply(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                     std::span<double> out);
double diffusion_form(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                      std::span<const double> w);
void transport_apply(const StencilGrid& g, std::span<const Velocity> b, std::span<const double> u,
                     std::span<double> out, int order = 2);
double dot(std::span<const double> a, std::span<const double> b);
void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y);
double weighted_frobenius_sq(int dim, std::span<const double> weights, std::span<const double> blocks);
double max_frobenius(int dim, std::span<const double> blocks);

}  // namespace omp

/// Sets the OpenMP team size; 0 restores the runtime default.
void set_threads(int n);
int max_threads();

}  // namespace stiffavg::kernels
