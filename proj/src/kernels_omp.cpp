#include <omp.h>

#include <algorithm>
#include <cmath>

#include "stiffavg/kernels.hpp"

namespace stiffavg::kernels {

void set_threads(int n) {
  static const int default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : default_threads);
}

int max_threads() { return omp_get_max_threads(); }

namespace omp {

namespace {

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

struct View {
  const StencilGrid& g;

  inline double value(std::span<const double> u, int i, int j) const {
    if (g.periodic) return u[static_cast<std::size_t>(wrap(i, g.n)) + static_cast<std::size_t>(g.n) * wrap(j, g.n)];
    if (i < 0 || i >= g.n || j < 0 || j >= g.n) return 0.0;
    return u[static_cast<std::size_t>(i) + static_cast<std::size_t>(g.n) * j];
  }
  inline std::size_t node(int i, int j) const {
    if (g.periodic) return static_cast<std::size_t>(wrap(i, g.n)) + static_cast<std::size_t>(g.n) * wrap(j, g.n);
    i = std::clamp(i, 0, g.n - 1);
    j = std::clamp(j, 0, g.n - 1);
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(g.n) * j;
  }
};

struct CornerFlux {
  double fx, fy, sx, sy;
};

// Flux D_k g_k of corner (kx, ky) in the cell with lower-left node (ci, cj).
inline CornerFlux corner_flux(const View& v, std::span<const SymTensor> d, std::span<const double> u, int ci,
                              int cj, int kx, int ky) {
  const int pi = ci + kx, pj = cj + ky;
  const double sx = kx ? -1.0 : 1.0;
  const double sy = ky ? -1.0 : 1.0;
  const double uc = v.value(u, pi, pj);
  const double gx = sx * (v.value(u, ci + 1 - kx, pj) - uc) / v.g.h;
  const double gy = sy * (v.value(u, pi, cj + 1 - ky) - uc) / v.g.h;
  const SymTensor& t = d[v.node(pi, pj)];
  return {t.xx * gx + t.xy * gy, t.xy * gx + t.yy * gy, sx, sy};
}

}  // namespace

void diffusion_apply(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                     std::span<double> out) {
  const View v{g};
  const int n = g.n;
  if (g.dim == 1) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const double dc = d[v.node(i, 0)].xx;
      const double fr = 0.5 * (dc + d[v.node(i + 1, 0)].xx) * (v.value(u, i + 1, 0) - v.value(u, i, 0));
      const double fl = 0.5 * (dc + d[v.node(i - 1, 0)].xx) * (v.value(u, i, 0) - v.value(u, i - 1, 0));
      out[static_cast<std::size_t>(i)] = -(fr - fl) / (g.h * g.h);
    }
    return;
  }
  const double scale = 1.0 / (4.0 * g.h);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int py = 0; py < 2; ++py) {
        for (int px = 0; px < 2; ++px) {
          const int ci = i - px, cj = j - py;
          const CornerFlux self = corner_flux(v, d, u, ci, cj, px, py);
          acc -= self.fx * self.sx + self.fy * self.sy;
          const CornerFlux xs = corner_flux(v, d, u, ci, cj, 1 - px, py);
          acc += xs.fx * xs.sx;
          const CornerFlux ys = corner_flux(v, d, u, ci, cj, px, 1 - py);
          acc += ys.fy * ys.sy;
        }
      }
      out[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * j] = acc * scale;
    }
  }
}

double diffusion_form(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                      std::span<const double> w) {
  const View v{g};
  const int lo = g.periodic ? 0 : -1;
  const int n = g.n;
  double sum = 0.0;
  if (g.dim == 1) {
#pragma omp parallel for reduction(+ : sum) schedule(static)
    for (int i = lo; i < n; ++i) {
      const double dface = 0.5 * (d[v.node(i, 0)].xx + d[v.node(i + 1, 0)].xx);
      sum += dface * (v.value(u, i + 1, 0) - v.value(u, i, 0)) * (v.value(w, i + 1, 0) - v.value(w, i, 0)) / g.h;
    }
    return sum;
  }
#pragma omp parallel for reduction(+ : sum) schedule(static)
  for (int cj = lo; cj < n; ++cj) {
    for (int ci = lo; ci < n; ++ci) {
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          const CornerFlux f = corner_flux(v, d, u, ci, cj, kx, ky);
          const int pi = ci + kx, pj = cj + ky;
          const double wc = v.value(w, pi, pj);
          const double gx = f.sx * (v.value(w, ci + 1 - kx, pj) - wc) / g.h;
          const double gy = f.sy * (v.value(w, pi, cj + 1 - ky) - wc) / g.h;
          sum += 0.25 * g.h * g.h * (f.fx * gx + f.fy * gy);
        }
      }
    }
  }
  return sum;
}

void transport_apply(const StencilGrid& g, std::span<const Velocity> b, std::span<const double> u,
                     std::span<double> out, int order) {
  const View v{g};
  const int n = g.n;
  const int ny = g.dim == 1 ? 1 : n;
  const bool fourth = order == 4;
  const double s1 = fourth ? 8.0 / (24.0 * g.h) : 1.0 / (4.0 * g.h);
  const double s2 = -1.0 / (24.0 * g.h);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::size_t p = static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * j;
      double acc = s1 * ((b[p][0] + b[v.node(i + 1, j)][0]) * v.value(u, i + 1, j) -
                         (b[p][0] + b[v.node(i - 1, j)][0]) * v.value(u, i - 1, j));
      if (fourth) {
        acc += s2 * ((b[p][0] + b[v.node(i + 2, j)][0]) * v.value(u, i + 2, j) -
                     (b[p][0] + b[v.node(i - 2, j)][0]) * v.value(u, i - 2, j));
      }
      if (g.dim == 2) {
        acc += s1 * ((b[p][1] + b[v.node(i, j + 1)][1]) * v.value(u, i, j + 1) -
                     (b[p][1] + b[v.node(i, j - 1)][1]) * v.value(u, i, j - 1));
        if (fourth) {
          acc += s2 * ((b[p][1] + b[v.node(i, j + 2)][1]) * v.value(u, i, j + 2) -
                       (b[p][1] + b[v.node(i, j - 2)][1]) * v.value(u, i, j - 2));
        }
      }
      out[p] = acc;
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  const long n = static_cast<long>(a.size());
  double s = 0.0;
#pragma omp parallel for reduction(+ : s) schedule(static)
  for (long i = 0; i < n; ++i) s += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
  return s;
}

void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y) {
  const long n = static_cast<long>(y.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    y[k] = alpha * x[k] + beta * y[k];
  }
}

double weighted_frobenius_sq(int dim, std::span<const double> weights, std::span<const double> blocks) {
  const std::size_t bs = static_cast<std::size_t>(dim) * dim;
  const long n = static_cast<long>(weights.size());
  double s = 0.0;
#pragma omp parallel for reduction(+ : s) schedule(static)
  for (long k = 0; k < n; ++k) {
    const double* m = blocks.data() + static_cast<std::size_t>(k) * bs;
    double f = 0.0;
    for (std::size_t e = 0; e < bs; ++e) f += m[e] * m[e];
    s += weights[static_cast<std::size_t>(k)] * f;
  }
  return s;
}

double max_frobenius(int dim, std::span<const double> blocks) {
  const std::size_t bs = static_cast<std::size_t>(dim) * dim;
  const long n = static_cast<long>(blocks.size() / bs);
  double mx = 0.0;
#pragma omp parallel for reduction(max : mx) schedule(static)
  for (long k = 0; k < n; ++k) {
    const double* m = blocks.data() + static_cast<std::size_t>(k) * bs;
    double f = 0.0;
    for (std::size_t e = 0; e < bs; ++e) f += m[e] * m[e];
    mx = std::max(mx, std::sqrt(f));
  }
  return mx;
}

}  // namespace omp
}  // namespace stiffavg::kernels
