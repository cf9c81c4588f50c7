#include <algorithm>
#include <cmath>

#include "stiffavg/kernels.hpp"

namespace stiffavg::kernels::serial {

namespace {

struct Access {
  const StencilGrid& g;

  // Index of (i, j) or -1 for a Dirichlet ghost.
  long index(int i, int j) const {
    if (g.periodic) {
      i = ((i % g.n) + g.n) % g.n;
      j = ((j % g.n) + g.n) % g.n;
    } else if (i < 0 || i >= g.n || j < 0 || j >= g.n) {
      return -1;
    }
    return static_cast<long>(i) + static_cast<long>(g.n) * j;
  }
  long clamped(int i, int j) const {
    if (g.periodic) return index(i, j);
    i = std::clamp(i, 0, g.n - 1);
    j = std::clamp(j, 0, g.n - 1);
    return static_cast<long>(i) + static_cast<long>(g.n) * j;
  }
  double value(std::span<const double> u, int i, int j) const {
    const long k = index(i, j);
    return k < 0 ? 0.0 : u[static_cast<std::size_t>(k)];
  }
};

}  // namespace

void diffusion_apply(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                     std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const Access a{g};
  const int lo = g.periodic ? 0 : -1;
  if (g.dim == 1) {
    for (int i = lo; i < g.n; ++i) {
      const double dface = 0.5 * (d[static_cast<std::size_t>(a.clamped(i, 0))].xx +
                                  d[static_cast<std::size_t>(a.clamped(i + 1, 0))].xx);
      const double flux = dface * (a.value(u, i + 1, 0) - a.value(u, i, 0)) / g.h;
      const long left = a.index(i, 0);
      const long right = a.index(i + 1, 0);
      if (left >= 0) out[static_cast<std::size_t>(left)] -= flux / g.h;
      if (right >= 0) out[static_cast<std::size_t>(right)] += flux / g.h;
    }
    return;
  }
  const double scale = 1.0 / (4.0 * g.h);
  for (int cj = lo; cj < g.n; ++cj) {
    for (int ci = lo; ci < g.n; ++ci) {
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          const int pi = ci + kx, pj = cj + ky;
          const int xi = ci + 1 - kx, yj = cj + 1 - ky;
          const double sx = kx ? -1.0 : 1.0;
          const double sy = ky ? -1.0 : 1.0;
          const double uc = a.value(u, pi, pj);
          const double gx = sx * (a.value(u, xi, pj) - uc) / g.h;
          const double gy = sy * (a.value(u, pi, yj) - uc) / g.h;
          const SymTensor& t = d[static_cast<std::size_t>(a.clamped(pi, pj))];
          const double fx = t.xx * gx + t.xy * gy;
          const double fy = t.xy * gx + t.yy * gy;
          const long c = a.index(pi, pj);
          const long xn = a.index(xi, pj);
          const long yn = a.index(pi, yj);
          if (c >= 0) out[static_cast<std::size_t>(c)] -= (fx * sx + fy * sy) * scale;
          if (xn >= 0) out[static_cast<std::size_t>(xn)] += fx * sx * scale;
          if (yn >= 0) out[static_cast<std::size_t>(yn)] += fy * sy * scale;
        }
      }
    }
  }
}

double diffusion_form(const StencilGrid& g, std::span<const SymTensor> d, std::span<const double> u,
                      std::span<const double> w) {
  const Access a{g};
  const int lo = g.periodic ? 0 : -1;
  double sum = 0.0;
  if (g.dim == 1) {
    for (int i = lo; i < g.n; ++i) {
      const double dface = 0.5 * (d[static_cast<std::size_t>(a.clamped(i, 0))].xx +
                                  d[static_cast<std::size_t>(a.clamped(i + 1, 0))].xx);
      sum += g.h * dface * (a.value(u, i + 1, 0) - a.value(u, i, 0)) / g.h *
             (a.value(w, i + 1, 0) - a.value(w, i, 0)) / g.h;
    }
    return sum;
  }
  for (int cj = lo; cj < g.n; ++cj) {
    for (int ci = lo; ci < g.n; ++ci) {
      for (int ky = 0; ky < 2; ++ky) {
        for (int kx = 0; kx < 2; ++kx) {
          const int pi = ci + kx, pj = cj + ky;
          const int xi = ci + 1 - kx, yj = cj + 1 - ky;
          const double gux = (a.value(u, xi, pj) - a.value(u, pi, pj)) / g.h;
          const double guy = (a.value(u, pi, yj) - a.value(u, pi, pj)) / g.h;
          const double gwx = (a.value(w, xi, pj) - a.value(w, pi, pj)) / g.h;
          const double gwy = (a.value(w, pi, yj) - a.value(w, pi, pj)) / g.h;
          const SymTensor& t = d[static_cast<std::size_t>(a.clamped(pi, pj))];
          // the sign flips of backward differences cancel pairwise except in
          // the cross term, where they multiply.
          const double sxy = (kx ? -1.0 : 1.0) * (ky ? -1.0 : 1.0);
          sum += 0.25 * g.h * g.h *
                 (t.xx * gux * gwx + t.yy * guy * gwy + sxy * t.xy * (gux * gwy + guy * gwx));
        }
      }
    }
  }
  return sum;
}

void transport_apply(const StencilGrid& g, std::span<const Velocity> b, std::span<const double> u,
                     std::span<double> out, int order) {
  const Access a{g};
  const int ny = g.dim == 1 ? 1 : g.n;
  // central difference weights for offsets 1 and 2
  const double c1 = order == 4 ? 8.0 / 12.0 : 0.5;
  const double c2 = order == 4 ? -1.0 / 12.0 : 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < g.n; ++i) {
      const std::size_t p = static_cast<std::size_t>(a.index(i, j));
      double advective = 0.0;
      double conservative = 0.0;
      for (int dir = 0; dir < g.dim; ++dir) {
        const auto dd = static_cast<std::size_t>(dir);
        for (int off = 1; off <= 2; ++off) {
          const double c = off == 1 ? c1 : c2;
          if (c == 0.0) continue;
          const int di = dir == 0 ? off : 0;
          const int dj = dir == 1 ? off : 0;
          const double up = a.value(u, i + di, j + dj);
          const double um = a.value(u, i - di, j - dj);
          const double bp = b[static_cast<std::size_t>(a.clamped(i + di, j + dj))][dd];
          const double bm = b[static_cast<std::size_t>(a.clamped(i - di, j - dj))][dd];
          advective += c * b[p][dd] * (up - um) / g.h;
          conservative += c * (bp * up - bm * um) / g.h;
        }
      }
      out[p] = 0.5 * (advective + conservative);
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpby(double alpha, std::span<const double> x, double beta, std::span<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = alpha * x[i] + beta * y[i];
}

double weighted_frobenius_sq(int dim, std::span<const double> weights, std::span<const double> blocks) {
  const std::size_t bs = static_cast<std::size_t>(dim) * dim;
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    double f = 0.0;
    for (std::size_t e = 0; e < bs; ++e) f += blocks[k * bs + e] * blocks[k * bs + e];
    s += weights[k] * f;
  }
  return s;
}

double max_frobenius(int dim, std::span<const double> blocks) {
  const std::size_t bs = static_cast<std::size_t>(dim) * dim;
  double m = 0.0;
  for (std::size_t k = 0; k * bs < blocks.size(); ++k) {
    double f = 0.0;
    for (std::size_t e = 0; e < bs; ++e) f += blocks[k * bs + e] * blocks[k * bs + e];
    m = std::max(m, std::sqrt(f));
  }
  return m;
}

}  // namespace stiffavg::kernels::serial
