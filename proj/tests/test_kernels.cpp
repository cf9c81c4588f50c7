#include <random>
#include <vector>

#include "doctest.h"
#include "stiffavg/errors.hpp"
#include "stiffavg/kernels.hpp"
#include "stiffavg/krylov.hpp"

using namespace stiffavg;
namespace k = stiffavg::kernels;

namespace {

struct Data {
  k::StencilGrid g;
  std::vector<k::SymTensor> d;
  std::vector<k::Velocity> b;
  std::vector<double> u, w;
};

// Random PSD tensors, a divergence-free velocity and random node vectors.
Data make_data(int dim, int n, bool periodic, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Data x;
  x.g.dim = dim;
  x.g.n = n;
  x.g.h = 2.0 * 3.0 / n;
  x.g.periodic = periodic;
  const std::size_t size = x.g.size();
  for (std::size_t i = 0; i < size; ++i) {
    const double a = uni(rng), c = uni(rng), e = uni(rng);
    x.d.push_back({a * a + c * c + 0.1, c * e, e * e + 0.2});
    const double yi = -3.0 + (static_cast<double>(i % n) + 0.5) * x.g.h;
    const double yj = dim == 2 ? -3.0 + (static_cast<double>(i / n) + 0.5) * x.g.h : 0.0;
    x.b.push_back(dim == 2 ? k::Velocity{4.0 * yj, -yi} : k::Velocity{1.0, 0.0});
    x.u.push_back(uni(rng));
    x.w.push_back(uni(rng));
  }
  return x;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("OpenMP kernels agree with the serial reference") {
  for (int dim : {1, 2}) {
    for (bool periodic : {true, false}) {
      CAPTURE(dim);
      CAPTURE(periodic);
      const Data x = make_data(dim, dim == 1 ? 64 : 40, periodic, 7 + dim);
      const std::size_t n = x.g.size();
      std::vector<double> a(n), b(n);
      k::serial::diffusion_apply(x.g, x.d, x.u, a);
      k::omp::diffusion_apply(x.g, x.d, x.u, b);
      CHECK(max_diff(a, b) <= 1e-12 * max_abs(a));

      const double fs = k::serial::diffusion_form(x.g, x.d, x.u, x.w);
      const double fo = k::omp::diffusion_form(x.g, x.d, x.u, x.w);
      CHECK(std::abs(fs - fo) <= 1e-11 * std::abs(fs) + 1e-14);

      for (int order : {2, 4}) {
        k::serial::transport_apply(x.g, x.b, x.u, a, order);
        k::omp::transport_apply(x.g, x.b, x.u, b, order);
        CHECK(max_diff(a, b) <= 1e-12 * max_abs(a));
      }

      CHECK(std::abs(k::serial::dot(x.u, x.w) - k::omp::dot(x.u, x.w)) <= 1e-12);
      std::vector<double> ys = x.w, yo = x.w;
      k::serial::axpby(0.3, x.u, -1.7, ys);
      k::omp::axpby(0.3, x.u, -1.7, yo);
      CHECK(max_diff(ys, yo) == 0.0);
    }
  }
}

TEST_CASE("Frobenius reductions agree") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const int dim = 3;
  std::vector<double> blocks(500 * dim * dim), weights(500);
  for (double& v : blocks) v = uni(rng);
  for (double& v : weights) v = uni(rng) + 1.5;
  CHECK(k::serial::weighted_frobenius_sq(dim, weights, blocks) ==
        doctest::Approx(k::omp::weighted_frobenius_sq(dim, weights, blocks)).epsilon(1e-12));
  CHECK(k::serial::max_frobenius(dim, blocks) == k::omp::max_frobenius(dim, blocks));

  // one 2x2 block [[3,0],[0,4]] with weight 2: 2 * 25
  const std::vector<double> one{3, 0, 0, 4}, w{2.0};
  CHECK(k::serial::weighted_frobenius_sq(2, w, one) == doctest::Approx(50.0));
  CHECK(k::omp::max_frobenius(2, one) == doctest::Approx(5.0));
}

TEST_CASE("diffusion operator is symmetric positive semidefinite") {
  const Data x = make_data(2, 24, false, 21);
  const std::size_t n = x.g.size();
  std::vector<double> au(n), aw(n);
  k::omp::diffusion_apply(x.g, x.d, x.u, au);
  k::omp::diffusion_apply(x.g, x.d, x.w, aw);
  const double uaw = k::serial::dot(x.u, aw), wau = k::serial::dot(x.w, au);
  CHECK(std::abs(uaw - wau) <= 1e-11 * std::abs(uaw));
  CHECK(k::serial::dot(x.u, au) >= 0.0);
  // form = (A u, w) h^m
  const double h2 = x.g.h * x.g.h;
  CHECK(k::omp::diffusion_form(x.g, x.d, x.u, x.w) == doctest::Approx(wau * h2).epsilon(1e-11));

  // constants are in the kernel on a periodic grid
  Data p = make_data(2, 24, true, 22);
  std::vector<double> one(n, 1.0), out(n);
  k::omp::diffusion_apply(p.g, p.d, one, out);
  CHECK(max_abs(out) <= 1e-12);
}

TEST_CASE("transport operator is skew for a divergence-free velocity") {
  for (bool periodic : {true, false}) {
    for (int order : {2, 4}) {
      const Data x = make_data(2, 32, periodic, 31);
      const std::size_t n = x.g.size();
      std::vector<double> tu(n), tw(n);
      k::omp::transport_apply(x.g, x.b, x.u, tu, order);
      k::omp::transport_apply(x.g, x.b, x.w, tw, order);
      const double scale = max_abs(tu) * n;
      CHECK(std::abs(k::serial::dot(x.u, tu)) <= 1e-12 * scale);
      CHECK(std::abs(k::serial::dot(x.w, tu) + k::serial::dot(x.u, tw)) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("transport stencil is consistent: order 2 and 4 on a smooth mode") {
  // 1-D, b = 1 periodic on [-3, 3]: T sin(ky) -> k cos(ky).
  for (int order : {2, 4}) {
    std::vector<double> errs;
    for (int n : {32, 64}) {
      k::StencilGrid g{1, n, 6.0 / n, true};
      const double kk = 2.0 * M_PI / 6.0;
      std::vector<double> u(n), out(n), exact(n);
      std::vector<k::Velocity> b(n, k::Velocity{1.0, 0.0});
      for (int i = 0; i < n; ++i) {
        const double y = -3.0 + (i + 0.5) * g.h;
        u[i] = std::sin(kk * y);
        exact[i] = kk * std::cos(kk * y);
      }
      k::serial::transport_apply(g, b, u, out, order);
      errs.push_back(max_diff(out, exact));
    }
    CHECK(errs[0] / errs[1] >= (order == 2 ? 3.8 : 15.0));
  }
}

TEST_CASE("conjugate gradients and GMRES") {
  // 1-D Dirichlet Laplacian plus identity: tridiag(-1, 3, -1).
  const int n = 50;
  const LinearOperator spd = [n](std::span<const double> x, std::span<double> y) {
    for (int i = 0; i < n; ++i) y[i] = 3.0 * x[i] - (i > 0 ? x[i - 1] : 0.0) - (i + 1 < n ? x[i + 1] : 0.0);
  };
  std::vector<double> exact(n), rhs(n), x(n, 0.0);
  for (int i = 0; i < n; ++i) exact[i] = std::sin(0.3 * i) + 0.1 * i;
  spd(exact, rhs);
  const KrylovStats s = conjugate_gradient(spd, rhs, x, 1e-13, 500);
  CHECK(s.relative_residual <= 1e-13);
  CHECK(max_diff(x, exact) <= 1e-11);

  // nonsymmetric: add a skew part
  const LinearOperator ns = [&](std::span<const double> v, std::span<double> y) {
    spd(v, y);
    for (int i = 0; i < n; ++i) y[i] += 0.8 * ((i + 1 < n ? v[i + 1] : 0.0) - (i > 0 ? v[i - 1] : 0.0));
  };
  ns(exact, rhs);
  std::vector<double> z(n, 0.0);
  const KrylovStats g = gmres(ns, rhs, z, 1e-13, 10, 2000);
  CHECK(g.relative_residual <= 1e-13);
  CHECK(max_diff(z, exact) <= 1e-10);

  std::vector<double> fail(n, 0.0);
  try {
    conjugate_gradient(spd, rhs, fail, 1e-14, 2);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.iterations() == 2);
  }
}

TEST_CASE("thread count control") {
  k::set_threads(1);
  CHECK(k::max_threads() == 1);
  k::set_threads(0);
  CHECK(k::max_threads() >= 1);
}
