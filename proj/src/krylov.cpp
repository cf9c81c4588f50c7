#include "stiffavg/krylov.hpp"

#include <cmath>
#include <sstream>

#include "stiffavg/errors.hpp"
#include "stiffavg/kernels.hpp"

namespace stiffavg {

namespace k = kernels::omp;

namespace {

double norm(std::span<const double> v) { return std::sqrt(k::dot(v, v)); }

// r = b - Op x
void residual(const LinearOperator& op, std::span<const double> b, std::span<const double> x, std::vector<double>& r) {
  op(x, r);
  k::axpby(1.0, b, -1.0, r);
}

[[noreturn]] void fail(const char* who, int it, double rel, double tol) {
  std::ostringstream os;
  os << who << " did not converge: relative residual " << rel << " > " << tol << " after " << it << " iterations";
  throw SolverError(os.str(), it);
}

}  // namespace

KrylovStats conjugate_gradient(const LinearOperator& op, std::span<const double> b, std::span<double> x, double tol,
                               int max_iter) {
  const std::size_t n = b.size();
  const double bnorm = norm(b);
  KrylovStats st;
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return st;
  }
  std::vector<double> r(n), p(n), ap(n);
  residual(op, b, x, r);
  p = r;
  double rr = k::dot(r, r);
  st.relative_residual = std::sqrt(rr) / bnorm;
  while (st.relative_residual > tol) {
    if (st.iterations >= max_iter) fail("conjugate_gradient", st.iterations, st.relative_residual, tol);
    op(p, ap);
    const double alpha = rr / k::dot(p, ap);
    k::axpby(alpha, p, 1.0, x);
    k::axpby(-alpha, ap, 1.0, r);
    const double rr_new = k::dot(r, r);
    k::axpby(1.0, r, rr_new / rr, p);
    rr = rr_new;
    ++st.iterations;
    st.relative_residual = std::sqrt(rr) / bnorm;
    if (st.relative_residual <= tol) {
      // confirm against the true residual; recursive updates drift
      residual(op, b, x, r);
      rr = k::dot(r, r);
      st.relative_residual = std::sqrt(rr) / bnorm;
      p = r;
    }
  }
  return st;
}

KrylovStats gmres(const LinearOperator& op, std::span<const double> b, std::span<double> x, double tol, int restart,
                  int max_iter) {
  const std::size_t n = b.size();
  const double bnorm = norm(b);
  KrylovStats st;
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return st;
  }
  const int m = std::max(1, restart);
  std::vector<std::vector<double>> v(static_cast<std::size_t>(m) + 1, std::vector<double>(n));
  std::vector<double> h(static_cast<std::size_t>((m + 1) * m), 0.0);
  auto H = [&](int i, int j) -> double& { return h[static_cast<std::size_t>(i * m + j)]; };
  std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m)),
      g(static_cast<std::size_t>(m) + 1), y(static_cast<std::size_t>(m));
  std::vector<double> r(n);

  residual(op, b, x, r);
  double beta = norm(r);
  st.relative_residual = beta / bnorm;
  while (st.relative_residual > tol) {
    if (st.iterations >= max_iter) fail("gmres", st.iterations, st.relative_residual, tol);
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
    int kdim = 0;
    for (int j = 0; j < m && st.iterations < max_iter; ++j) {
      auto& w = v[static_cast<std::size_t>(j) + 1];
      op(v[static_cast<std::size_t>(j)], w);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = k::dot(w, v[static_cast<std::size_t>(i)]);
        k::axpby(-H(i, j), v[static_cast<std::size_t>(i)], 1.0, w);
      }
      H(j + 1, j) = norm(w);
      if (H(j + 1, j) > 0.0) {
        const double inv = 1.0 / H(j + 1, j);
        for (double& e : w) e *= inv;
      }
      for (int i = 0; i < j; ++i) {
        const double t = cs[static_cast<std::size_t>(i)] * H(i, j) + sn[static_cast<std::size_t>(i)] * H(i + 1, j);
        H(i + 1, j) = -sn[static_cast<std::size_t>(i)] * H(i, j) + cs[static_cast<std::size_t>(i)] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      cs[static_cast<std::size_t>(j)] = denom == 0.0 ? 1.0 : H(j, j) / denom;
      sn[static_cast<std::size_t>(j)] = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[static_cast<std::size_t>(j) + 1] = -sn[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
      g[static_cast<std::size_t>(j)] *= cs[static_cast<std::size_t>(j)];
      ++st.iterations;
      kdim = j + 1;
      if (std::abs(g[static_cast<std::size_t>(j) + 1]) <= tol * bnorm) break;
    }
    for (int i = kdim - 1; i >= 0; --i) {
      double acc = g[static_cast<std::size_t>(i)];
      for (int c = i + 1; c < kdim; ++c) acc -= H(i, c) * y[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(i)] = acc / H(i, i);
    }
    for (int i = 0; i < kdim; ++i) k::axpby(y[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(i)], 1.0, x);
    residual(op, b, x, r);
    beta = norm(r);
    st.relative_residual = beta / bnorm;
  }
  return st;
}

}  // namespace stiffavg
