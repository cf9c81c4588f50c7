#include "stiffavg/transport_group.hpp"

#include <cmath>
#include <sstream>

#include "parallel.hpp"
#include "stiffavg/errors.hpp"
#include "stiffavg/kernels.hpp"

namespace stiffavg {

namespace {

constexpr double kSqrtFloor = 1e-12;

void require_dim(const MatrixFieldFn& a, int dim, const char* where) {
  if (a.dim != dim) {
    std::ostringstream os;
    os << where << ": matrix field has dimension " << a.dim << ", expected " << dim;
    throw DimensionMismatch(os.str());
  }
}

// Q^{1/2} A Q^{1/2} per node, flattened row-major for the kernels.
std::vector<double> weighted_blocks(const MatrixFieldFn& a, const WeightedQuadrature& quad) {
  require_dim(a, quad.dim, "hq_norm");
  const std::vector<Mat> roots = weight_sqrt_at_nodes(quad);
  const std::size_t bs = static_cast<std::size_t>(quad.dim) * quad.dim;
  std::vector<double> blocks(quad.nodes.size() * bs);
  detail::parallel_for(quad.nodes.size(), [&](std::size_t k) {
    const Mat m = roots[k] * a(quad.nodes[k]) * roots[k];
    for (int r = 0; r < quad.dim; ++r)
      for (int c = 0; c < quad.dim; ++c) blocks[k * bs + static_cast<std::size_t>(r * quad.dim + c)] = m(r, c);
  });
  for (double x : blocks) {
    if (!std::isfinite(x)) throw InvalidParameter("hq_norm: matrix field is not finite on the quadrature box");
  }
  return blocks;
}

}  // namespace

MatrixFieldFn constant_matrix_field(const Mat& a) {
  MatrixFieldFn f;
  f.dim = static_cast<int>(a.rows());
  f.eval = [a](const Vec&) { return a; };
  f.symmetric = asymmetry(a) <= 1e-12;
  const int dim = f.dim;
  f.directional_derivative = [dim](const Vec&, const Vec&) -> Mat { return Mat::Zero(dim, dim); };
  return f;
}

MatrixFieldFn identity_matrix_field(int dim) { return constant_matrix_field(Mat::Identity(dim, dim)); }

double WeightedQuadrature::volume() const { return std::pow(2.0 * half_width, dim); }

WeightedQuadrature make_midpoint_quadrature(int dim, double half_width, int nodes_per_axis) {
  return make_midpoint_quadrature(dim, half_width, nodes_per_axis, identity_matrix_field(dim),
                                  identity_matrix_field(dim));
}

WeightedQuadrature make_midpoint_quadrature(int dim, double half_width, int nodes_per_axis,
                                            const MatrixFieldFn& p, const MatrixFieldFn& q) {
  if (dim < 1 || dim > 2) throw InvalidParameter("quadrature: tensor lattices are supported for m in {1, 2}");
  if (!(half_width > 0.0) || nodes_per_axis < 1) throw InvalidParameter("quadrature: need L > 0 and n >= 1");
  require_dim(p, dim, "quadrature P");
  require_dim(q, dim, "quadrature Q");
  WeightedQuadrature quad;
  quad.dim = dim;
  quad.half_width = half_width;
  quad.nodes_per_axis = nodes_per_axis;
  quad.nodes = sample_points(dim, half_width, nodes_per_axis, 0, 0);
  const double h = 2.0 * half_width / nodes_per_axis;
  quad.weights.assign(quad.nodes.size(), std::pow(h, dim));
  quad.p_field = p;
  quad.q_field = q;
  return quad;
}

std::vector<Mat> sample_nodes(const MatrixFieldFn& a, std::span<const Vec> nodes) {
  std::vector<Mat> out(nodes.size());
  detail::parallel_for(nodes.size(), [&](std::size_t k) { out[k] = a(nodes[k]); });
  return out;
}

MatrixFieldFn group_apply(double s, const MatrixFieldFn& a, const VectorFieldSpec& field,
                          const FlowIntegratorConfig& cfg) {
  require_dim(a, field.dim, "group_apply");
  validate_config(cfg, field);
  MatrixFieldFn out;
  out.dim = a.dim;
  out.symmetric = a.symmetric;
  if (s == 0.0) {
    out.eval = a.eval;
    return out;
  }
  out.eval = [s, a, field, cfg](const Vec& z) -> Mat {
    const Vec ys = flow_map(field, cfg, s, z).position;
    const Mat jinv = flow_map(field, cfg, -s, ys).jacobian;
    return push_forward(a(ys), jinv);
  };
  return out;
}

std::vector<Mat> weight_sqrt_at_nodes(const WeightedQuadrature& quad) {
  std::vector<Mat> roots(quad.nodes.size());
  std::vector<char> bad(quad.nodes.size(), 0);
  detail::parallel_for(quad.nodes.size(), [&](std::size_t k) {
    if (!symmetric_sqrt(quad.q_field(quad.nodes[k]), kSqrtFloor, roots[k])) bad[k] = 1;
  });
  for (std::size_t k = 0; k < bad.size(); ++k) {
    if (bad[k]) {
      std::ostringstream os;
      os << "weight matrix Q is not SPD (eigenvalue below " << kSqrtFloor << ") at node " << k << " ("
         << quad.nodes[k].transpose() << ")";
      throw WeightMatrixError(os.str(), k);
    }
  }
  return roots;
}

double hq_norm(const MatrixFieldFn& a, const WeightedQuadrature& quad) {
  const std::vector<double> blocks = weighted_blocks(a, quad);
  return std::sqrt(kernels::omp::weighted_frobenius_sq(quad.dim, quad.weights, blocks));
}

double hq_inf_norm(const MatrixFieldFn& a, const WeightedQuadrature& quad) {
  const std::vector<double> blocks = weighted_blocks(a, quad);
  return kernels::omp::max_frobenius(quad.dim, blocks);
}

double hq_inner(const MatrixFieldFn& a, const MatrixFieldFn& b, const WeightedQuadrature& quad) {
  require_dim(a, quad.dim, "hq_inner");
  require_dim(b, quad.dim, "hq_inner");
  const std::vector<Mat> roots = weight_sqrt_at_nodes(quad);
  std::vector<double> terms(quad.nodes.size());
  detail::parallel_for(quad.nodes.size(), [&](std::size_t k) {
    const Mat& r = roots[k];
    terms[k] = quad.weights[k] * frobenius_dot(r * a(quad.nodes[k]) * r, r * b(quad.nodes[k]) * r);
  });
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

double xp_norm(std::span<const Vec> w, const WeightedQuadrature& quad) {
  if (w.size() != quad.nodes.size()) throw DimensionMismatch("xp_norm: one vector per quadrature node expected");
  std::vector<double> terms(w.size());
  detail::parallel_for(w.size(), [&](std::size_t k) {
    terms[k] = quad.weights[k] * w[k].dot(quad.p_field(quad.nodes[k]) * w[k]);
  });
  double s = 0.0;
  for (double t : terms) s += t;
  return std::sqrt(s);
}

Mat lie_bracket_matrix(const VectorFieldSpec& b, const MatrixFieldFn& a, const Vec& y) {
  if (!a.differentiable()) throw CapabilityError("lie_bracket_matrix: matrix field carries no derivatives");
  require_dim(a, b.dim, "lie_bracket_matrix");
  const Mat db = b.jacobian(y);
  const Mat av = a(y);
  return a.directional_derivative(y, b.eval(y)) - db * av - av * db.transpose();
}

GeneratorResidual generator_residual(const MatrixFieldFn& target, const MatrixFieldFn& c,
                                     const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double h,
                                     const WeightedQuadrature& quad) {
  if (!(h > 0.0)) throw InvalidParameter("generator_residual: h must be > 0");
  require_dim(target, field.dim, "generator_residual");
  require_dim(c, field.dim, "generator_residual");
  const MatrixFieldFn plus = group_apply(h, c, field, cfg);
  const MatrixFieldFn minus = group_apply(-h, c, field, cfg);
  MatrixFieldFn residual;
  residual.dim = field.dim;
  residual.eval = [plus, minus, target, h](const Vec& z) -> Mat {
    return (plus(z) - minus(z)) / (2.0 * h) - target(z);
  };
  const std::vector<Mat> raw = sample_nodes(residual, quad.nodes);
  const std::vector<Mat> roots = weight_sqrt_at_nodes(quad);
  GeneratorResidual out;
  double sq = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    sq += quad.weights[k] * (roots[k] * raw[k] * roots[k]).squaredNorm();
    out.max_node = std::max(out.max_node, raw[k].norm());
  }
  out.l2 = std::sqrt(sq);
  return out;
}

}  // namespace stiffavg
