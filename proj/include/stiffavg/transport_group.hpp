#pragma once

#include <functional>
#include <span>
#include <vector>

#include "stiffavg/flow.hpp"

namespace stiffavg {

/// m x m matrix-valued field. `directional_derivative(y, v)` returns
/// (v.grad)A(y) when the field can differentiate itself.
struct MatrixFieldFn {
  int dim = 0;
  std::function<Mat(const Vec&)> eval;
  bool symmetric = true;
  std::function<Mat(const Vec&, const Vec&)> directional_derivative;

  Mat operator()(const Vec& y) const { return eval(y); }
  bool differentiable() const { return static_cast<bool>(directional_derivative); }
};

MatrixFieldFn constant_matrix_field(const Mat& a);
MatrixFieldFn identity_matrix_field(int dim);

/// Tensor midpoint rule on [-L, L]^m with per-node weights h^m, carrying
/// the weights P and Q = P^{-1} of the H_Q / X_P norms.
struct WeightedQuadrature {
  int dim = 0;
  double half_width = 0.0;
  int nodes_per_axis = 0;
  std::vector<Vec> nodes;
  std::vector<double> weights;
  MatrixFieldFn p_field;
  MatrixFieldFn q_field;

  double volume() const;
};

/// Defaults: L = 4, 64 nodes per axis, P = Q = I.
WeightedQuadrature make_midpoint_quadrature(int dim, double half_width = 4.0, int nodes_per_axis = 64);
WeightedQuadrature make_midpoint_quadrature(int dim, double half_width, int nodes_per_axis,
                                            const MatrixFieldFn& p, const MatrixFieldFn& q);

/// Evaluates `a` at every node (in parallel).
std::vector<Mat> sample_nodes(const MatrixFieldFn& a, std::span<const Vec> nodes);

/// J A J^T with J = dY(-s; Y(s;z)).
inline Mat push_forward(const Mat& a, const Mat& jacobian_inv) { return jacobian_inv * a * jacobian_inv.transpose(); }

/// (G(s)A)(z) = dY(-s;Y(s;z)) A(Y(s;z)) dY(-s;Y(s;z))^T.
MatrixFieldFn group_apply(double s, const MatrixFieldFn& a, const VectorFieldSpec& field,
                          const FlowIntegratorConfig& cfg);

/// |A|_Q = (sum_nodes w |Q^{1/2} A Q^{1/2}|_F^2)^{1/2}.
double hq_norm(const MatrixFieldFn& a, const WeightedQuadrature& quad);
/// max over nodes of |Q^{1/2} A Q^{1/2}|_F.
double hq_inf_norm(const MatrixFieldFn& a, const WeightedQuadrature& quad);
/// (A, B)_Q.
double hq_inner(const MatrixFieldFn& a, const MatrixFieldFn& b, const WeightedQuadrature& quad);
/// (sum_nodes w P w.w)^{1/2}; `w` holds one vector per quadrature node.
double xp_norm(std::span<const Vec> w, const WeightedQuadrature& quad);

/// Q^{1/2} at every node; throws WeightMatrixError naming the first bad node.
std::vector<Mat> weight_sqrt_at_nodes(const WeightedQuadrature& quad);

/// [b, A](y) = (b.grad)A - db A - A db^T.
Mat lie_bracket_matrix(const VectorFieldSpec& b, const MatrixFieldFn& a, const Vec& y);

struct GeneratorResidual {
  double l2 = 0.0;        // H_Q norm of the residual field
  double max_node = 0.0;  // max node-wise Frobenius norm
};

/// Residual of L(C) = target with the central difference
/// L_fd(C) = (G(h)C - G(-h)C) / (2h).
GeneratorResidual generator_residual(const MatrixFieldFn& target, const MatrixFieldFn& c,
                                     const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double h,
                                     const WeightedQuadrature& quad);

}  // namespace stiffavg
