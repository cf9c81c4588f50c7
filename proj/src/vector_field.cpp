#include "stiffavg/vector_field.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "stiffavg/errors.hpp"

namespace stiffavg {

namespace {

// Matrix of the rotation flow: Y(s;y) = rotation_matrix(-s) y.
Mat rotation_matrix(double s, double beta, double gamma) {
  const double w = std::sqrt(beta * gamma);
  const double c = std::cos(w * s);
  const double sn = std::sin(w * s);
  Mat r(2, 2);
  r << c, -std::sqrt(gamma / beta) * sn, std::sqrt(beta / gamma) * sn, c;
  return r;
}

Mat planar_rotation(double theta) {
  Mat r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace

VectorFieldSpec rotation_field(double beta, double gamma) {
  if (!(beta > 0.0) || !(gamma > 0.0) || !std::isfinite(beta) || !std::isfinite(gamma)) {
    std::ostringstream os;
    os << "rotation_field: beta and gamma must be positive (got beta=" << beta << ", gamma=" << gamma
       << ")";
    throw InvalidParameter(os.str());
  }
  Mat jac(2, 2);
  jac << 0.0, gamma, -beta, 0.0;

  VectorFieldSpec f;
  f.dim = 2;
  f.eval = [beta, gamma](const Vec& y) { return make_vec({gamma * y(1), -beta * y(0)}); };
  f.jacobian = [jac](const Vec&) { return jac; };
  f.divergence = [](const Vec&) { return 0.0; };
  f.growth_bound = std::max(beta, gamma);
  f.period = 2.0 * std::numbers::pi / std::sqrt(beta * gamma);
  f.kind = FieldKind::analytic_builtin;
  std::ostringstream name;
  name << "rotation(beta=" << beta << ",gamma=" << gamma << ")";
  f.name = name.str();
  f.closed_form_flow = [beta, gamma](double s, const Vec& y) {
    FlowSample out;
    out.jacobian = rotation_matrix(-s, beta, gamma);
    out.position = out.jacobian * y;
    return out;
  };
  return f;
}

VectorFieldSpec gyrokinetic_field(double omega_c) {
  if (omega_c == 0.0 || !std::isfinite(omega_c)) {
    throw InvalidParameter("gyrokinetic_field: omega_c must be a nonzero finite number");
  }
  Mat jac = Mat::Zero(6, 6);
  jac(0, 3) = 1.0;
  jac(1, 4) = 1.0;
  jac(3, 4) = omega_c;
  jac(4, 3) = -omega_c;

  VectorFieldSpec f;
  f.dim = 6;
  f.eval = [omega_c](const Vec& y) {
    Vec b = Vec::Zero(6);
    b(0) = y(3);
    b(1) = y(4);
    b(3) = omega_c * y(4);
    b(4) = -omega_c * y(3);
    return b;
  };
  f.jacobian = [jac](const Vec&) { return jac; };
  f.divergence = [](const Vec&) { return 0.0; };
  f.growth_bound = std::sqrt(1.0 + omega_c * omega_c);
  f.period = 2.0 * std::numbers::pi / std::abs(omega_c);
  f.kind = FieldKind::analytic_builtin;
  std::ostringstream name;
  name << "gyrokinetic(omega_c=" << omega_c << ")";
  f.name = name.str();

  // xbar(s) = xbar + (vperp - Rot(-wc s) vperp)/wc, vbar(s) = Rot(-wc s) vbar,
  // with vperp = (v2, -v1) = E vbar and E = Rot(-pi/2).
  f.closed_form_flow = [omega_c](double s, const Vec& y) {
    const Mat rot = planar_rotation(-omega_c * s);
    Mat exact_e(2, 2);
    exact_e << 0.0, 1.0, -1.0, 0.0;  // Rot(-pi/2) without cos(pi/2) round-off
    const Vec vbar = make_vec({y(3), y(4)});
    const Vec vperp = exact_e * vbar;

    FlowSample out;
    out.position = y;
    const Vec xshift = (vperp - rot * vperp) / omega_c;
    out.position(0) += xshift(0);
    out.position(1) += xshift(1);
    const Vec vnew = rot * vbar;
    out.position(3) = vnew(0);
    out.position(4) = vnew(1);

    out.jacobian = Mat::Identity(6, 6);
    const Mat dxdv = (Mat::Identity(2, 2) - rot) * exact_e / omega_c;
    out.jacobian.block(0, 3, 2, 2) = dxdv;
    out.jacobian.block(3, 3, 2, 2) = rot;
    return out;
  };
  return f;
}

VectorFieldSpec linear_field(const Mat& m, std::string name) {
  if (m.rows() != m.cols() || m.rows() < 1) throw DimensionMismatch("linear_field: matrix must be square");
  VectorFieldSpec f;
  f.dim = static_cast<int>(m.rows());
  f.eval = [m](const Vec& y) -> Vec { return m * y; };
  f.jacobian = [m](const Vec&) { return m; };
  const double tr = m.trace();
  f.divergence = [tr](const Vec&) { return tr; };
  f.growth_bound = m.norm();
  f.name = std::move(name);
  return f;
}

VectorFieldSpec constant_field(const Vec& c, std::string name) {
  VectorFieldSpec f;
  f.dim = static_cast<int>(c.size());
  f.eval = [c](const Vec&) { return c; };
  const int dim = f.dim;
  f.jacobian = [dim](const Vec&) -> Mat { return Mat::Zero(dim, dim); };
  f.divergence = [](const Vec&) { return 0.0; };
  f.growth_bound = c.norm();
  f.name = std::move(name);
  return f;
}

Vec lie_bracket_vectors(const VectorFieldSpec& a, const VectorFieldSpec& c, const Vec& y) {
  if (a.dim != c.dim || y.size() != a.dim) {
    throw DimensionMismatch("lie_bracket_vectors: field dimensions disagree");
  }
  return c.jacobian(y) * a.eval(y) - a.jacobian(y) * c.eval(y);
}

FrameSpec make_frame(std::vector<VectorFieldSpec> fields) {
  if (fields.empty()) throw InvalidParameter("make_frame: empty frame");
  const int dim = fields.front().dim;
  if (static_cast<int>(fields.size()) != dim) {
    throw DimensionMismatch("make_frame: a frame needs exactly dim fields");
  }
  for (const auto& f : fields) {
    if (f.dim != dim) throw DimensionMismatch("make_frame: frame fields of different dimension");
  }
  FrameSpec frame;
  frame.fields = std::move(fields);
  auto cols = frame.fields;
  frame.r_inverse = [cols, dim](const Vec& y) {
    Mat ri(dim, dim);
    for (int j = 0; j < dim; ++j) ri.col(j) = cols[static_cast<std::size_t>(j)].eval(y);
    return ri;
  };
  auto rinv = frame.r_inverse;
  frame.r = [rinv](const Vec& y) -> Mat { return rinv(y).inverse(); };
  frame.q = [rinv](const Vec& y) -> Mat {
    const Mat r = rinv(y).inverse();
    return r.transpose() * r;
  };
  frame.p = [rinv](const Vec& y) -> Mat {
    const Mat ri = rinv(y);
    return ri * ri.transpose();
  };
  return frame;
}

FrameSpec rotation_frame(double beta, double gamma) {
  if (!(beta > 0.0) || !(gamma > 0.0)) throw InvalidParameter("rotation_frame: beta, gamma > 0");
  Mat gen(2, 2);
  gen << 0.0, gamma, -beta, 0.0;
  return make_frame({linear_field(Mat::Identity(2, 2), "euler"), linear_field(gen, "rotation")});
}

Mat rotation_invariant_weight(double beta, double gamma) {
  if (!(beta > 0.0) || !(gamma > 0.0)) throw InvalidParameter("rotation_invariant_weight: beta, gamma > 0");
  Mat p = Mat::Zero(2, 2);
  const double scale = std::sqrt(beta * gamma);
  p(0, 0) = gamma / scale;
  p(1, 1) = beta / scale;
  return p;
}

std::vector<Vec> sample_points(int dim, double half_width, int lattice_per_axis, int n_random,
                               std::uint64_t seed) {
  if (dim < 1 || dim > kMaxDim) throw InvalidParameter("sample_points: unsupported dimension");
  std::vector<Vec> pts;
  if (dim <= 2 && lattice_per_axis > 0) {
    const double h = 2.0 * half_width / lattice_per_axis;
    if (dim == 1) {
      for (int i = 0; i < lattice_per_axis; ++i) pts.push_back(make_vec({-half_width + (i + 0.5) * h}));
    } else {
      for (int j = 0; j < lattice_per_axis; ++j)
        for (int i = 0; i < lattice_per_axis; ++i)
          pts.push_back(make_vec({-half_width + (i + 0.5) * h, -half_width + (j + 0.5) * h}));
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-half_width, half_width);
  for (int k = 0; k < n_random; ++k) {
    Vec y(dim);
    for (int d = 0; d < dim; ++d) y(d) = uni(rng);
    pts.push_back(y);
  }
  return pts;
}

FieldValidation validate_field(const VectorFieldSpec& field, const std::vector<Vec>& points) {
  FieldValidation rep;
  for (const Vec& y : points) {
    const double gap = std::abs(field.divergence(y) - field.jacobian(y).trace());
    rep.max_div_trace_gap = std::max(rep.max_div_trace_gap, gap);
    const double mag = field.eval(y).norm() / (1.0 + y.norm());
    const double ratio = field.growth_bound > 0.0 ? mag / field.growth_bound : (mag > 0.0 ? INFINITY : 0.0);
    rep.max_growth_ratio = std::max(rep.max_growth_ratio, ratio);
  }
  if (rep.max_div_trace_gap > 1e-10) {
    rep.ok = false;
    rep.failures.push_back("divergence disagrees with trace(jacobian)");
  }
  if (rep.max_growth_ratio > 1.0 + 1e-12) {
    rep.ok = false;
    rep.failures.push_back("growth bound violated");
  }
  return rep;
}

FrameValidation validate_frame(const VectorFieldSpec& b, const FrameSpec& frame,
                               const std::vector<Vec>& points, double involution_tol) {
  FrameValidation rep;
  rep.min_abs_det = INFINITY;
  for (const Vec& y : points) {
    rep.min_abs_det = std::min(rep.min_abs_det, std::abs(frame.r_inverse(y).determinant()));
    const Mat p = frame.p(y);
    const Mat q = frame.q(y);
    const Mat id = Mat::Identity(b.dim, b.dim);
    rep.max_pq_residual = std::max(rep.max_pq_residual, (p * q - id).cwiseAbs().maxCoeff());
    for (const auto& bi : frame.fields) {
      rep.max_involution_residual = std::max(rep.max_involution_residual, lie_bracket_vectors(b, bi, y).norm());
    }
  }
  if (!(rep.min_abs_det > 0.0)) {
    rep.ok = false;
    rep.failures.push_back("frame is singular on the sample set");
  }
  if (rep.max_pq_residual > 1e-10) {
    rep.ok = false;
    rep.failures.push_back("P*Q != I");
  }
  if (rep.max_involution_residual > involution_tol) {
    rep.ok = false;
    rep.failures.push_back("frame fields are not in involution with b");
  }
  return rep;
}

}  // namespace stiffavg
