#include "stiffavg/flow.hpp"

#include <cmath>
#include <sstream>

#include "stiffavg/errors.hpp"

namespace stiffavg {

namespace {

enum class Transport { forward, inverse };

// One classical RK4 step of the joint system
//   Y' = b(Y),  J' = db(Y) J       (forward)
//   Y' = b(Y),  K' = -K db(Y)      (inverse)
void rk4_step(const VectorFieldSpec& f, Transport mode, double h, Vec& y, Mat& m) {
  auto mat_rhs = [&](const Vec& pos, const Mat& mm) -> Mat {
    const Mat db = f.jacobian(pos);
    return mode == Transport::forward ? Mat(db * mm) : Mat(-(mm * db));
  };
  const Vec k1 = f.eval(y);
  const Mat l1 = mat_rhs(y, m);
  const Vec y2 = y + 0.5 * h * k1;
  const Mat m2 = m + 0.5 * h * l1;
  const Vec k2 = f.eval(y2);
  const Mat l2 = mat_rhs(y2, m2);
  const Vec y3 = y + 0.5 * h * k2;
  const Mat m3 = m + 0.5 * h * l2;
  const Vec k3 = f.eval(y3);
  const Mat l3 = mat_rhs(y3, m3);
  const Vec y4 = y + h * k3;
  const Mat m4 = m + h * l3;
  const Vec k4 = f.eval(y4);
  const Mat l4 = mat_rhs(y4, m4);
  y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  m += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
}

int substeps(double span, double step) {
  return std::max(1, static_cast<int>(std::ceil(std::abs(span) / step - 1e-12)));
}

// Integrates from flow time s0 to s0 + span in equal sub-steps of size <= step.
void integrate(const VectorFieldSpec& f, Transport mode, double step, double s0, double span, Vec& y,
               Mat& m) {
  if (span == 0.0) return;
  const int n = substeps(span, step);
  const double h = span / n;
  for (int k = 0; k < n; ++k) {
    rk4_step(f, mode, h, y, m);
    if (!y.allFinite() || !m.allFinite()) {
      std::ostringstream os;
      os << "flow integration produced a non-finite value at s=" << s0 + (k + 1) * h;
      throw IntegrationFailure(os.str(), s0 + (k + 1) * h);
    }
  }
}

void check_point(const VectorFieldSpec& field, const Vec& y) {
  if (y.size() != field.dim) throw DimensionMismatch("flow: point dimension does not match the field");
}

}  // namespace

void validate_config(const FlowIntegratorConfig& cfg, const VectorFieldSpec& field) {
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step)) throw ConfigurationError("flow: step must be > 0");
  if (!(cfg.tolerance > 0.0)) throw ConfigurationError("flow: tolerance must be > 0");
  if (cfg.method == FlowMethod::analytic && !field.has_closed_form()) {
    throw ConfigurationError("flow: analytic method requested for a field without a closed-form flow (" +
                             field.name + ")");
  }
  if (!field.eval || !field.jacobian) throw ConfigurationError("flow: field lacks eval/jacobian");
}

FlowSample flow_map(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double s, const Vec& y) {
  check_point(field, y);
  if (!std::isfinite(s)) throw InvalidParameter("flow: flow time must be finite");
  if (s == 0.0) return {y, Mat::Identity(field.dim, field.dim)};
  if (cfg.method == FlowMethod::analytic) {
    validate_config(cfg, field);
    return field.closed_form_flow(s, y);
  }
  FlowSample out{y, Mat::Identity(field.dim, field.dim)};
  integrate(field, Transport::forward, cfg.step, 0.0, s, out.position, out.jacobian);
  return out;
}

FlowResult flow_advance(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double s, const Vec& y) {
  validate_config(cfg, field);
  FlowResult r;
  r.s = s;
  r.y0 = y;
  const FlowSample fwd = flow_map(field, cfg, s, y);
  r.position = fwd.position;
  r.jacobian = fwd.jacobian;
  r.jacobian_inv = flow_map(field, cfg, -s, fwd.position).jacobian;
  r.det_jacobian = s == 0.0 ? 1.0 : r.jacobian.partialPivLu().determinant();
  return r;
}

double flow_group_check(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, double s, double t,
                        const Vec& y) {
  const Vec inner = flow_map(field, cfg, t, y).position;
  const Vec composed = flow_map(field, cfg, s, inner).position;
  const Vec direct = flow_map(field, cfg, s + t, y).position;
  return (composed - direct).norm();
}

double periodicity_residual(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, const Vec& y) {
  if (!field.period) throw ConfigurationError("periodicity_residual: field has no declared period");
  return (flow_map(field, cfg, *field.period, y).position - y).norm();
}

void sweep_orbit(const VectorFieldSpec& field, const FlowIntegratorConfig& cfg, const Vec& y, double start,
                 double spacing, int count, const std::function<void(const OrbitPoint&)>& visit) {
  check_point(field, y);
  if (count <= 0) return;
  if (cfg.method == FlowMethod::analytic) {
    validate_config(cfg, field);
    for (int k = 0; k < count; ++k) {
      const double s = start + k * spacing;
      const FlowSample fs = field.closed_form_flow(s, y);
      const FlowSample back = field.closed_form_flow(-s, fs.position);
      visit({s, fs.position, back.jacobian});
    }
    return;
  }
  Vec pos = y;
  Mat kinv = Mat::Identity(field.dim, field.dim);
  integrate(field, Transport::inverse, cfg.step, 0.0, start, pos, kinv);
  double s = start;
  for (int k = 0; k < count; ++k) {
    if (k > 0) {
      integrate(field, Transport::inverse, cfg.step, s, spacing, pos, kinv);
      s = start + k * spacing;
    }
    visit({s, pos, kinv});
  }
}

}  // namespace stiffavg
