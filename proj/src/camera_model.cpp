#include "omnisweep/camera_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "omnisweep/errors.hpp"

namespace omnisweep {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRadiusTolerance = 1e-12;
constexpr int kMaxRootIterations = 50;
constexpr int kMonotonicitySamples = 1024;

}  // namespace

PixelPoint AffineMap::apply(const NormalizedPoint& x) const {
  return {c * x.x() + d * x.y() + cx, e * x.x() + x.y() + cy};
}

NormalizedPoint AffineMap::invert(const PixelPoint& p) const {
  const double du = p.x() - cx;
  const double dv = p.y() - cy;
  const double det = determinant();
  return {(du - d * dv) / det, (c * dv - e * du) / det};
}

FisheyeIntrinsics::FisheyeIntrinsics(std::vector<double> poly, AffineMap affine, ImageSize size,
                                     double fov_deg)
    : poly_(std::move(poly)), affine_(affine), size_(size), fov_deg_(fov_deg) {
  if (poly_.empty()) throw InputError("fisheye polynomial has no coefficients");
  for (double a : poly_) {
    if (!std::isfinite(a)) throw InputError("fisheye polynomial has a non-finite coefficient");
  }
  if (poly_.size() >= 2 && poly_[1] != 0.0) {
    throw InputError("fisheye polynomial coefficient a1 must be zero");
  }
  if (!(poly_[0] > 0.0)) {
    throw InputError("fisheye polynomial coefficient a0 must be positive (optical axis is +z)");
  }
  if (!(fov_deg > 0.0 && fov_deg < 360.0)) throw InputError("fov_deg must lie in (0, 360)");
  const double det = affine_.determinant();
  if (!std::isfinite(det) || det == 0.0) throw InputError("affine map is singular");
  if (size_.width < 1 || size_.height < 1) throw InputError("image size must be positive");

  half_fov_ = 0.5 * fov_deg_ * kPi / 180.0;

  double hi = poly_[0];
  int doublings = 0;
  while (incidence_angle(hi) < half_fov_) {
    hi *= 2.0;
    if (++doublings > 200) {
      std::ostringstream msg;
      msg << "fisheye polynomial never reaches half field of view " << 0.5 * fov_deg_ << " deg";
      throw InputError(msg.str());
    }
  }
  fov_radius_ = solve_radius_for_angle(*this, half_fov_, hi);

  double previous = incidence_angle(0.0);
  for (int i = 1; i <= kMonotonicitySamples; ++i) {
    const double rho = fov_radius_ * i / kMonotonicitySamples;
    const double angle = incidence_angle(rho);
    if (!(angle > previous)) {
      std::ostringstream msg;
      msg << "fisheye angle-radius map is not monotonic near radius " << rho;
      throw InputError(msg.str());
    }
    previous = angle;
  }
}

double FisheyeIntrinsics::ray_z(double rho) const {
  double value = 0.0;
  for (auto it = poly_.rbegin(); it != poly_.rend(); ++it) value = value * rho + *it;
  return value;
}

double FisheyeIntrinsics::ray_z_derivative(double rho) const {
  double value = 0.0;
  for (std::size_t j = poly_.size() - 1; j >= 1; --j) value = value * rho + j * poly_[j];
  return value;
}

double FisheyeIntrinsics::ray_z_derivative_over_rho(double rho) const {
  double value = 0.0;
  for (std::size_t j = poly_.size() - 1; j >= 2; --j) value = value * rho + j * poly_[j];
  return value;
}

double FisheyeIntrinsics::incidence_angle(double rho) const { return std::atan2(rho, ray_z(rho)); }

bool FisheyeIntrinsics::contains_pixel(const PixelPoint& p) const {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= size_.width - 1.0 && p.y() <= size_.height - 1.0;
}

double fov_radius(const FisheyeIntrinsics& intr) { return intr.fov_radius(); }

double solve_radius_for_angle(const FisheyeIntrinsics& intr, double angle, double upper) {
  if (angle <= 0.0) return 0.0;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  // g(rho) = |(rho, f)| * sin(theta(rho) - angle), so it changes sign at the root.
  auto g = [&](double rho) { return rho * ca - intr.ray_z(rho) * sa; };
  auto dg = [&](double rho) { return ca - intr.ray_z_derivative(rho) * sa; };

  double lo = 0.0;
  double hi = upper;
  if (g(hi) < 0.0) {
    std::ostringstream msg;
    msg << "radius bracket does not contain incidence angle " << angle << " rad";
    throw NumericError(msg.str());
  }
  double rho = hi * std::min(1.0, angle / intr.incidence_angle(hi));
  double step_before_last = hi - lo;
  double last_step = step_before_last;
  bool bisected = true;
  for (int it = 0; it < kMaxRootIterations; ++it) {
    const double value = g(rho);
    if (value == 0.0) return rho;
    if (value < 0.0) lo = rho;
    else hi = rho;

    const double slope = dg(rho);
    double next = rho - value / slope;
    if (slope != 0.0 && std::abs(next - rho) < kRadiusTolerance) return next;
    // Newton must stay inside the bracket; right after a bisection it may
    // take any such step, otherwise it has to shrink fast enough.
    const bool newton_ok = slope != 0.0 && std::isfinite(next) && next > lo && next < hi &&
                           (bisected || std::abs(next - rho) < 0.5 * std::abs(step_before_last));
    if (!newton_ok) next = 0.5 * (lo + hi);
    bisected = !newton_ok;
    step_before_last = last_step;
    last_step = next - rho;
    rho = next;
    if (std::abs(last_step) < kRadiusTolerance || hi - lo < kRadiusTolerance) return rho;
  }
  std::ostringstream msg;
  msg << "radius solve did not converge for incidence angle " << angle << " rad";
  throw NumericError(msg.str());
}

namespace {

// Radius for a camera-frame direction; NaN when the polynomial offers no
// root within twice the FOV radius.
double radius_for_point(const Eigen::Vector3d& point, const FisheyeIntrinsics& intr,
                        double* angle_out) {
  if (!point.allFinite()) throw InputError("project: non-finite point coordinates");
  const double lateral = std::hypot(point.x(), point.y());
  if (lateral == 0.0 && point.z() == 0.0) throw InputError("project: point at camera center");
  const double angle = std::atan2(lateral, point.z());
  *angle_out = angle;
  if (angle <= intr.half_fov_rad()) return solve_radius_for_angle(intr, angle, intr.fov_radius());
  const double extended = 2.0 * intr.fov_radius();
  if (intr.incidence_angle(extended) < angle) return std::numeric_limits<double>::quiet_NaN();
  return solve_radius_for_angle(intr, angle, extended);
}

}  // namespace

Projection project(const Eigen::Vector3d& point, const FisheyeIntrinsics& intr) {
  double angle = 0.0;
  const double rho = radius_for_point(point, intr, &angle);
  Projection out;
  if (std::isnan(rho)) {
    out.pixel = PixelPoint::Constant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  const double lateral = std::hypot(point.x(), point.y());
  NormalizedPoint x = NormalizedPoint::Zero();
  if (lateral > 0.0) x = NormalizedPoint(point.x(), point.y()) * (rho / lateral);
  out.pixel = intr.affine().apply(x);
  out.valid = angle <= intr.half_fov_rad() && intr.contains_pixel(out.pixel);
  return out;
}

Unprojection unproject(const PixelPoint& pixel, const FisheyeIntrinsics& intr) {
  const NormalizedPoint x = intr.affine().invert(pixel);
  const double rho = x.norm();
  Unprojection out;
  out.ray = Ray3(x.x(), x.y(), intr.ray_z(rho)).normalized();
  out.valid = rho <= intr.fov_radius();
  return out;
}

ProjectionJacobian project_with_jacobian(const Eigen::Vector3d& point, const FisheyeIntrinsics& intr) {
  double angle = 0.0;
  const double rho = radius_for_point(point, intr, &angle);
  const auto& poly = intr.poly();
  ProjectionJacobian out;
  out.d_poly.setZero(2, static_cast<Eigen::Index>(poly.size()));
  if (std::isnan(rho)) {
    out.pixel = PixelPoint::Constant(std::numeric_limits<double>::quiet_NaN());
    out.d_point.setZero();
    out.d_affine.setZero();
    return out;
  }

  const double px = point.x();
  const double py = point.y();
  const double pz = point.z();
  const double lateral = std::hypot(px, py);
  // Write the projection as x = k*X, y = k*Y where k solves
  //   H(k) = k*Z - f(k*s) = 0,  s = |(X, Y)|,
  // which stays smooth on the optical axis.
  double k = 0.0;
  if (lateral > 1e-8 * point.norm()) {
    k = rho / lateral;
  } else {
    k = poly[0] / pz;
    for (int it = 0; it < 3; ++it) {
      const double h = k * pz - intr.ray_z(k * lateral);
      const double hk = pz - lateral * intr.ray_z_derivative(k * lateral);
      k -= h / hk;
    }
  }
  const double r = k * lateral;
  const double q = intr.ray_z_derivative_over_rho(r);
  const double h_k = pz - k * lateral * lateral * q;
  const Eigen::RowVector3d h_point(-k * k * q * px, -k * k * q * py, k);
  const Eigen::RowVector3d dk_point = -h_point / h_k;

  const NormalizedPoint x(k * px, k * py);
  Eigen::Matrix<double, 2, 3> dx_point;
  dx_point.row(0) = px * dk_point;
  dx_point.row(1) = py * dk_point;
  dx_point(0, 0) += k;
  dx_point(1, 1) += k;

  const AffineMap& a = intr.affine();
  Eigen::Matrix2d affine_linear;
  affine_linear << a.c, a.d, a.e, 1.0;

  out.pixel = a.apply(x);
  out.valid = angle <= intr.half_fov_rad() && intr.contains_pixel(out.pixel);
  out.d_point = affine_linear * dx_point;

  double r_pow = 1.0;
  for (std::size_t j = 0; j < poly.size(); ++j) {
    if (j != 1) {
      // dH/da_j = -r^j
      const double dk = r_pow / h_k;
      const Eigen::Vector2d dx(px * dk, py * dk);
      out.d_poly.col(static_cast<Eigen::Index>(j)) = affine_linear * dx;
    }
    r_pow *= r;
  }

  out.d_affine << x.x(), x.y(), 0.0, 1.0, 0.0,
                  0.0, 0.0, x.x(), 0.0, 1.0;
  return out;
}

}  // namespace omnisweep
