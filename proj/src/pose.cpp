#include "omnisweep/pose.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <cmath>

namespace omnisweep {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& r) {
  const double angle = r.norm();
  if (angle < 1e-12) return Eigen::Matrix3d::Identity() + skew(r);
  return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  Eigen::Vector3d r = aa.angle() * aa.axis();
  // AngleAxis may return angles in (pi, 2pi] for some inputs.
  const double angle = r.norm();
  if (angle > M_PI) r *= (angle - 2.0 * M_PI) / angle;
  return r;
}

Eigen::Matrix3d rotate_jacobian(const Eigen::Vector3d& r, const Eigen::Vector3d& v) {
  const double angle_sq = r.squaredNorm();
  if (angle_sq < 1e-14) return -skew(v);
  const Eigen::Matrix3d rot = rotation_from_axis_angle(r);
  const Eigen::Matrix3d rs = skew(r);
  return -rot * skew(v) * (r * r.transpose() + (rot.transpose() - Eigen::Matrix3d::Identity()) * rs) /
         angle_sq;
}

Pose Pose::from_matrix(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  return {axis_angle_from_rotation(rotation), translation};
}

Eigen::Matrix3d Pose::rotation() const { return rotation_from_axis_angle(r); }

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation();
  m.topRightCorner<3, 1>() = t;
  return m;
}

Eigen::Vector3d Pose::apply(const Eigen::Vector3d& x) const { return rotation() * x + t; }

Pose compose(const Pose& a, const Pose& b) {
  const Eigen::Matrix3d ra = a.rotation();
  return Pose::from_matrix(ra * b.rotation(), ra * b.t + a.t);
}

Pose invert(const Pose& a) {
  const Eigen::Matrix3d rt = a.rotation().transpose();
  return Pose::from_matrix(rt, -rt * a.t);
}

Pose relative_pose(const Pose& theta_jk, const Pose& theta_ik) { return compose(theta_jk, invert(theta_ik)); }

double rotation_distance(const Pose& a, const Pose& b) {
  return axis_angle_from_rotation(a.rotation().transpose() * b.rotation()).norm();
}

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace omnisweep
