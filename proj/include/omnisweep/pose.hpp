#pragma once

#include <Eigen/Core>

namespace omnisweep {

/// Rigid transform as axis-angle rotation r (radians * axis) and translation
/// t (meters). Applying the pose maps x to R(r) x + t.
struct Pose {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_matrix(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  Eigen::Matrix3d rotation() const;
  Eigen::Matrix4d matrix() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const;
};

Eigen::Matrix3d rotation_from_axis_angle(const Eigen::Vector3d& r);
// Result has norm in [0, pi].
Eigen::Vector3d axis_angle_from_rotation(const Eigen::Matrix3d& rotation);

// d(R(r) v)/dr, 3x3.
Eigen::Matrix3d rotate_jacobian(const Eigen::Vector3d& r, const Eigen::Vector3d& v);

// M(compose(a, b)) = M(a) M(b)
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& a);

// Relative transform from camera i to camera j given both cameras' views of
// the same capture: theta_jk * theta_ik^-1.
Pose relative_pose(const Pose& theta_jk, const Pose& theta_ik);

double rotation_distance(const Pose& a, const Pose& b);

// Closest rotation to the sum of the given rotations (chordal L2 mean).
Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m);

}  // namespace omnisweep
