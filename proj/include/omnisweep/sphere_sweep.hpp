#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "omnisweep/camera_model.hpp"
#include "omnisweep/image.hpp"
#include "omnisweep/pose.hpp"

namespace omnisweep {

// Inverse depth of sphere 0, the sphere at infinity.
inline constexpr double kInfinityInverseDepth = 1.0 / 8388608.0;  // 2^-23

/// Equirectangular sweep grid. Column w covers azimuth
///   theta(w) = -pi + ((w + seam_offset) mod W + 0.5) * 2pi / W
/// and row h (0 = top) covers elevation
///   phi(h) = phi_max - (h + 0.5) * (phi_max - phi_min) / H.
/// Sphere n has inverse depth n / (d_min (N - 1)), sphere 0 sits at infinity.
struct SphereGrid {
  int width = 0;
  int height = 0;
  int num_spheres = 0;
  double phi_min = 0.0;
  double phi_max = 0.0;
  double d_min = 1.0;
  // Shifts where the theta seam falls, in whole columns.
  int seam_offset = 0;

  void validate() const;
  double theta(int col) const;
  double phi(int row) const;
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  bool operator==(const SphereGrid&) const = default;
};

// (cos phi cos theta, sin phi, cos phi sin theta)
Eigen::Vector3d ray_dir(double theta, double phi);

double inverse_depth(int n, const SphereGrid& grid);

// Index whose inverse depth is closest to 1/depth (rounded, clamped to the
// grid). Infinite depth maps to 0.
int nearest_sphere_index(double depth, const SphereGrid& grid);

/// Rig-centered frame: origin at the camera-center centroid, y along the
/// normal of the least-squares plane through the centers (toward the
/// cameras' mean up direction), x along camera 0's forward axis projected
/// into that plane.
struct RigFrame {
  // Transform applied to rig-frame points to obtain camera-frame points.
  std::vector<Pose> camera_from_rig;
  // Rig origin and axes (columns x, y, z) in the calibration world frame.
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  // True when the plane was undefined and camera 0's axes were used.
  bool fallback = false;

  Eigen::Vector3d camera_center(int i) const;
};

// camera_poses: world to camera i.
RigFrame build_rig_frame(const std::vector<Pose>& camera_poses);

struct SphericalImage {
  int width = 0;
  int height = 0;
  int camera = 0;
  int sphere = 0;
  std::vector<float> data;
  Mask mask;

  SphericalImage() = default;
  SphericalImage(int w, int h, int cam = 0, int n = 0)
      : width(w), height(h), camera(cam), sphere(n), data(static_cast<std::size_t>(w) * h, 0.0f),
        mask(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t index(int col, int row) const { return static_cast<std::size_t>(row) * width + col; }
  std::size_t valid_count() const;
};

/// Bilinear lookups into a fisheye image. A sample is valid only when all
/// four neighbours lie inside the image and the FOV circle.
class FisheyeSampler {
 public:
  FisheyeSampler(const Image& image, const FisheyeIntrinsics& intr);

  bool sample(const PixelPoint& p, float& value) const;
  const Mask& fov_mask() const { return fov_mask_; }
  const Image& image() const { return image_; }

 private:
  const Image& image_;
  Mask fov_mask_;
};

/// Sample camera `camera_id` onto sphere n:
///   S(p) = I(project(camera_from_rig * ray_dir(p) / d_n)).
/// Invalid projections leave mask = 0 and value 0.
SphericalImage warp(const FisheyeSampler& sampler, const FisheyeIntrinsics& intr, const Pose& camera_from_rig,
                    int n, const SphereGrid& grid, int camera_id = 0);

SphericalImage warp(const Image& image, const FisheyeIntrinsics& intr, const Pose& camera_from_rig, int n,
                    const SphereGrid& grid, int camera_id = 0);

}  // namespace omnisweep
