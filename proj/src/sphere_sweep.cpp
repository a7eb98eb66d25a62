#include "omnisweep/sphere_sweep.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "omnisweep/errors.hpp"

namespace omnisweep {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void SphereGrid::validate() const {
  if (width < 1 || height < 1 || num_spheres < 1) throw InputError("sphere grid dimensions must be >= 1");
  if (!(phi_min >= -kPi / 2 && phi_min < phi_max && phi_max <= kPi / 2)) {
    throw InputError("sphere grid needs -pi/2 <= phi_min < phi_max <= pi/2");
  }
  if (!(d_min > 0.0)) throw InputError("sphere grid minimum depth must be positive");
}

double SphereGrid::theta(int col) const {
  const int wrapped = ((col + seam_offset) % width + width) % width;
  return -kPi + (wrapped + 0.5) * (2.0 * kPi / width);
}

double SphereGrid::phi(int row) const { return phi_max - (row + 0.5) * (phi_max - phi_min) / height; }

Eigen::Vector3d ray_dir(double theta, double phi) {
  const double cp = std::cos(phi);
  return {cp * std::cos(theta), std::sin(phi), cp * std::sin(theta)};
}

double inverse_depth(int n, const SphereGrid& grid) {
  if (n < 0 || n >= grid.num_spheres) {
    std::ostringstream msg;
    msg << "sphere index " << n << " outside [0, " << grid.num_spheres << ")";
    throw InputError(msg.str());
  }
  if (n == 0) return kInfinityInverseDepth;
  return n / (grid.d_min * (grid.num_spheres - 1));
}

int nearest_sphere_index(double depth, const SphereGrid& grid) {
  if (!(depth > 0.0)) throw InputError("depth must be positive");
  if (std::isinf(depth)) return 0;
  const double idx = std::round(grid.d_min * (grid.num_spheres - 1) / depth);
  return static_cast<int>(std::clamp(idx, 0.0, static_cast<double>(grid.num_spheres - 1)));
}

Eigen::Vector3d RigFrame::camera_center(int i) const {
  const Pose& p = camera_from_rig.at(i);
  return -(p.rotation().transpose() * p.t);
}

RigFrame build_rig_frame(const std::vector<Pose>& camera_poses) {
  if (camera_poses.empty()) throw InputError("rig frame needs at least one camera");
  const int n = static_cast<int>(camera_poses.size());

  std::vector<Eigen::Matrix3d> rotations;
  Eigen::MatrixXd centers(n, 3);
  Eigen::Vector3d mean_up = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    rotations.push_back(camera_poses[i].rotation());
    centers.row(i) = (-(rotations[i].transpose() * camera_poses[i].t)).transpose();
    mean_up -= rotations[i].row(1).transpose();  // camera y points down
  }

  RigFrame frame;
  frame.origin = centers.colwise().mean().transpose();
  const Eigen::MatrixXd centered = centers.rowwise() - frame.origin.transpose();

  Eigen::Vector3d y_axis;
  bool defined = false;
  if (n >= 2) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double largest = sv(0);
    if (largest > 1e-9) {
      if (sv.size() >= 2 && sv(1) > 1e-9 * largest) {
        y_axis = svd.matrixV().col(2);
        defined = true;
      } else {
        // Collinear centers: any plane through the line fits, take the one
        // closest to the cameras' up direction.
        const Eigen::Vector3d line = svd.matrixV().col(0);
        y_axis = mean_up - mean_up.dot(line) * line;
        defined = y_axis.norm() > 1e-9;
      }
    }
  }

  const Eigen::Matrix3d& r0 = rotations[0];
  if (defined) {
    y_axis.normalize();
    if (y_axis.dot(mean_up) < 0.0) y_axis = -y_axis;
    Eigen::Vector3d x_axis = r0.row(2).transpose();
    x_axis -= x_axis.dot(y_axis) * y_axis;
    if (x_axis.norm() < 1e-6) {
      x_axis = r0.row(0).transpose();
      x_axis -= x_axis.dot(y_axis) * y_axis;
    }
    x_axis.normalize();
    frame.axes.col(0) = x_axis;
    frame.axes.col(1) = y_axis;
    frame.axes.col(2) = x_axis.cross(y_axis);
  } else {
    frame.fallback = true;
    frame.axes = r0.transpose();
  }

  const Eigen::Matrix3d world_from_rig = frame.axes;
  for (int i = 0; i < n; ++i) {
    const Eigen::Matrix3d rot = rotations[i] * world_from_rig;
    const Eigen::Vector3d trans = rotations[i] * frame.origin + camera_poses[i].t;
    frame.camera_from_rig.push_back(Pose::from_matrix(rot, trans));
  }
  return frame;
}

std::size_t SphericalImage::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

FisheyeSampler::FisheyeSampler(const Image& image, const FisheyeIntrinsics& intr) : image_(image) {
  const ImageSize& size = intr.image_size();
  if (image.width() != size.width || image.height() != size.height) {
    std::ostringstream msg;
    msg << "image is " << image.width() << "x" << image.height() << " but intrinsics expect " << size.width << "x"
        << size.height;
    throw InputError(msg.str());
  }
  fov_mask_.assign(static_cast<std::size_t>(size.width) * size.height, 0);
  const double limit = intr.fov_radius();
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const double rho = intr.affine().invert(PixelPoint(x, y)).norm();
      fov_mask_[static_cast<std::size_t>(y) * size.width + x] = rho <= limit ? 1 : 0;
    }
  }
}

bool FisheyeSampler::sample(const PixelPoint& p, float& value) const {
  const int w = image_.width();
  const int h = image_.height();
  if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= w - 1.0 && p.y() <= h - 1.0)) return false;
  int x0 = static_cast<int>(std::floor(p.x()));
  int y0 = static_cast<int>(std::floor(p.y()));
  x0 = std::min(x0, std::max(w - 2, 0));
  y0 = std::min(y0, std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const auto in_fov = [&](int x, int y) { return fov_mask_[static_cast<std::size_t>(y) * w + x] != 0; };
  if (!in_fov(x0, y0) || !in_fov(x1, y0) || !in_fov(x0, y1) || !in_fov(x1, y1)) return false;
  const double fx = p.x() - x0;
  const double fy = p.y() - y0;
  const double top = (1.0 - fx) * image_.at(x0, y0) + fx * image_.at(x1, y0);
  const double bottom = (1.0 - fx) * image_.at(x0, y1) + fx * image_.at(x1, y1);
  value = static_cast<float>((1.0 - fy) * top + fy * bottom);
  return true;
}

SphericalImage warp(const FisheyeSampler& sampler, const FisheyeIntrinsics& intr, const Pose& camera_from_rig,
                    int n, const SphereGrid& grid, int camera_id) {
  grid.validate();
  const double d = inverse_depth(n, grid);
  const Eigen::Matrix3d rot = camera_from_rig.rotation();
  SphericalImage out(grid.width, grid.height, camera_id, n);
  for (int row = 0; row < grid.height; ++row) {
    const double phi = grid.phi(row);
    for (int col = 0; col < grid.width; ++col) {
      const Eigen::Vector3d point = rot * (ray_dir(grid.theta(col), phi) / d) + camera_from_rig.t;
      if (point.squaredNorm() == 0.0) continue;
      const Projection proj = project(point, intr);
      if (!proj.valid) continue;
      float value = 0.0f;
      if (!sampler.sample(proj.pixel, value)) continue;
      const std::size_t i = out.index(col, row);
      out.data[i] = value;
      out.mask[i] = 1;
    }
  }
  return out;
}

SphericalImage warp(const Image& image, const FisheyeIntrinsics& intr, const Pose& camera_from_rig, int n,
                    const SphereGrid& grid, int camera_id) {
  const FisheyeSampler sampler(image, intr);
  return warp(sampler, intr, camera_from_rig, n, grid, camera_id);
}

}  // namespace omnisweep
