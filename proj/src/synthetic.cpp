#include "omnisweep/synthetic.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "omnisweep/errors.hpp"

namespace omnisweep::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint32_t hash3(std::int64_t x, std::int64_t y, std::int64_t z, std::uint32_t seed) {
  std::uint64_t h = seed * 0x9E3779B97F4A7C15ull;
  h ^= static_cast<std::uint64_t>(x) * 0xBF58476D1CE4E5B9ull;
  h = (h ^ (h >> 31)) * 0x94D049BB133111EBull;
  h ^= static_cast<std::uint64_t>(y) * 0xD6E8FEB86659FD93ull;
  h = (h ^ (h >> 29)) * 0xBF58476D1CE4E5B9ull;
  h ^= static_cast<std::uint64_t>(z) * 0x94D049BB133111EBull;
  h = (h ^ (h >> 32)) * 0xD6E8FEB86659FD93ull;
  return static_cast<std::uint32_t>(h >> 32);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Eigen::Vector3d& p, std::uint32_t seed) {
  const double fx = std::floor(p.x());
  const double fy = std::floor(p.y());
  const double fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = smooth(p.x() - fx);
  const double ty = smooth(p.y() - fy);
  const double tz = smooth(p.z() - fz);
  auto corner = [&](int dx, int dy, int dz) { return hash3(ix + dx, iy + dy, iz + dz, seed) / 4294967295.0; };
  const double x00 = corner(0, 0, 0) + tx * (corner(1, 0, 0) - corner(0, 0, 0));
  const double x10 = corner(0, 1, 0) + tx * (corner(1, 1, 0) - corner(0, 1, 0));
  const double x01 = corner(0, 0, 1) + tx * (corner(1, 0, 1) - corner(0, 0, 1));
  const double x11 = corner(0, 1, 1) + tx * (corner(1, 1, 1) - corner(0, 1, 1));
  const double y0 = x00 + ty * (x10 - x00);
  const double y1 = x01 + ty * (x11 - x01);
  return y0 + tz * (y1 - y0);
}

// Smallest t > eps with |o_xz + t d_xz - c_xz| = r.
double vertical_cylinder(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double cx, double cz, double r) {
  const double ox = o.x() - cx;
  const double oz = o.z() - cz;
  const double a = d.x() * d.x() + d.z() * d.z();
  if (a < 1e-18) return kInf;
  const double b = ox * d.x() + oz * d.z();
  const double c = ox * ox + oz * oz - r * r;
  const double disc = b * b - a * c;
  if (disc < 0.0) return kInf;
  const double s = std::sqrt(disc);
  const double t0 = (-b - s) / a;
  const double t1 = (-b + s) / a;
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return kInf;
}

}  // namespace

float Texture::operator()(const Eigen::Vector3d& p) const {
  double sum = 0.0;
  double amp = 1.0;
  double norm = 0.0;
  double freq = frequency;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(p * freq, seed + 101u * o);
    norm += amp;
    amp *= gain;
    freq *= 2.0;
  }
  return static_cast<float>(sum / norm);
}

double SphereScene::intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
  const double b = origin.dot(dir);
  const double c = origin.squaredNorm() - radius_ * radius_;
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  const double t = -b + std::sqrt(disc);
  return t > 0.0 ? t : kInf;
}

float SphereScene::surface_value(const Eigen::Vector3d& dir) const { return texture_(dir.normalized()); }

float SphereScene::radiance(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
  const double t = intersect(origin, dir);
  if (std::isinf(t)) return 0.0f;
  return surface_value(origin + t * dir);
}

RoomScene::RoomScene(RoomConfig config) : config_(std::move(config)) {
  if (!(config_.wall_radius > 0.0 && config_.wall_top > config_.floor_y)) throw InputError("invalid room geometry");
}

double RoomScene::intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
  double best = kInf;
  if (dir.y() < 0.0) best = (config_.floor_y - origin.y()) / dir.y();
  auto consider = [&](double t) {
    if (t < best) {
      const double y = origin.y() + t * dir.y();
      if (y >= config_.floor_y && y <= config_.wall_top) best = t;
    }
  };
  consider(vertical_cylinder(origin, dir, 0.0, 0.0, config_.wall_radius));
  for (const Column& c : config_.columns) consider(vertical_cylinder(origin, dir, c.x, c.z, c.radius));
  return best;
}

float RoomScene::radiance(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
  const double t = intersect(origin, dir);
  if (std::isinf(t)) return config_.sky(dir.normalized() * 1.7);
  return config_.texture(origin + t * dir);
}

RoomConfig default_room() { return RoomConfig{}; }

std::vector<Column> default_columns() {
  const double azimuths_deg[] = {20.0, 95.0, 160.0, 235.0, 300.0};
  const double distances[] = {2.0, 1.8, 2.2, 1.9, 2.1};
  std::vector<Column> columns;
  for (int i = 0; i < 5; ++i) {
    const double a = azimuths_deg[i] * kPi / 180.0;
    columns.push_back({distances[i] * std::cos(a), distances[i] * std::sin(a), 0.25});
  }
  return columns;
}

FisheyeIntrinsics make_intrinsics(double focal, ImageSize size, double fov_deg, const AffineMap* affine) {
  const std::vector<double> poly = {focal, 0.0, -1.0 / (3.0 * focal), 0.0, -1.0 / (45.0 * focal * focal * focal)};
  AffineMap a{1.0, 0.0, 0.0, (size.width - 1) / 2.0, (size.height - 1) / 2.0};
  if (affine) a = *affine;
  return FisheyeIntrinsics(poly, a, size, fov_deg);
}

std::vector<Pose> square_rig(double radius) {
  std::vector<Pose> poses;
  for (int i = 0; i < 4; ++i) {
    const double a = i * kPi / 2.0;
    const Eigen::Vector3d forward(std::cos(a), 0.0, std::sin(a));
    const Eigen::Vector3d down(0.0, -1.0, 0.0);
    const Eigen::Vector3d right = down.cross(forward);
    Eigen::Matrix3d rot;
    rot.row(0) = right.transpose();
    rot.row(1) = down.transpose();
    rot.row(2) = forward.transpose();
    const Eigen::Vector3d center = radius * forward;
    poses.push_back(Pose::from_matrix(rot, -rot * center));
  }
  return poses;
}

std::vector<Pose> to_camera0_frame(const std::vector<Pose>& scene_to_camera) {
  if (scene_to_camera.empty()) return {};
  const Pose camera0_to_scene = invert(scene_to_camera[0]);
  std::vector<Pose> out;
  for (const Pose& p : scene_to_camera) out.push_back(compose(p, camera0_to_scene));
  out[0] = Pose::identity();
  return out;
}

Image render_fisheye(const Scene& scene, const FisheyeIntrinsics& intr, const Pose& scene_to_camera,
                     int supersample) {
  if (supersample < 1) throw InputError("supersample must be >= 1");
  const ImageSize size = intr.image_size();
  Image out(size.width, size.height);
  const Eigen::Matrix3d camera_to_scene = scene_to_camera.rotation().transpose();
  const Eigen::Vector3d center = -(camera_to_scene * scene_to_camera.t);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      if (!unproject(PixelPoint(x, y), intr).valid) continue;
      double sum = 0.0;
      for (int sy = 0; sy < supersample; ++sy) {
        for (int sx = 0; sx < supersample; ++sx) {
          const PixelPoint p(x + (sx + 0.5) / supersample - 0.5, y + (sy + 0.5) / supersample - 0.5);
          const Eigen::Vector3d dir = camera_to_scene * unproject(p, intr).ray;
          sum += scene.radiance(center, dir);
        }
      }
      out.at(x, y) = static_cast<float>(sum / (supersample * supersample));
    }
  }
  return out;
}

InverseDepthMap ground_truth_depth(const Scene& scene, const SphereGrid& grid) {
  grid.validate();
  std::vector<int> index(grid.pixels(), 0);
  Mask mask(grid.pixels(), 1);
  for (int row = 0; row < grid.height; ++row) {
    for (int col = 0; col < grid.width; ++col) {
      const double t = scene.intersect(Eigen::Vector3d::Zero(), ray_dir(grid.theta(col), grid.phi(row)));
      index[static_cast<std::size_t>(row) * grid.width + col] = std::isinf(t) ? 0 : nearest_sphere_index(t, grid);
    }
  }
  return make_inverse_depth_map(grid.width, grid.height, index, mask, grid);
}

CalibrationScenario make_calibration_scenario(const CalibrationScenarioConfig& config) {
  CalibrationScenario s;
  s.board = {12, 10, 0.06};
  std::mt19937 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::vector<Pose> scene_poses = square_rig(config.rig_radius);
  s.camera_poses = to_camera0_frame(scene_poses);
  const ImageSize size = config.image_size;
  for (int i = 0; i < 4; ++i) {
    const AffineMap affine{1.0 + 0.002 * i, 0.0005 * (i - 1), 0.001 * (i - 1.5), (size.width - 1) / 2.0 + 3.0 * i - 4.0,
                           (size.height - 1) / 2.0 - 2.0 * i + 1.0};
    s.intrinsics.push_back(make_intrinsics(config.focal, size, 220.0, &affine));
  }

  const Pose scene_to_world = scene_poses[0];
  const Eigen::Vector3d board_center((s.board.cols - 1) * s.board.square_m / 2.0,
                                     (s.board.rows - 1) * s.board.square_m / 2.0, 0.0);
  const double heights[] = {-0.3, 0.05, 0.35};
  for (int k = 0; k < config.num_boards; ++k) {
    const double azimuth = 2.0 * kPi * (k + 0.5 + 0.2 * unit(rng)) / config.num_boards;
    const double distance = 1.4 + 0.2 * unit(rng);
    const Eigen::Vector3d position(distance * std::cos(azimuth), heights[k % 3], distance * std::sin(azimuth));
    const Eigen::Vector3d z_axis = position.normalized();
    const Eigen::Vector3d x_axis = Eigen::Vector3d::UnitY().cross(z_axis).normalized();
    const Eigen::Vector3d y_axis = z_axis.cross(x_axis);
    Eigen::Matrix3d facing;
    facing << x_axis, y_axis, z_axis;
    const Eigen::Vector3d tilt(0.25 * unit(rng), 0.25 * unit(rng), 0.5 * unit(rng));
    const Eigen::Matrix3d rot = facing * rotation_from_axis_angle(tilt);
    const Pose board_to_scene = Pose::from_matrix(rot, position - rot * board_center);
    s.board_poses[k] = compose(scene_to_world, board_to_scene);
  }

  for (int i = 0; i < 4; ++i) {
    for (const auto& [k, board_to_world] : s.board_poses) {
      const Pose board_to_camera = compose(s.camera_poses[i], board_to_world);
      if (!(invert(board_to_camera).t.z() < 0.0)) continue;
      ObservationRecord record{i, k, {}};
      bool all_visible = true;
      for (int id = 0; id < s.board.corner_count() && all_visible; ++id) {
        const Projection p = project(board_to_camera.apply(s.board.corner(id)), s.intrinsics[i]);
        if (!p.valid) {
          all_visible = false;
          break;
        }
        record.corners.push_back({id, p.pixel});
      }
      if (!all_visible) continue;
      if (config.noise_px > 0.0) {
        for (CornerObservation& c : record.corners) {
          const double nx = noise(rng);
          const double ny = noise(rng);
          c.pixel += config.noise_px * PixelPoint(nx, ny);
        }
      }
      s.observations.records.push_back(std::move(record));
    }
  }
  return s;
}

FisheyeIntrinsics perturb_intrinsics(const FisheyeIntrinsics& intr, double scale, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> poly = intr.poly();
  for (std::size_t j = 0; j < poly.size(); ++j) {
    if (j != 1) poly[j] *= 1.0 + scale * unit(rng);
  }
  AffineMap a = intr.affine();
  a.c *= 1.0 + 0.1 * scale * unit(rng);
  a.e += 0.1 * scale * unit(rng);
  a.cx += 400.0 * scale * unit(rng);
  a.cy += 400.0 * scale * unit(rng);
  return FisheyeIntrinsics(poly, a, intr.image_size(), intr.fov_deg());
}

}  // namespace omnisweep::synth
