#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "omnisweep/camera_model.hpp"
#include "omnisweep/image.hpp"
#include "omnisweep/pose.hpp"
#include "omnisweep/rig_calibration.hpp"
#include "omnisweep/sgm_depth.hpp"
#include "omnisweep/sphere_sweep.hpp"

// Analytic scenes and rigs for tests, benchmarks and the `synth` command.
// Scene frame: y up, cameras at height 0, rig centered on the origin.
namespace omnisweep::synth {

// Fractal 3D value noise in [0, 1].
struct Texture {
  double frequency = 4.0;
  int octaves = 3;
  double gain = 0.5;
  std::uint32_t seed = 1;

  float operator()(const Eigen::Vector3d& p) const;
};

class Scene {
 public:
  virtual ~Scene() = default;
  // Distance along the unit direction to the first surface; +inf for sky.
  virtual double intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const = 0;
  // Radiance seen along the ray.
  virtual float radiance(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const = 0;
};

// Textured sphere centered on the origin; the texture is a function of the
// surface direction.
class SphereScene : public Scene {
 public:
  SphereScene(double radius, Texture texture) : radius_(radius), texture_(texture) {}
  double intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const override;
  float radiance(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const override;
  // Texture value at the surface point in direction `dir` from the center.
  float surface_value(const Eigen::Vector3d& dir) const;
  double radius() const { return radius_; }

 private:
  double radius_;
  Texture texture_;
};

struct Column {
  double x = 0.0;
  double z = 0.0;
  double radius = 0.2;
};

struct RoomConfig {
  double floor_y = -1.0;
  double wall_radius = 4.0;
  double wall_top = 1.5;
  std::vector<Column> columns;
  Texture texture{6.0, 4, 0.55, 7};
  Texture sky{5.0, 3, 0.5, 11};
};

// Floor, cylindrical wall, vertical columns and a sky at infinity above the
// wall.
class RoomScene : public Scene {
 public:
  explicit RoomScene(RoomConfig config);
  double intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const override;
  float radiance(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const override;
  const RoomConfig& config() const { return config_; }

 private:
  RoomConfig config_;
};

// Floor 1 m below the cameras, wall of radius 4 m up to 1.5 m, no columns.
RoomConfig default_room();
// Five columns of radius 0.25 m about 2 m from the center.
std::vector<Column> default_columns();

// Equidistant-like fisheye: poly = [F, 0, -1/(3F), 0, -1/(45F^3)], principal
// point at the image center.
FisheyeIntrinsics make_intrinsics(double focal, ImageSize size, double fov_deg = 220.0,
                                  const AffineMap* affine = nullptr);

// Four outward cameras on the axes at distance `radius` from the origin,
// camera i facing azimuth 90 * i degrees. Poses map scene to camera.
std::vector<Pose> square_rig(double radius);

// Calibration-world poses (camera 0 frame) from scene poses.
std::vector<Pose> to_camera0_frame(const std::vector<Pose>& scene_to_camera);

// Averages `supersample`^2 rays per pixel; pixels outside the FOV are 0.
Image render_fisheye(const Scene& scene, const FisheyeIntrinsics& intr, const Pose& scene_to_camera,
                     int supersample = 2);

// Depth along each grid ray from the scene origin, quantized to the nearest
// sphere index; sky pixels get index 0.
InverseDepthMap ground_truth_depth(const Scene& scene, const SphereGrid& grid);

struct CalibrationScenario {
  CheckerboardSpec board;
  std::vector<FisheyeIntrinsics> intrinsics;
  // World (camera 0) to camera i.
  std::vector<Pose> camera_poses;
  // Board k to world.
  std::map<int, Pose> board_poses;
  ObservationSet observations;
};

struct CalibrationScenarioConfig {
  int num_boards = 12;
  double noise_px = 0.0;
  std::uint32_t seed = 1;
  double focal = 370.0;
  ImageSize image_size{1600, 1532};
  double rig_radius = 0.1;
};

// Boards of 12 x 10 corners (60 mm) spread around the rig at 1.2 - 1.6 m,
// facing it. A board counts for a camera only when all corners project
// inside the image and the board faces the camera.
CalibrationScenario make_calibration_scenario(const CalibrationScenarioConfig& config);

// Intrinsics with the polynomial and principal point disturbed by roughly
// `scale` relative error, deterministic in `seed`.
FisheyeIntrinsics perturb_intrinsics(const FisheyeIntrinsics& intr, double scale, std::uint32_t seed);

}  // namespace omnisweep::synth
