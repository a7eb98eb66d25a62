#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "omnisweep/camera_model.hpp"
#include "omnisweep/image.hpp"
#include "omnisweep/matching_cost.hpp"
#include "omnisweep/pose.hpp"
#include "omnisweep/sgm_depth.hpp"
#include "omnisweep/sphere_sweep.hpp"

namespace omnisweep {

inline constexpr std::uint32_t kOcsvVersion = 1;
inline constexpr std::uint32_t kOsphVersion = 1;
inline constexpr int kRigFileVersion = 1;

// Raw OCSV contents: "OCSV", u32 version, u32 W, H, N, then W*H*N
// little-endian float32 (n-major, row-major) and W*H*N validity bytes.
struct OcsvData {
  int width = 0;
  int height = 0;
  int num_slices = 0;
  std::vector<float> data;
  Mask mask;
};

void write_ocsv(const std::filesystem::path& path, const OcsvData& ocsv);
OcsvData read_ocsv(const std::filesystem::path& path);

void write_cost_volume(const std::filesystem::path& path, const CostVolume& volume);
// Also checks valid costs lie in [0, 1].
CostVolume read_cost_volume(const std::filesystem::path& path);

// "OSPH", u32 version, u32 W, H, camera, sphere, float32 payload, validity
// bytes.
void write_osph(const std::filesystem::path& path, const SphericalImage& image);
SphericalImage read_osph(const std::filesystem::path& path);

struct RigFile {
  std::vector<FisheyeIntrinsics> intrinsics;
  // World (camera 0) to camera i.
  std::vector<Pose> camera_poses;
  std::optional<RigFrame> rig_frame;
};

void write_rig_file(const std::filesystem::path& path, const RigFile& rig);
RigFile read_rig_file(const std::filesystem::path& path);

// Grid parameters as a JSON document.
void write_grid_json(const std::filesystem::path& path, const SphereGrid& grid);
SphereGrid read_grid_json(const std::filesystem::path& path);

// Depth maps: OCSV with N = 1 holding the sphere index as float, plus a
// "<path>.json" sidecar with the grid.
void write_depth_map(const std::filesystem::path& path, const InverseDepthMap& depth, const SphereGrid& grid);
InverseDepthMap read_depth_map(const std::filesystem::path& path, SphereGrid* grid = nullptr);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

struct CloudPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  float intensity = 0.0f;
};

using PointCloud = std::vector<CloudPoint>;

// PLY with double x, y, z and float intensity, ASCII or binary little-endian.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, bool binary);
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace omnisweep
