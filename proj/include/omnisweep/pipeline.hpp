#pragma once

#include <filesystem>
#include <vector>

#include "omnisweep/camera_model.hpp"
#include "omnisweep/formats.hpp"
#include "omnisweep/image.hpp"
#include "omnisweep/matching_cost.hpp"
#include "omnisweep/sgm_depth.hpp"
#include "omnisweep/sphere_sweep.hpp"

namespace omnisweep {

struct DepthPipelineConfig {
  SphereGrid grid;
  int window = 9;
  SgmParams sgm;
  // Empty pairs means all pairs.
  PairSelection pairs;
  int threads = 1;
  // Zero mean / unit variance per image over its FOV before warping.
  bool normalize = true;
};

struct DepthPipelineResult {
  CostVolume cost;
  CostVolume aggregated;
  InverseDepthMap depth;
};

// Per-image normalization over each camera's FOV mask.
std::vector<Image> normalize_inputs(const std::vector<Image>& images, const std::vector<FisheyeIntrinsics>& intrinsics);

DepthPipelineResult estimate_depth(const std::vector<Image>& images, const std::vector<FisheyeIntrinsics>& intrinsics,
                                   const RigFrame& rig, const DepthPipelineConfig& config);

struct Panorama {
  Image image;
  Mask mask;
};

/// Samples, for each grid pixel, the camera whose center is nearest to the
/// reconstructed point ray(p) / d_n among those that see it. Index 0 pixels
/// use the ray direction only and the camera viewing it most head-on.
Panorama render_panorama(const InverseDepthMap& depth, const std::vector<Image>& images,
                         const std::vector<FisheyeIntrinsics>& intrinsics, const RigFrame& rig,
                         const SphereGrid& grid);

// Rig-frame points of valid, finite-depth pixels in row-major order.
// `intensity` (grid sized) is optional.
PointCloud depth_to_point_cloud(const InverseDepthMap& depth, const SphereGrid& grid, const Image* intensity = nullptr);

void export_point_cloud(const std::filesystem::path& path, const InverseDepthMap& depth, const SphereGrid& grid,
                        const Image* intensity = nullptr, bool binary = true);

}  // namespace omnisweep
