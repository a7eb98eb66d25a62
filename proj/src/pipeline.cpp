#include "omnisweep/pipeline.hpp"

#include <cmath>
#include <limits>

#include "omnisweep/errors.hpp"

namespace omnisweep {

std::vector<Image> normalize_inputs(const std::vector<Image>& images, const std::vector<FisheyeIntrinsics>& intrinsics) {
  if (images.size() != intrinsics.size()) throw InputError("image and intrinsics counts differ");
  std::vector<Image> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const FisheyeSampler sampler(images[i], intrinsics[i]);
    out.push_back(normalize_image(images[i], sampler.fov_mask()).image);
  }
  return out;
}

DepthPipelineResult estimate_depth(const std::vector<Image>& images, const std::vector<FisheyeIntrinsics>& intrinsics,
                                   const RigFrame& rig, const DepthPipelineConfig& config) {
  config.grid.validate();
  config.sgm.validate();
  const int cameras = static_cast<int>(images.size());
  const PairSelection pairs =
      config.pairs.pairs.empty() ? PairSelection::all_pairs(cameras, config.pairs.min_overlap) : config.pairs;
  const std::vector<Image> inputs = config.normalize ? normalize_inputs(images, intrinsics) : images;
  DepthPipelineResult result;
  result.cost = build_cost_volume(inputs, intrinsics, rig, config.grid, zncc_cost_function(config.window), pairs,
                                  config.threads);
  result.aggregated = sgm_aggregate(result.cost, config.sgm);
  result.depth = wta(result.aggregated, config.grid);
  return result;
}

Panorama render_panorama(const InverseDepthMap& depth, const std::vector<Image>& images,
                         const std::vector<FisheyeIntrinsics>& intrinsics, const RigFrame& rig,
                         const SphereGrid& grid) {
  grid.validate();
  if (depth.width != grid.width || depth.height != grid.height) throw InputError("depth map does not match grid");
  if (images.size() != intrinsics.size() || images.size() != rig.camera_from_rig.size()) {
    throw InputError("image, intrinsics and rig camera counts differ");
  }
  std::vector<FisheyeSampler> samplers;
  samplers.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) samplers.emplace_back(images[i], intrinsics[i]);
  std::vector<Eigen::Vector3d> centers;
  for (std::size_t i = 0; i < images.size(); ++i) centers.push_back(rig.camera_center(static_cast<int>(i)));

  Panorama out{Image(grid.width, grid.height), Mask(grid.pixels(), 0)};
  for (int row = 0; row < grid.height; ++row) {
    for (int col = 0; col < grid.width; ++col) {
      const std::size_t p = depth.pixel(col, row);
      if (!depth.mask[p]) continue;
      const Eigen::Vector3d dir = ray_dir(grid.theta(col), grid.phi(row));
      const bool at_infinity = depth.index[p] == 0;
      const Eigen::Vector3d point = dir / depth.inv_depth[p];
      double best_score = std::numeric_limits<double>::infinity();
      float best_value = 0.0f;
      bool found = false;
      for (std::size_t i = 0; i < images.size(); ++i) {
        const Pose& pose = rig.camera_from_rig[i];
        const Eigen::Vector3d in_camera = at_infinity ? Eigen::Vector3d(pose.rotation() * dir) : pose.apply(point);
        const Projection proj = project(in_camera, intrinsics[i]);
        if (!proj.valid) continue;
        float value = 0.0f;
        if (!samplers[i].sample(proj.pixel, value)) continue;
        const double score = at_infinity ? -in_camera.normalized().z() : (point - centers[i]).norm();
        if (score < best_score) {
          best_score = score;
          best_value = value;
          found = true;
        }
      }
      if (found) {
        out.image.at(col, row) = best_value;
        out.mask[p] = 1;
      }
    }
  }
  return out;
}

PointCloud depth_to_point_cloud(const InverseDepthMap& depth, const SphereGrid& grid, const Image* intensity) {
  if (depth.width != grid.width || depth.height != grid.height) throw InputError("depth map does not match grid");
  if (intensity && (intensity->width() != grid.width || intensity->height() != grid.height)) {
    throw InputError("intensity image does not match grid");
  }
  PointCloud cloud;
  for (int row = 0; row < grid.height; ++row) {
    for (int col = 0; col < grid.width; ++col) {
      const std::size_t p = depth.pixel(col, row);
      if (!depth.mask[p] || depth.index[p] == 0) continue;
      const Eigen::Vector3d x = ray_dir(grid.theta(col), grid.phi(row)) * depth.depth[p];
      cloud.push_back({x.x(), x.y(), x.z(), intensity ? intensity->at(col, row) : 0.0f});
    }
  }
  return cloud;
}

void export_point_cloud(const std::filesystem::path& path, const InverseDepthMap& depth, const SphereGrid& grid,
                        const Image* intensity, bool binary) {
  write_ply(path, depth_to_point_cloud(depth, grid, intensity), binary);
}

}  // namespace omnisweep
