#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "omnisweep/camera_model.hpp"
#include "omnisweep/image.hpp"
#include "omnisweep/sphere_sweep.hpp"

namespace omnisweep {

struct CostMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  Mask mask;

  CostMap() = default;
  CostMap(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f), mask(static_cast<std::size_t>(w) * h, 0) {}
};

/// W x H x N fused costs, n-major slices of row-major W x H floats.
class CostVolume {
 public:
  CostVolume() = default;
  CostVolume(int width, int height, int num_spheres);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_spheres() const { return num_spheres_; }
  std::size_t slice_size() const { return static_cast<std::size_t>(width_) * height_; }
  std::size_t index(int col, int row, int n) const {
    return static_cast<std::size_t>(n) * slice_size() + static_cast<std::size_t>(row) * width_ + col;
  }

  float& cost(int col, int row, int n) { return data_[index(col, row, n)]; }
  float cost(int col, int row, int n) const { return data_[index(col, row, n)]; }
  bool valid(int col, int row, int n) const { return mask_[index(col, row, n)] != 0; }

  void set_slice(int n, const CostMap& map);
  CostMap slice(int n) const;

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }
  Mask& mask() { return mask_; }
  const Mask& mask() const { return mask_; }

 private:
  int width_ = 0;
  int height_ = 0;
  int num_spheres_ = 0;
  std::vector<float> data_;
  Mask mask_;
};

struct NormalizedImage {
  Image image;
  // Constant input; the output is all zeros.
  bool degenerate = false;
};

/// Zero mean, unit variance over the valid pixels; invalid pixels become 0.
/// Throws InputError when no pixel is valid.
NormalizedImage normalize_image(const Image& image, const Mask& valid);
NormalizedImage normalize_image(const Image& image);

/// (1 - ZNCC) / 2 over a window x window patch, wrapping across the theta
/// seam and invalid where the window crosses the top/bottom border, touches
/// an invalid pixel in either image, or has variance below 1e-12.
CostMap zncc_cost(const SphericalImage& a, const SphericalImage& b, int window = 9);

/// Per-pixel mean of the maps valid there.
CostMap fuse(const std::vector<CostMap>& maps);

struct PairSelection {
  std::vector<std::pair<int, int>> pairs;
  // A pair contributes to a sphere only when at least this fraction of the
  // grid is valid in both warped images.
  double min_overlap = 0.05;

  static PairSelection all_pairs(int num_cameras, double min_overlap = 0.05);
  void validate(int num_cameras) const;
};

using PairCostFunction = std::function<CostMap(const SphericalImage&, const SphericalImage&)>;

PairCostFunction zncc_cost_function(int window = 9);

// Supplies the spherical image of camera i on sphere n.
using SphericalSource = std::function<SphericalImage(int camera, int n)>;

CostVolume build_cost_volume(const SphericalSource& source, int num_cameras, const SphereGrid& grid,
                             const PairCostFunction& cost_fn, const PairSelection& pairs, int threads = 1);

/// Warps the given (already normalized) images on the fly.
CostVolume build_cost_volume(const std::vector<Image>& images, const std::vector<FisheyeIntrinsics>& intrinsics,
                             const RigFrame& rig, const SphereGrid& grid, const PairCostFunction& cost_fn,
                             const PairSelection& pairs, int threads = 1);

/// Externally computed pair costs: one OCSV per camera pair holding all N
/// slices, named pair_<i>_<j>.ocsv with i < j.
struct ExternalCostMaps {
  int width = 0;
  int height = 0;
  int num_spheres = 0;
  std::map<std::pair<int, int>, std::vector<CostMap>> maps;
};

ExternalCostMaps load_external_cost_maps(const std::filesystem::path& directory);
void save_external_cost_maps(const std::filesystem::path& directory, const ExternalCostMaps& maps);

// Fuses external pair maps slice by slice. Throws InputError when the
// dimensions disagree with the grid.
CostVolume build_cost_volume(const ExternalCostMaps& external, const SphereGrid& grid);

}  // namespace omnisweep
