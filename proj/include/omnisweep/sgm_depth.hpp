#pragma once

#include <cstddef>
#include <vector>

#include "omnisweep/matching_cost.hpp"
#include "omnisweep/sphere_sweep.hpp"

namespace omnisweep {

struct SgmParams {
  double p1 = 0.1;
  double p2 = 12.0;
  int paths = 8;
  // Horizontal and diagonal paths continue across the theta seam.
  bool wrap_horizontal = true;

  void validate() const;
};

enum class PathDirection {
  kLeftToRight,
  kRightToLeft,
  kTopToBottom,
  kBottomToTop,
  kDownRight,
  kUpLeft,
  kDownLeft,
  kUpRight,
};

// Directions in summation order; the first `paths` entries are used.
inline constexpr PathDirection kPathOrder[8] = {
    PathDirection::kLeftToRight, PathDirection::kRightToLeft, PathDirection::kTopToBottom,
    PathDirection::kBottomToTop, PathDirection::kDownRight,   PathDirection::kUpLeft,
    PathDirection::kDownLeft,    PathDirection::kUpRight,
};

/// Path cost L_r of a single direction:
///   L(p,n) = C(p,n) + min(L(q,n), L(q,n+-1) + P1, min_k L(q,k) + P2) - min_k L(q,k)
/// where q is the predecessor of p along the path. Invalid cells enter as
/// cost 1. Horizontal paths with wrap_horizontal are closed loops; their
/// values are the periodic fixed point of the recurrence around the loop.
CostVolume aggregate_path(const CostVolume& volume, PathDirection direction, const SgmParams& params);

/// Sum of aggregate_path over params.paths directions in kPathOrder. The
/// output keeps the input validity mask. Throws InputError for N < 2.
CostVolume sgm_aggregate(const CostVolume& volume, const SgmParams& params);

struct InverseDepthMap {
  int width = 0;
  int height = 0;
  std::vector<int> index;
  std::vector<double> inv_depth;
  // Meters; sphere 0 yields the 2^23 sentinel.
  std::vector<double> depth;
  Mask mask;

  std::size_t pixel(int col, int row) const { return static_cast<std::size_t>(row) * width + col; }
};

// Builds the map from per-pixel indices; invalid pixels carry index 0.
InverseDepthMap make_inverse_depth_map(int width, int height, const std::vector<int>& index, const Mask& mask,
                                       const SphereGrid& grid);

/// Per-pixel argmin over valid cells, ties to the smallest index.
InverseDepthMap wta(const CostVolume& volume, const SphereGrid& grid);

struct ErrorMap {
  int width = 0;
  int height = 0;
  std::vector<double> error;
  Mask mask;
};

/// e(p) = 100 / N * |n*(p) - n_gt(p)|, invalid where either map is.
ErrorMap error_map(const InverseDepthMap& pred, const InverseDepthMap& gt, int num_spheres);

struct DepthMetrics {
  double pct_gt1 = 0.0;
  double pct_gt3 = 0.0;
  double pct_gt5 = 0.0;
  double mae = 0.0;
  double rms = 0.0;
  std::size_t valid_pixels = 0;
};

// Throws InputError when no pixel is valid.
DepthMetrics compute_metrics(const ErrorMap& errors);

}  // namespace omnisweep
