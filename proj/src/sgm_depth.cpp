#include "omnisweep/sgm_depth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "omnisweep/errors.hpp"

namespace omnisweep {

void SgmParams::validate() const {
  if (!(p1 >= 0.0 && p1 <= p2)) throw InputError("SGM penalties must satisfy 0 <= P1 <= P2");
  if (paths != 4 && paths != 8) throw InputError("SGM path count must be 4 or 8");
}

namespace {

// Pixel-major working copy: cost[(row * W + col) * N + n], invalid cells = 1.
struct PixelMajor {
  int width;
  int height;
  int depth;
  std::vector<float> cost;

  explicit PixelMajor(const CostVolume& v)
      : width(v.width()), height(v.height()), depth(v.num_spheres()), cost(v.data().size()) {
    for (int n = 0; n < depth; ++n) {
      for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
          const std::size_t src = v.index(col, row, n);
          cost[at(col, row) + n] = v.mask()[src] ? v.data()[src] : 1.0f;
        }
      }
    }
  }

  std::size_t at(int col, int row) const { return (static_cast<std::size_t>(row) * width + col) * depth; }
};

class PathStepper {
 public:
  PathStepper(int depth, float p1, float p2) : depth_(depth), p1_(p1), p2_(p2) {}

  // out = recurrence(prev, cost)
  void step(const float* prev, const float* cost, float* out) const {
    float prev_min = prev[0];
    for (int n = 1; n < depth_; ++n) prev_min = std::min(prev_min, prev[n]);
    const float jump = prev_min + p2_;
    for (int n = 0; n < depth_; ++n) {
      float best = std::min(prev[n], jump);
      if (n > 0) best = std::min(best, prev[n - 1] + p1_);
      if (n + 1 < depth_) best = std::min(best, prev[n + 1] + p1_);
      out[n] = cost[n] + best - prev_min;
    }
  }

 private:
  int depth_;
  float p1_;
  float p2_;
};

constexpr int kMaxLoopLaps = 64;

// Calls emit(col, row, values) for every pixel along `direction`.
template <typename Emit>
void run_path(const PixelMajor& pm, PathDirection direction, const SgmParams& params, Emit&& emit) {
  const int w = pm.width;
  const int h = pm.height;
  const int depth = pm.depth;
  const PathStepper stepper(depth, static_cast<float>(params.p1), static_cast<float>(params.p2));
  const bool wrap = params.wrap_horizontal;

  int dc = 0;
  int dr = 0;
  switch (direction) {
    case PathDirection::kLeftToRight: dc = 1; break;
    case PathDirection::kRightToLeft: dc = -1; break;
    case PathDirection::kTopToBottom: dr = 1; break;
    case PathDirection::kBottomToTop: dr = -1; break;
    case PathDirection::kDownRight: dc = 1; dr = 1; break;
    case PathDirection::kUpLeft: dc = -1; dr = -1; break;
    case PathDirection::kDownLeft: dc = -1; dr = 1; break;
    case PathDirection::kUpRight: dc = 1; dr = -1; break;
  }

  std::vector<float> prev(depth);
  std::vector<float> cur(depth);

  // Open path from (col, row) stepping until it leaves the grid.
  auto open_line = [&](int col, int row, int max_steps) {
    std::copy_n(&pm.cost[pm.at(col, row)], depth, prev.begin());
    emit(col, row, prev.data());
    for (int s = 1; s < max_steps; ++s) {
      col += dc;
      row += dr;
      if (wrap) col = (col % w + w) % w;
      if (col < 0 || col >= w || row < 0 || row >= h) break;
      stepper.step(prev.data(), &pm.cost[pm.at(col, row)], cur.data());
      emit(col, row, cur.data());
      std::swap(prev, cur);
    }
  };

  if (dr == 0 && wrap) {
    // Closed loop around the row. Iterate laps until the state at the
    // starting column repeats exactly.
    std::vector<float> loop(static_cast<std::size_t>(w) * depth);
    std::vector<float> next_start(depth);
    for (int row = 0; row < h; ++row) {
      auto col_of = [&](int k) { return dc > 0 ? k : (w - 1 - k); };
      std::copy_n(&pm.cost[pm.at(col_of(0), row)], depth, loop.begin());
      for (int lap = 0; lap < kMaxLoopLaps; ++lap) {
        for (int k = 1; k < w; ++k) {
          stepper.step(&loop[(k - 1) * depth], &pm.cost[pm.at(col_of(k), row)], &loop[k * depth]);
        }
        stepper.step(&loop[(w - 1) * depth], &pm.cost[pm.at(col_of(0), row)], next_start.data());
        const bool fixed = std::memcmp(next_start.data(), loop.data(), depth * sizeof(float)) == 0;
        std::copy(next_start.begin(), next_start.end(), loop.begin());
        if (fixed) break;
      }
      // The stored laps may lag the updated start by one step; recompute
      // the remaining columns from it.
      for (int k = 1; k < w; ++k) {
        stepper.step(&loop[(k - 1) * depth], &pm.cost[pm.at(col_of(k), row)], &loop[k * depth]);
      }
      for (int k = 0; k < w; ++k) emit(col_of(k), row, &loop[k * depth]);
    }
    return;
  }

  if (dr == 0) {
    for (int row = 0; row < h; ++row) open_line(dc > 0 ? 0 : w - 1, row, w);
    return;
  }

  const int start_row = dr > 0 ? 0 : h - 1;
  if (dc == 0 || wrap) {
    // Every line starts on the first row; with wrap, diagonals spiral across
    // the seam and each pixel lies on exactly one line of length H.
    for (int col = 0; col < w; ++col) open_line(col, start_row, h);
    return;
  }
  // Diagonals without wrap start on the first row and the entry column.
  for (int col = 0; col < w; ++col) open_line(col, start_row, h);
  const int start_col = dc > 0 ? 0 : w - 1;
  for (int k = 1; k < h; ++k) open_line(start_col, start_row + k * dr, h);
}

void check_volume(const CostVolume& volume) {
  if (volume.num_spheres() < 2) throw InputError("SGM needs at least two spheres");
}

}  // namespace

CostVolume aggregate_path(const CostVolume& volume, PathDirection direction, const SgmParams& params) {
  params.validate();
  check_volume(volume);
  const PixelMajor pm(volume);
  CostVolume out(volume.width(), volume.height(), volume.num_spheres());
  out.mask() = volume.mask();
  run_path(pm, direction, params, [&](int col, int row, const float* values) {
    for (int n = 0; n < pm.depth; ++n) out.cost(col, row, n) = values[n];
  });
  return out;
}

CostVolume sgm_aggregate(const CostVolume& volume, const SgmParams& params) {
  params.validate();
  check_volume(volume);
  const PixelMajor pm(volume);
  std::vector<float> sum(pm.cost.size(), 0.0f);
  for (int p = 0; p < params.paths; ++p) {
    run_path(pm, kPathOrder[p], params, [&](int col, int row, const float* values) {
      float* dst = &sum[pm.at(col, row)];
      for (int n = 0; n < pm.depth; ++n) dst[n] += values[n];
    });
  }
  CostVolume out(volume.width(), volume.height(), volume.num_spheres());
  out.mask() = volume.mask();
  for (int n = 0; n < pm.depth; ++n) {
    for (int row = 0; row < pm.height; ++row) {
      for (int col = 0; col < pm.width; ++col) out.cost(col, row, n) = sum[pm.at(col, row) + n];
    }
  }
  return out;
}

InverseDepthMap make_inverse_depth_map(int width, int height, const std::vector<int>& index, const Mask& mask,
                                       const SphereGrid& grid) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (index.size() != n || mask.size() != n) throw InputError("depth map arrays do not match dimensions");
  InverseDepthMap out;
  out.width = width;
  out.height = height;
  out.index.assign(n, 0);
  out.inv_depth.assign(n, 0.0);
  out.depth.assign(n, 0.0);
  out.mask = mask;
  for (std::size_t p = 0; p < n; ++p) {
    if (!mask[p]) continue;
    out.index[p] = index[p];
    out.inv_depth[p] = inverse_depth(index[p], grid);
    out.depth[p] = 1.0 / out.inv_depth[p];
  }
  return out;
}

InverseDepthMap wta(const CostVolume& volume, const SphereGrid& grid) {
  if (volume.width() != grid.width || volume.height() != grid.height || volume.num_spheres() != grid.num_spheres) {
    throw InputError("wta: volume does not match grid");
  }
  const std::size_t pixels = volume.slice_size();
  std::vector<int> index(pixels, 0);
  Mask mask(pixels, 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    float best = std::numeric_limits<float>::infinity();
    int best_n = -1;
    for (int n = 0; n < volume.num_spheres(); ++n) {
      const std::size_t i = n * pixels + p;
      if (volume.mask()[i] && (best_n < 0 || volume.data()[i] < best)) {
        best = volume.data()[i];
        best_n = n;
      }
    }
    if (best_n >= 0) {
      index[p] = best_n;
      mask[p] = 1;
    }
  }
  return make_inverse_depth_map(volume.width(), volume.height(), index, mask, grid);
}

ErrorMap error_map(const InverseDepthMap& pred, const InverseDepthMap& gt, int num_spheres) {
  if (pred.width != gt.width || pred.height != gt.height) {
    std::ostringstream msg;
    msg << "error_map: prediction " << pred.width << "x" << pred.height << " vs ground truth " << gt.width << "x"
        << gt.height;
    throw InputError(msg.str());
  }
  if (num_spheres < 1) throw InputError("error_map: sphere count must be positive");
  ErrorMap out;
  out.width = pred.width;
  out.height = pred.height;
  out.error.assign(pred.index.size(), 0.0);
  out.mask.assign(pred.index.size(), 0);
  for (std::size_t p = 0; p < pred.index.size(); ++p) {
    if (!pred.mask[p] || !gt.mask[p]) continue;
    out.error[p] = 100.0 / num_spheres * std::abs(pred.index[p] - gt.index[p]);
    out.mask[p] = 1;
  }
  return out;
}

DepthMetrics compute_metrics(const ErrorMap& errors) {
  DepthMetrics m;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  std::size_t gt1 = 0;
  std::size_t gt3 = 0;
  std::size_t gt5 = 0;
  for (std::size_t p = 0; p < errors.error.size(); ++p) {
    if (!errors.mask[p]) continue;
    const double e = errors.error[p];
    ++m.valid_pixels;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    gt1 += e > 1.0;
    gt3 += e > 3.0;
    gt5 += e > 5.0;
  }
  if (m.valid_pixels == 0) throw InputError("compute_metrics: no valid pixels");
  const double count = static_cast<double>(m.valid_pixels);
  m.pct_gt1 = 100.0 * gt1 / count;
  m.pct_gt3 = 100.0 * gt3 / count;
  m.pct_gt5 = 100.0 * gt5 / count;
  m.mae = abs_sum / count;
  m.rms = std::sqrt(sq_sum / count);
  return m;
}

}  // namespace omnisweep
