#include "omnisweep/matching_cost.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "omnisweep/errors.hpp"
#include "omnisweep/formats.hpp"
#include "omnisweep/parallel.hpp"

namespace omnisweep {

CostVolume::CostVolume(int width, int height, int num_spheres)
    : width_(width), height_(height), num_spheres_(num_spheres) {
  if (width < 1 || height < 1 || num_spheres < 1) throw InputError("cost volume dimensions must be >= 1");
  data_.assign(slice_size() * num_spheres, 0.0f);
  mask_.assign(slice_size() * num_spheres, 0);
}

void CostVolume::set_slice(int n, const CostMap& map) {
  if (map.width != width_ || map.height != height_) throw InputError("cost map does not match volume size");
  std::copy(map.data.begin(), map.data.end(), data_.begin() + index(0, 0, n));
  std::copy(map.mask.begin(), map.mask.end(), mask_.begin() + index(0, 0, n));
}

CostMap CostVolume::slice(int n) const {
  CostMap map(width_, height_);
  std::copy_n(data_.begin() + index(0, 0, n), slice_size(), map.data.begin());
  std::copy_n(mask_.begin() + index(0, 0, n), slice_size(), map.mask.begin());
  return map;
}

NormalizedImage normalize_image(const Image& image, const Mask& valid) {
  if (valid.size() != image.data().size()) throw InputError("normalize_image: mask size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i]) {
      sum += image.data()[i];
      ++count;
    }
  }
  if (count == 0) throw InputError("normalize_image: no valid pixels");
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i]) {
      const double d = image.data()[i] - mean;
      var += d * d;
    }
  }
  var /= static_cast<double>(count);

  NormalizedImage out{Image(image.width(), image.height()), false};
  if (var <= 0.0) {
    out.degenerate = true;
    return out;
  }
  const double inv_std = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i]) out.image.data()[i] = static_cast<float>((image.data()[i] - mean) * inv_std);
  }
  return out;
}

NormalizedImage normalize_image(const Image& image) {
  return normalize_image(image, Mask(image.data().size(), 1));
}

CostMap zncc_cost(const SphericalImage& a, const SphericalImage& b, int window) {
  if (a.width != b.width || a.height != b.height) {
    std::ostringstream msg;
    msg << "zncc_cost: dimension mismatch " << a.width << "x" << a.height << " vs " << b.width << "x" << b.height;
    throw InputError(msg.str());
  }
  if (window < 3 || window % 2 == 0) throw InputError("zncc_cost: window must be odd and >= 3");
  const int w = a.width;
  const int h = a.height;
  const int r = window / 2;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  // Six box-filtered channels: count, a, b, aa, bb, ab.
  constexpr int kChannels = 6;
  std::vector<double> row_sums(n * kChannels, 0.0);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      double* acc = &row_sums[(static_cast<std::size_t>(row) * w + col) * kChannels];
      for (int dc = -r; dc <= r; ++dc) {
        const int c = ((col + dc) % w + w) % w;
        const std::size_t i = static_cast<std::size_t>(row) * w + c;
        if (!a.mask[i] || !b.mask[i]) continue;
        const double va = a.data[i];
        const double vb = b.data[i];
        acc[0] += 1.0;
        acc[1] += va;
        acc[2] += vb;
        acc[3] += va * va;
        acc[4] += vb * vb;
        acc[5] += va * vb;
      }
    }
  }

  CostMap out(w, h);
  const double full = static_cast<double>(window) * window;
  for (int row = r; row < h - r; ++row) {
    for (int col = 0; col < w; ++col) {
      double s[kChannels] = {0, 0, 0, 0, 0, 0};
      for (int dr = -r; dr <= r; ++dr) {
        const double* src = &row_sums[(static_cast<std::size_t>(row + dr) * w + col) * kChannels];
        for (int k = 0; k < kChannels; ++k) s[k] += src[k];
      }
      if (s[0] != full) continue;
      const double var_a = (s[3] - s[1] * s[1] / full) / full;
      const double var_b = (s[4] - s[2] * s[2] / full) / full;
      if (var_a < 1e-12 || var_b < 1e-12) continue;
      const double cov = (s[5] - s[1] * s[2] / full) / full;
      const double zncc = std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
      const std::size_t i = static_cast<std::size_t>(row) * w + col;
      out.data[i] = static_cast<float>(0.5 * (1.0 - zncc));
      out.mask[i] = 1;
    }
  }
  return out;
}

CostMap fuse(const std::vector<CostMap>& maps) {
  if (maps.empty()) throw InputError("fuse: no cost maps");
  const int w = maps.front().width;
  const int h = maps.front().height;
  for (const auto& m : maps) {
    if (m.width != w || m.height != h) throw InputError("fuse: cost maps differ in size");
  }
  CostMap out(w, h);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double sum = 0.0;
    int count = 0;
    for (const auto& m : maps) {
      if (m.mask[i]) {
        sum += m.data[i];
        ++count;
      }
    }
    if (count > 0) {
      out.data[i] = static_cast<float>(sum / count);
      out.mask[i] = 1;
    }
  }
  return out;
}

PairSelection PairSelection::all_pairs(int num_cameras, double min_overlap) {
  PairSelection sel;
  sel.min_overlap = min_overlap;
  for (int i = 0; i < num_cameras; ++i) {
    for (int j = i + 1; j < num_cameras; ++j) sel.pairs.emplace_back(i, j);
  }
  return sel;
}

void PairSelection::validate(int num_cameras) const {
  if (pairs.empty()) throw InputError("pair selection is empty");
  std::set<std::pair<int, int>> seen;
  for (auto [i, j] : pairs) {
    if (i == j) throw InputError("pair selection contains a camera paired with itself");
    if (i < 0 || j < 0 || i >= num_cameras || j >= num_cameras) throw InputError("pair references unknown camera");
    if (!seen.insert(std::minmax(i, j)).second) throw InputError("pair selection contains duplicates");
  }
  if (!(min_overlap >= 0.0 && min_overlap <= 1.0)) throw InputError("min_overlap must be in [0, 1]");
}

PairCostFunction zncc_cost_function(int window) {
  if (window < 3 || window % 2 == 0) throw InputError("zncc window must be odd and >= 3");
  return [window](const SphericalImage& a, const SphericalImage& b) { return zncc_cost(a, b, window); };
}

CostVolume build_cost_volume(const SphericalSource& source, int num_cameras, const SphereGrid& grid,
                             const PairCostFunction& cost_fn, const PairSelection& pairs, int threads) {
  grid.validate();
  if (num_cameras < 2) throw InputError("cost volume needs at least two cameras");
  pairs.validate(num_cameras);

  CostVolume volume(grid.width, grid.height, grid.num_spheres);
  const double min_pixels = pairs.min_overlap * static_cast<double>(grid.pixels());
  parallel_for(grid.num_spheres, threads, [&](int n) {
    std::vector<SphericalImage> warped(num_cameras);
    std::vector<bool> needed(num_cameras, false);
    for (auto [i, j] : pairs.pairs) needed[i] = needed[j] = true;
    for (int c = 0; c < num_cameras; ++c) {
      if (needed[c]) warped[c] = source(c, n);
    }
    std::vector<CostMap> maps;
    for (auto [i, j] : pairs.pairs) {
      const SphericalImage& a = warped[i];
      const SphericalImage& b = warped[j];
      std::size_t overlap = 0;
      for (std::size_t p = 0; p < a.mask.size(); ++p) overlap += (a.mask[p] && b.mask[p]) ? 1 : 0;
      if (static_cast<double>(overlap) < min_pixels || overlap == 0) continue;
      try {
        maps.push_back(cost_fn(a, b));
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "cost for pair (" << i << ", " << j << ") at sphere " << n << ": " << e.what();
        throw InputError(msg.str());
      }
    }
    if (!maps.empty()) volume.set_slice(n, fuse(maps));
  });
  return volume;
}

CostVolume build_cost_volume(const std::vector<Image>& images, const std::vector<FisheyeIntrinsics>& intrinsics,
                             const RigFrame& rig, const SphereGrid& grid, const PairCostFunction& cost_fn,
                             const PairSelection& pairs, int threads) {
  if (images.size() != intrinsics.size() || images.size() != rig.camera_from_rig.size()) {
    throw InputError("image, intrinsics and rig camera counts differ");
  }
  std::vector<FisheyeSampler> samplers;
  samplers.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) samplers.emplace_back(images[i], intrinsics[i]);
  const SphericalSource source = [&](int camera, int n) {
    return warp(samplers[camera], intrinsics[camera], rig.camera_from_rig[camera], n, grid, camera);
  };
  return build_cost_volume(source, static_cast<int>(images.size()), grid, cost_fn, pairs, threads);
}

ExternalCostMaps load_external_cost_maps(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw InputError("external cost directory not found: " + directory.string());
  }
  const std::regex name(R"(pair_(\d+)_(\d+)\.ocsv)");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (std::regex_match(entry.path().filename().string(), name)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no pair_<i>_<j>.ocsv files in " + directory.string());

  ExternalCostMaps out;
  for (const auto& file : files) {
    std::smatch m;
    const std::string fname = file.filename().string();
    std::regex_match(fname, m, name);
    const int i = std::stoi(m[1]);
    const int j = std::stoi(m[2]);
    if (i >= j) throw InputError("external cost file must be named with i < j: " + fname);
    const OcsvData ocsv = read_ocsv(file);
    if (out.maps.empty()) {
      out.width = ocsv.width;
      out.height = ocsv.height;
      out.num_spheres = ocsv.num_slices;
    } else if (ocsv.width != out.width || ocsv.height != out.height || ocsv.num_slices != out.num_spheres) {
      throw InputError("external cost file " + fname + " has dimensions differing from the other pairs");
    }
    std::vector<CostMap> slices;
    const std::size_t slice = static_cast<std::size_t>(ocsv.width) * ocsv.height;
    for (int n = 0; n < ocsv.num_slices; ++n) {
      CostMap map(ocsv.width, ocsv.height);
      std::copy_n(ocsv.data.begin() + n * slice, slice, map.data.begin());
      std::copy_n(ocsv.mask.begin() + n * slice, slice, map.mask.begin());
      for (std::size_t p = 0; p < slice; ++p) {
        if (map.mask[p] && !(map.data[p] >= 0.0f && map.data[p] <= 1.0f)) {
          throw InputError("external cost file " + fname + " has a valid cost outside [0, 1]");
        }
      }
      slices.push_back(std::move(map));
    }
    out.maps[{i, j}] = std::move(slices);
  }
  return out;
}

void save_external_cost_maps(const std::filesystem::path& directory, const ExternalCostMaps& maps) {
  std::filesystem::create_directories(directory);
  for (const auto& [pair, slices] : maps.maps) {
    OcsvData ocsv;
    ocsv.width = maps.width;
    ocsv.height = maps.height;
    ocsv.num_slices = static_cast<int>(slices.size());
    for (const auto& s : slices) {
      ocsv.data.insert(ocsv.data.end(), s.data.begin(), s.data.end());
      ocsv.mask.insert(ocsv.mask.end(), s.mask.begin(), s.mask.end());
    }
    std::ostringstream name;
    name << "pair_" << pair.first << "_" << pair.second << ".ocsv";
    write_ocsv(directory / name.str(), ocsv);
  }
}

CostVolume build_cost_volume(const ExternalCostMaps& external, const SphereGrid& grid) {
  grid.validate();
  if (external.width != grid.width || external.height != grid.height || external.num_spheres != grid.num_spheres) {
    std::ostringstream msg;
    msg << "external costs are " << external.width << "x" << external.height << "x" << external.num_spheres
        << " but the grid is " << grid.width << "x" << grid.height << "x" << grid.num_spheres;
    throw InputError(msg.str());
  }
  CostVolume volume(grid.width, grid.height, grid.num_spheres);
  for (int n = 0; n < grid.num_spheres; ++n) {
    std::vector<CostMap> maps;
    for (const auto& [pair, slices] : external.maps) maps.push_back(slices[n]);
    volume.set_slice(n, fuse(maps));
  }
  return volume;
}

}  // namespace omnisweep
