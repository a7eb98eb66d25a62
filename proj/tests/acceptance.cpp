// Acceptance checks A1-A7. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "omnisweep/errors.hpp"
#include "omnisweep/formats.hpp"
#include "omnisweep/matching_cost.hpp"
#include "omnisweep/pipeline.hpp"
#include "omnisweep/rig_calibration.hpp"
#include "omnisweep/sgm_depth.hpp"
#include "omnisweep/synthetic.hpp"

using namespace omnisweep;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// ---------------------------------------------------------------- A1

Outcome projection_round_trip() {
  Outcome out;
  const AffineMap skew{1.002, 0.0, -0.003, 801.5, 764.0};
  const std::vector<FisheyeIntrinsics> sets = {
      synth::make_intrinsics(150.0, {640, 640}),
      synth::make_intrinsics(370.0, {1600, 1532}),
      synth::make_intrinsics(370.0, {1600, 1532}, 220.0, &skew),
      synth::make_intrinsics(300.0, {1100, 1100}, 190.0),
      FisheyeIntrinsics({330.0, 0.0, -1.1e-3, 2.0e-6, -4.0e-9}, AffineMap{1.0, 0.0, 0.0, 400.0, 380.0},
                        {800, 760}, 200.0),
  };
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_error = 0.0;
  double worst_time = 0.0;
  for (const auto& intr : sets) {
    // Directions uniform on the cap inside the FOV; rays landing off the
    // image sensor are redrawn.
    std::vector<Eigen::Vector3d> rays;
    const double cos_max = std::cos(intr.half_fov_rad());
    while (rays.size() < 10000) {
      const double z = 1.0 - u(rng) * (1.0 - cos_max);
      const double a = 2.0 * kPi * u(rng);
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Eigen::Vector3d d(s * std::cos(a), s * std::sin(a), z);
      if (std::acos(d.z()) < intr.half_fov_rad() && project(d, intr).valid) rays.push_back(d);
    }
    const auto start = Clock::now();
    int failures = 0;
    double worst = 0.0;
    for (const auto& d : rays) {
      const Projection p = project(d, intr);
      const Unprojection back = unproject(p.pixel, intr);
      if (!p.valid || !back.valid) {
        ++failures;
        continue;
      }
      worst = std::max(worst, std::atan2(d.cross(back.ray).norm(), d.dot(back.ray)));
    }
    const double t = seconds_since(start);
    worst_error = std::max(worst_error, worst);
    worst_time = std::max(worst_time, t);
    out.require(failures == 0, "invalid round trip");
  }
  out.require(worst_error < 1e-6, "angular error");
  out.require(worst_time < 1.0, "runtime");
  out.detail << sets.size() << " intrinsics sets x 10000 rays, max angular error " << worst_error
             << " rad, slowest set " << worst_time << " s";
  return out;
}

// ---------------------------------------------------------------- A2

std::vector<FisheyeIntrinsics> perturbed(const synth::CalibrationScenario& s, std::uint32_t seed) {
  std::vector<FisheyeIntrinsics> out;
  for (std::size_t i = 0; i < s.intrinsics.size(); ++i) {
    out.push_back(synth::perturb_intrinsics(s.intrinsics[i], 0.01, seed * 7 + static_cast<std::uint32_t>(i)));
  }
  return out;
}

Outcome calibration_recovery() {
  Outcome out;
  const auto start = Clock::now();
  synth::CalibrationScenarioConfig config;
  const auto clean = synth::make_calibration_scenario(config);
  out.require(clean.intrinsics.size() == 4 && clean.intrinsics[0].fov_deg() == 220.0, "rig setup");
  out.require(clean.board.cols == 12 && clean.board.rows == 10 && clean.board.square_m == 0.06, "board setup");
  out.require(clean.board_poses.size() == 12, "board count");

  const RigCalibration cal = calibrate_rig(clean.observations, clean.board, perturbed(clean, 1));
  double rot = 0.0;
  double trans = 0.0;
  for (std::size_t i = 0; i < clean.camera_poses.size(); ++i) {
    rot = std::max(rot, rotation_distance(cal.camera_poses[i], clean.camera_poses[i]));
    trans = std::max(trans, (cal.camera_poses[i].t - clean.camera_poses[i].t).norm());
  }
  out.require(rot < 1e-4, "noiseless rotation");
  out.require(trans < 1e-4, "noiseless translation");

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::uint32_t seed = 1; seed <= 5; ++seed) {
    config.noise_px = 0.2;
    config.seed = seed;
    const auto noisy = synth::make_calibration_scenario(config);
    const RigCalibration r = calibrate_rig(noisy.observations, noisy.board, perturbed(noisy, seed));
    lo = std::min(lo, r.report.rmse_px);
    hi = std::max(hi, r.report.rmse_px);
  }
  out.require(lo >= 0.1 && hi <= 0.4, "noisy RMSE range");
  const double t = seconds_since(start);
  out.require(t < 60.0, "runtime");
  out.detail << "noiseless max rotation error " << rot << " rad, translation " << trans
             << " m; sigma 0.2 RMSE over 5 seeds in [" << lo << ", " << hi << "] px; " << t << " s";
  return out;
}

// ---------------------------------------------------------------- A3

Outcome end_to_end_depth() {
  Outcome out;
  SphereGrid grid;
  grid.width = 400;
  grid.height = 100;
  grid.num_spheres = 64;
  grid.phi_min = -kPi / 4;
  grid.phi_max = kPi / 4;
  grid.d_min = 0.5;

  const synth::RoomScene scene(synth::default_room());
  const std::vector<Pose> poses = synth::square_rig(0.3 * std::sqrt(2.0));
  std::vector<Image> images;
  std::vector<FisheyeIntrinsics> intrinsics;
  for (const auto& p : poses) {
    intrinsics.push_back(synth::make_intrinsics(150.0, {640, 640}));
    images.push_back(synth::render_fisheye(scene, intrinsics.back(), p, 2));
  }
  const RigFrame rig = build_rig_frame(synth::to_camera0_frame(poses));
  const InverseDepthMap gt = synth::ground_truth_depth(scene, grid);

  DepthPipelineConfig config;
  config.grid = grid;
  config.window = 9;
  config.sgm.p1 = 0.1;
  config.sgm.p2 = 12.0;
  config.threads = 1;
  const auto start = Clock::now();
  const DepthPipelineResult r = estimate_depth(images, intrinsics, rig, config);
  const double t = seconds_since(start);

  const ErrorMap e = error_map(r.depth, gt, grid.num_spheres);
  const double one_index = 100.0 / grid.num_spheres;
  std::size_t valid = 0;
  std::size_t within = 0;
  for (std::size_t p = 0; p < e.error.size(); ++p) {
    if (!e.mask[p]) continue;
    ++valid;
    if (e.error[p] <= one_index * (1.0 + 1e-12)) ++within;
  }
  const DepthMetrics m = compute_metrics(e);
  const double pct = 100.0 * static_cast<double>(within) / static_cast<double>(valid);
  out.require(pct >= 90.0, "within one index");
  out.require(m.mae < 1.0, "MAE");
  out.require(t < 300.0, "runtime");
  out.detail << valid << " valid pixels, " << pct << "% within one index, MAE " << m.mae << ", depth estimation "
             << t << " s single-threaded";
  return out;
}

// ---------------------------------------------------------------- A4

// Costs k/32 keep every sum of the recurrence exact in float.
CostVolume dyadic_volume(int w, int h, int n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> level(0, 32);
  CostVolume v(w, h, n);
  for (std::size_t i = 0; i < v.data().size(); ++i) {
    v.data()[i] = static_cast<float>(level(rng)) / 32.0f;
    v.mask()[i] = 1;
  }
  return v;
}

double jump_penalty(int a, int b, double p1, double p2) {
  if (a == b) return 0.0;
  return std::abs(a - b) == 1 ? p1 : p2;
}

// Best energy of any label sequence over a 1-row chain ending at each label,
// by enumeration.
std::vector<double> enumerate_chain(const CostVolume& v, int len, double p1, double p2) {
  const int n = v.num_spheres();
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<int> labels(len, 0);
  while (true) {
    double e = v.cost(0, 0, labels[0]);
    for (int k = 1; k < len; ++k) e += v.cost(k, 0, labels[k]) + jump_penalty(labels[k - 1], labels[k], p1, p2);
    best[labels[len - 1]] = std::min(best[labels[len - 1]], e);
    int k = 0;
    while (k < len && ++labels[k] == n) labels[k++] = 0;
    if (k == len) break;
  }
  return best;
}

CostVolume rotate_columns(const CostVolume& v, int k) {
  CostVolume out(v.width(), v.height(), v.num_spheres());
  for (int n = 0; n < v.num_spheres(); ++n) {
    for (int row = 0; row < v.height(); ++row) {
      for (int col = 0; col < v.width(); ++col) {
        const std::size_t dst = out.index((col + k) % v.width(), row, n);
        out.data()[dst] = v.cost(col, row, n);
        out.mask()[dst] = v.valid(col, row, n) ? 1 : 0;
      }
    }
  }
  return out;
}

Outcome sgm_oracle() {
  Outcome out;
  const SgmParams p{0.25, 1.5, 8, false};
  int compared = 0;
  int mismatches = 0;
  for (int w = 1; w <= 8; ++w) {
    for (int n = 2; n <= 6; ++n) {
      const CostVolume v = dyadic_volume(w, 1, n, static_cast<std::uint32_t>(w * 10 + n));
      const CostVolume got = aggregate_path(v, PathDirection::kLeftToRight, p);
      for (int col = 0; col < w; ++col) {
        const std::vector<double> last = enumerate_chain(v, col + 1, p.p1, p.p2);
        double offset = 0.0;
        if (col > 0) {
          const std::vector<double> prev = enumerate_chain(v, col, p.p1, p.p2);
          offset = *std::min_element(prev.begin(), prev.end());
        }
        for (int k = 0; k < n; ++k) {
          ++compared;
          if (got.cost(col, 0, k) != static_cast<float>(last[k] - offset)) ++mismatches;
        }
      }
    }
  }
  out.require(mismatches == 0, "single-path oracle");

  int rotations = 0;
  int unequal = 0;
  const SgmParams wrapped{0.1, 12.0, 8, true};
  for (std::uint32_t seed = 0; seed < 3; ++seed) {
    const CostVolume v = dyadic_volume(16, 6, 6, 100 + seed);
    const CostVolume base = sgm_aggregate(v, wrapped);
    for (int k : {1, 7, 15}) {
      ++rotations;
      if (sgm_aggregate(rotate_columns(v, k), wrapped).data() != rotate_columns(base, k).data()) ++unequal;
    }
  }
  out.require(unequal == 0, "rotation equivariance");
  out.detail << compared << " path cells up to 1x8x6 vs enumeration, " << mismatches << " mismatches; " << rotations
             << " column rotations of 8-path wrapped aggregation, " << unequal << " unequal";
  return out;
}

// ---------------------------------------------------------------- A5

InverseDepthMap index_map(const std::vector<int>& index, const SphereGrid& g) {
  return make_inverse_depth_map(static_cast<int>(index.size()), 1, index, Mask(index.size(), 1), g);
}

Outcome metrics() {
  Outcome out;
  const DepthMetrics m = compute_metrics(ErrorMap{4, 1, {0.0, 2.0, 4.0, 6.0}, Mask{1, 1, 1, 1}});
  out.require(std::abs(m.pct_gt1 - 75.0) <= 1e-12, ">1");
  out.require(std::abs(m.pct_gt3 - 50.0) <= 1e-12, ">3");
  out.require(std::abs(m.pct_gt5 - 25.0) <= 1e-12, ">5");
  out.require(std::abs(m.mae - 3.0) <= 1e-12, "MAE");
  out.require(std::abs(m.rms - std::sqrt(14.0)) <= 1e-12, "RMS");

  std::mt19937 rng(99);
  std::uniform_int_distribution<int> idx(0, 191);
  std::uniform_int_distribution<int> size(1, 64);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SphereGrid g;
    g.width = size(rng);
    g.height = 1;
    g.num_spheres = 192;
    g.phi_min = -kPi / 4;
    g.phi_max = kPi / 4;
    g.d_min = 0.5;
    std::vector<int> a(g.width);
    std::vector<int> b(g.width);
    for (int i = 0; i < g.width; ++i) {
      a[i] = idx(rng);
      b[i] = idx(rng);
    }
    const DepthMetrics r = compute_metrics(error_map(index_map(a, g), index_map(b, g), 192));
    if (!(r.pct_gt1 >= r.pct_gt3 && r.pct_gt3 >= r.pct_gt5 && r.rms >= r.mae)) ++violations;
  }
  out.require(violations == 0, "random map properties");
  out.detail << "example gives " << m.pct_gt1 << "/" << m.pct_gt3 << "/" << m.pct_gt5 << "%, MAE " << m.mae
             << ", RMS " << m.rms << "; " << violations << " violations over 1000 random maps";
  return out;
}

// ---------------------------------------------------------------- A6

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Message of the InputError thrown by f, or "" when none is thrown.
std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

bool mentions(const std::string& message, const std::string& what) {
  return message.find(what) != std::string::npos;
}

Outcome formats() {
  Outcome out;
  const fs::path dir = fs::temp_directory_path() / "omnisweep_acceptance_formats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);

  OcsvData ocsv;
  ocsv.width = 13;
  ocsv.height = 7;
  ocsv.num_slices = 5;
  for (int i = 0; i < 13 * 7 * 5; ++i) {
    ocsv.data.push_back(u(rng));
    ocsv.mask.push_back(u(rng) < 0.8f ? 1 : 0);
  }
  write_ocsv(dir / "a.ocsv", ocsv);
  const OcsvData ocsv_back = read_ocsv(dir / "a.ocsv");
  out.require(ocsv_back.width == 13 && ocsv_back.height == 7 && ocsv_back.num_slices == 5, "OCSV dims");
  out.require(std::memcmp(ocsv_back.data.data(), ocsv.data.data(), ocsv.data.size() * sizeof(float)) == 0,
              "OCSV payload");
  out.require(ocsv_back.mask == ocsv.mask, "OCSV mask");

  SphericalImage sph(11, 6, 3, 17);
  for (std::size_t i = 0; i < sph.data.size(); ++i) {
    sph.data[i] = u(rng) * 10.0f - 5.0f;
    sph.mask[i] = u(rng) < 0.7f ? 1 : 0;
  }
  write_osph(dir / "a.osph", sph);
  const SphericalImage sph_back = read_osph(dir / "a.osph");
  out.require(sph_back.width == 11 && sph_back.height == 6 && sph_back.camera == 3 && sph_back.sphere == 17,
              "OSPH header");
  out.require(std::memcmp(sph_back.data.data(), sph.data.data(), sph.data.size() * sizeof(float)) == 0,
              "OSPH payload");
  out.require(sph_back.mask == sph.mask, "OSPH mask");

  const auto scenario = synth::make_calibration_scenario({});
  RigFile rig{perturbed(scenario, 3), scenario.camera_poses, build_rig_frame(scenario.camera_poses)};
  write_rig_file(dir / "rig.json", rig);
  const RigFile rig_back = read_rig_file(dir / "rig.json");
  bool rig_same = rig_back.intrinsics.size() == rig.intrinsics.size() && rig_back.rig_frame.has_value();
  for (std::size_t i = 0; rig_same && i < rig.intrinsics.size(); ++i) {
    rig_same = rig_back.intrinsics[i] == rig.intrinsics[i] && rig_back.camera_poses[i].r == rig.camera_poses[i].r &&
               rig_back.camera_poses[i].t == rig.camera_poses[i].t &&
               rig_back.rig_frame->camera_from_rig[i].r == rig.rig_frame->camera_from_rig[i].r &&
               rig_back.rig_frame->camera_from_rig[i].t == rig.rig_frame->camera_from_rig[i].t;
  }
  rig_same = rig_same && rig_back.rig_frame->origin == rig.rig_frame->origin &&
             rig_back.rig_frame->axes == rig.rig_frame->axes;
  out.require(rig_same, "rig file");

  PointCloud cloud;
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 200; ++i) cloud.push_back({g(rng), g(rng), g(rng), u(rng)});
  bool ply_same = true;
  for (bool binary : {true, false}) {
    const fs::path p = dir / (binary ? "b.ply" : "a.ply");
    write_ply(p, cloud, binary);
    const PointCloud back = read_ply(p);
    ply_same = ply_same && back.size() == cloud.size();
    for (std::size_t i = 0; ply_same && i < cloud.size(); ++i) {
      ply_same = back[i].x == cloud[i].x && back[i].y == cloud[i].y && back[i].z == cloud[i].z &&
                 back[i].intensity == cloud[i].intensity;
    }
  }
  out.require(ply_same, "PLY");

  // Corrupted headers.
  int rejected = 0;
  for (const char* name : {"a.ocsv", "a.osph"}) {
    const bool is_ocsv = std::string(name) == "a.ocsv";
    const auto read = [&](const fs::path& p) {
      if (is_ocsv) read_ocsv(p);
      else read_osph(p);
    };
    const std::vector<char> bytes = read_bytes(dir / name);
    std::vector<char> bad = bytes;
    bad[1] = 'Z';
    write_bytes(dir / "bad", bad);
    rejected += mentions(error_of([&] { read(dir / "bad"); }), "magic") ? 1 : 0;
    bad = bytes;
    bad[4] = 9;
    write_bytes(dir / "bad", bad);
    rejected += mentions(error_of([&] { read(dir / "bad"); }), "version 9") ? 1 : 0;
    bad.assign(bytes.begin(), bytes.begin() + 9);
    write_bytes(dir / "bad", bad);
    rejected += mentions(error_of([&] { read(dir / "bad"); }), "truncated") ? 1 : 0;
    bad.assign(bytes.begin(), bytes.end() - 5);
    write_bytes(dir / "bad", bad);
    const std::string msg = error_of([&] { read(dir / "bad"); });
    rejected += mentions(msg, std::to_string(bytes.size())) && mentions(msg, std::to_string(bytes.size() - 5)) ? 1 : 0;
  }
  std::ofstream(dir / "bad.json") << R"({"version": 1, "cameras": [{"poly": [100, 0, -0.001]}]})";
  rejected += error_of([&] { read_rig_file(dir / "bad.json"); }).empty() ? 0 : 1;
  std::ofstream(dir / "bad.ply") << "ply\nformat binary_big_endian 1.0\nelement vertex 1\nend_header\n";
  rejected += error_of([&] { read_ply(dir / "bad.ply"); }).empty() ? 0 : 1;
  out.require(rejected == 10, "corrupted inputs");
  fs::remove_all(dir);
  out.detail << "OCSV, OSPH, rig file and PLY (ascii and binary) round trips compared bitwise; " << rejected
             << "/10 corrupted inputs rejected with specific errors";
  return out;
}

// ---------------------------------------------------------------- A7

SphericalImage random_spherical(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  std::uniform_real_distribution<double> v(0.0, 1.0);
  SphericalImage s(w, h);
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    s.data[i] = static_cast<float>(u(rng));
    s.mask[i] = v(rng) < 0.97 ? 1 : 0;
  }
  return s;
}

SphericalImage affine_copy(const SphericalImage& s, double a, double b) {
  SphericalImage out = s;
  for (auto& x : out.data) x = static_cast<float>(a * x + b);
  return out;
}

Outcome zncc_invariance() {
  Outcome out;
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> gain(0.5, 2.0);
  std::uniform_real_distribution<double> bias(-50.0, 50.0);
  double worst = 0.0;
  int mask_changes = 0;
  int trials = 0;
  // Extremes of the ranges first, then random draws.
  std::vector<std::pair<double, double>> changes = {{0.5, -50.0}, {0.5, 50.0}, {2.0, -50.0}, {2.0, 50.0}};
  for (int i = 0; i < 16; ++i) changes.emplace_back(gain(rng), bias(rng));
  for (std::size_t t = 0; t < changes.size(); ++t) {
    const SphericalImage a = random_spherical(48, 24, 2 * static_cast<std::uint32_t>(t));
    const SphericalImage b = random_spherical(48, 24, 2 * static_cast<std::uint32_t>(t) + 1);
    const auto [ga, ba] = changes[t];
    const auto [gb, bb] = changes[(t + 5) % changes.size()];
    for (int window : {3, 9}) {
      ++trials;
      const CostMap c1 = zncc_cost(a, b, window);
      const CostMap c2 = zncc_cost(affine_copy(a, ga, ba), affine_copy(b, gb, bb), window);
      for (std::size_t i = 0; i < c1.data.size(); ++i) {
        if (c1.mask[i] != c2.mask[i]) ++mask_changes;
        if (c1.mask[i] && c2.mask[i]) worst = std::max(worst, static_cast<double>(std::abs(c1.data[i] - c2.data[i])));
      }
    }
  }
  out.require(mask_changes == 0, "mask");
  out.require(worst <= 1e-6, "cost difference");
  out.detail << trials << " cost maps with a in [0.5, 2] and b in [-50, 50] per image, max difference " << worst;
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"A1 projection round trip", projection_round_trip},
      {"A2 calibration recovery", calibration_recovery},
      {"A3 end-to-end depth", end_to_end_depth},
      {"A4 SGM oracle", sgm_oracle},
      {"A5 metrics", metrics},
      {"A6 formats", formats},
      {"A7 ZNCC invariance", zncc_invariance},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.str().c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
