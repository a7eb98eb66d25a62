#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "omnisweep/errors.hpp"
#include "omnisweep/formats.hpp"
#include "omnisweep/image.hpp"
#include "omnisweep/matching_cost.hpp"
#include "omnisweep/pipeline.hpp"
#include "omnisweep/rig_calibration.hpp"
#include "omnisweep/sgm_depth.hpp"
#include "omnisweep/sphere_sweep.hpp"
#include "omnisweep/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace omnisweep;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

struct GridFlags {
  int width = 400;
  int height = 100;
  int n_spheres = 64;
  double d_min = 0.5;
  double phi_min_deg = -45.0;
  double phi_max_deg = 45.0;

  void add(CLI::App* app) {
    app->add_option("--width", width, "Spherical grid width (azimuth samples)");
    app->add_option("--height", height, "Spherical grid height (elevation samples)");
    app->add_option("--n-spheres", n_spheres, "Number of sweep spheres");
    app->add_option("--d-min", d_min, "Minimum depth in meters");
    app->add_option("--phi-min", phi_min_deg, "Lowest elevation in degrees");
    app->add_option("--phi-max", phi_max_deg, "Highest elevation in degrees");
  }

  SphereGrid grid() const {
    SphereGrid g;
    g.width = width;
    g.height = height;
    g.num_spheres = n_spheres;
    g.d_min = d_min;
    g.phi_min = phi_min_deg * kDeg;
    g.phi_max = phi_max_deg * kDeg;
    g.validate();
    return g;
  }
};

// "0-1,0-2,2-3"
PairSelection parse_pairs(const std::string& text, int cameras) {
  if (text.empty() || text == "all") return PairSelection::all_pairs(cameras);
  PairSelection sel;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw InputError("pair '" + item + "' must look like i-j");
    try {
      sel.pairs.emplace_back(std::stoi(item.substr(0, dash)), std::stoi(item.substr(dash + 1)));
    } catch (const std::exception&) {
      throw InputError("pair '" + item + "' must look like i-j");
    }
  }
  sel.validate(cameras);
  return sel;
}

std::vector<Image> load_images(const std::vector<std::string>& paths) {
  std::vector<Image> images;
  for (const auto& p : paths) images.push_back(read_image(p));
  return images;
}

RigFrame rig_frame_of(const RigFile& rig) {
  return rig.rig_frame ? *rig.rig_frame : build_rig_frame(rig.camera_poses);
}

fs::path osph_name(const fs::path& dir, int camera, int sphere) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "cam%d_sph%03d.osph", camera, sphere);
  return dir / buf;
}

json metrics_json(const ErrorMap& errors, int num_spheres) {
  const DepthMetrics m = compute_metrics(errors);
  // Share of pixels whose index is off by at most one.
  const double one_index = 100.0 / num_spheres * (1.0 + 1e-12);
  std::size_t within = 0;
  for (std::size_t p = 0; p < errors.error.size(); ++p) {
    if (errors.mask[p] && errors.error[p] <= one_index) ++within;
  }
  return {{"pct_gt1", m.pct_gt1},
          {"pct_gt3", m.pct_gt3},
          {"pct_gt5", m.pct_gt5},
          {"mae", m.mae},
          {"rms", m.rms},
          {"pct_within_one_index", 100.0 * static_cast<double>(within) / static_cast<double>(m.valid_pixels)},
          {"valid_pixels", m.valid_pixels}};
}

ObservationSet read_corners(const fs::path& path, CheckerboardSpec* board) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    if (doc.contains("board")) {
      const json& b = doc.at("board");
      board->cols = b.at("cols").get<int>();
      board->rows = b.at("rows").get<int>();
      board->square_m = b.at("square_m").get<double>();
    }
    ObservationSet obs;
    for (const json& r : doc.at("records")) {
      ObservationRecord rec;
      rec.camera = r.at("camera").get<int>();
      rec.capture = r.at("capture").get<int>();
      for (const json& c : r.at("corners")) {
        rec.corners.push_back({c.at(0).get<int>(), PixelPoint(c.at(1).get<double>(), c.at(2).get<double>())});
      }
      obs.records.push_back(std::move(rec));
    }
    return obs;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed corners file: " + e.what());
  }
}

void write_corners(const fs::path& path, const ObservationSet& obs, const CheckerboardSpec& board) {
  json records = json::array();
  for (const auto& r : obs.records) {
    json corners = json::array();
    for (const auto& c : r.corners) corners.push_back({c.id, c.pixel.x(), c.pixel.y()});
    records.push_back({{"camera", r.camera}, {"capture", r.capture}, {"corners", corners}});
  }
  json doc = {{"board", {{"cols", board.cols}, {"rows", board.rows}, {"square_m", board.square_m}}},
              {"records", records}};
  std::ofstream(path) << doc.dump(1) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Omnidirectional sphere-sweep stereo toolkit"};
  app.require_subcommand(1);

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate a fisheye rig from checkerboard corners");
  std::string corners_path;
  std::string init_rig_path;
  std::string calib_out;
  CheckerboardSpec board{12, 10, 0.06};
  bool huber = false;
  calibrate->add_option("--corners", corners_path, "Corners JSON")->required();
  calibrate->add_option("--intrinsics", init_rig_path, "Rig file with initial intrinsics")->required();
  calibrate->add_option("--board-cols", board.cols, "Interior corners per row");
  calibrate->add_option("--board-rows", board.rows, "Interior corners per column");
  calibrate->add_option("--square", board.square_m, "Square size in meters");
  calibrate->add_flag("--huber", huber, "Huber loss on reprojection errors");
  calibrate->add_option("--out", calib_out, "Output rig file")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Warp fisheye images onto the sweep spheres (OSPH)");
  GridFlags sweep_grid;
  sweep_grid.add(sweep);
  std::string rig_path;
  std::vector<std::string> image_paths;
  std::string sweep_out;
  sweep->add_option("--rig", rig_path, "Rig file")->required();
  sweep->add_option("--images", image_paths, "One image per camera")->required();
  sweep->add_option("--out-dir", sweep_out, "Output directory")->required();

  // cost
  auto* cost = app.add_subcommand("cost", "Build the fused cost volume (OCSV)");
  GridFlags cost_grid;
  cost_grid.add(cost);
  std::string cost_kind = "zncc";
  std::string osph_dir;
  std::string external_dir;
  std::string cost_rig;
  std::vector<std::string> cost_images;
  std::string pairs_text;
  int window = 9;
  int threads = 1;
  std::string cost_out;
  cost->add_option("--cost", cost_kind, "zncc or external")->check(CLI::IsMember({"zncc", "external"}));
  cost->add_option("--osph-dir", osph_dir, "Directory written by sweep");
  cost->add_option("--external-dir", external_dir, "Directory of pair_<i>_<j>.ocsv files");
  cost->add_option("--rig", cost_rig, "Rig file (with --images)");
  cost->add_option("--images", cost_images, "Images to warp directly");
  cost->add_option("--pairs", pairs_text, "Camera pairs, e.g. 0-1,1-2 (default: all)");
  cost->add_option("--window", window, "ZNCC window size");
  cost->add_option("--threads", threads, "Worker threads");
  cost->add_option("--out", cost_out, "Output cost volume")->required();

  // depth
  auto* depth = app.add_subcommand("depth", "SGM aggregation and winner-takes-all depth");
  std::string volume_path;
  std::string depth_out;
  std::string depth_gt;
  SgmParams sgm;
  bool no_wrap = false;
  depth->add_option("--volume", volume_path, "Cost volume OCSV (with .json grid sidecar)")->required();
  depth->add_option("--p1", sgm.p1, "Small-jump penalty");
  depth->add_option("--p2", sgm.p2, "Large-jump penalty");
  depth->add_option("--paths", sgm.paths, "Path directions (4 or 8)");
  depth->add_flag("--no-wrap", no_wrap, "Do not wrap paths across the azimuth seam");
  depth->add_option("--gt", depth_gt, "Ground-truth depth map; prints metrics");
  depth->add_option("--out", depth_out, "Output depth map")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Compare a depth map to ground truth");
  std::string pred_path;
  std::string gt_path;
  std::string eval_out;
  eval->add_option("--pred", pred_path, "Predicted depth map")->required();
  eval->add_option("--gt", gt_path, "Ground-truth depth map")->required();
  eval->add_option("--out", eval_out, "Write metrics JSON here instead of stdout");

  // panorama
  auto* panorama = app.add_subcommand("panorama", "Render a panorama from a depth map");
  std::string pano_depth;
  std::string pano_rig;
  std::vector<std::string> pano_images;
  std::string pano_out;
  panorama->add_option("--depth", pano_depth, "Depth map")->required();
  panorama->add_option("--rig", pano_rig, "Rig file")->required();
  panorama->add_option("--images", pano_images, "One image per camera")->required();
  panorama->add_option("--out", pano_out, "Output PNG")->required();

  // cloud
  auto* cloud = app.add_subcommand("cloud", "Export a depth map as a PLY point cloud");
  std::string cloud_depth;
  std::string cloud_intensity;
  std::string cloud_out;
  bool ascii = false;
  cloud->add_option("--depth", cloud_depth, "Depth map")->required();
  cloud->add_option("--intensity", cloud_intensity, "Grid-sized intensity image (e.g. a panorama)");
  cloud->add_flag("--ascii", ascii, "Write ASCII instead of binary PLY");
  cloud->add_option("--out", cloud_out, "Output PLY")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Render the analytic test scene and its ground truth");
  GridFlags synth_grid;
  synth_grid.add(synth_cmd);
  std::string synth_out;
  std::string scene_kind = "room";
  double focal = 150.0;
  int image_px = 640;
  double rig_radius = 0.3 * std::sqrt(2.0);
  int supersample = 2;
  double sphere_radius = 2.0;
  synth_cmd->add_option("--out-dir", synth_out, "Output directory")->required();
  synth_cmd->add_option("--scene", scene_kind, "room or sphere")->check(CLI::IsMember({"room", "sphere"}));
  synth_cmd->add_option("--focal", focal, "Fisheye focal scale in pixels");
  synth_cmd->add_option("--image-size", image_px, "Square image size in pixels");
  synth_cmd->add_option("--rig-radius", rig_radius, "Camera distance from the rig center in meters");
  synth_cmd->add_option("--supersample", supersample, "Rays per pixel along each axis");
  synth_cmd->add_option("--sphere-radius", sphere_radius, "Radius of the sphere scene");
  bool synth_columns = false;
  synth_cmd->add_flag("--columns", synth_columns, "Add vertical columns to the room");
  bool synth_calibration = false;
  double synth_noise = 0.0;
  unsigned synth_seed = 1;
  synth_cmd->add_flag("--calibration", synth_calibration,
                      "Also write checkerboard corners and perturbed initial intrinsics");
  synth_cmd->add_option("--noise", synth_noise, "Corner noise sigma in pixels");
  synth_cmd->add_option("--seed", synth_seed, "Noise seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*calibrate) {
      const ObservationSet obs = read_corners(corners_path, &board);
      const RigFile init = read_rig_file(init_rig_path);
      CalibrationConfig config;
      config.huber = huber;
      const RigCalibration result = calibrate_rig(obs, board, init.intrinsics, config);
      RigFile out{result.intrinsics, result.camera_poses, build_rig_frame(result.camera_poses)};
      write_rig_file(calib_out, out);
      json report = {{"rmse_px", result.report.rmse_px},
                     {"camera_rmse_px", result.report.camera_rmse_px},
                     {"iterations", result.report.iterations},
                     {"converged", result.report.converged},
                     {"termination", result.report.termination}};
      std::cout << report.dump(2) << "\n";
    } else if (*sweep) {
      const SphereGrid grid = sweep_grid.grid();
      const RigFile rig = read_rig_file(rig_path);
      if (image_paths.size() != rig.intrinsics.size()) throw InputError("need one image per rig camera");
      const RigFrame frame = rig_frame_of(rig);
      const std::vector<Image> images = normalize_inputs(load_images(image_paths), rig.intrinsics);
      fs::create_directories(sweep_out);
      write_grid_json(fs::path(sweep_out) / "grid.json", grid);
      for (std::size_t c = 0; c < images.size(); ++c) {
        const FisheyeSampler sampler(images[c], rig.intrinsics[c]);
        for (int n = 0; n < grid.num_spheres; ++n) {
          const int cam = static_cast<int>(c);
          write_osph(osph_name(sweep_out, cam, n), warp(sampler, rig.intrinsics[c], frame.camera_from_rig[c], n, grid, cam));
        }
      }
    } else if (*cost) {
      CostVolume volume;
      SphereGrid grid = cost_grid.grid();
      if (cost_kind == "external") {
        if (external_dir.empty()) throw InputError("--cost external needs --external-dir");
        volume = build_cost_volume(load_external_cost_maps(external_dir), grid);
      } else if (!osph_dir.empty()) {
        const fs::path grid_file = fs::path(osph_dir) / "grid.json";
        if (fs::exists(grid_file)) grid = read_grid_json(grid_file);
        int cameras = 0;
        while (fs::exists(osph_name(osph_dir, cameras, 0))) ++cameras;
        if (cameras < 2) throw InputError("need OSPH files of at least two cameras in " + osph_dir);
        const SphericalSource source = [&](int camera, int n) {
          SphericalImage img = read_osph(osph_name(osph_dir, camera, n));
          if (img.width != grid.width || img.height != grid.height || img.camera != camera || img.sphere != n) {
            throw InputError("OSPH file " + osph_name(osph_dir, camera, n).string() + " does not match the grid");
          }
          return img;
        };
        volume = build_cost_volume(source, cameras, grid, zncc_cost_function(window), parse_pairs(pairs_text, cameras),
                                   threads);
      } else {
        if (cost_rig.empty() || cost_images.empty()) throw InputError("cost needs --osph-dir or --rig with --images");
        const RigFile rig = read_rig_file(cost_rig);
        if (cost_images.size() != rig.intrinsics.size()) throw InputError("need one image per rig camera");
        const std::vector<Image> images = normalize_inputs(load_images(cost_images), rig.intrinsics);
        const int cameras = static_cast<int>(images.size());
        volume = build_cost_volume(images, rig.intrinsics, rig_frame_of(rig), grid, zncc_cost_function(window),
                                   parse_pairs(pairs_text, cameras), threads);
      }
      write_cost_volume(cost_out, volume);
      write_grid_json(sidecar_path(cost_out), grid);
    } else if (*depth) {
      sgm.wrap_horizontal = !no_wrap;
      const SphereGrid grid = read_grid_json(sidecar_path(volume_path));
      const CostVolume volume = read_cost_volume(volume_path);
      if (volume.width() != grid.width || volume.height() != grid.height || volume.num_spheres() != grid.num_spheres) {
        throw InputError("cost volume dimensions disagree with its grid sidecar");
      }
      const InverseDepthMap map = wta(sgm_aggregate(volume, sgm), grid);
      write_depth_map(depth_out, map, grid);
      if (!depth_gt.empty()) {
        const InverseDepthMap gt = read_depth_map(depth_gt);
        std::cout << metrics_json(error_map(map, gt, grid.num_spheres), grid.num_spheres).dump(2) << "\n";
      }
    } else if (*eval) {
      SphereGrid pred_grid;
      SphereGrid gt_grid;
      const InverseDepthMap pred = read_depth_map(pred_path, &pred_grid);
      const InverseDepthMap gt = read_depth_map(gt_path, &gt_grid);
      if (!(pred_grid == gt_grid)) throw InputError("prediction and ground truth use different grids");
      const std::string text = metrics_json(error_map(pred, gt, gt_grid.num_spheres), gt_grid.num_spheres).dump(2) + "\n";
      if (eval_out.empty()) std::cout << text;
      else std::ofstream(eval_out) << text;
    } else if (*panorama) {
      SphereGrid grid;
      const InverseDepthMap map = read_depth_map(pano_depth, &grid);
      const RigFile rig = read_rig_file(pano_rig);
      if (pano_images.size() != rig.intrinsics.size()) throw InputError("need one image per rig camera");
      const Panorama pano = render_panorama(map, load_images(pano_images), rig.intrinsics, rig_frame_of(rig), grid);
      write_png16(pano_out, pano.image);
    } else if (*cloud) {
      SphereGrid grid;
      const InverseDepthMap map = read_depth_map(cloud_depth, &grid);
      if (cloud_intensity.empty()) {
        export_point_cloud(cloud_out, map, grid, nullptr, !ascii);
      } else {
        const Image intensity = read_image(cloud_intensity);
        export_point_cloud(cloud_out, map, grid, &intensity, !ascii);
      }
    } else if (*synth_cmd) {
      const SphereGrid grid = synth_grid.grid();
      fs::create_directories(synth_out);
      std::unique_ptr<synth::Scene> scene;
      if (scene_kind == "room") {
        synth::RoomConfig room = synth::default_room();
        if (synth_columns) room.columns = synth::default_columns();
        scene = std::make_unique<synth::RoomScene>(room);
      }
      else scene = std::make_unique<synth::SphereScene>(sphere_radius, synth::Texture{6.0, 3, 0.5, 3});
      const std::vector<Pose> scene_poses = synth::square_rig(rig_radius);
      RigFile rig;
      rig.camera_poses = synth::to_camera0_frame(scene_poses);
      for (std::size_t c = 0; c < scene_poses.size(); ++c) {
        rig.intrinsics.push_back(synth::make_intrinsics(focal, {image_px, image_px}));
        const Image img = synth::render_fisheye(*scene, rig.intrinsics.back(), scene_poses[c], supersample);
        write_png16(fs::path(synth_out) / ("cam" + std::to_string(c) + ".png"), img);
      }
      rig.rig_frame = build_rig_frame(rig.camera_poses);
      write_rig_file(fs::path(synth_out) / "rig.json", rig);
      write_grid_json(fs::path(synth_out) / "grid.json", grid);
      write_depth_map(fs::path(synth_out) / "gt_depth.ocsv", synth::ground_truth_depth(*scene, grid), grid);
      if (synth_calibration) {
        synth::CalibrationScenarioConfig sc;
        sc.noise_px = synth_noise;
        sc.seed = synth_seed;
        const synth::CalibrationScenario scenario = synth::make_calibration_scenario(sc);
        write_corners(fs::path(synth_out) / "corners.json", scenario.observations, scenario.board);
        RigFile truth{scenario.intrinsics, scenario.camera_poses, build_rig_frame(scenario.camera_poses)};
        write_rig_file(fs::path(synth_out) / "calib_truth.json", truth);
        RigFile initial = truth;
        for (std::size_t c = 0; c < initial.intrinsics.size(); ++c) {
          initial.intrinsics[c] = synth::perturb_intrinsics(scenario.intrinsics[c], 0.01, synth_seed + 17 * c);
        }
        write_rig_file(fs::path(synth_out) / "calib_initial.json", initial);
      }
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
