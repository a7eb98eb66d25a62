#include "omnisweep/formats.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "omnisweep/errors.hpp"

namespace omnisweep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_all(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

float get_f32(const std::string& in, std::size_t offset) {
  const std::uint32_t bits = get_u32(in, offset);
  float f = 0.0f;
  std::memcpy(&f, &bits, 4);
  return f;
}

double get_f64(const std::string& in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  double d = 0.0;
  std::memcpy(&d, &bits, 8);
  return d;
}

// Validates magic, version and that the header fits; returns the header
// u32 fields following the version.
std::vector<std::uint32_t> read_header(const std::string& bytes, const char* magic, std::uint32_t version,
                                       int fields, const fs::path& path) {
  const std::size_t header = 8 + 4 * static_cast<std::size_t>(fields);
  if (bytes.size() < 4 || bytes.compare(0, 4, magic) != 0) {
    throw InputError(path.string() + ": bad magic, expected \"" + magic + "\"");
  }
  if (bytes.size() < header) {
    std::ostringstream msg;
    msg << path.string() << ": truncated header, expected " << header << " bytes but file has " << bytes.size();
    throw InputError(msg.str());
  }
  const std::uint32_t found = get_u32(bytes, 4);
  if (found != version) {
    std::ostringstream msg;
    msg << path.string() << ": unsupported " << magic << " version " << found << " (expected " << version << ")";
    throw InputError(msg.str());
  }
  std::vector<std::uint32_t> out;
  for (int i = 0; i < fields; ++i) out.push_back(get_u32(bytes, 8 + 4 * static_cast<std::size_t>(i)));
  return out;
}

void check_payload(const std::string& bytes, std::size_t header, std::uint64_t cells, const fs::path& path) {
  const std::uint64_t expected = header + cells * 5;
  if (bytes.size() != expected) {
    std::ostringstream msg;
    msg << path.string() << ": payload size mismatch, expected " << expected << " bytes but file has "
        << bytes.size();
    throw InputError(msg.str());
  }
}

void check_dim(std::uint32_t v, const char* name, const fs::path& path) {
  if (v == 0 || v > (1u << 24)) {
    std::ostringstream msg;
    msg << path.string() << ": invalid dimension " << name << " = " << v;
    throw InputError(msg.str());
  }
}

json pose_json(const Pose& p) {
  return {{"r", {p.r.x(), p.r.y(), p.r.z()}}, {"t", {p.t.x(), p.t.y(), p.t.z()}}};
}

Pose pose_from_json(const json& j) {
  const auto r = j.at("r").get<std::vector<double>>();
  const auto t = j.at("t").get<std::vector<double>>();
  if (r.size() != 3 || t.size() != 3) throw InputError("pose needs r[3] and t[3]");
  Pose p;
  p.r = Eigen::Vector3d(r[0], r[1], r[2]);
  p.t = Eigen::Vector3d(t[0], t[1], t[2]);
  return p;
}

json grid_to_json(const SphereGrid& g) {
  return {{"width", g.width},     {"height", g.height},   {"num_spheres", g.num_spheres},
          {"phi_min", g.phi_min}, {"phi_max", g.phi_max}, {"d_min", g.d_min},
          {"seam_offset", g.seam_offset}};
}

SphereGrid grid_from_json(const json& j) {
  SphereGrid g;
  g.width = j.at("width").get<int>();
  g.height = j.at("height").get<int>();
  g.num_spheres = j.at("num_spheres").get<int>();
  g.phi_min = j.at("phi_min").get<double>();
  g.phi_max = j.at("phi_max").get<double>();
  g.d_min = j.at("d_min").get<double>();
  g.seam_offset = j.value("seam_offset", 0);
  g.validate();
  return g;
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_all(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_ocsv(const fs::path& path, const OcsvData& ocsv) {
  const std::size_t cells = static_cast<std::size_t>(ocsv.width) * ocsv.height * ocsv.num_slices;
  if (ocsv.width < 1 || ocsv.height < 1 || ocsv.num_slices < 1) throw InputError("OCSV dimensions must be >= 1");
  if (ocsv.data.size() != cells || ocsv.mask.size() != cells) throw InputError("OCSV arrays do not match header");
  std::string out = "OCSV";
  out.reserve(20 + cells * 5);
  put_u32(out, kOcsvVersion);
  put_u32(out, static_cast<std::uint32_t>(ocsv.width));
  put_u32(out, static_cast<std::uint32_t>(ocsv.height));
  put_u32(out, static_cast<std::uint32_t>(ocsv.num_slices));
  for (float f : ocsv.data) put_f32(out, f);
  for (std::uint8_t m : ocsv.mask) out.push_back(static_cast<char>(m ? 1 : 0));
  write_all(path, out);
}

OcsvData read_ocsv(const fs::path& path) {
  const std::string bytes = read_all(path);
  const auto h = read_header(bytes, "OCSV", kOcsvVersion, 3, path);
  check_dim(h[0], "W", path);
  check_dim(h[1], "H", path);
  check_dim(h[2], "N", path);
  const std::uint64_t cells = static_cast<std::uint64_t>(h[0]) * h[1] * h[2];
  check_payload(bytes, 20, cells, path);
  OcsvData out;
  out.width = static_cast<int>(h[0]);
  out.height = static_cast<int>(h[1]);
  out.num_slices = static_cast<int>(h[2]);
  out.data.resize(cells);
  out.mask.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) out.data[i] = get_f32(bytes, 20 + 4 * i);
  const std::size_t mask_start = 20 + 4 * cells;
  for (std::size_t i = 0; i < cells; ++i) {
    const auto m = static_cast<std::uint8_t>(bytes[mask_start + i]);
    if (m > 1) throw InputError(path.string() + ": validity bytes must be 0 or 1");
    out.mask[i] = m;
  }
  return out;
}

void write_cost_volume(const fs::path& path, const CostVolume& volume) {
  OcsvData ocsv;
  ocsv.width = volume.width();
  ocsv.height = volume.height();
  ocsv.num_slices = volume.num_spheres();
  ocsv.data = volume.data();
  ocsv.mask = volume.mask();
  write_ocsv(path, ocsv);
}

CostVolume read_cost_volume(const fs::path& path) {
  OcsvData ocsv = read_ocsv(path);
  CostVolume volume(ocsv.width, ocsv.height, ocsv.num_slices);
  for (std::size_t i = 0; i < ocsv.data.size(); ++i) {
    if (ocsv.mask[i] && !(ocsv.data[i] >= 0.0f && ocsv.data[i] <= 1.0f)) {
      std::ostringstream msg;
      msg << path.string() << ": valid cost " << ocsv.data[i] << " at cell " << i << " outside [0, 1]";
      throw InputError(msg.str());
    }
  }
  volume.data() = std::move(ocsv.data);
  volume.mask() = std::move(ocsv.mask);
  return volume;
}

void write_osph(const fs::path& path, const SphericalImage& image) {
  const std::size_t cells = static_cast<std::size_t>(image.width) * image.height;
  if (image.width < 1 || image.height < 1) throw InputError("OSPH dimensions must be >= 1");
  if (image.data.size() != cells || image.mask.size() != cells) throw InputError("OSPH arrays do not match header");
  if (image.camera < 0 || image.sphere < 0) throw InputError("OSPH camera and sphere ids must be non-negative");
  std::string out = "OSPH";
  put_u32(out, kOsphVersion);
  put_u32(out, static_cast<std::uint32_t>(image.width));
  put_u32(out, static_cast<std::uint32_t>(image.height));
  put_u32(out, static_cast<std::uint32_t>(image.camera));
  put_u32(out, static_cast<std::uint32_t>(image.sphere));
  for (float f : image.data) put_f32(out, f);
  for (std::uint8_t m : image.mask) out.push_back(static_cast<char>(m ? 1 : 0));
  write_all(path, out);
}

SphericalImage read_osph(const fs::path& path) {
  const std::string bytes = read_all(path);
  const auto h = read_header(bytes, "OSPH", kOsphVersion, 4, path);
  check_dim(h[0], "W", path);
  check_dim(h[1], "H", path);
  const std::uint64_t cells = static_cast<std::uint64_t>(h[0]) * h[1];
  check_payload(bytes, 24, cells, path);
  SphericalImage out(static_cast<int>(h[0]), static_cast<int>(h[1]), static_cast<int>(h[2]), static_cast<int>(h[3]));
  for (std::size_t i = 0; i < cells; ++i) out.data[i] = get_f32(bytes, 24 + 4 * i);
  const std::size_t mask_start = 24 + 4 * cells;
  for (std::size_t i = 0; i < cells; ++i) {
    const auto m = static_cast<std::uint8_t>(bytes[mask_start + i]);
    if (m > 1) throw InputError(path.string() + ": validity bytes must be 0 or 1");
    out.mask[i] = m;
  }
  return out;
}

void write_rig_file(const fs::path& path, const RigFile& rig) {
  if (rig.intrinsics.size() != rig.camera_poses.size()) {
    throw InputError("rig file needs one pose per camera");
  }
  json cams = json::array();
  for (std::size_t i = 0; i < rig.intrinsics.size(); ++i) {
    const FisheyeIntrinsics& in = rig.intrinsics[i];
    const AffineMap& a = in.affine();
    cams.push_back({{"poly", in.poly()},
                    {"affine", {{"c", a.c}, {"d", a.d}, {"e", a.e}, {"cx", a.cx}, {"cy", a.cy}}},
                    {"image_size", {in.image_size().width, in.image_size().height}},
                    {"fov_deg", in.fov_deg()},
                    {"pose", pose_json(rig.camera_poses[i])}});
  }
  json doc = {{"version", kRigFileVersion}, {"cameras", cams}};
  if (rig.rig_frame) {
    const RigFrame& f = *rig.rig_frame;
    json poses = json::array();
    for (const Pose& p : f.camera_from_rig) poses.push_back(pose_json(p));
    json axes = json::array();
    for (int r = 0; r < 3; ++r) axes.push_back({f.axes(r, 0), f.axes(r, 1), f.axes(r, 2)});
    doc["rig_frame"] = {{"origin", {f.origin.x(), f.origin.y(), f.origin.z()}},
                        {"axes", axes},
                        {"fallback", f.fallback},
                        {"camera_from_rig", poses}};
  }
  write_all(path, doc.dump(2) + "\n");
}

RigFile read_rig_file(const fs::path& path) {
  const json doc = parse_json(path);
  RigFile rig;
  try {
    const int version = doc.at("version").get<int>();
    if (version != kRigFileVersion) {
      std::ostringstream msg;
      msg << path.string() << ": unsupported rig file version " << version;
      throw InputError(msg.str());
    }
    for (const json& cam : doc.at("cameras")) {
      const json& a = cam.at("affine");
      AffineMap affine{a.at("c").get<double>(), a.at("d").get<double>(), a.at("e").get<double>(),
                       a.at("cx").get<double>(), a.at("cy").get<double>()};
      const auto size = cam.at("image_size").get<std::vector<int>>();
      if (size.size() != 2) throw InputError("image_size needs [width, height]");
      rig.intrinsics.emplace_back(cam.at("poly").get<std::vector<double>>(), affine, ImageSize{size[0], size[1]},
                                  cam.at("fov_deg").get<double>());
      rig.camera_poses.push_back(pose_from_json(cam.at("pose")));
    }
    if (rig.intrinsics.empty()) throw InputError("rig file lists no cameras");
    if (doc.contains("rig_frame")) {
      const json& jf = doc.at("rig_frame");
      RigFrame f;
      const auto o = jf.at("origin").get<std::vector<double>>();
      if (o.size() != 3) throw InputError("rig_frame origin needs 3 values");
      f.origin = Eigen::Vector3d(o[0], o[1], o[2]);
      const auto axes = jf.at("axes").get<std::vector<std::vector<double>>>();
      if (axes.size() != 3) throw InputError("rig_frame axes must be 3x3");
      for (int r = 0; r < 3; ++r) {
        if (axes[r].size() != 3) throw InputError("rig_frame axes must be 3x3");
        for (int c = 0; c < 3; ++c) f.axes(r, c) = axes[r][c];
      }
      f.fallback = jf.value("fallback", false);
      for (const json& p : jf.at("camera_from_rig")) f.camera_from_rig.push_back(pose_from_json(p));
      if (f.camera_from_rig.size() != rig.intrinsics.size()) {
        throw InputError("rig_frame camera count does not match cameras");
      }
      rig.rig_frame = f;
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed rig file: " + e.what());
  }
  return rig;
}

void write_grid_json(const fs::path& path, const SphereGrid& grid) {
  grid.validate();
  write_all(path, grid_to_json(grid).dump(2) + "\n");
}

SphereGrid read_grid_json(const fs::path& path) {
  try {
    return grid_from_json(parse_json(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": malformed grid: " + e.what());
  }
}

fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".json"); }

void write_depth_map(const fs::path& path, const InverseDepthMap& depth, const SphereGrid& grid) {
  if (depth.width != grid.width || depth.height != grid.height) throw InputError("depth map does not match grid");
  OcsvData ocsv;
  ocsv.width = depth.width;
  ocsv.height = depth.height;
  ocsv.num_slices = 1;
  ocsv.data.resize(depth.index.size());
  for (std::size_t i = 0; i < depth.index.size(); ++i) ocsv.data[i] = static_cast<float>(depth.index[i]);
  ocsv.mask = depth.mask;
  write_ocsv(path, ocsv);
  write_grid_json(sidecar_path(path), grid);
}

InverseDepthMap read_depth_map(const fs::path& path, SphereGrid* grid_out) {
  const SphereGrid grid = read_grid_json(sidecar_path(path));
  const OcsvData ocsv = read_ocsv(path);
  if (ocsv.num_slices != 1) {
    std::ostringstream msg;
    msg << path.string() << ": depth map must have N = 1, found " << ocsv.num_slices;
    throw InputError(msg.str());
  }
  if (ocsv.width != grid.width || ocsv.height != grid.height) {
    throw InputError(path.string() + ": depth map dimensions disagree with its grid sidecar");
  }
  std::vector<int> index(ocsv.data.size(), 0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (!ocsv.mask[i]) continue;
    const float v = ocsv.data[i];
    if (!(v >= 0.0f && v < static_cast<float>(grid.num_spheres)) || std::floor(v) != v) {
      std::ostringstream msg;
      msg << path.string() << ": invalid sphere index " << v << " at pixel " << i;
      throw InputError(msg.str());
    }
    index[i] = static_cast<int>(v);
  }
  if (grid_out) *grid_out = grid;
  return make_inverse_depth_map(ocsv.width, ocsv.height, index, ocsv.mask, grid);
}

void write_ply(const fs::path& path, const PointCloud& cloud, bool binary) {
  std::ostringstream header;
  header << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
         << "element vertex " << cloud.size() << "\n"
         << "property double x\nproperty double y\nproperty double z\nproperty float intensity\n"
         << "end_header\n";
  std::string out = header.str();
  if (binary) {
    for (const CloudPoint& p : cloud) {
      put_f64(out, p.x);
      put_f64(out, p.y);
      put_f64(out, p.z);
      put_f32(out, p.intensity);
    }
  } else {
    std::ostringstream body;
    body << std::setprecision(17);
    for (const CloudPoint& p : cloud) {
      body << p.x << ' ' << p.y << ' ' << p.z << ' ' << std::setprecision(9) << p.intensity << std::setprecision(17)
           << '\n';
    }
    out += body.str();
  }
  write_all(path, out);
}

PointCloud read_ply(const fs::path& path) {
  const std::string bytes = read_all(path);
  const std::string end_marker = "end_header\n";
  const std::size_t end = bytes.find(end_marker);
  if (bytes.compare(0, 4, "ply\n") != 0 || end == std::string::npos) {
    throw InputError(path.string() + ": not a PLY file");
  }
  std::istringstream header(bytes.substr(0, end));
  std::string line;
  bool binary = false;
  std::size_t count = 0;
  std::vector<std::string> props;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw InputError(path.string() + ": unsupported PLY format " + fmt);
    } else if (key == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw InputError(path.string() + ": unexpected PLY element " + name);
    } else if (key == "property") {
      std::string type;
      std::string name;
      ls >> type >> name;
      props.push_back(type + " " + name);
    }
  }
  const std::vector<std::string> expected = {"double x", "double y", "double z", "float intensity"};
  if (props != expected) throw InputError(path.string() + ": PLY must have double x,y,z and float intensity");

  PointCloud cloud(count);
  std::size_t offset = end + end_marker.size();
  if (binary) {
    const std::size_t need = offset + count * 28;
    if (bytes.size() != need) {
      std::ostringstream msg;
      msg << path.string() << ": PLY body size mismatch, expected " << need << " bytes but file has " << bytes.size();
      throw InputError(msg.str());
    }
    for (CloudPoint& p : cloud) {
      p.x = get_f64(bytes, offset);
      p.y = get_f64(bytes, offset + 8);
      p.z = get_f64(bytes, offset + 16);
      p.intensity = get_f32(bytes, offset + 24);
      offset += 28;
    }
  } else {
    std::istringstream body(bytes.substr(offset));
    for (CloudPoint& p : cloud) {
      if (!(body >> p.x >> p.y >> p.z >> p.intensity)) throw InputError(path.string() + ": PLY body is truncated");
    }
  }
  return cloud;
}

}  // namespace omnisweep
