#include "omnisweep/rig_calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "omnisweep/errors.hpp"

namespace omnisweep {

void CheckerboardSpec::validate() const {
  if (cols < 2 || rows < 2) throw InputError("checkerboard needs at least 2x2 interior corners");
  if (!(square_m > 0.0)) throw InputError("checkerboard square size must be positive");
}

Eigen::Vector3d CheckerboardSpec::corner(int id) const {
  return {(id % cols) * square_m, (id / cols) * square_m, 0.0};
}

void ObservationSet::validate(const CheckerboardSpec& board) const {
  std::set<ViewKey> views;
  for (const auto& rec : records) {
    std::ostringstream where;
    where << "observation (camera " << rec.camera << ", capture " << rec.capture << ")";
    if (rec.camera < 0 || rec.capture < 0) throw InputError(where.str() + ": negative index");
    if (!views.insert({rec.camera, rec.capture}).second) throw InputError(where.str() + ": duplicate record");
    if (rec.corners.size() < 6) throw InputError(where.str() + ": fewer than 6 corners");
    std::set<int> ids;
    for (const auto& c : rec.corners) {
      if (c.id < 0 || c.id >= board.corner_count()) throw InputError(where.str() + ": corner id outside board");
      if (!ids.insert(c.id).second) throw InputError(where.str() + ": duplicate corner id");
      if (!c.pixel.allFinite()) throw InputError(where.str() + ": non-finite corner pixel");
    }
  }
}

int ObservationSet::max_camera_id() const {
  int m = -1;
  for (const auto& rec : records) m = std::max(m, rec.camera);
  return m;
}

namespace {

// Residual: unit ray of the transformed corner minus the observed unit ray.
class BoardPoseProblem : public LeastSquaresProblem {
 public:
  BoardPoseProblem(std::vector<Eigen::Vector3d> points, std::vector<Eigen::Vector3d> rays)
      : points_(std::move(points)), rays_(std::move(rays)) {}

  int num_residuals() const override { return 3 * static_cast<int>(points_.size()); }
  int num_parameters() const override { return 6; }
  int residual_block_size() const override { return 3; }

  bool evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residuals, Eigen::MatrixXd* jacobian) const override {
    const Eigen::Vector3d r = x.head<3>();
    const Eigen::Vector3d t = x.tail<3>();
    const Eigen::Matrix3d rot = rotation_from_axis_angle(r);
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const Eigen::Vector3d p = rot * points_[j] + t;
      const double norm = p.norm();
      if (!(norm > 0.0)) return false;
      const Eigen::Vector3d n = p / norm;
      residuals.segment<3>(3 * j) = n - rays_[j];
      if (jacobian) {
        const Eigen::Matrix3d dn = (Eigen::Matrix3d::Identity() - n * n.transpose()) / norm;
        jacobian->block<3, 3>(3 * j, 0) = dn * rotate_jacobian(r, points_[j]);
        jacobian->block<3, 3>(3 * j, 3) = dn;
      }
    }
    return true;
  }

 private:
  std::vector<Eigen::Vector3d> points_;
  std::vector<Eigen::Vector3d> rays_;
};

Eigen::Matrix3d homography_dlt(const std::vector<Eigen::Vector2d>& src, const std::vector<Eigen::Vector2d>& dst) {
  auto normalizer = [](const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    double spread = 0.0;
    for (const auto& p : pts) spread += (p - mean).norm();
    spread /= static_cast<double>(pts.size());
    const double s = spread > 0.0 ? std::sqrt(2.0) / spread : 1.0;
    Eigen::Matrix3d t;
    t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return t;
  };
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);
  Eigen::MatrixXd a(2 * src.size(), 9);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d s = ts * src[i].homogeneous();
    const Eigen::Vector3d d = td * dst[i].homogeneous();
    a.row(2 * i) << s.x(), s.y(), 1, 0, 0, 0, -d.x() * s.x(), -d.x() * s.y(), -d.x();
    a.row(2 * i + 1) << 0, 0, 0, s.x(), s.y(), 1, -d.y() * s.x(), -d.y() * s.y(), -d.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return td.inverse() * hn * ts;
}

}  // namespace

Pose estimate_board_pose(const ObservationRecord& record, const CheckerboardSpec& board,
                         const FisheyeIntrinsics& intr) {
  board.validate();
  if (record.corners.size() < 6) throw InputError("board pose needs at least 6 corners");

  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> rays;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& c : record.corners) {
    points.push_back(board.corner(c.id));
    rays.push_back(unproject(c.pixel, intr).ray);
    centroid += points.back().head<2>();
  }
  centroid /= static_cast<double>(points.size());
  Eigen::MatrixXd centered(points.size(), 2);
  for (std::size_t j = 0; j < points.size(); ++j) centered.row(j) = (points[j].head<2>() - centroid).transpose();
  const Eigen::Vector2d sv = Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  if (sv(1) <= 1e-6 * sv(0)) throw InputError("board pose: corners are collinear");

  // Virtual pinhole frame whose optical axis is the mean corner direction.
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  for (const auto& r : rays) axis += r;
  if (axis.norm() < 1e-9) throw InputError("board pose: corner rays have no common direction");
  axis.normalize();
  Eigen::Vector3d helper = std::abs(axis.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = (helper - helper.dot(axis) * axis).normalized();
  const Eigen::Vector3d e2 = axis.cross(e1);
  Eigen::Matrix3d virtual_from_camera;
  virtual_from_camera.row(0) = e1.transpose();
  virtual_from_camera.row(1) = e2.transpose();
  virtual_from_camera.row(2) = axis.transpose();

  std::vector<Eigen::Vector2d> plane;
  std::vector<Eigen::Vector2d> image;
  for (std::size_t j = 0; j < rays.size(); ++j) {
    const Eigen::Vector3d v = virtual_from_camera * rays[j];
    if (v.z() < 0.05) throw InputError("board pose: corners span too wide an angle for initialization");
    plane.push_back(points[j].head<2>());
    image.push_back(v.head<2>() / v.z());
  }
  const Eigen::Matrix3d h = homography_dlt(plane, image);
  double scale = 2.0 / (h.col(0).norm() + h.col(1).norm());
  if (h(2, 2) * scale < 0.0) scale = -scale;
  Eigen::Matrix3d rot;
  rot.col(0) = scale * h.col(0);
  rot.col(1) = scale * h.col(1);
  rot.col(2) = rot.col(0).cross(rot.col(1));
  rot = project_to_rotation(rot);
  const Eigen::Vector3d trans = scale * h.col(2);

  Eigen::VectorXd x(6);
  x.head<3>() = axis_angle_from_rotation(virtual_from_camera.transpose() * rot);
  x.tail<3>() = virtual_from_camera.transpose() * trans;

  BoardPoseProblem problem(points, rays);
  LMConfig lm;
  lm.gradient_tolerance = 1e-14;
  lm.relative_cost_tolerance = 1e-14;
  const LMSummary summary = levenberg_marquardt(problem, x, lm);
  if (!summary.x.allFinite()) throw NumericError("board pose: refinement produced non-finite pose");
  return {summary.x.head<3>(), summary.x.tail<3>()};
}

double reprojection_rmse(const ObservationRecord& record, const CheckerboardSpec& board,
                         const FisheyeIntrinsics& intr, const Pose& board_to_camera) {
  double sum = 0.0;
  for (const auto& c : record.corners) {
    const Projection p = project(board_to_camera.apply(board.corner(c.id)), intr);
    sum += (p.pixel - c.pixel).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(record.corners.size()));
}

namespace {

Pose average_poses(const std::vector<Pose>& poses) {
  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  for (const auto& p : poses) {
    sum += p.rotation();
    t += p.t;
  }
  return Pose::from_matrix(project_to_rotation(sum), t / static_cast<double>(poses.size()));
}

}  // namespace

RigInitialization init_rig(const ObservationSet& obs, const std::map<ViewKey, Pose>& view_poses, int num_cameras) {
  if (num_cameras < 1) throw InputError("rig initialization needs at least one camera");
  std::map<int, std::vector<int>> cameras_of_capture;
  for (const auto& rec : obs.records) {
    if (rec.camera >= num_cameras) {
      std::ostringstream msg;
      msg << "observation references camera " << rec.camera << " but the rig has " << num_cameras;
      throw InputError(msg.str());
    }
    if (!view_poses.count({rec.camera, rec.capture})) throw InputError("missing board pose for an observation");
    cameras_of_capture[rec.capture].push_back(rec.camera);
  }

  // shared[i][j]: captures seen by both cameras.
  std::vector<std::vector<std::vector<int>>> shared(num_cameras, std::vector<std::vector<int>>(num_cameras));
  for (const auto& [capture, cams] : cameras_of_capture) {
    for (int a : cams) {
      for (int b : cams) {
        if (a != b) shared[a][b].push_back(capture);
      }
    }
  }

  // Prim's algorithm on edge weight 1/#shared, i.e. maximize overlap.
  std::vector<int> parent(num_cameras, -1);
  std::vector<bool> in_tree(num_cameras, false);
  std::vector<int> order{0};
  in_tree[0] = true;
  while (true) {
    int best_child = -1;
    int best_parent = -1;
    std::size_t best_count = 0;
    for (int p : order) {
      for (int c = 0; c < num_cameras; ++c) {
        if (!in_tree[c] && shared[p][c].size() > best_count) {
          best_count = shared[p][c].size();
          best_child = c;
          best_parent = p;
        }
      }
    }
    if (best_child < 0) break;
    in_tree[best_child] = true;
    parent[best_child] = best_parent;
    order.push_back(best_child);
  }

  std::vector<int> unreachable;
  for (int c = 0; c < num_cameras; ++c) {
    if (!in_tree[c]) unreachable.push_back(c);
  }
  if (!unreachable.empty()) {
    std::ostringstream msg;
    msg << "camera graph is disconnected; unreachable camera(s):";
    for (int c : unreachable) msg << ' ' << c;
    throw InputError(msg.str());
  }

  RigInitialization init;
  init.camera_poses.assign(num_cameras, Pose::identity());
  for (std::size_t n = 1; n < order.size(); ++n) {
    const int child = order[n];
    const int par = parent[child];
    std::vector<Pose> edges;
    for (int capture : shared[par][child]) {
      edges.push_back(relative_pose(view_poses.at({child, capture}), view_poses.at({par, capture})));
    }
    init.camera_poses[child] = compose(average_poses(edges), init.camera_poses[par]);
  }

  for (const auto& [capture, cams] : cameras_of_capture) {
    std::vector<Pose> estimates;
    for (int cam : cams) estimates.push_back(compose(invert(init.camera_poses[cam]), view_poses.at({cam, capture})));
    init.board_poses[capture] = average_poses(estimates);
  }
  return init;
}

RigBundleProblem::RigBundleProblem(const ObservationSet& obs, const CheckerboardSpec& board,
                                   const std::vector<FisheyeIntrinsics>& intrinsics, const CalibrationConfig& config)
    : obs_(obs), board_(board), base_intrinsics_(intrinsics) {
  int offset = 0;
  cameras_.resize(intrinsics.size());
  for (std::size_t i = 0; i < intrinsics.size(); ++i) {
    CameraBlock& cam = cameras_[i];
    cam.radius_scale = intrinsics[i].fov_radius();
    if (config.refine_intrinsics) {
      cam.poly_offset = offset;
      for (std::size_t j = 0; j < intrinsics[i].poly().size(); ++j) {
        if (j != 1) cam.poly_indices.push_back(static_cast<int>(j));
      }
      offset += static_cast<int>(cam.poly_indices.size());
      if (config.refine_affine) {
        cam.affine_offset = offset;
        offset += 4;
      }
    }
    if (i > 0) {
      cam.pose_offset = offset;
      offset += 6;
    }
  }
  for (const auto& rec : obs.records) {
    if (rec.camera < 0 || rec.camera >= static_cast<int>(intrinsics.size())) {
      throw InputError("observation references a camera without intrinsics");
    }
    if (!board_offsets_.count(rec.capture)) {
      board_offsets_[rec.capture] = offset;
      offset += 6;
    }
    num_residuals_ += 2 * static_cast<int>(rec.corners.size());
  }
  num_parameters_ = offset;
}

Eigen::VectorXd RigBundleProblem::pack(const std::vector<FisheyeIntrinsics>& intrinsics,
                                       const std::vector<Pose>& camera_poses,
                                       const std::map<int, Pose>& board_poses) const {
  Eigen::VectorXd x(num_parameters_);
  for (std::size_t i = 0; i < cameras_.size(); ++i) {
    const CameraBlock& cam = cameras_[i];
    if (cam.poly_offset >= 0) {
      for (std::size_t n = 0; n < cam.poly_indices.size(); ++n) {
        const int j = cam.poly_indices[n];
        x(cam.poly_offset + n) = intrinsics[i].poly()[j] * std::pow(cam.radius_scale, j);
      }
    }
    if (cam.affine_offset >= 0) {
      const AffineMap& a = intrinsics[i].affine();
      x.segment<4>(cam.affine_offset) << a.c, a.e, a.cx, a.cy;
    }
    if (cam.pose_offset >= 0) {
      x.segment<3>(cam.pose_offset) = camera_poses[i].r;
      x.segment<3>(cam.pose_offset + 3) = camera_poses[i].t;
    }
  }
  for (const auto& [capture, off] : board_offsets_) {
    const Pose& p = board_poses.at(capture);
    x.segment<3>(off) = p.r;
    x.segment<3>(off + 3) = p.t;
  }
  return x;
}

void RigBundleProblem::unpack(const Eigen::VectorXd& x, std::vector<FisheyeIntrinsics>& intrinsics,
                              std::vector<Pose>& camera_poses, std::map<int, Pose>& board_poses) const {
  intrinsics.clear();
  camera_poses.assign(cameras_.size(), Pose::identity());
  for (std::size_t i = 0; i < cameras_.size(); ++i) {
    const CameraBlock& cam = cameras_[i];
    const FisheyeIntrinsics& base = base_intrinsics_[i];
    std::vector<double> poly = base.poly();
    AffineMap affine = base.affine();
    if (cam.poly_offset >= 0) {
      for (std::size_t n = 0; n < cam.poly_indices.size(); ++n) {
        const int j = cam.poly_indices[n];
        poly[j] = x(cam.poly_offset + n) / std::pow(cam.radius_scale, j);
      }
    }
    if (cam.affine_offset >= 0) {
      affine.c = x(cam.affine_offset);
      affine.e = x(cam.affine_offset + 1);
      affine.cx = x(cam.affine_offset + 2);
      affine.cy = x(cam.affine_offset + 3);
    }
    intrinsics.emplace_back(std::move(poly), affine, base.image_size(), base.fov_deg());
    if (cam.pose_offset >= 0) {
      camera_poses[i] = {x.segment<3>(cam.pose_offset), x.segment<3>(cam.pose_offset + 3)};
    }
  }
  board_poses.clear();
  for (const auto& [capture, off] : board_offsets_) board_poses[capture] = {x.segment<3>(off), x.segment<3>(off + 3)};
}

bool RigBundleProblem::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residuals,
                                Eigen::MatrixXd* jacobian) const {
  std::vector<FisheyeIntrinsics> intrinsics;
  std::vector<Pose> camera_poses;
  std::map<int, Pose> board_poses;
  try {
    unpack(x, intrinsics, camera_poses, board_poses);
  } catch (const InputError&) {
    return false;
  }
  if (jacobian) jacobian->setZero(num_residuals_, num_parameters_);

  std::vector<Eigen::Matrix3d> camera_rot(camera_poses.size());
  for (std::size_t i = 0; i < camera_poses.size(); ++i) camera_rot[i] = camera_poses[i].rotation();

  int row = 0;
  try {
    for (const auto& rec : obs_.records) {
      const CameraBlock& cam = cameras_[rec.camera];
      const Pose& cam_pose = camera_poses[rec.camera];
      const Eigen::Matrix3d& rc = camera_rot[rec.camera];
      const Pose& board_pose = board_poses.at(rec.capture);
      const Eigen::Matrix3d rb = board_pose.rotation();
      const int board_off = board_offsets_.at(rec.capture);
      for (const auto& c : rec.corners) {
        const Eigen::Vector3d corner = board_.corner(c.id);
        const Eigen::Vector3d world = rb * corner + board_pose.t;
        const Eigen::Vector3d point = rc * world + cam_pose.t;
        const ProjectionJacobian pj = project_with_jacobian(point, intrinsics[rec.camera]);
        if (!pj.pixel.allFinite()) return false;
        residuals.segment<2>(row) = pj.pixel - c.pixel;
        if (jacobian) {
          auto jrow = jacobian->middleRows<2>(row);
          if (cam.poly_offset >= 0) {
            for (std::size_t n = 0; n < cam.poly_indices.size(); ++n) {
              const int j = cam.poly_indices[n];
              jrow.col(cam.poly_offset + n) = pj.d_poly.col(j) / std::pow(cam.radius_scale, j);
            }
          }
          if (cam.affine_offset >= 0) {
            jrow.col(cam.affine_offset) = pj.d_affine.col(0);
            jrow.col(cam.affine_offset + 1) = pj.d_affine.col(2);
            jrow.col(cam.affine_offset + 2) = pj.d_affine.col(3);
            jrow.col(cam.affine_offset + 3) = pj.d_affine.col(4);
          }
          if (cam.pose_offset >= 0) {
            jrow.middleCols<3>(cam.pose_offset) = pj.d_point * rotate_jacobian(cam_pose.r, world);
            jrow.middleCols<3>(cam.pose_offset + 3) = pj.d_point;
          }
          const Eigen::Matrix<double, 2, 3> d_world = pj.d_point * rc;
          jrow.middleCols<3>(board_off) = d_world * rotate_jacobian(board_pose.r, corner);
          jrow.middleCols<3>(board_off + 3) = d_world;
        }
        row += 2;
      }
    }
  } catch (const NumericError&) {
    return false;
  }
  return true;
}

RigCalibration bundle_adjust(const ObservationSet& obs, const CheckerboardSpec& board,
                             const std::vector<FisheyeIntrinsics>& intrinsics, const RigInitialization& init,
                             const CalibrationConfig& config) {
  board.validate();
  obs.validate(board);
  if (init.camera_poses.size() != intrinsics.size()) {
    throw InputError("bundle adjustment: camera pose count does not match intrinsics count");
  }
  for (const auto& rec : obs.records) {
    if (!init.board_poses.count(rec.capture)) throw InputError("bundle adjustment: missing initial board pose");
  }
  for (const auto& cfg : {config.lm.initial_damping, config.lm.relative_cost_tolerance, config.lm.gradient_tolerance}) {
    if (!(cfg > 0.0)) throw InputError("bundle adjustment: LM tolerances must be positive");
  }

  std::vector<Pose> start_poses = init.camera_poses;
  start_poses[0] = Pose::identity();
  RigBundleProblem problem(obs, board, intrinsics, config);
  LMConfig lm = config.lm;
  lm.huber_threshold = config.huber ? config.huber_px : 0.0;
  const LMSummary summary = levenberg_marquardt(problem, problem.pack(intrinsics, start_poses, init.board_poses), lm);

  RigCalibration out;
  problem.unpack(summary.x, out.intrinsics, out.camera_poses, out.board_poses);

  Eigen::VectorXd residuals(problem.num_residuals());
  problem.evaluate(summary.x, residuals, nullptr);
  std::vector<double> sum(intrinsics.size(), 0.0);
  std::vector<int> count(intrinsics.size(), 0);
  int row = 0;
  for (const auto& rec : obs.records) {
    for (std::size_t c = 0; c < rec.corners.size(); ++c) {
      sum[rec.camera] += residuals.segment<2>(row).squaredNorm();
      ++count[rec.camera];
      row += 2;
    }
  }
  double total = 0.0;
  int total_count = 0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    out.report.camera_rmse_px.push_back(count[i] ? std::sqrt(sum[i] / count[i]) : 0.0);
    total += sum[i];
    total_count += count[i];
  }
  out.report.rmse_px = total_count ? std::sqrt(total / total_count) : 0.0;
  out.report.iterations = summary.iterations;
  out.report.converged = summary.converged;
  out.report.termination = summary.termination;
  out.report.cost_history = summary.cost_history;
  return out;
}

RigCalibration calibrate_rig(const ObservationSet& obs, const CheckerboardSpec& board,
                             const std::vector<FisheyeIntrinsics>& intrinsics, const CalibrationConfig& config) {
  board.validate();
  obs.validate(board);
  std::map<ViewKey, Pose> view_poses;
  for (const auto& rec : obs.records) {
    if (rec.camera >= static_cast<int>(intrinsics.size())) {
      throw InputError("observation references a camera without intrinsics");
    }
    view_poses[{rec.camera, rec.capture}] = estimate_board_pose(rec, board, intrinsics[rec.camera]);
  }
  const RigInitialization init = init_rig(obs, view_poses, static_cast<int>(intrinsics.size()));
  return bundle_adjust(obs, board, intrinsics, init, config);
}

}  // namespace omnisweep
