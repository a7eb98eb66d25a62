#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "omnisweep/camera_model.hpp"
#include "omnisweep/least_squares.hpp"
#include "omnisweep/pose.hpp"

namespace omnisweep {

// Planar target with cols x rows interior corners. Corner id p sits at
// (col * square, row * square, 0) in the board frame, p = row * cols + col.
struct CheckerboardSpec {
  int cols = 0;
  int rows = 0;
  double square_m = 0.0;

  void validate() const;
  int corner_count() const { return cols * rows; }
  Eigen::Vector3d corner(int id) const;
};

struct CornerObservation {
  int id = 0;
  PixelPoint pixel;
};

// Corners of capture `capture` seen by camera `camera`.
struct ObservationRecord {
  int camera = 0;
  int capture = 0;
  std::vector<CornerObservation> corners;
};

struct ObservationSet {
  std::vector<ObservationRecord> records;

  // Checks: >= 6 corners per record, unique corner ids, unique (camera,
  // capture) pairs, ids inside the board.
  void validate(const CheckerboardSpec& board) const;
  int max_camera_id() const;
};

using ViewKey = std::pair<int, int>;  // (camera, capture)

/// Board-to-camera pose from one record. Corners are lifted to unit rays,
/// rotated into a virtual pinhole frame centered on their mean direction,
/// initialized with a planar homography there and refined by LM on the
/// angular residual. Throws InputError for fewer than 6 or collinear corners.
Pose estimate_board_pose(const ObservationRecord& record, const CheckerboardSpec& board,
                         const FisheyeIntrinsics& intr);

double reprojection_rmse(const ObservationRecord& record, const CheckerboardSpec& board,
                         const FisheyeIntrinsics& intr, const Pose& board_to_camera);

struct RigInitialization {
  // World (camera 0) to camera i.
  std::vector<Pose> camera_poses;
  // Board k to world.
  std::map<int, Pose> board_poses;
};

/// Chains per-view board poses into a rig along a maximum-overlap spanning
/// tree rooted at camera 0. Parallel edges are merged by chordal rotation
/// averaging and mean translation. Throws InputError naming unreachable
/// cameras.
RigInitialization init_rig(const ObservationSet& obs, const std::map<ViewKey, Pose>& view_poses, int num_cameras);

struct CalibrationConfig {
  LMConfig lm;
  bool refine_intrinsics = true;
  // Refines c, e, cx, cy. d stays at its input value: together with the
  // camera roll it is a gauge freedom of the model.
  bool refine_affine = true;
  bool huber = false;
  double huber_px = 3.0;
};

struct CalibrationReport {
  std::vector<double> camera_rmse_px;
  double rmse_px = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  std::vector<double> cost_history;
};

struct RigCalibration {
  std::vector<FisheyeIntrinsics> intrinsics;
  // World (camera 0) to camera i; camera_poses[0] is identity.
  std::vector<Pose> camera_poses;
  std::map<int, Pose> board_poses;
  CalibrationReport report;
};

// Parameter layout and residuals of the joint reprojection objective. Public
// so the analytic Jacobian can be checked against finite differences.
class RigBundleProblem : public LeastSquaresProblem {
 public:
  RigBundleProblem(const ObservationSet& obs, const CheckerboardSpec& board,
                   const std::vector<FisheyeIntrinsics>& intrinsics, const CalibrationConfig& config);

  int num_residuals() const override { return num_residuals_; }
  int num_parameters() const override { return num_parameters_; }
  int residual_block_size() const override { return 2; }
  bool evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residuals, Eigen::MatrixXd* jacobian) const override;

  Eigen::VectorXd pack(const std::vector<FisheyeIntrinsics>& intrinsics, const std::vector<Pose>& camera_poses,
                       const std::map<int, Pose>& board_poses) const;
  void unpack(const Eigen::VectorXd& x, std::vector<FisheyeIntrinsics>& intrinsics,
              std::vector<Pose>& camera_poses, std::map<int, Pose>& board_poses) const;

 private:
  struct CameraBlock {
    int poly_offset = -1;
    std::vector<int> poly_indices;
    int affine_offset = -1;
    int pose_offset = -1;
    double radius_scale = 1.0;
  };

  const ObservationSet& obs_;
  CheckerboardSpec board_;
  std::vector<FisheyeIntrinsics> base_intrinsics_;
  std::vector<CameraBlock> cameras_;
  std::map<int, int> board_offsets_;
  int num_residuals_ = 0;
  int num_parameters_ = 0;
};

/// Joint refinement of intrinsics, camera poses and board poses minimizing
/// pixel reprojection error, with camera 0 fixed as the world frame.
/// Non-convergence within max_iterations is reported via report.converged.
RigCalibration bundle_adjust(const ObservationSet& obs, const CheckerboardSpec& board,
                             const std::vector<FisheyeIntrinsics>& intrinsics, const RigInitialization& init,
                             const CalibrationConfig& config = {});

// Board poses per view, rig initialization and bundle adjustment in one go.
RigCalibration calibrate_rig(const ObservationSet& obs, const CheckerboardSpec& board,
                             const std::vector<FisheyeIntrinsics>& intrinsics, const CalibrationConfig& config = {});

}  // namespace omnisweep
