#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "omnisweep/least_squares.hpp"

using namespace omnisweep;

namespace {

// y = a * exp(b * t) + c
class ExpFit : public LeastSquaresProblem {
 public:
  ExpFit(std::vector<double> t, std::vector<double> y, bool flip_jacobian = false)
      : t_(std::move(t)), y_(std::move(y)), flip_(flip_jacobian) {}
  int num_residuals() const override { return static_cast<int>(t_.size()); }
  int num_parameters() const override { return 3; }
  bool evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) const override {
    r.resize(num_residuals());
    if (j) j->resize(num_residuals(), 3);
    for (int i = 0; i < num_residuals(); ++i) {
      const double e = std::exp(x[1] * t_[i]);
      r[i] = x[0] * e + x[2] - y_[i];
      if (j) {
        (*j)(i, 0) = e;
        (*j)(i, 1) = x[0] * t_[i] * e;
        (*j)(i, 2) = 1.0;
      }
    }
    if (j && flip_) *j = -*j;
    return true;
  }

 private:
  std::vector<double> t_;
  std::vector<double> y_;
  bool flip_;
};

// Fit a 2D point to observations, with 2-residual blocks.
class PointFit : public LeastSquaresProblem {
 public:
  explicit PointFit(std::vector<Eigen::Vector2d> obs) : obs_(std::move(obs)) {}
  int num_residuals() const override { return 2 * static_cast<int>(obs_.size()); }
  int num_parameters() const override { return 2; }
  int residual_block_size() const override { return 2; }
  bool evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* j) const override {
    r.resize(num_residuals());
    if (j) j->setZero(num_residuals(), 2);
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      r.segment<2>(2 * i) = x - obs_[i];
      if (j) j->block<2, 2>(2 * i, 0).setIdentity();
    }
    return true;
  }

 private:
  std::vector<Eigen::Vector2d> obs_;
};

}  // namespace

TEST(LeastSquares, RecoversCurveParameters) {
  std::vector<double> t;
  std::vector<double> y;
  for (int i = 0; i < 30; ++i) {
    t.push_back(0.1 * i);
    y.push_back(2.5 * std::exp(-1.3 * t.back()) + 0.7);
  }
  const ExpFit problem(t, y);
  const LMSummary s = levenberg_marquardt(problem, Eigen::Vector3d(1.0, -0.5, 0.0), LMConfig{});
  EXPECT_TRUE(s.converged);
  EXPECT_NEAR(s.x[0], 2.5, 1e-7);
  EXPECT_NEAR(s.x[1], -1.3, 1e-7);
  EXPECT_NEAR(s.x[2], 0.7, 1e-7);
  EXPECT_LT(s.final_cost, 1e-16);
}

TEST(LeastSquares, CostHistoryIsMonotone) {
  std::mt19937 rng(1);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> t;
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    t.push_back(0.05 * i);
    y.push_back(1.5 * std::exp(0.8 * t.back()) - 0.2 + noise(rng));
  }
  const ExpFit problem(t, y);
  const LMSummary s = levenberg_marquardt(problem, Eigen::Vector3d(0.5, 0.1, 1.0), LMConfig{});
  ASSERT_GE(s.cost_history.size(), 2u);
  EXPECT_EQ(s.cost_history.front(), s.initial_cost);
  EXPECT_EQ(s.cost_history.back(), s.final_cost);
  for (std::size_t i = 1; i < s.cost_history.size(); ++i) EXPECT_LE(s.cost_history[i], s.cost_history[i - 1]);
}

TEST(LeastSquares, HuberDownweightsOutliers) {
  std::vector<Eigen::Vector2d> obs;
  for (int i = 0; i < 20; ++i) obs.emplace_back(1.0 + 0.01 * (i % 3 - 1), 2.0 + 0.01 * (i % 5 - 2));
  obs.emplace_back(40.0, -30.0);
  obs.emplace_back(-25.0, 50.0);
  const PointFit problem(obs);
  LMConfig plain;
  LMConfig robust;
  robust.huber_threshold = 0.1;
  const LMSummary a = levenberg_marquardt(problem, Eigen::Vector2d::Zero(), plain);
  const LMSummary b = levenberg_marquardt(problem, Eigen::Vector2d::Zero(), robust);
  EXPECT_GT((a.x - Eigen::Vector2d(1.0, 2.0)).norm(), 0.5);
  EXPECT_LT((b.x - Eigen::Vector2d(1.0, 2.0)).norm(), 0.02);
}

TEST(LeastSquares, RobustCostMatchesHuberFormula) {
  Eigen::VectorXd r(4);
  r << 0.3, 0.4, 3.0, 4.0;  // block norms 0.5 and 5
  EXPECT_DOUBLE_EQ(robust_cost(r, 2, 0.0), 0.25 + 25.0);
  // Quadratic inside, 2 k |r| - k^2 outside.
  EXPECT_DOUBLE_EQ(robust_cost(r, 2, 1.0), 0.25 + 2.0 * 5.0 - 1.0);
}

TEST(LeastSquares, WrongJacobianSignDiverges) {
  std::vector<double> t;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    t.push_back(0.1 * i);
    y.push_back(std::exp(t.back()));
  }
  const ExpFit problem(t, y, true);
  const Eigen::Vector3d x0(0.5, 0.5, 0.5);
  try {
    levenberg_marquardt(problem, x0, LMConfig{});
    FAIL() << "expected divergence";
  } catch (const LMDivergence& e) {
    EXPECT_EQ(e.last_accepted(), Eigen::VectorXd(x0));
  }
}

TEST(LeastSquares, InadmissibleStartThrows) {
  class Never : public LeastSquaresProblem {
   public:
    int num_residuals() const override { return 1; }
    int num_parameters() const override { return 1; }
    bool evaluate(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*) const override { return false; }
  };
  EXPECT_THROW(levenberg_marquardt(Never{}, Eigen::VectorXd::Zero(1), LMConfig{}), NumericError);
}
