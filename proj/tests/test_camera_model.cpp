#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <random>

#include "omnisweep/camera_model.hpp"
#include "omnisweep/errors.hpp"
#include "omnisweep/synthetic.hpp"

using namespace omnisweep;

namespace {

constexpr double kPi = 3.14159265358979323846;

FisheyeIntrinsics calib_camera() {
  const AffineMap affine{1.0015, 0.0004, -0.0007, 800.0, 766.0};
  return synth::make_intrinsics(370.0, {1600, 1532}, 220.0, &affine);
}

// Plain bisection on theta(rho) = angle, sharing nothing with the library
// solver beyond the polynomial definition.
double bisect_radius(const std::vector<double>& poly, double angle, double hi) {
  auto theta = [&](double rho) {
    double f = 0.0;
    for (std::size_t j = poly.size(); j-- > 0;) f = f * rho + poly[j];
    return std::atan2(rho, f);
  };
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (theta(mid) < angle) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::Vector3d direction(double incidence, double azimuth) {
  return {std::sin(incidence) * std::cos(azimuth), std::sin(incidence) * std::sin(azimuth), std::cos(incidence)};
}

}  // namespace

TEST(CameraModel, OpticalAxisMapsToDistortionCenter) {
  const AffineMap affine{1.0, 0.0, 0.0, 800.0, 766.0};
  const FisheyeIntrinsics intr = synth::make_intrinsics(370.0, {1600, 1532}, 220.0, &affine);
  const Projection p = project({0.0, 0.0, 1.0}, intr);
  EXPECT_TRUE(p.valid);
  EXPECT_NEAR(p.pixel.x(), 800.0, 1e-12);
  EXPECT_NEAR(p.pixel.y(), 766.0, 1e-12);
}

TEST(CameraModel, JustBeyondHalfFovIsInvalid) {
  const FisheyeIntrinsics intr = calib_camera();
  const double angle = (110.0 + 1.0) * kPi / 180.0;
  for (double az = 0.0; az < 2 * kPi; az += 0.7) EXPECT_FALSE(project(direction(angle, az), intr).valid);
  EXPECT_TRUE(project(direction((110.0 - 1.0) * kPi / 180.0, 0.3), intr).valid);
}

TEST(CameraModel, ProjectMatchesBisectionOracle) {
  const FisheyeIntrinsics intr = calib_camera();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> inc(0.0, intr.half_fov_rad());
  std::uniform_real_distribution<double> az(-kPi, kPi);
  for (int i = 0; i < 500; ++i) {
    const double a = inc(rng);
    const double phi = az(rng);
    const double rho = bisect_radius(intr.poly(), a, intr.fov_radius() * 1.01);
    const PixelPoint expected = intr.affine().apply(NormalizedPoint(rho * std::cos(phi), rho * std::sin(phi)));
    const Projection p = project(direction(a, phi) * 3.7, intr);
    EXPECT_LT((p.pixel - expected).norm(), 1e-6);
  }
}

TEST(CameraModel, PixelRoundTrip) {
  const FisheyeIntrinsics intr = calib_camera();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1599.0);
  std::uniform_real_distribution<double> v(0.0, 1531.0);
  int checked = 0;
  while (checked < 500) {
    const PixelPoint px(u(rng), v(rng));
    const Unprojection ray = unproject(px, intr);
    if (!ray.valid) continue;
    const Projection back = project(ray.ray, intr);
    EXPECT_LT((back.pixel - px).norm(), 1e-6);
    ++checked;
  }
}

TEST(CameraModel, RayRoundTripIsParallel) {
  const FisheyeIntrinsics intr = calib_camera();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> inc(0.0, intr.half_fov_rad());
  std::uniform_real_distribution<double> az(-kPi, kPi);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector3d r = direction(inc(rng), az(rng));
    const Projection p = project(r, intr);
    const Unprojection back = unproject(p.pixel, intr);
    EXPECT_NEAR(back.ray.norm(), 1.0, 1e-12);
    EXPECT_LT(back.ray.cross(r).norm(), 1e-9);
    EXPECT_GT(back.ray.dot(r), 1.0 - 1e-12);
  }
}

TEST(CameraModel, UnprojectAtDistortionCenter) {
  const FisheyeIntrinsics intr = calib_camera();
  const Unprojection u = unproject(PixelPoint(800.0, 766.0), intr);
  EXPECT_TRUE(u.valid);
  EXPECT_NEAR((u.ray - Eigen::Vector3d(0, 0, 1)).norm(), 0.0, 1e-15);
}

TEST(CameraModel, FovCircleHasHalfFovIncidence) {
  const FisheyeIntrinsics intr = calib_camera();
  const double rho = bisect_radius(intr.poly(), intr.half_fov_rad(), 4.0 * intr.poly()[0]);
  for (double az = 0.0; az < 2 * kPi; az += 0.5) {
    const PixelPoint px = intr.affine().apply(NormalizedPoint(rho * std::cos(az), rho * std::sin(az)));
    const Eigen::Vector3d ray = unproject(px, intr).ray;
    EXPECT_NEAR(std::acos(ray.z()), intr.half_fov_rad(), 1e-6);
  }
}

TEST(CameraModel, FovRadiusMatchesBisection) {
  const FisheyeIntrinsics intr = calib_camera();
  EXPECT_NEAR(fov_radius(intr), bisect_radius(intr.poly(), intr.half_fov_rad(), 4.0 * intr.poly()[0]), 1e-9);
}

TEST(CameraModel, FovRadius180IsHorizonRoot) {
  const FisheyeIntrinsics intr = synth::make_intrinsics(370.0, {1600, 1532}, 180.0);
  const double rho = fov_radius(intr);
  EXPECT_NEAR(intr.ray_z(rho) / intr.poly()[0], 0.0, 1e-12);
}

TEST(CameraModel, FovRadiusMonotonicInFov) {
  double previous = 0.0;
  for (double fov = 40.0; fov <= 230.0; fov += 10.0) {
    const double r = fov_radius(synth::make_intrinsics(370.0, {1600, 1532}, fov));
    EXPECT_GT(r, previous);
    previous = r;
  }
}

TEST(CameraModel, ProjectionIsContinuous) {
  const FisheyeIntrinsics intr = calib_camera();
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> inc(0.0, intr.half_fov_rad() - 1e-5);
  std::uniform_real_distribution<double> az(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const double a = inc(rng);
    const double b = az(rng);
    const PixelPoint p0 = project(direction(a, b), intr).pixel;
    const PixelPoint p1 = project(direction(a + 1e-6, b), intr).pixel;
    EXPECT_LT((p1 - p0).norm(), 1e-2);
  }
}

TEST(CameraModel, AffineRoundTrip) {
  const AffineMap a{1.02, -0.01, 0.03, 812.5, 743.25};
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const NormalizedPoint x(d(rng), d(rng));
    EXPECT_LT((a.invert(a.apply(x)) - x).norm(), 1e-12);
  }
}

TEST(CameraModel, ValidityFollowsHalfFov) {
  // Large image so the bounds check never interferes.
  const FisheyeIntrinsics intr = synth::make_intrinsics(300.0, {2000, 2000}, 220.0);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> inc(0.0, kPi);
  std::uniform_real_distribution<double> az(-kPi, kPi);
  for (int i = 0; i < 2000; ++i) {
    const double a = inc(rng);
    if (std::abs(a - intr.half_fov_rad()) < 1e-9) continue;
    EXPECT_EQ(project(direction(a, az(rng)), intr).valid, a < intr.half_fov_rad());
  }
}

TEST(CameraModel, OutOfImageIsInvalid) {
  // 1000 px wide image cuts through the FOV circle.
  const FisheyeIntrinsics intr = synth::make_intrinsics(370.0, {1000, 1532}, 220.0);
  const Projection p = project(direction(1.5, 0.0), intr);
  EXPECT_GT(p.pixel.x(), 999.0);
  EXPECT_FALSE(p.valid);
}

TEST(CameraModel, JacobianMatchesFiniteDifferences) {
  const FisheyeIntrinsics intr = calib_camera();
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> inc(0.0, intr.half_fov_rad());
  std::uniform_real_distribution<double> az(-kPi, kPi);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d x = direction(inc(rng), az(rng)) * 1.3;
    const ProjectionJacobian j = project_with_jacobian(x, intr);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6;
      Eigen::Vector3d xp = x;
      Eigen::Vector3d xm = x;
      xp[k] += h;
      xm[k] -= h;
      const Eigen::Vector2d fd = (project(xp, intr).pixel - project(xm, intr).pixel) / (2 * h);
      EXPECT_LT((fd - j.d_point.col(k)).norm(), 1e-4 * std::max(1.0, fd.norm()));
    }
    for (std::size_t k = 0; k < intr.poly().size(); ++k) {
      if (k == 1) continue;
      // Step sized so a_k rho^k moves by about 1e-6 F across the image.
      const double h = 1e-6 * intr.poly()[0] / std::pow(intr.fov_radius(), static_cast<double>(k));
      auto poly_p = intr.poly();
      auto poly_m = intr.poly();
      poly_p[k] += h;
      poly_m[k] -= h;
      const FisheyeIntrinsics ip(poly_p, intr.affine(), intr.image_size(), intr.fov_deg());
      const FisheyeIntrinsics im(poly_m, intr.affine(), intr.image_size(), intr.fov_deg());
      const Eigen::Vector2d fd = (project(x, ip).pixel - project(x, im).pixel) / (2 * h);
      const Eigen::Vector2d an = j.d_poly.col(static_cast<Eigen::Index>(k));
      // Near the axis a_k barely moves the pixel; compare displacements with a
      // floor above the radius solver's round-off.
      EXPECT_LT((fd - an).norm() * h, 1e-4 * an.norm() * h + 1e-9) << "k = " << k;
    }
  }
}

TEST(CameraModel, RejectsInvalidParameters) {
  const AffineMap a{1.0, 0.0, 0.0, 10.0, 10.0};
  const ImageSize s{20, 20};
  EXPECT_THROW(FisheyeIntrinsics({1.0, 0.1, -0.1}, a, s, 200.0), InputError);
  EXPECT_THROW(FisheyeIntrinsics({-1.0, 0.0, 0.1}, a, s, 200.0), InputError);
  EXPECT_THROW(FisheyeIntrinsics({1.0, 0.0, -0.1}, a, s, 0.0), InputError);
  EXPECT_THROW(FisheyeIntrinsics({1.0, 0.0, -0.1}, a, s, 360.0), InputError);
  EXPECT_THROW(FisheyeIntrinsics({1.0, 0.0, -0.1}, AffineMap{1.0, 1.0, 1.0, 0, 0}, s, 200.0), InputError);
  // Angle rises, falls back, then rises again past the half FOV.
  EXPECT_THROW(FisheyeIntrinsics({1.0, 0.0, 1.0, 0.0, -0.01}, a, s, 200.0), InputError);
}

TEST(CameraModel, RejectsNonFinitePoints) {
  const FisheyeIntrinsics intr = calib_camera();
  EXPECT_THROW(project({std::nan(""), 0.0, 1.0}, intr), InputError);
  EXPECT_THROW(project({0.0, 0.0, 0.0}, intr), InputError);
}
