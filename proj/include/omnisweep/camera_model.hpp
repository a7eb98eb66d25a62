#pragma once

#include <Eigen/Core>
#include <vector>

namespace omnisweep {

using PixelPoint = Eigen::Vector2d;
using NormalizedPoint = Eigen::Vector2d;
using Ray3 = Eigen::Vector3d;

struct ImageSize {
  int width = 0;
  int height = 0;

  bool operator==(const ImageSize&) const = default;
};

// Stretch/skew plus distortion center, mapping normalized-plane coordinates
// to pixels:
//   u = c*x + d*y + cx
//   v = e*x +   y + cy
struct AffineMap {
  double c = 1.0;
  double d = 0.0;
  double e = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  double determinant() const { return c - d * e; }
  PixelPoint apply(const NormalizedPoint& x) const;
  NormalizedPoint invert(const PixelPoint& p) const;

  bool operator==(const AffineMap&) const = default;
};

/// Polynomial omnidirectional lens model.
///
/// A normalized-plane point x at radius rho back-projects to the ray
/// (x, y, f(rho)) with f(rho) = a0 + a2 rho^2 + ... + ak rho^k. The optical
/// axis is +z (x right, y down), so a0 must be positive. The linear
/// coefficient a1 is fixed to zero.
///
/// Construction validates the coefficients and precomputes the radius at
/// which the incidence angle reaches half the field of view. Throws
/// InputError when the incidence-angle map is not strictly increasing over
/// that range (checked at 1024 samples).
class FisheyeIntrinsics {
 public:
  FisheyeIntrinsics(std::vector<double> poly, AffineMap affine, ImageSize size, double fov_deg);

  const std::vector<double>& poly() const { return poly_; }
  const AffineMap& affine() const { return affine_; }
  const ImageSize& image_size() const { return size_; }
  double fov_deg() const { return fov_deg_; }
  double half_fov_rad() const { return half_fov_; }

  // Normalized-plane radius where the incidence angle equals fov/2.
  double fov_radius() const { return fov_radius_; }

  // f(rho), the z-component of the back-projected ray.
  double ray_z(double rho) const;
  // f'(rho)
  double ray_z_derivative(double rho) const;
  // f'(rho) / rho, a polynomial because a1 = 0.
  double ray_z_derivative_over_rho(double rho) const;
  // Angle between the optical axis and the ray at normalized radius rho.
  double incidence_angle(double rho) const;

  bool contains_pixel(const PixelPoint& p) const;

  bool operator==(const FisheyeIntrinsics& o) const {
    return poly_ == o.poly_ && affine_ == o.affine_ && size_ == o.size_ && fov_deg_ == o.fov_deg_;
  }

 private:
  std::vector<double> poly_;
  AffineMap affine_;
  ImageSize size_;
  double fov_deg_;
  double half_fov_;
  double fov_radius_;
};

struct Projection {
  PixelPoint pixel;
  bool valid = false;
};

struct Unprojection {
  Ray3 ray;
  bool valid = false;
};

/// Camera-frame point to pixel. valid is false beyond fov/2 or outside the
/// image. Points up to 2x the FOV radius still get a finite pixel when the
/// polynomial permits; further out the pixel is NaN.
/// Throws InputError on non-finite or zero input, NumericError if the radius
/// solve fails to converge.
Projection project(const Eigen::Vector3d& point, const FisheyeIntrinsics& intr);

/// Pixel to unit ray. valid is false outside the FOV circle.
Unprojection unproject(const PixelPoint& pixel, const FisheyeIntrinsics& intr);

double fov_radius(const FisheyeIntrinsics& intr);

/// Normalized-plane radius whose incidence angle is `angle`, solved by
/// safeguarded Newton iteration (tolerance 1e-12, 50 iterations max).
/// `upper` bounds the bracket; pass fov_radius() for in-FOV angles.
double solve_radius_for_angle(const FisheyeIntrinsics& intr, double angle, double upper);

// Derivatives of the pixel projection, used by bundle adjustment.
struct ProjectionJacobian {
  PixelPoint pixel;
  bool valid = false;
  Eigen::Matrix<double, 2, 3> d_point;
  // Columns follow poly() indices; column 1 (a1) is always zero.
  Eigen::Matrix<double, 2, Eigen::Dynamic> d_poly;
  // Columns: c, d, e, cx, cy.
  Eigen::Matrix<double, 2, 5> d_affine;
};

ProjectionJacobian project_with_jacobian(const Eigen::Vector3d& point, const FisheyeIntrinsics& intr);

}  // namespace omnisweep
