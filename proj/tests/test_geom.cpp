#include <doctest.h>

#include <Eigen/Geometry>
#include <random>

#include "gba/error.hpp"
#include "gba/geom.hpp"
#include "oracles.hpp"

using namespace gba;

namespace {

const CameraIntrinsics kK{100.0, 100.0, 960.0, 640.0, 1920, 1280};

Pose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  std::uniform_real_distribution<double> t(-50.0, 50.0);
  return Pose(q.normalized().toRotationMatrix(), Eigen::Vector3d(t(rng), t(rng), t(rng)));
}

}  // namespace

TEST_CASE("project: principal ray and offset point") {
  const Pixel2 a = project(Pose::identity(), Point3(0, 0, 5), kK);
  CHECK(a.u == doctest::Approx(960.0));
  CHECK(a.v == doctest::Approx(640.0));
  const Pixel2 b = project(Pose::identity(), Point3(1, 0, 5), kK);
  CHECK(b.u == doctest::Approx(980.0));
  CHECK(b.v == doctest::Approx(640.0));
}

TEST_CASE("project: translated camera matches an explicit 4x4 pipeline") {
  const Pose pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -2));
  const Point3 x(0.5, 0.5, 4.0);
  const Eigen::Vector2d expected =
      oracle::project_homogeneous(pose.rotation(), pose.translation(), 100, 100, 960, 640, x);
  CHECK(expected.x() == doctest::Approx(985.0));
  CHECK(expected.y() == doctest::Approx(665.0));
  const Pixel2 p = project(pose, x, kK);
  CHECK(std::abs(p.u - expected.x()) < 1e-12);
  CHECK(std::abs(p.v - expected.y()) < 1e-12);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 200; ++i) {
    const Pose rp = random_pose(rng);
    const Point3 q(u(rng), u(rng), u(rng));
    if (camera_depth(rp, q) <= 0.1) continue;
    const Eigen::Vector2d ref = oracle::project_homogeneous(rp.rotation(), rp.translation(), 100, 100, 960, 640, q);
    const Pixel2 got = project(rp, q, kK);
    CHECK(std::abs(got.u - ref.x()) < 1e-6);
    CHECK(std::abs(got.v - ref.y()) < 1e-6);
  }
}

TEST_CASE("project: behind camera is an error") {
  CHECK_THROWS_AS(project(Pose::identity(), Point3(0, 0, -1), kK), Error);
  CHECK_THROWS_AS(project(Pose::identity(), Point3(0, 0, 1e-7), kK), Error);
  CHECK_FALSE(try_project(Pose::identity(), Point3(0, 0, 0), kK).has_value());
  try {
    project(Pose::identity(), Point3(1, 1, 0), kK);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BehindCamera);
  }
}

TEST_CASE("backproject inverts project") {
  const Point3 origin_ray = backproject(Pose::identity(), Pixel2{960, 640}, 10.0, kK);
  CHECK((origin_ray - Point3(0, 0, 10)).norm() < 1e-12);

  const Pose shifted(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -2));
  for (const auto& [pose, x] : {std::pair{Pose::identity(), Point3(0, 0, 5)},
                                std::pair{Pose::identity(), Point3(1, 0, 5)},
                                std::pair{shifted, Point3(0.5, 0.5, 4)}}) {
    const Pixel2 px = project(pose, x, kK);
    const Point3 back = backproject(pose, px, camera_depth(pose, x), kK);
    CHECK((back - x).norm() < 1e-9);
  }
  CHECK_THROWS_AS(backproject(Pose::identity(), Pixel2{1, 1}, 0.0, kK), Error);
  CHECK_THROWS_AS(backproject(Pose::identity(), Pixel2{1, 1}, -3.0, kK), Error);
}

TEST_CASE("property: projection round trip over random poses") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> pu(0.0, 1920.0), pv(0.0, 1280.0), depth(0.1, 500.0);
  double worst_px = 0.0;
  double worst_m = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Pose pose = random_pose(rng);
    const Pixel2 px{pu(rng), pv(rng)};
    const double d = depth(rng);
    const Point3 x = backproject(pose, px, d, kK);
    const Pixel2 again = project(pose, x, kK);
    worst_px = std::max({worst_px, std::abs(again.u - px.u), std::abs(again.v - px.v)});
    const Point3 x2 = backproject(pose, again, d, kK);
    worst_m = std::max(worst_m, (x2 - x).norm());
  }
  CHECK(worst_px < 1e-9);
  CHECK(worst_m < 1e-9);
}

TEST_CASE("property: pose composition and rigid invariance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-577.0, 577.0);  // |x| <= 1e3
  for (int i = 0; i < 1000; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const Point3 x(u(rng), u(rng), u(rng));
    CHECK(((a * b) * c).apply(x).isApprox((a * (b * c)).apply(x), 1e-12));
    CHECK(((a * b).apply(x) - a.apply(b.apply(x))).norm() < 1e-12 * 1e3);
    CHECK((a * a.inverse()).is_valid());

    // Moving the world by g and the camera by g^-1 leaves the image unchanged.
    const Pose g = random_pose(rng);
    const Pose moved = a * g.inverse();
    const Point3 gx = g.apply(x);
    auto p0 = try_project(a, x, kK);
    auto p1 = try_project(moved, gx, kK);
    REQUIRE(p0.has_value() == p1.has_value());
    if (p0 && camera_depth(a, x) > 1.0) {
      CHECK(std::abs(p0->u - p1->u) < 1e-6);
      CHECK(std::abs(p0->v - p1->v) < 1e-6);
    }
  }
}

TEST_CASE("pixel_in_box is closed") {
  const Box2D b{0, 0, 10, 10};
  CHECK(pixel_in_box({5, 5}, b));
  CHECK(pixel_in_box({10, 10}, b));
  CHECK(pixel_in_box({0, 0}, b));
  CHECK_FALSE(pixel_in_box({10.001, 5}, b));
  CHECK_FALSE(pixel_in_box({5, -0.001}, b));
}

TEST_CASE("intrinsics and pose validation") {
  CHECK_NOTHROW(kK.validate());
  CHECK_THROWS_AS((CameraIntrinsics{0, 100, 10, 10, 20, 20}.validate()), Error);
  CHECK_THROWS_AS((CameraIntrinsics{100, 100, 20, 10, 20, 20}.validate()), Error);
  Eigen::Matrix3d skew = Eigen::Matrix3d::Identity();
  skew(0, 1) = 1e-3;
  CHECK_FALSE(Pose(skew, Eigen::Vector3d::Zero()).is_valid());
  CHECK_FALSE(Pose(-Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()).is_valid());
  const Pose look = Pose::look_along(Point3(1, 2, 1.6), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d::UnitZ());
  CHECK(look.is_valid());
  CHECK((look.camera_center() - Point3(1, 2, 1.6)).norm() < 1e-12);
  // +z forward, +y down in the camera frame
  CHECK(look.apply(Point3(11, 2, 1.6)).z() == doctest::Approx(10.0));
  CHECK(look.apply(Point3(1, 2, 0.6)).y() == doctest::Approx(1.0));
  CHECK(look.apply(Point3(1, 1, 1.6)).x() == doctest::Approx(1.0));
}
