#include <cmath>
#include <limits>

#include "doctest.h"
#include "iteach/core.hpp"
#include "iteach/error.hpp"
#include "iteach/rng.hpp"

using namespace iteach;

namespace {

// Long-double arccos of the normalized dot product.
long double ref_angle(const Vec3& u, const Vec3& v) {
  const long double d = static_cast<long double>(u.x) * v.x + static_cast<long double>(u.y) * v.y +
                        static_cast<long double>(u.z) * v.z;
  const long double nu = std::sqrt(static_cast<long double>(u.x) * u.x + static_cast<long double>(u.y) * u.y +
                                   static_cast<long double>(u.z) * u.z);
  const long double nv = std::sqrt(static_cast<long double>(v.x) * v.x + static_cast<long double>(v.y) * v.y +
                                   static_cast<long double>(v.z) * v.z);
  long double c = d / (nu * nv);
  c = std::fmax(-1.0L, std::fmin(1.0L, c));
  return std::acos(c) * 180.0L / 3.14159265358979323846264338327950288L;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("angle_between basic cases") {
    CHECK(*angle_between({1, 0, 0}, {1, 0, 0}) == doctest::Approx(0.0));
    CHECK(*angle_between({1, 0, 0}, {0, 1, 0}) == doctest::Approx(90.0));
    CHECK(*angle_between({1, 0, 0}, {-1, 0, 0}) == doctest::Approx(180.0));
    CHECK_FALSE(angle_between({0, 0, 0}, {1, 0, 0}).has_value());
    CHECK_FALSE(angle_between({1, 0, 0}, {1e-12, 0, 0}).has_value());
  }

  TEST_CASE("angle_between matches a high precision reference at 15 degrees") {
    const Vec3 u{1, 0, 0}, v{0.9659258, 0.2588190, 0};
    const double a = *angle_between(u, v);
    // The 7-digit coordinates put the exact angle about 2.1e-6 below 15.
    CHECK(std::fabs(a - static_cast<double>(ref_angle(u, v))) < 1e-9);
    CHECK(std::fabs(a - 15.0) < 1e-5);
  }

  TEST_CASE("angle_between is symmetric and agrees with the reference on random pairs") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
      const Vec3 u{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const double a = *angle_between(u, v);
      CHECK(a == *angle_between(v, u));
      CHECK(std::fabs(a - static_cast<double>(ref_angle(u, v))) < 1e-6);
      CHECK(a >= 0.0);
      CHECK(a <= 180.0);
    }
  }

  TEST_CASE("clip_norm") {
    CHECK(clip_norm({0.05, 0, 0}, 0.02).x == doctest::Approx(0.02));
    const Vec3 inside{0.001, 0, 0};
    CHECK(clip_norm(inside, 0.02) == inside);
    // 3-4-5 triangle: norm 0.05, scaled by 0.02 / 0.05.
    const Vec3 c = clip_norm({0.03, 0.04, 0}, 0.02);
    CHECK(c.x == doctest::Approx(0.012).epsilon(1e-12));
    CHECK(c.y == doctest::Approx(0.016).epsilon(1e-12));
    CHECK(c.z == 0.0);
    CHECK_THROWS_AS(clip_norm({1, 0, 0}, 0.0), Error);
    CHECK_THROWS_AS(clip_norm({std::numeric_limits<double>::quiet_NaN(), 0, 0}, 1.0), Error);
  }

  TEST_CASE("clip_norm bound and idempotence") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
      const Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const double m = rng.uniform(0.001, 0.5);
      const Vec3 c = clip_norm(v, m);
      CHECK(c.norm() <= m + 1e-12);
      CHECK(clip_norm(c, m) == c);
    }
  }

  TEST_CASE("rng streams") {
    const Rng root(7);
    Rng a = root.fork("episode-0"), b = root.fork("episode-0");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(root.fork("episode-0").next_u64() != root.fork("episode-1").next_u64());
    CHECK(Rng(7).fork("x").next_u64() != Rng(8).fork("x").next_u64());
    // The parent's draw position does not matter.
    Rng moved(7);
    moved.next_u64();
    CHECK(moved.fork("y").next_u64() == Rng(7).fork("y").next_u64());
  }

  TEST_CASE("rng ranges") {
    Rng r(3);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(r.below(7) < 7u);
      const double z = r.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::fabs(sum / n) < 0.05);
    CHECK(std::fabs(sq / n - 1.0) < 0.05);
  }
}
