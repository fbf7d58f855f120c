#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "biomass/features.hpp"
#include "fixtures.hpp"

using namespace biomass;
using fixture::error_code;

namespace {

std::vector<FrameMeta> track(std::vector<int> tops, Camera cam = Camera::A) {
  std::vector<FrameMeta> out;
  for (std::size_t i = 0; i < tops.size(); ++i) out.push_back(fixture::frame(cam, static_cast<int>(i), tops[i], 10));
  return out;
}

}  // namespace

TEST_CASE("sinking speed examples") {
  std::vector<int> tops(40);
  for (int i = 0; i < 40; ++i) tops[static_cast<std::size_t>(i)] = 320 - 320 * i / 39;
  CHECK(sinking_speed(track(tops)) == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(sinking_speed(track(std::vector<int>(10, 100))) == 0.0);
  try {
    sinking_speed(track({5}));
    FAIL("expected TooFewFrames");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewFrames);
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("sinking speed is translation invariant and scales linearly") {
  const auto base = track({500, 430, 370, 300, 220});
  auto shifted = base;
  auto scaled = base;
  for (auto& f : shifted) f.top += 1234, f.bottom += 1234;
  for (auto& f : scaled) f.top *= 3, f.bottom *= 3;
  CHECK(sinking_speed(shifted) == sinking_speed(base));
  CHECK(sinking_speed(scaled) == doctest::Approx(3 * sinking_speed(base)));
  // floaters keep their negative sign
  CHECK(sinking_speed(track({0, 10, 20, 30})) == doctest::Approx(-7.5));
}

TEST_CASE("mean area examples") {
  auto frames = track({3, 2, 1});
  frames[0].area_px = 100;
  frames[1].area_px = 200;
  frames[2].area_px = 300;
  CHECK(mean_area(frames) == 200.0);
  std::reverse(frames.begin(), frames.end());
  CHECK(mean_area(frames) == 200.0);
  auto one = track({1});
  one[0].area_px = 42;
  CHECK(mean_area(one) == 42.0);
  auto zeros = track({2, 1});
  zeros[0].area_px = zeros[1].area_px = 0;
  CHECK(mean_area(zeros) == 0.0);
  CHECK(error_code([] { mean_area({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("log mass") {
  CHECK(log_mass(1.0) == 0.0);
  CHECK(log_mass(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(error_code([] { log_mass(0.0); }) == ErrorCode::NonPositiveMass);
  CHECK(error_code([] { log_mass(-2.0); }) == ErrorCode::NonPositiveMass);
  for (double y : {1e-3, 0.7, 13.0, 2.5e4}) CHECK(exp_mass(log_mass(y)) == doctest::Approx(y).epsilon(1e-15));
}

TEST_CASE("specimen features use camera A, then B") {
  auto s = fixture::specimen("s", "t", 1.0, {10, 20, 30}, 4);
  SUBCASE("camera A present") {
    for (int i = 0; i < 5; ++i) s.frames.push_back(fixture::frame(Camera::B, i, 100 - 9 * i, 60));
    const auto f = compute_features(s);
    CHECK(f.reference_camera == Camera::A);
    CHECK(f.image_count == 3);
    CHECK(*f.sinking_speed == doctest::Approx(8.0 / 3));
    CHECK(f.mean_area_px == doctest::Approx((10 + 20 + 30 + 5 * 60) / 8.0));
    CHECK(f.pseudo_mass == f.mean_area_px * f.image_count);
  }
  SUBCASE("fall back to B") {
    s.frames.resize(1);
    for (int i = 0; i < 5; ++i) s.frames.push_back(fixture::frame(Camera::B, i, 100 - 9 * i, 60));
    const auto f = compute_features(s);
    CHECK(f.reference_camera == Camera::B);
    CHECK(f.image_count == 5);
    CHECK(*f.sinking_speed == doctest::Approx(36.0 / 5));
  }
  SUBCASE("no usable sequence") {
    s.frames.resize(1);
    const auto f = compute_features(s);
    CHECK_FALSE(f.sinking_speed.has_value());
    CHECK(f.image_count == 1);
    CHECK(f.pseudo_mass == 10.0);
  }
}

TEST_CASE("features csv") {
  Dataset d;
  d.specimens = {fixture::specimen("s1", "a", 2.5, {10, 20}, 6), fixture::specimen("s2", "b", 4, {7})};
  d.specimens[1].dry_mass_ug.reset();
  CHECK(features_csv(d) ==
        "specimen_id,taxon,dry_mass_ug,mean_area_px,image_count,sinking_speed,pseudo_mass\n"
        "s1,a,2.5,15,2,3,30\n"
        "s2,b,,7,1,,7\n");
}
