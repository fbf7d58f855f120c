#include <doctest.h>

#include "biomass/data_model.hpp"
#include "biomass/error.hpp"
#include "fixtures.hpp"

using namespace biomass;

namespace {

Dataset three() {
  Dataset d;
  d.name = "three";
  d.specimens = {fixture::specimen("s1", "a", 10, {100, 110}), fixture::specimen("s2", "a", 12, {120}),
                 fixture::specimen("s3", "b", 30, {300, 310, 320})};
  return d;
}

}  // namespace

TEST_CASE("well-formed dataset validates clean") { CHECK(validate_dataset(three()).empty()); }

TEST_CASE("inverted bounding box is one violation") {
  Dataset d = three();
  d.specimens[1].frames[0].top = 100;
  d.specimens[1].frames[0].bottom = 50;
  const auto report = validate_dataset(d);
  REQUIRE(report.size() == 1);
  CHECK(report[0].specimen_id == "s2");
  CHECK(report[0].message == "top < bottom");
}

TEST_CASE("duplicate specimen id is one violation") {
  Dataset d = three();
  d.specimens[2].specimen_id = "s1";
  const auto report = validate_dataset(d);
  REQUIRE(report.size() == 1);
  CHECK(report[0].field == "specimen_id");
}

TEST_CASE("each invariant is reported") {
  Dataset d = three();
  d.specimens[0].dry_mass_ug = 0.0;
  d.specimens[1].frames.clear();
  d.specimens[2].frames[1].frame_index = 0;  // not increasing
  d.specimens[2].frames[2].area_px = 1e9;    // larger than the box
  const auto report = validate_dataset(d);
  CHECK(report.size() == 4);
}

TEST_CASE("absent dry mass is legal") {
  Dataset d = three();
  d.specimens[0].dry_mass_ug.reset();
  CHECK(validate_dataset(d).empty());
}

TEST_CASE("cameras may have unequal frame counts") {
  Dataset d = three();
  d.specimens[0].frames.push_back(fixture::frame(Camera::B, 0, 10, 50));
  CHECK(validate_dataset(d).empty());
  CHECK(d.specimens[0].frames_for(Camera::A).size() == 2);
  CHECK(d.specimens[0].frames_for(Camera::B).size() == 1);
  CHECK(d.specimens[0].has_camera(Camera::B));
  CHECK_FALSE(d.specimens[1].has_camera(Camera::B));
}

TEST_CASE("raster dimensions must match the dataset") {
  Dataset d = three();
  d.raster_dims = RasterDims{4, 4};
  d.specimens[1].rasters = {Raster{4, 4, std::vector<std::uint8_t>(16, 0)}};
  CHECK(validate_dataset(d).empty());
  d.specimens[1].rasters = {Raster{3, 3, std::vector<std::uint8_t>(9, 0)}};
  CHECK(validate_dataset(d).size() == 1);
}

TEST_CASE("validation is pure and idempotent") {
  Dataset d = three();
  d.specimens[2].specimen_id = "s1";
  const auto first = validate_dataset(d);
  const auto second = validate_dataset(d);
  REQUIRE(first.size() == second.size());
  CHECK(first[0].message == second[0].message);
  CHECK(d.specimens[2].specimen_id == "s1");
}

TEST_CASE("require_valid throws on violations") {
  Dataset d = three();
  CHECK_NOTHROW(require_valid(d));
  d.specimens[0].frames[0].left = 99;
  try {
    require_valid(d);
    FAIL("expected InvalidDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDataset);
  }
}

TEST_CASE("subset keeps the requested order and rejects unknown ids") {
  const Dataset d = three();
  const Dataset s = subset(d, {"s3", "s1"});
  REQUIRE(s.specimens.size() == 2);
  CHECK(s.specimens[0].specimen_id == "s3");
  CHECK(s.taxon_set() == std::set<std::string>{"a", "b"});
  CHECK_THROWS_AS(subset(d, {"nope"}), Error);
  CHECK(d.find("s2") != nullptr);
  CHECK(d.find("nope") == nullptr);
}
