#include <doctest.h>

#include <filesystem>
#include <set>

#include "imed/datasets.hpp"
#include "imed/io.hpp"
#include "imed/losses.hpp"
#include "testing.hpp"

using namespace imed;

namespace {

double mmd(const Matrix& a, const Matrix& b) {
  ad::Tape t;
  return mmd_gaussian(t.constant(a), t.constant(b)).scalar();
}

DatasetSpec moons(double shift, std::uint64_t seed = 0) {
  DatasetSpec s;
  s.kind = "moons";
  s.shift = shift;
  s.seed = seed;
  return s;
}

std::filesystem::path scratch(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("datasets") {
  TEST_CASE("unshifted moons share one distribution") {
    const auto b = generate_dataset(moons(0.0));
    CHECK(mmd(b.source.x, b.target.x) < 0.01);
    const auto shifted = generate_dataset(moons(30.0));
    CHECK(mmd(shifted.source.x, shifted.target.x) > 0.01);
  }

  TEST_CASE("undoing the rotation overlays the source") {
    const auto b = generate_dataset(moons(30.0));
    CHECK(mmd(b.source.x, rotate(b.target.x, -30.0, kMoonsCenter)) < 0.01);
    const Matrix x = imed::testing::random_matrix(5, 2, 1);
    CHECK(imed::testing::max_abs_diff(rotate(rotate(x, 30.0, kMoonsCenter), -30.0, kMoonsCenter), x) < 1e-12);
    CHECK(imed::testing::max_abs_diff(rotate(x, 360.0, kMoonsCenter), x) < 1e-12);
  }

  TEST_CASE("generation is a function of the spec") {
    const auto a = generate_dataset(moons(30.0, 4));
    const auto b = generate_dataset(moons(30.0, 4));
    const auto c = generate_dataset(moons(30.0, 5));
    CHECK(split_csv(a.source) == split_csv(b.source));
    CHECK(split_csv(a.test) == split_csv(b.test));
    CHECK(split_csv(a.source) != split_csv(c.source));
    CHECK(split_csv(a.target) != split_csv(a.test));
  }

  TEST_CASE("every kind has balanced labels and the documented shape") {
    for (const char* kind : {"moons", "blobs", "rings"}) {
      DatasetSpec s;
      s.kind = kind;
      s.shift = s.kind == "moons" ? 30.0 : 1.0;
      s.n = 300;
      const auto b = generate_dataset(s);
      CAPTURE(kind);
      CHECK(b.input_dim() == 2);
      CHECK(b.source.size() == 300);
      CHECK(b.num_classes == (s.kind == "blobs" ? 3 : 2));
      const std::set<int> labels(b.source.y.begin(), b.source.y.end());
      CHECK(static_cast<int>(labels.size()) == b.num_classes);
      CHECK(mmd(b.source.x, b.target.x) > 0.01);
    }
  }

  TEST_CASE("CSV round trip is exact") {
    const auto b = generate_dataset(moons(30.0));
    const Split back = parse_split_csv(split_csv(b.source), "source.csv");
    CHECK(back.x == b.source.x);
    CHECK(back.y == b.source.y);
    CHECK_THROWS_AS(parse_split_csv("x0,x1,label\n1,2\n", "t.csv"), IoError);
    CHECK_THROWS_AS(parse_split_csv("x0,x1,label\n1,abc,0\n", "t.csv"), IoError);
    CHECK_THROWS_AS(parse_split_csv("", "t.csv"), IoError);
  }

  TEST_CASE("bundles on disk") {
    const auto dir = scratch("imed_bundle_test");
    auto spec = moons(30.0, 2);
    spec.n = 50;
    const auto b = generate_dataset(spec);
    write_bundle(b, dir, false);
    const auto back = read_bundle(dir);
    CHECK(back.source.x == b.source.x);
    CHECK(back.test.y == b.test.y);
    CHECK(back.spec.to_json() == b.spec.to_json());
    const std::string first = read_file(dir / "source.csv");
    CHECK_THROWS_AS(write_bundle(b, dir, false), IoError);
    write_bundle(b, dir, true);
    CHECK(read_file(dir / "source.csv") == first);
    std::filesystem::remove_all(dir);
    CHECK_THROWS(read_bundle(dir));
  }
}
