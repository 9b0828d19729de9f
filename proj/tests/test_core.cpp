#include <doctest.h>

#include <filesystem>
#include <random>

#include "mvhdr/core.hpp"
#include "mvhdr/imageio.hpp"

using namespace mvhdr;
namespace fs = std::filesystem;

TEST_CASE("project follows the column law") {
  const ViewGeometry geo{8, 64, 16, +1};
  const auto a = geo.project({0, 10, 5}, 0, 3);
  REQUIRE(a);
  CHECK(*a == PixelRef{3, 10, 5});

  const auto b = geo.project({0, 10, 5}, 2, 2);
  REQUIRE(b);
  CHECK(*b == PixelRef{2, 6, 5});

  const auto c = geo.project({1, 0, 0}, 3, 0);
  REQUIRE(c);
  CHECK(*c == PixelRef{0, 3, 0});

  CHECK_FALSE(geo.project({0, 1, 0}, 2, 1));
  CHECK_FALSE(ViewGeometry{2, 4, 1, -1}.project({0, 3, 0}, 1, 1));
}

TEST_CASE("project round trip and ray coordinate") {
  std::mt19937_64 rng(3);
  for (int sign : {+1, -1}) {
    const ViewGeometry geo{6, 40, 3, sign};
    for (int trial = 0; trial < 2000; ++trial) {
      const PixelRef p{static_cast<int>(rng() % 6), static_cast<int>(rng() % 40),
                       static_cast<int>(rng() % 3)};
      const int d = static_cast<int>(rng() % 9) - 2;
      const int j = static_cast<int>(rng() % 6);
      const auto q = geo.project(p, d, j);
      if (!q) continue;
      CHECK(q->x - p.x == sign * (p.view - j) * d);
      CHECK(geo.ray_coordinate(*q, d) == geo.ray_coordinate(p, d));
      const auto back = geo.project(*q, d, p.view);
      REQUIRE(back);
      CHECK(*back == p);
    }
  }
}

TEST_CASE("match list partition is enforced") {
  const ViewGeometry geo{2, 3, 1, +1};
  std::vector<Match> ms;
  // Pixel (v0, x2) pairs with (v1, x1) at d = 1; the rest are singletons.
  Match pair;
  pair.pixels = {{0, 2, 0}, {1, 1, 0}};
  pair.disparity = 1;
  ms.push_back(pair);
  for (PixelRef p : {PixelRef{0, 0, 0}, PixelRef{0, 1, 0}, PixelRef{1, 0, 0}, PixelRef{1, 2, 0}}) {
    Match m;
    m.pixels = {p};
    ms.push_back(m);
  }
  const MatchList list(geo, ms);
  for (int v = 0; v < 2; ++v)
    for (int x = 0; x < 3; ++x) {
      const PixelRef p{v, x, 0};
      const auto& px = list[list.match_of(p)].pixels;
      CHECK(std::count(px.begin(), px.end(), p) == 1);
    }
  CHECK(list.max_cardinality() == 2);

  SUBCASE("missing pixel") {
    auto bad = ms;
    bad.pop_back();
    CHECK_THROWS_AS(MatchList(geo, bad), Error);
  }
  SUBCASE("duplicate pixel") {
    auto bad = ms;
    bad[1].pixels.push_back({0, 1, 0});
    CHECK_THROWS_AS(MatchList(geo, bad), Error);
  }
  SUBCASE("geometry violation") {
    auto bad = ms;
    bad[0].disparity = 2;
    CHECK_THROWS_AS(MatchList(geo, bad), Error);
  }
}

TEST_CASE("confidence index per validity") {
  Match m;
  CHECK(m.confidence() == 1.0);
  m.validity = Validity::kCorrected;
  CHECK(m.confidence() == 0.5);
  m.validity = Validity::kInvalid;
  CHECK(m.confidence() == 0.0);
}

TEST_CASE("linear response curve") {
  const ResponseCurve r = ResponseCurve::linear(8);
  CHECK(r.is_linear());
  CHECK(r.inverse(0, 100) == 100.0);
  CHECK(r.forward(1, 100.0) == 100);
  CHECK(r.forward(1, 1e9) == 255);
}

TEST_CASE("response csv round trip") {
  std::array<std::vector<double>, 3> g;
  for (int c = 0; c < 3; ++c)
    for (int z = 0; z <= 255; ++z) g[c].push_back(std::log(z + 1.0) - 4.0 + 0.01 * c);
  const ResponseCurve r(8, g);
  const fs::path path = fs::temp_directory_path() / "mvhdr_response_rt.csv";
  save_response_csv(r, path);
  const ResponseCurve back = load_response_csv(path);
  for (int c = 0; c < 3; ++c)
    for (int z = 0; z <= 255; ++z) CHECK(back.log_exposure(c, z) == r.log_exposure(c, z));
  fs::remove(path);
}

namespace {

std::string manifest_text(std::size_t views, const std::string& extra = "") {
  std::string s = "{\"views\": [";
  for (std::size_t i = 0; i < views; ++i) {
    if (i) s += ",";
    s += "{\"path\": \"v" + std::to_string(i) + ".ppm\", \"shutter_s\": 1";
    if (i % 2 == 1) s += ", \"transmittance\": 0.5";
    s += "}";
  }
  s += "], \"disparity_range\": [0, 4]" + extra + "}";
  return s;
}

}  // namespace

TEST_CASE("manifest parsing") {
  const DatasetManifest m = parse_manifest(manifest_text(8), "/data", false);
  CHECK(m.n_views() == 8);
  CHECK(m.views[0].effective() == 1.0);
  CHECK(m.views[1].effective() == 0.5);
  CHECK(m.bit_depth == 8);
  CHECK(m.geometry_sign == 1);
  CHECK(m.resolve(m.views[2].path) == fs::path("/data/v2.ppm"));

  const DatasetManifest back = parse_manifest(manifest_to_json(m), "/data", false);
  CHECK(back.n_views() == 8);
  CHECK(back.views[1].transmittance == 0.5);
  CHECK(back.d_max == 4);
}

TEST_CASE("manifest errors") {
  CHECK_THROWS_AS(parse_manifest(manifest_text(1), ".", false), Error);
  CHECK_THROWS_AS(parse_manifest("{\"views\": [", ".", false), Error);
  CHECK_THROWS_AS(parse_manifest(manifest_text(2, ", \"bit_depth\": 12"), ".", false), Error);
  CHECK_THROWS_AS(parse_manifest(manifest_text(2, ", \"geometry_sign\": 0"), ".", false), Error);
  CHECK_THROWS_AS(
      parse_manifest("{\"views\": [{\"path\": \"a\", \"shutter_s\": 1}, {\"path\": \"b\", \"shutter_s\": 1}],"
                     " \"disparity_range\": [3, 1]}",
                     ".", false),
      Error);
  CHECK_THROWS_AS(parse_manifest(manifest_text(2), fs::temp_directory_path() / "mvhdr_nowhere", true),
                  Error);
}
