#include "surprise_rl/obs_pipeline.hpp"
#include "surprise_rl/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace srl;

namespace {

Observation solid(int h, int w, uint8_t r, uint8_t g, uint8_t b) {
  Observation o(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) o.set_pixel(y, x, r, g, b);
  return o;
}

}  // namespace

TEST_CASE("grayscale of pure colors with luma weights") {
  CHECK(to_grayscale(solid(2, 2, 255, 255, 255))[0] == 1.0);
  CHECK(to_grayscale(solid(2, 2, 0, 0, 0))[0] == 0.0);
  CHECK(to_grayscale(solid(2, 2, 255, 0, 0))[0] == 0.299);
  CHECK(to_grayscale(solid(2, 2, 0, 255, 0))[0] == 0.587);
  CHECK(to_grayscale(solid(2, 2, 0, 0, 255))[0] == 0.114);
}

TEST_CASE("grayscale output length and range") {
  Rng rng(7);
  Observation o(16, 16);
  for (auto& v : o.rgb) v = static_cast<uint8_t>(rng.uniform_int(256));
  const GrayObservation g = to_grayscale(o);
  REQUIRE(g.size() == 256);
  CHECK(g.minCoeff() >= 0.0);
  CHECK(g.maxCoeff() <= 1.0);
}

TEST_CASE("grayscale is monotone in each channel") {
  Observation lo = solid(1, 1, 10, 20, 30);
  for (int c = 0; c < 3; ++c) {
    Observation hi = lo;
    hi.rgb[static_cast<size_t>(c)] += 50;
    CHECK(to_grayscale(hi)[0] > to_grayscale(lo)[0]);
  }
}

TEST_CASE("grayscale is permutation-equivariant over pixels") {
  Rng rng(11);
  Observation o(4, 4);
  for (auto& v : o.rgb) v = static_cast<uint8_t>(rng.uniform_int(256));
  // Swap two pixels; the grayscale entries must swap with them.
  Observation p = o;
  for (int c = 0; c < 3; ++c) std::swap(p.rgb[3 * 5 + c], p.rgb[3 * 9 + c]);
  const GrayObservation go = to_grayscale(o);
  const GrayObservation gp = to_grayscale(p);
  CHECK(gp[5] == go[9]);
  CHECK(gp[9] == go[5]);
  for (int i = 0; i < 16; ++i) {
    if (i != 5 && i != 9) CHECK(gp[i] == go[i]);
  }
}

TEST_CASE("rgb_normalized scales into [0,1] without mixing channels") {
  Observation o(1, 2);
  o.set_pixel(0, 0, 255, 0, 51);
  o.set_pixel(0, 1, 0, 102, 0);
  const Vec v = rgb_normalized(o);
  REQUIRE(v.size() == 6);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.0);
  CHECK(v[2] == Catch::Approx(0.2));
  CHECK(v[4] == Catch::Approx(0.4));
}

TEST_CASE("flatten_batch stacks rows in order") {
  Vec a(4);
  a << 1, 2, 3, 4;
  const std::vector<Vec> batch = {a};
  const Mat m = flatten_batch(batch);
  REQUIRE(m.rows() == 1);
  REQUIRE(m.cols() == 4);
  CHECK(m.row(0).transpose() == a);
}

TEST_CASE("flatten_batch accepts the empty batch") {
  const std::vector<Vec> batch;
  const Mat m = flatten_batch(batch, 7);
  CHECK(m.rows() == 0);
  CHECK(m.cols() == 7);
}

TEST_CASE("flatten_batch rejects ragged shapes") {
  const std::vector<Vec> batch = {Vec::Zero(3), Vec::Zero(4)};
  CHECK_THROWS_AS(flatten_batch(batch), ShapeError);
}

TEST_CASE("unflatten undoes flatten") {
  Rng rng(3);
  std::vector<Vec> batch;
  for (int j = 0; j < 5; ++j) {
    Vec v(6);
    for (int i = 0; i < 6; ++i) v[i] = rng.uniform();
    batch.push_back(v);
  }
  const auto round = unflatten_batch(flatten_batch(batch));
  REQUIRE(round.size() == batch.size());
  for (size_t j = 0; j < batch.size(); ++j) CHECK(round[j] == batch[j]);
}

TEST_CASE("grayscale is the identity scaling on monochrome pixels") {
  // R = G = B = v: the luma weights sum to 1, so grayscale reduces to the
  // plain v / 255 normalization (up to one rounding).
  for (int v = 0; v <= 255; ++v) {
    Observation o(1, 1);
    o.set_pixel(0, 0, static_cast<uint8_t>(v), static_cast<uint8_t>(v),
                static_cast<uint8_t>(v));
    CHECK(to_grayscale(o)[0] == Catch::Approx(v / 255.0).margin(1e-15));
  }
}
