#pragma once

#include <cstdint>
#include <vector>

namespace srl {

/// Fixed-size RGB image produced by an environment. Values are 0-255,
/// stored row-major as (y, x, channel).
struct Observation {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;  // height * width * 3

  Observation() = default;
  Observation(int h, int w) : height(h), width(w), rgb(h * w * 3, 0) {}

  uint8_t& at(int y, int x, int c) { return rgb[(y * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const { return rgb[(y * width + x) * 3 + c]; }

  void set_pixel(int y, int x, uint8_t r, uint8_t g, uint8_t b) {
    at(y, x, 0) = r;
    at(y, x, 1) = g;
    at(y, x, 2) = b;
  }

  int pixel_count() const { return height * width; }

  bool operator==(const Observation&) const = default;
};

}  // namespace srl
