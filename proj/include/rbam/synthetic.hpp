#pragma once

// Procedural grayscale test images: smooth gradients and several
// high-frequency textures. Everything is a pure function of the seed.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "rbam/image.hpp"
#include "rbam/random.hpp"

namespace rbam::synth {

enum class Kind { gradient, checkerboard, stripes, grating, mosaic, discs };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::gradient: return "gradient";
    case Kind::checkerboard: return "checkerboard";
    case Kind::stripes: return "stripes";
    case Kind::grating: return "grating";
    case Kind::mosaic: return "mosaic";
    case Kind::discs: return "discs";
  }
  return "?";
}

// Low-frequency linear ramp in a random direction.
inline GrayImage gradient(std::size_t h, std::size_t w, Rng& rng) {
  const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double lo = uniform(rng, 0.1, 0.4), hi = uniform(rng, 0.6, 0.9);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double span = std::abs(dx) * static_cast<double>(w) + std::abs(dy) * static_cast<double>(h);
  GrayImage img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double t = ((static_cast<double>(x) - w / 2.0) * dx + (static_cast<double>(y) - h / 2.0) * dy) / span + 0.5;
      img.at(y, x) = lo + (hi - lo) * t;
    }
  return img;
}

inline GrayImage checkerboard(std::size_t h, std::size_t w, Rng& rng, std::size_t min_cell = 1,
                              std::size_t max_cell = 4) {
  const std::size_t cell = min_cell + uniform_index(rng, max_cell - min_cell + 1);
  const std::size_t oy = uniform_index(rng, cell), ox = uniform_index(rng, cell);
  const double a = uniform(rng, 0.0, 0.3), b = uniform(rng, 0.7, 1.0);
  GrayImage img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) img.at(y, x) = (((y + oy) / cell + (x + ox) / cell) % 2) ? b : a;
  return img;
}

// Hard-edged bars of random width and orientation.
inline GrayImage stripes(std::size_t h, std::size_t w, Rng& rng) {
  const double angle = uniform(rng, 0.0, std::numbers::pi);
  const double period = uniform(rng, 3.0, 9.0);
  const double phase = uniform(rng, 0.0, period);
  const double a = uniform(rng, 0.0, 0.3), b = uniform(rng, 0.7, 1.0);
  GrayImage img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) * std::cos(angle) + static_cast<double>(y) * std::sin(angle) + phase;
      img.at(y, x) = std::fmod(u + 1000.0 * period, period) < period / 2.0 ? a : b;
    }
  return img;
}

inline GrayImage grating(std::size_t h, std::size_t w, Rng& rng) {
  const double angle = uniform(rng, 0.0, std::numbers::pi);
  const double freq = uniform(rng, 0.2, 0.9);  // radians per pixel
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double amp = uniform(rng, 0.25, 0.45);
  GrayImage img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) * std::cos(angle) + static_cast<double>(y) * std::sin(angle);
      img.at(y, x) = 0.5 + amp * std::sin(freq * u + phase);
    }
  return img;
}

// Piecewise-constant regions cut by random lines.
inline GrayImage mosaic(std::size_t h, std::size_t w, Rng& rng, std::size_t lines = 24) {
  struct Line {
    double nx, ny, c, v;
  };
  std::vector<Line> cuts;
  for (std::size_t i = 0; i < lines; ++i) {
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double px = uniform(rng, 0.0, static_cast<double>(w)), py = uniform(rng, 0.0, static_cast<double>(h));
    cuts.push_back({std::cos(angle), std::sin(angle), std::cos(angle) * px + std::sin(angle) * py,
                    uniform(rng, -0.25, 0.25)});
  }
  GrayImage img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double v = 0.5;
      for (const auto& l : cuts) {
        if (l.nx * static_cast<double>(x) + l.ny * static_cast<double>(y) > l.c) v += l.v;
      }
      img.at(y, x) = clamp01(v);
    }
  return img;
}

// Random hard-edged discs over a flat background.
inline GrayImage discs(std::size_t h, std::size_t w, Rng& rng, std::size_t count = 40) {
  GrayImage img(h, w, uniform(rng, 0.2, 0.8));
  for (std::size_t i = 0; i < count; ++i) {
    const double cx = uniform(rng, 0.0, static_cast<double>(w)), cy = uniform(rng, 0.0, static_cast<double>(h));
    const double r = uniform(rng, 1.5, 8.0);
    const double v = uniform01(rng);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double ddx = static_cast<double>(x) - cx, ddy = static_cast<double>(y) - cy;
        if (ddx * ddx + ddy * ddy <= r * r) img.at(y, x) = v;
      }
  }
  return img;
}

inline GrayImage generate(Kind kind, std::size_t h, std::size_t w, Rng& rng) {
  switch (kind) {
    case Kind::gradient: return gradient(h, w, rng);
    case Kind::checkerboard: return checkerboard(h, w, rng);
    case Kind::stripes: return stripes(h, w, rng);
    case Kind::grating: return grating(h, w, rng);
    case Kind::mosaic: return mosaic(h, w, rng);
    case Kind::discs: return discs(h, w, rng);
  }
  return {};
}

struct SynthImage {
  std::string image_id;
  Kind kind;
  GrayImage image;
};

// `count` images cycling through `kinds`; image i draws from stream i.
inline std::vector<SynthImage> corpus(const std::vector<Kind>& kinds, std::size_t count, std::size_t h, std::size_t w,
                                      std::uint64_t seed) {
  std::vector<SynthImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Kind k = kinds[i % kinds.size()];
    Rng rng = make_rng(seed, 0x5E00 + i);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%03zu", to_string(k), i);
    out.push_back({id, k, generate(k, h, w, rng)});
  }
  return out;
}

inline std::vector<Kind> texture_kinds() {
  return {Kind::checkerboard, Kind::stripes, Kind::grating, Kind::mosaic, Kind::discs};
}

}  // namespace rbam::synth
