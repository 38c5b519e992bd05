#pragma once

// Grayscale images on [0, 1]: binary PGM I/O, bicubic resampling, patch
// extraction and the eight dihedral transforms used for augmentation.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "rbam/errors.hpp"
#include "rbam/random.hpp"
#include "rbam/tensor.hpp"

namespace rbam {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // row-major

  GrayImage() = default;
  GrayImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}
  GrayImage(std::size_t h, std::size_t w, std::vector<double> data) : height(h), width(w), pixels(std::move(data)) {
    if (pixels.size() != h * w) throw ShapeError("GrayImage: pixel count does not match extents");
  }

  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline void clamp_in_place(GrayImage& img) {
  for (auto& v : img.pixels) v = clamp01(v);
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 255)

inline std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double v : img.pixels) out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0))));
  return out;
}

inline GrayImage decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (value > (1u << 30)) throw FormatError(std::string("PGM: ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("PGM: expected ") + what, pos);
    return value;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("PGM: not a binary P5 file", 0);
  pos = 2;
  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = read_uint("maxval");
  if (maxval != 255) throw FormatError("PGM: maxval must be 255, got " + std::to_string(maxval), maxval_at);
  if (width == 0 || height == 0) throw FormatError("PGM: empty image", maxval_at);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("PGM: missing whitespace after header", pos);
  }
  ++pos;
  const std::size_t count = width * height;
  if (bytes.size() - pos < count) {
    throw FormatError("PGM: truncated pixel data, expected " + std::to_string(count) + " bytes", bytes.size());
  }
  GrayImage img(height, width);
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = static_cast<double>(static_cast<std::uint8_t>(bytes[pos + i])) / 255.0;
  }
  return img;
}

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const auto bytes = encode_pgm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Bicubic resampling

// Keys cubic convolution kernel with a = -0.5.
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace detail {

struct CubicTaps {
  std::array<std::size_t, 4> index;
  std::array<double, 4> weight;
};

// Half-pixel aligned source taps for each output coordinate, indices clamped.
inline std::vector<CubicTaps> cubic_taps(std::size_t in, std::size_t out) {
  std::vector<CubicTaps> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const auto idx = static_cast<std::ptrdiff_t>(base) + k - 1;
      taps[o].index[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(in) - 1));
      taps[o].weight[k] = cubic_kernel(t - static_cast<double>(k - 1));
    }
  }
  return taps;
}

// Written as v0 + sum w_k (v_k - v0): the weights sum to one, so flat
// neighbourhoods reproduce their value exactly.
inline double apply_taps(const CubicTaps& t, const double* src, std::size_t stride) {
  const double v0 = src[t.index[0] * stride];
  double acc = 0.0;
  for (int k = 1; k < 4; ++k) acc += t.weight[k] * (src[t.index[k] * stride] - v0);
  return v0 + acc;
}

}  // namespace detail

// Separable bicubic resampling to out_h x out_w, clamped to [0, 1].
// No anti-alias prefilter is applied when shrinking.
inline GrayImage bicubic_resample(const GrayImage& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ContractError("bicubic_resample: output extents must be >= 1");
  if (img.height == 0 || img.width == 0) throw ContractError("bicubic_resample: empty input");
  GrayImage horizontal(img.height, out_w);
  if (out_w == img.width) {
    horizontal = img;
  } else {
    const auto taps = detail::cubic_taps(img.width, out_w);
    for (std::size_t y = 0; y < img.height; ++y) {
      const double* row = img.pixels.data() + y * img.width;
      for (std::size_t x = 0; x < out_w; ++x) horizontal.at(y, x) = detail::apply_taps(taps[x], row, 1);
    }
  }
  GrayImage out(out_h, out_w);
  if (out_h == img.height) {
    out = std::move(horizontal);
  } else {
    const auto taps = detail::cubic_taps(img.height, out_h);
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x)
        out.at(y, x) = detail::apply_taps(taps[y], horizontal.pixels.data() + x, out_w);
  }
  clamp_in_place(out);
  return out;
}

inline GrayImage downsample(const GrayImage& img, std::size_t r) {
  if (r == 0 || img.height % r != 0 || img.width % r != 0) {
    throw ContractError("downsample: extents " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                        " not divisible by " + std::to_string(r));
  }
  return bicubic_resample(img, img.height / r, img.width / r);
}

inline GrayImage upsample(const GrayImage& img, std::size_t r) {
  return bicubic_resample(img, img.height * r, img.width * r);
}

// ---------------------------------------------------------------------------
// Patches and dihedral transforms

inline GrayImage extract_patch(const GrayImage& img, std::size_t top, std::size_t left, std::size_t size) {
  if (size == 0 || top + size > img.height || left + size > img.width) {
    throw ContractError("extract_patch: window (" + std::to_string(top) + ", " + std::to_string(left) + ", " +
                        std::to_string(size) + ") does not fit a " + std::to_string(img.height) + "x" +
                        std::to_string(img.width) + " image");
  }
  GrayImage out(size, size);
  for (std::size_t y = 0; y < size; ++y)
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>((top + y) * img.width + left), size,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y * size));
  return out;
}

// Transform id d in [0, 8): rotate by (d % 4) quarter turns counter-clockwise,
// then mirror left-right when d >= 4.
inline GrayImage dihedral(const GrayImage& img, int d) {
  if (d < 0 || d > 7) throw ContractError("dihedral: transform id must be in [0, 8)");
  GrayImage cur = img;
  for (int q = 0; q < d % 4; ++q) {
    GrayImage rot(cur.width, cur.height);
    for (std::size_t y = 0; y < cur.height; ++y)
      for (std::size_t x = 0; x < cur.width; ++x) rot.at(cur.width - 1 - x, y) = cur.at(y, x);
    cur = std::move(rot);
  }
  if (d >= 4) {
    for (std::size_t y = 0; y < cur.height; ++y) std::reverse(cur.pixels.begin() + static_cast<std::ptrdiff_t>(y * cur.width),
                                                              cur.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * cur.width));
  }
  return cur;
}

// Id of the transform undoing dihedral(., d).
inline int dihedral_inverse(int d) {
  if (d < 0 || d > 7) throw ContractError("dihedral: transform id must be in [0, 8)");
  return d >= 4 ? d : (4 - d) % 4;
}

struct PatchPair {
  GrayImage lr;
  GrayImage hr;
};

inline int draw_dihedral(Rng& rng) { return static_cast<int>(uniform_index(rng, 8)); }

// Applies one uniformly drawn dihedral transform to both patches.
inline PatchPair augment(const PatchPair& pair, Rng& rng, int* drawn = nullptr) {
  const bool aligned = pair.lr.height > 0 && pair.hr.height % pair.lr.height == 0 &&
                       pair.hr.width * pair.lr.height == pair.lr.width * pair.hr.height;
  if (!aligned) throw ContractError("augment: LR and HR patches are not aligned");
  const int d = draw_dihedral(rng);
  if (drawn) *drawn = d;
  return {dihedral(pair.lr, d), dihedral(pair.hr, d)};
}

inline PatchPair augment(const PatchPair& pair, std::uint64_t seed, int* drawn = nullptr) {
  Rng rng = make_rng(seed, 0xA06);
  return augment(pair, rng, drawn);
}

// ---------------------------------------------------------------------------
// Tensor bridges

template <class T>
Tensor<T> to_tensor(const GrayImage& img) {
  return Tensor<T>({1, img.height, img.width}, std::vector<T>(img.pixels.begin(), img.pixels.end()));
}

// Takes a (1, H, W) tensor. Values are copied unclamped.
template <class T>
GrayImage from_tensor(const Tensor<T>& t) {
  if (t.rank() != 3 || t.extent(0) != 1) throw ShapeError("from_tensor: expected (1, H, W), got " + to_string(t.shape()));
  const auto d = t.data();
  return GrayImage(t.extent(1), t.extent(2), std::vector<double>(d.begin(), d.end()));
}

}  // namespace rbam
