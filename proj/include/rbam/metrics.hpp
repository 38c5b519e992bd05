#pragma once

// Image quality metrics and the per-image evaluation protocol.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "rbam/errors.hpp"
#include "rbam/image.hpp"

namespace rbam {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

inline void require_same_extents(const GrayImage& a, const GrayImage& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string(what) + ": extents differ (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
  }
}

inline double mse(const GrayImage& a, const GrayImage& b) {
  require_same_extents(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

// 10 log10(1 / MSE) on the [0, 1] scale; +infinity for identical images.
inline double psnr(const GrayImage& a, const GrayImage& b) {
  const double e = mse(a, b);
  if (e == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / e);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    w[static_cast<std::size_t>(i)] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    total += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= total;
  return w;
}

// Valid-mode separable filtering: (H, W) -> (H - n + 1, W - n + 1).
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                        const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * img[y * w + x + i];
      rows[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace detail

// Single-scale SSIM with a Gaussian window, averaged over all window
// positions fully inside the image.
inline double ssim(const GrayImage& a, const GrayImage& b, const SsimParams& p = {}) {
  require_same_extents(a, b, "ssim");
  const auto n = static_cast<std::size_t>(p.window);
  if (a.height < n || a.width < n) {
    throw ContractError("ssim: images must be at least " + std::to_string(n) + " pixels per side");
  }
  const auto k = detail::gaussian_window(p.window, p.sigma);
  const std::size_t h = a.height, w = a.width;
  std::vector<double> aa(a.pixels.size()), bb(a.pixels.size()), ab(a.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    aa[i] = a.pixels[i] * a.pixels[i];
    bb[i] = b.pixels[i] * b.pixels[i];
    ab[i] = a.pixels[i] * b.pixels[i];
  }
  const auto mu_a = detail::filter_valid(a.pixels, h, w, k);
  const auto mu_b = detail::filter_valid(b.pixels, h, w, k);
  const auto e_aa = detail::filter_valid(aa, h, w, k);
  const auto e_bb = detail::filter_valid(bb, h, w, k);
  const auto e_ab = detail::filter_valid(ab, h, w, k);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
  std::size_t count = 0;     // finite values used
  std::size_t excluded = 0;  // infinite values skipped
};

// Mean and population-stddev / sqrt(n) over the finite entries.
inline MeanSem mean_and_sem(const std::vector<double>& values) {
  MeanSem r;
  double sum = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++r.count;
    } else {
      ++r.excluded;
    }
  }
  if (r.count == 0) {
    r.mean = std::numeric_limits<double>::quiet_NaN();
    r.sem = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.mean = sum / static_cast<double>(r.count);
  double sq = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) sq += (v - r.mean) * (v - r.mean);
  }
  r.sem = std::sqrt(sq / static_cast<double>(r.count)) / std::sqrt(static_cast<double>(r.count));
  return r;
}

struct ImageScore {
  std::string image_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double seconds = 0.0;
};

struct MetricReport {
  std::vector<ImageScore> images;
  double psnr_mean = 0.0;
  double psnr_sem = 0.0;
  double ssim_mean = 0.0;
  double seconds_mean = 0.0;
  std::vector<std::string> warnings;

  std::vector<double> psnr_values() const {
    std::vector<double> v;
    for (const auto& s : images) v.push_back(s.psnr_db);
    return v;
  }
};

inline void finalize_report(MetricReport& report) {
  const auto stats = mean_and_sem(report.psnr_values());
  report.psnr_mean = stats.mean;
  report.psnr_sem = stats.sem;
  if (stats.excluded) {
    report.warnings.push_back(std::to_string(stats.excluded) +
                              " image(s) reconstructed exactly (infinite PSNR), excluded from mean and SEM");
  }
  double ssim_sum = 0.0, sec_sum = 0.0;
  for (const auto& s : report.images) {
    ssim_sum += s.ssim;
    sec_sum += s.seconds;
  }
  const double n = static_cast<double>(report.images.size());
  report.ssim_mean = report.images.empty() ? std::numeric_limits<double>::quiet_NaN() : ssim_sum / n;
  report.seconds_mean = report.images.empty() ? std::numeric_limits<double>::quiet_NaN() : sec_sum / n;
}

// Maps an LR image to its super-resolved estimate (same image scale r).
using Upscaler = std::function<GrayImage(const GrayImage&)>;

inline Upscaler bicubic_upscaler(std::size_t r) {
  return [r](const GrayImage& lr) { return upsample(lr, r); };
}

struct EvalItem {
  std::string image_id;
  GrayImage hr;
};

// For each HR image: bicubic downsample by r, upscale, clamp, score.
// Only the upscaler call is timed.
inline MetricReport evaluate(const Upscaler& upscaler, const std::vector<EvalItem>& items, std::size_t r) {
  MetricReport report;
  for (const auto& item : items) {
    if (item.hr.height % r != 0 || item.hr.width % r != 0) {
      report.warnings.push_back("skipping '" + item.image_id + "': extents not divisible by " + std::to_string(r));
      continue;
    }
    const GrayImage lr = downsample(item.hr, r);
    const auto t0 = std::chrono::steady_clock::now();
    GrayImage sr = upscaler(lr);
    const auto t1 = std::chrono::steady_clock::now();
    clamp_in_place(sr);
    report.images.push_back({item.image_id, psnr(sr, item.hr), ssim(sr, item.hr),
                             std::chrono::duration<double>(t1 - t0).count()});
  }
  finalize_report(report);
  return report;
}

// "image_id,psnr_db,ssim,seconds" rows and a "mean±sem" footer.
inline void write_report(std::ostream& os, const MetricReport& report) {
  char buf[256];
  os << "image_id,psnr_db,ssim,seconds\n";
  for (const auto& s : report.images) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", s.image_id.c_str(), s.psnr_db, s.ssim, s.seconds);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "mean±sem,%.6f±%.6f,%.6f,%.6f\n", report.psnr_mean, report.psnr_sem,
                report.ssim_mean, report.seconds_mean);
  os << buf;
}

}  // namespace rbam
