// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "eit/common.hpp"

namespace eit::metrics {

inline constexpr double psnr_cap = 99.0;

struct Report {
  double psnr = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
};

namespace detail {

inline void check_pair(const Grid<double>& pred, const Grid<double>& gt) {
  if (!pred.same_shape(gt)) throw GridMismatch("metrics: prediction and ground truth differ in size");
  if (gt.size() == 0) throw InvalidArgument("metrics: empty image");
}

inline double range_of(const Grid<double>& gt) {
  const auto [lo, hi] = std::minmax_element(gt.begin(), gt.end());
  const double r = *hi - *lo;
  if (!(r > 0.0)) throw InvalidArgument("metrics: ground truth has zero range");
  return r;
}

// Normalized 11x11 Gaussian window, standard deviation 1.5 pixels.
inline std::vector<double> ssim_window() {
  std::vector<double> w(121);
  double total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double d2 = (i - 5) * (i - 5) + (j - 5) * (j - 5);
      w[i * 11 + j] = std::exp(-d2 / (2.0 * 1.5 * 1.5));
      total += w[i * 11 + j];
    }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace detail

// 10 log10(range^2 / MSE) with range from the ground truth; capped at 99 dB.
inline double psnr(const Grid<double>& pred, const Grid<double>& gt) {
  detail::check_pair(pred, gt);
  const double range = detail::range_of(gt);
  double mse = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) mse += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  mse /= static_cast<double>(gt.size());
  if (mse == 0.0) return psnr_cap;
  return std::min(psnr_cap, 10.0 * std::log10(range * range / mse));
}

// Mean local SSIM over all fully contained 11x11 windows.
inline double ssim(const Grid<double>& pred, const Grid<double>& gt) {
  detail::check_pair(pred, gt);
  if (gt.width() < 11 || gt.height() < 11) throw InvalidArgument("ssim: image must be at least 11x11");
  const double L = detail::range_of(gt);
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const auto w = detail::ssim_window();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + 11 <= gt.height(); ++r)
    for (std::size_t c = 0; c + 11 <= gt.width(); ++c) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) {
          const double wt = w[i * 11 + j], x = pred(r + i, c + j), y = gt(r + i, c + j);
          mx += wt * x;
          my += wt * y;
          sxx += wt * x * x;
          syy += wt * y * y;
          sxy += wt * x * y;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

// ||pred - gt|| / ||gt||.
inline double rmse(const Grid<double>& pred, const Grid<double>& gt) {
  detail::check_pair(pred, gt);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    num += (pred[i] - gt[i]) * (pred[i] - gt[i]);
    den += gt[i] * gt[i];
  }
  if (!(den > 0.0)) throw InvalidArgument("rmse: ground truth is identically zero");
  return std::sqrt(num / den);
}

inline Report evaluate(const Grid<double>& pred, const Grid<double>& gt) {
  return {psnr(pred, gt), ssim(pred, gt), rmse(pred, gt)};
}

// Repeated 2x2 average pooling.
inline Grid<double> downsample(const Grid<double>& img, int levels) {
  if (levels < 0) throw InvalidArgument("downsample: levels must be non-negative");
  const std::size_t f = std::size_t{1} << levels;
  if (img.width() % f != 0 || img.height() % f != 0)
    throw InvalidArgument("downsample: " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                          " not divisible by " + std::to_string(f));
  Grid<double> cur = img;
  for (int l = 0; l < levels; ++l) {
    Grid<double> next(cur.width() / 2, cur.height() / 2);
    for (std::size_t r = 0; r < next.height(); ++r)
      for (std::size_t c = 0; c < next.width(); ++c)
        next(r, c) = 0.25 * (cur(2 * r, 2 * c) + cur(2 * r, 2 * c + 1) + cur(2 * r + 1, 2 * c) + cur(2 * r + 1, 2 * c + 1));
    cur = std::move(next);
  }
  return cur;
}

}  // namespace eit::metrics
