#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "amddx/tensor.hpp"

namespace amddx {

// Half-pixel-center sampling: source coordinate (i + 0.5) * in/out - 0.5,
// clamped to the valid range so border pixels replicate outward.
template <typename Scalar>
Tensor<Scalar> bilinear_resize(const Tensor<Scalar>& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize target must be positive");
  if (src.height == out_h && src.width == out_w && src.pad == 0) return src;

  Tensor<Scalar> dst(out_h, out_w, src.channels(), 0);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  const int channels = src.channels();

  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const Scalar wy = static_cast<Scalar>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const Scalar wx = static_cast<Scalar>(fx - x0);
      const int out_row = dst.row_index(y, x);
      for (int c = 0; c < channels; ++c) {
        const Scalar a = src.at(c, y0, x0);
        const Scalar b = src.at(c, y0, x1);
        const Scalar d = src.at(c, y1, x0);
        const Scalar e = src.at(c, y1, x1);
        const Scalar top = a + (b - a) * wx;
        const Scalar bot = d + (e - d) * wx;
        dst.data(out_row, c) = top + (bot - top) * wy;
      }
    }
  }
  return dst;
}

// Scales to a fixed width, keeping aspect ratio. Height is rounded to the
// nearest integer and never drops below 32 rows.
template <typename Scalar>
Tensor<Scalar> resize_to_width(const Tensor<Scalar>& src, int target_width) {
  if (target_width < 32) throw std::invalid_argument("target width must be >= 32");
  const int out_h = std::max(
      32, static_cast<int>(std::lround(static_cast<double>(src.height) * target_width / src.width)));
  return bilinear_resize(src, out_h, target_width);
}

}  // namespace amddx
