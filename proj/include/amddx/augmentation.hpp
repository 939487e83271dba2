#pragma once

#include <cmath>

#include "amddx/rng.hpp"
#include "amddx/tensor.hpp"

namespace amddx {

struct AugmentationConfig {
  double brightness_delta = 0.1;  // additive, drawn from [-delta, delta]
  double color_scale_lo = 0.9;    // per-channel multiplicative factor range
  double color_scale_hi = 1.1;
  double scale_lo = 0.95;
  double scale_hi = 1.05;
  double shear_deg = 5.0;     // drawn from [-shear, shear]
  double rotation_deg = 10.0;  // drawn from [-rot, rot]
  double flip_prob = 0.5;

  static AugmentationConfig identity() {
    AugmentationConfig c;
    c.brightness_delta = 0.0;
    c.color_scale_lo = c.color_scale_hi = 1.0;
    c.scale_lo = c.scale_hi = 1.0;
    c.shear_deg = 0.0;
    c.rotation_deg = 0.0;
    c.flip_prob = 0.0;
    return c;
  }
};

// All eight random values are drawn unconditionally so the RNG stream
// consumed per sample does not depend on the configured ranges.
struct AugmentationDraw {
  double brightness;
  double color_scale[3];
  double scale;
  double shear_deg;
  double rotation_deg;
  double u_flip_h;
  double u_flip_v;
};

inline AugmentationDraw draw_augmentation(const AugmentationConfig& cfg, Rng& rng) {
  AugmentationDraw d;
  d.brightness = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta);
  for (double& s : d.color_scale) s = rng.uniform(cfg.color_scale_lo, cfg.color_scale_hi);
  d.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  d.shear_deg = rng.uniform(-cfg.shear_deg, cfg.shear_deg);
  d.rotation_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
  d.u_flip_h = rng.uniform();
  d.u_flip_v = rng.uniform();
  return d;
}

namespace detail {

// Inverse-mapped bilinear warp about the image centre, zero outside the
// source footprint. Forward map is rotation * shear * uniform scale.
template <typename Scalar>
Tensor<Scalar> affine_warp(const Tensor<Scalar>& src, double scale, double shear_deg,
                           double rotation_deg) {
  const double rad = rotation_deg * std::acos(-1.0) / 180.0;
  const double sh = std::tan(shear_deg * std::acos(-1.0) / 180.0);
  const double ct = std::cos(rad), st = std::sin(rad);
  // A = R(theta) * [[1, sh], [0, 1]] * scale, acting on (x, y).
  const double a00 = scale * ct;
  const double a01 = scale * (ct * sh - st);
  const double a10 = scale * st;
  const double a11 = scale * (st * sh + ct);
  const double det = a00 * a11 - a01 * a10;
  const double i00 = a11 / det, i01 = -a01 / det;
  const double i10 = -a10 / det, i11 = a00 / det;
  const double cx = (src.width - 1) / 2.0;
  const double cy = (src.height - 1) / 2.0;

  Tensor<Scalar> dst(src.height, src.width, src.channels(), src.pad);
  const int channels = src.channels();
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double fx = i00 * dx + i01 * dy + cx;
      const double fy = i10 * dx + i11 * dy + cy;
      const int out_row = dst.row_index(y, x);
      if (fx < -1.0 || fx > src.width || fy < -1.0 || fy > src.height) continue;
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const double wx = fx - x0, wy = fy - y0;
      for (int c = 0; c < channels; ++c) {
        auto tap = [&](int yy, int xx) -> double {
          if (yy < 0 || yy >= src.height || xx < 0 || xx >= src.width) return 0.0;
          return static_cast<double>(src.at(c, yy, xx));
        };
        const double top = tap(y0, x0) * (1 - wx) + tap(y0, x0 + 1) * wx;
        const double bot = tap(y0 + 1, x0) * (1 - wx) + tap(y0 + 1, x0 + 1) * wx;
        dst.data(out_row, c) = static_cast<Scalar>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return dst;
}

template <typename Scalar>
void mirror_horizontal(Tensor<Scalar>& t) {
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width / 2; ++x) {
      const int a = t.row_index(y, x), b = t.row_index(y, t.width - 1 - x);
      t.data.row(a).swap(t.data.row(b));
    }
}

template <typename Scalar>
void mirror_vertical(Tensor<Scalar>& t) {
  for (int y = 0; y < t.height / 2; ++y)
    for (int x = 0; x < t.width; ++x) {
      const int a = t.row_index(y, x), b = t.row_index(t.height - 1 - y, x);
      t.data.row(a).swap(t.data.row(b));
    }
}

}  // namespace detail

// Stages run in a fixed order: intensity/colour, then the affine warp, then
// axis mirrors. Stages whose parameters are exactly neutral are skipped so an
// identity configuration reproduces the input bit for bit.
template <typename Scalar>
Tensor<Scalar> apply_augmentation(const Tensor<Scalar>& src, const AugmentationDraw& d,
                                  const AugmentationConfig& cfg) {
  Tensor<Scalar> out = src;
  const bool color_active =
      d.brightness != 0.0 || d.color_scale[0] != 1.0 || d.color_scale[1] != 1.0 || d.color_scale[2] != 1.0;
  if (color_active) {
    for (int c = 0; c < out.channels(); ++c) {
      out.data.col(c) =
          (out.data.col(c).template cast<double>().array() * d.color_scale[c % 3] + d.brightness)
              .cwiseMax(0.0)
              .cwiseMin(1.0)
              .template cast<Scalar>()
              .matrix();
    }
    zero_border(out);
  }
  if (d.scale != 1.0 || d.shear_deg != 0.0 || d.rotation_deg != 0.0)
    out = detail::affine_warp(out, d.scale, d.shear_deg, d.rotation_deg);
  if (d.u_flip_h < cfg.flip_prob) detail::mirror_horizontal(out);
  if (d.u_flip_v < cfg.flip_prob) detail::mirror_vertical(out);
  return out;
}

template <typename Scalar>
Tensor<Scalar> augment(const Tensor<Scalar>& src, const AugmentationConfig& cfg, Rng& rng) {
  return apply_augmentation(src, draw_augmentation(cfg, rng), cfg);
}

}  // namespace amddx
