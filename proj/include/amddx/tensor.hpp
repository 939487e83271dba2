#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace amddx {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Planar image/feature stack. One matrix column per channel; within a column
// pixels are stored row-major, including an optional zero border of `pad`
// pixels on every side. The border lets 3x3 convolutions run as shifted
// whole-plane products without bounds tests; everything that writes a padded
// tensor must leave the border zeroed.
template <typename Scalar>
struct Tensor {
  MatrixX<Scalar> data;  // (padded_height*padded_width) x channels
  int height = 0;
  int width = 0;
  int pad = 0;

  Tensor() = default;
  Tensor(int h, int w, int c, int p = 0) : height(h), width(w), pad(p) {
    data.setZero(static_cast<Eigen::Index>(padded_height()) * padded_width(), c);
  }

  int padded_height() const { return height + 2 * pad; }
  int padded_width() const { return width + 2 * pad; }
  int channels() const { return static_cast<int>(data.cols()); }
  // Row index into `data` for interior pixel (y, x) of channel planes.
  Eigen::Index row_index(int y, int x) const {
    return static_cast<Eigen::Index>(y + pad) * padded_width() + (x + pad);
  }
  Scalar& at(int c, int y, int x) { return data(row_index(y, x), c); }
  Scalar at(int c, int y, int x) const { return data(row_index(y, x), c); }
};

// Zeroes the pad ring of every channel plane.
template <typename Scalar>
void zero_border(Tensor<Scalar>& t) {
  if (t.pad == 0) return;
  const int pw = t.padded_width(), ph = t.padded_height(), p = t.pad;
  t.data.topRows(static_cast<Eigen::Index>(p) * pw).setZero();
  t.data.bottomRows(static_cast<Eigen::Index>(p) * pw).setZero();
  for (int y = p; y < ph - p; ++y) {
    t.data.middleRows(static_cast<Eigen::Index>(y) * pw, p).setZero();
    t.data.middleRows(static_cast<Eigen::Index>(y) * pw + pw - p, p).setZero();
  }
}

// Copies `src` into a tensor with the requested border width.
template <typename Scalar>
Tensor<Scalar> with_pad(const Tensor<Scalar>& src, int pad) {
  if (src.pad == pad) return src;
  Tensor<Scalar> out(src.height, src.width, src.channels(), pad);
  for (int y = 0; y < src.height; ++y)
    out.data.middleRows(out.row_index(y, 0), src.width) =
        src.data.middleRows(src.row_index(y, 0), src.width);
  return out;
}

// Interior pixels as a (height*width) x channels matrix, border dropped.
template <typename Scalar>
MatrixX<Scalar> interior(const Tensor<Scalar>& t) {
  if (t.pad == 0) return t.data;
  MatrixX<Scalar> out(static_cast<Eigen::Index>(t.height) * t.width, t.channels());
  for (int y = 0; y < t.height; ++y)
    out.middleRows(static_cast<Eigen::Index>(y) * t.width, t.width) =
        t.data.middleRows(t.row_index(y, 0), t.width);
  return out;
}

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.data.allFinite();
}

template <typename Scalar>
void clamp01(Tensor<Scalar>& t) {
  t.data = t.data.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

inline void check_image_dims(int height, int width, int channels) {
  if (height < 32 || width < 32)
    throw std::invalid_argument("image dimensions must be at least 32x32");
  if (channels != 3) throw std::invalid_argument("image must have 3 channels");
}

}  // namespace amddx
