#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "amddx/tensor.hpp"

namespace amddx {

// Decoded 8-bit image, interleaved row-major. channels is 1 (gray) or 3 (RGB).
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Format chosen by file magic: PNG, JFIF/JPEG, or PPM/PGM (P5/P6).
RawImage decode_image(const std::filesystem::path& path);
void encode_png(const std::filesystem::path& path, const RawImage& image);

// value/255 into [0, 1]; grayscale inputs are replicated to 3 channels.
template <typename Scalar>
Tensor<Scalar> image_to_tensor(const RawImage& img) {
  Tensor<Scalar> t(img.height, img.width, 3);
  const Scalar inv = Scalar(1) / Scalar(255);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) = Scalar(img.at(y, x, img.channels == 1 ? 0 : c)) * inv;
  return t;
}

// Clamp to [0, 1], scale by 255 and round to nearest.
template <typename Scalar>
RawImage tensor_to_image(const Tensor<Scalar>& t) {
  RawImage img;
  img.height = t.height;
  img.width = t.width;
  img.channels = t.channels();
  img.pixels.resize(static_cast<std::size_t>(t.height) * t.width * img.channels);
  std::size_t i = 0;
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = static_cast<double>(t.at(c, y, x));
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        img.pixels[i++] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
      }
  return img;
}

template <typename Scalar>
Tensor<Scalar> load_image_tensor(const std::filesystem::path& path) {
  return image_to_tensor<Scalar>(decode_image(path));
}

}  // namespace amddx
