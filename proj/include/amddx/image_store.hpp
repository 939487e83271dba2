#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "amddx/datamodel.hpp"
#include "amddx/image_io.hpp"
#include "amddx/tensor.hpp"

namespace amddx {

// Decoded-image cache keyed by sample id. Populate it up front with preload();
// afterwards get() is const and safe to call from concurrent training runs.
// Images above the byte budget are decoded on demand instead of cached.
template <typename Scalar>
class ImageStore {
 public:
  explicit ImageStore(const DatasetManifest& manifest,
                      std::size_t max_cache_bytes = std::size_t(4) << 30)
      : manifest_(&manifest), budget_(max_cache_bytes) {}

  void preload() {
    for (const Sample& s : manifest_->samples) {
      Tensor<Scalar> t = load(s);
      const std::size_t bytes = sizeof(Scalar) * static_cast<std::size_t>(t.data.size());
      if (used_ + bytes > budget_) continue;
      used_ += bytes;
      cache_.emplace(s.sample_id, std::move(t));
    }
  }

  Tensor<Scalar> get(const Sample& s) const {
    auto it = cache_.find(s.sample_id);
    if (it != cache_.end()) return it->second;
    return load(s);
  }

  const DatasetManifest& manifest() const { return *manifest_; }

 private:
  Tensor<Scalar> load(const Sample& s) const {
    return load_image_tensor<Scalar>(manifest_->resolve_image_path(s));
  }

  const DatasetManifest* manifest_;
  std::size_t budget_;
  std::size_t used_ = 0;
  std::unordered_map<std::string, Tensor<Scalar>> cache_;
};

}  // namespace amddx
