#pragma once

#include <filesystem>
#include <optional>

#include "amddx/model.hpp"

namespace amddx {

// Parameter archive: "AMDP" magic, format version, a JSON header holding the
// ModelConfig, element type, optional normalization constants and the array
// directory, then the raw array payloads in directory order (column-major,
// little-endian hosts assumed). Round-trips bit-exactly.
template <typename Scalar>
struct LoadedParams {
  ModelConfig config;
  ModelParams<Scalar> params;
  std::optional<Normalization> normalization;
  bool trunk_only = false;
};

template <typename Scalar>
void save_params(const std::filesystem::path& path, const ModelConfig& cfg,
                 const ModelParams<Scalar>& params,
                 const std::optional<Normalization>& normalization = std::nullopt);

// Trunk layers only, for shipping pretrained backbones. Normalization
// constants are mandatory because pretrained weights expect standardized
// inputs.
template <typename Scalar>
void save_trunk(const std::filesystem::path& path, const ModelConfig& cfg,
                const ModelParams<Scalar>& params, const Normalization& normalization);

template <typename Scalar>
LoadedParams<Scalar> load_params(const std::filesystem::path& path);

// He-uniform initialization with an optional pretrained trunk swapped in. The
// head and FC draws come from a stream independent of the trunk's, so they are
// identical with and without a pretrained file. When a trunk is loaded its
// normalization constants are returned for the input pipeline.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed,
                                const std::optional<std::filesystem::path>& pretrained_trunk,
                                std::optional<Normalization>& normalization_out);

}  // namespace amddx
