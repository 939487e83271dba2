#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "amddx/datamodel.hpp"

namespace amddx {

// Blob parameters for one lesion class. Radii are given at a 128-pixel
// reference image and scale linearly with the configured image size; colors
// are disjoint across classes so each channel has a learnable signature.
struct BlobRecipe {
  int count_min = 1;
  int count_max = 2;
  double radius_min = 12.0;
  double radius_max = 16.0;
  std::array<double, 3> color{0.5, 0.5, 0.5};
};

struct SynthConfig {
  int n_samples = 200;
  int image_size = 128;
  std::uint64_t seed = 1;
  // Probability that each non-drusen class appears on a multi-lesion sample.
  double class_probability = 0.4;
  // Fraction of negative samples that carry exactly one blob of one class,
  // giving the activation-map localization check unambiguous ground truth.
  double single_lesion_fraction = 0.6;
  std::array<BlobRecipe, kNumLesions> recipes = default_recipes();

  // Radii are for image_size 128 and scale with it. Blobs span several cells
  // of the trunk's output grid so the planted evidence dominates any disc
  // edge response in the activation maps.
  static std::array<BlobRecipe, kNumLesions> default_recipes() {
    return {{
        {2, 4, 13.0, 17.0, {0.95, 0.82, 0.25}},  // drusen
        {1, 2, 20.0, 28.0, {1.00, 0.98, 0.85}},  // exudate
        {1, 2, 20.0, 28.0, {0.10, 0.01, 0.02}},  // hemorrhage
        {1, 2, 20.0, 28.0, {0.80, 0.82, 0.92}},  // scar
        {1, 2, 18.0, 24.0, {0.35, 0.55, 0.30}},  // others
    }};
  }

  void validate() const;
};

// Planted-blob ground truth. bbox = [x0, y0, x1, y1] in pixels, inclusive of
// the blob's full extent, clipped to the image.
struct BlobGeometry {
  std::string sample_id;
  LesionClass lesion = LesionClass::drusen;
  std::array<double, 4> bbox{0, 0, 0, 0};
};

struct SynthResult {
  DatasetManifest manifest;  // image_refs relative to out_dir
  std::vector<BlobGeometry> geometry;
};

// Writes <sample>.png files under out_dir and returns the matching manifest
// and blob geometry. Diagnosis = 1 iff at least two drusen centers fall in
// the central third of the image (both axes); generation alternates target
// diagnoses so classes stay balanced. Everything is a pure function of the
// seed; sample i draws from derive_seed(seed, i).
SynthResult generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir);

std::string serialize_geometry(const std::vector<BlobGeometry>& geometry);
std::vector<BlobGeometry> parse_geometry(const std::string& json_text);
void save_geometry(const std::vector<BlobGeometry>& geometry, const std::filesystem::path& path);
std::vector<BlobGeometry> load_geometry(const std::filesystem::path& path);

}  // namespace amddx
