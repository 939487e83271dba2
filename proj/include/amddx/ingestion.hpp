#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amddx/datamodel.hpp"

namespace amddx {

// Per-class pixel mask files for one retinography; a class without a shipped
// mask stays absent.
struct LesionMaskSet {
  std::array<std::optional<std::filesystem::path>, kNumLesions> mask_paths;
};

// Image-level reduction of pixel masks: class i = 1 iff its mask exists and
// holds at least min_pixels foreground pixels. Masks are dark-on-white scans,
// so foreground means pixel value < 128. Mask dimensions must match the
// source image.
LesionLabels derive_lesion_labels(const LesionMaskSet& masks, int image_height, int image_width,
                                  int min_pixels = 1);

// Layout assumed (as released):
//   root/Training400/AMD/*.jpg        diagnosis-positive retinographies
//   root/Training400/Non-AMD/*.jpg    diagnosis-negative retinographies
//   root/Training400-Lesion/Lesion_Masks/<class>/<stem>.{png,bmp,jpg}
// Class directories are matched case-insensitively against the canonical
// lesion names. Samples with at least one mask file get derived lesion
// labels; the rest stay unlabeled. sample_id = image stem.
DatasetManifest load_ichallenge(const std::filesystem::path& root,
                                const std::optional<std::filesystem::path>& eye_groups_file,
                                int min_lesion_pixels = 1);

// External AMD-detection evaluation sets; lesion labels stay absent.
// aria:  root/amd/* positive, root/healthy/* negative; any other
//        subdirectory (e.g. diabetic) is excluded.
// stare: root/diagnoses.txt lines "<image-id><TAB or spaces><diagnosis text>";
//        rows mentioning age-related macular degeneration are positive, rows
//        labeled normal are negative, all other rows are excluded. Images are
//        root/<image-id>.{ppm,png,jpg,jpeg,tif}.
DatasetManifest load_evaluation_set(const std::filesystem::path& root, const std::string& dataset);

// Applies a curated same-eye group file: a JSON list of lists of sample_ids.
// Overlapping lists merge transitively; every listed id must exist. Group ids
// become the lexicographically smallest member id; unlisted samples keep
// singleton groups.
void assign_eye_groups(std::vector<Sample>& samples, const std::filesystem::path& groups_file);

// Randomly assigns whole eye groups to folds, one independent shuffle per
// repetition, greedily balancing fold sizes by sample count (largest groups
// first, ties to the lowest fold index). Every group lands in exactly one
// fold per repetition.
FoldPlan build_folds(const DatasetManifest& manifest, int k, int repetitions, std::uint64_t seed);

}  // namespace amddx
