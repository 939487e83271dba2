#include "amddx/ingestion.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "amddx/image_io.hpp"
#include "amddx/rng.hpp"

namespace amddx {

namespace {

namespace fs = std::filesystem;

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_image_file(const fs::path& p) {
  const std::string ext = to_lower(p.extension().string());
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".ppm" || ext == ".pgm" ||
         ext == ".bmp" || ext == ".tif" || ext == ".tiff";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

int count_foreground(const RawImage& mask) {
  // Dark-on-white scans: foreground pixels are the dark ones. Multi-channel
  // masks use the first channel.
  int count = 0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x, 0) < 128) ++count;
  return count;
}

struct DisjointSet {
  std::map<std::string, std::string> parent;

  const std::string& find(const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end()) it = parent.emplace(x, x).first;
    if (it->second != x) it->second = find(it->second);
    return it->second;
  }

  void unite(const std::string& a, const std::string& b) {
    std::string ra = find(a), rb = find(b);
    if (ra == rb) return;
    // Smaller id becomes the root so group ids are deterministic.
    if (rb < ra) std::swap(ra, rb);
    parent[rb] = ra;
  }
};

}  // namespace

LesionLabels derive_lesion_labels(const LesionMaskSet& masks, int image_height, int image_width,
                                  int min_pixels) {
  LesionLabels labels{};
  for (int i = 0; i < kNumLesions; ++i) {
    if (!masks.mask_paths[i]) continue;
    const RawImage mask = decode_image(*masks.mask_paths[i]);
    if (mask.height != image_height || mask.width != image_width)
      throw std::runtime_error(std::string("mask size mismatch for class ") + kLesionNames[i] +
                               ": " + masks.mask_paths[i]->string());
    labels[i] = count_foreground(mask) >= min_pixels ? 1 : 0;
  }
  return labels;
}

DatasetManifest load_ichallenge(const std::filesystem::path& root,
                                const std::optional<std::filesystem::path>& eye_groups_file,
                                int min_lesion_pixels) {
  const fs::path amd_dir = root / "Training400" / "AMD";
  const fs::path non_amd_dir = root / "Training400" / "Non-AMD";
  const fs::path mask_root = root / "Training400-Lesion" / "Lesion_Masks";
  if (!fs::is_directory(amd_dir) || !fs::is_directory(non_amd_dir))
    throw std::runtime_error("ichallenge layout not found under " + root.string() +
                             " (expected Training400/AMD and Training400/Non-AMD)");

  // Mask directories keyed by canonical class index, matched by name.
  std::array<fs::path, kNumLesions> class_dirs;
  if (fs::is_directory(mask_root)) {
    for (const auto& entry : fs::directory_iterator(mask_root)) {
      if (!entry.is_directory()) continue;
      const std::string dir_name = to_lower(entry.path().filename().string());
      for (int i = 0; i < kNumLesions; ++i)
        if (dir_name == kLesionNames[i]) class_dirs[i] = entry.path();
    }
  }

  DatasetManifest manifest;
  manifest.name = "ichallenge";
  manifest.base_dir = root;

  auto add_samples = [&](const fs::path& dir, int diagnosis) {
    for (const fs::path& img : sorted_images(dir)) {
      Sample s;
      s.sample_id = img.stem().string();
      s.image_ref = fs::absolute(img).string();
      s.diagnosis = diagnosis;

      LesionMaskSet masks;
      bool any_mask = false;
      for (int i = 0; i < kNumLesions; ++i) {
        if (class_dirs[i].empty()) continue;
        for (const char* ext : {".png", ".bmp", ".jpg", ".jpeg", ".ppm"}) {
          const fs::path candidate = class_dirs[i] / (s.sample_id + ext);
          if (fs::exists(candidate)) {
            masks.mask_paths[i] = candidate;
            any_mask = true;
            break;
          }
        }
      }
      if (any_mask) {
        const RawImage img_data = decode_image(img);
        s.lesions = derive_lesion_labels(masks, img_data.height, img_data.width, min_lesion_pixels);
      }
      s.eye_group_id = s.sample_id;
      manifest.samples.push_back(std::move(s));
    }
  };
  add_samples(amd_dir, 1);
  add_samples(non_amd_dir, 0);
  if (manifest.samples.empty()) throw std::runtime_error("no images found under " + root.string());

  if (eye_groups_file) assign_eye_groups(manifest.samples, *eye_groups_file);
  return manifest;
}

DatasetManifest load_evaluation_set(const std::filesystem::path& root, const std::string& dataset) {
  DatasetManifest manifest;
  manifest.base_dir = root;

  auto add = [&](const fs::path& img, int diagnosis) {
    Sample s;
    s.sample_id = img.stem().string();
    s.image_ref = fs::absolute(img).string();
    s.diagnosis = diagnosis;
    s.eye_group_id = s.sample_id;
    manifest.samples.push_back(std::move(s));
  };

  if (dataset == "aria") {
    manifest.name = "aria";
    const fs::path amd = root / "amd", healthy = root / "healthy";
    if (!fs::is_directory(amd) || !fs::is_directory(healthy))
      throw std::runtime_error("aria layout not found under " + root.string() +
                               " (expected amd/ and healthy/)");
    for (const fs::path& img : sorted_images(amd)) add(img, 1);
    for (const fs::path& img : sorted_images(healthy)) add(img, 0);
  } else if (dataset == "stare") {
    manifest.name = "stare";
    const fs::path diag_file = root / "diagnoses.txt";
    std::ifstream in(diag_file);
    if (!in) throw std::runtime_error("cannot open " + diag_file.string());
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string id;
      row >> id;
      if (id.empty()) continue;
      std::string text;
      std::getline(row, text);
      text = to_lower(text);
      int diagnosis;
      if (text.find("age-related") != std::string::npos ||
          text.find("macular degeneration") != std::string::npos)
        diagnosis = 1;
      else if (text.find("normal") != std::string::npos)
        diagnosis = 0;
      else
        continue;
      fs::path img;
      for (const char* ext : {".ppm", ".png", ".jpg", ".jpeg", ".tif", ".pgm"}) {
        const fs::path candidate = root / (id + ext);
        if (fs::exists(candidate)) {
          img = candidate;
          break;
        }
      }
      if (img.empty()) throw std::runtime_error("no image file for stare entry " + id);
      add(img, diagnosis);
    }
    if (manifest.samples.empty())
      throw std::runtime_error("no usable rows in " + diag_file.string());
  } else {
    throw std::invalid_argument("unknown evaluation dataset: " + dataset);
  }
  return manifest;
}

void assign_eye_groups(std::vector<Sample>& samples, const std::filesystem::path& groups_file) {
  std::ifstream in(groups_file);
  if (!in) throw std::runtime_error("cannot open eye-group file: " + groups_file.string());
  nlohmann::json doc;
  in >> doc;
  if (!doc.is_array()) throw std::runtime_error("eye-group file must be a JSON list of groups");

  std::set<std::string> known;
  for (const Sample& s : samples) known.insert(s.sample_id);

  DisjointSet ds;
  for (const auto& group : doc) {
    if (!group.is_array()) throw std::runtime_error("eye-group entries must be lists of sample ids");
    std::string first;
    for (const auto& id_json : group) {
      const std::string id = id_json.get<std::string>();
      if (!known.count(id))
        throw std::runtime_error("eye-group file references unknown sample: " + id);
      if (first.empty())
        first = id;
      else
        ds.unite(first, id);
    }
  }
  for (Sample& s : samples) s.eye_group_id = ds.find(s.sample_id);
}

FoldPlan build_folds(const DatasetManifest& manifest, int k, int repetitions, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");

  // Group ids in deterministic (sorted) order with their sample counts.
  std::map<std::string, std::vector<std::string>> groups;
  for (const Sample& s : manifest.samples) {
    if (s.eye_group_id.empty()) throw std::invalid_argument("sample without eye group: " + s.sample_id);
    groups[s.eye_group_id].push_back(s.sample_id);
  }
  if (static_cast<int>(groups.size()) < k)
    throw std::invalid_argument("fewer eye groups than folds: " + std::to_string(groups.size()) +
                                " < " + std::to_string(k));
  std::vector<const std::pair<const std::string, std::vector<std::string>>*> group_list;
  for (const auto& g : groups) group_list.push_back(&g);

  FoldPlan plan;
  plan.seed = seed;
  for (int rep = 0; rep < repetitions; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
    auto shuffled = group_list;
    rng.shuffle(shuffled);
    std::stable_sort(shuffled.begin(), shuffled.end(),
                     [](const auto* a, const auto* b) { return a->second.size() > b->second.size(); });

    std::vector<std::set<std::string>> fold_groups(k);
    std::vector<std::size_t> fold_sizes(k, 0);
    for (const auto* g : shuffled) {
      int target = 0;
      for (int f = 1; f < k; ++f)
        if (fold_sizes[f] < fold_sizes[target]) target = f;
      fold_groups[target].insert(g->first);
      fold_sizes[target] += g->second.size();
    }

    // Emit fold membership in manifest order.
    std::vector<std::vector<std::string>> folds(k);
    for (const Sample& s : manifest.samples)
      for (int f = 0; f < k; ++f)
        if (fold_groups[f].count(s.eye_group_id)) {
          folds[f].push_back(s.sample_id);
          break;
        }
    plan.repetitions.push_back(std::move(folds));
  }
  return plan;
}

}  // namespace amddx
