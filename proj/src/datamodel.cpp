#include "amddx/datamodel.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace amddx {

using nlohmann::json;

const Sample* DatasetManifest::find(const std::string& sample_id) const {
  for (const auto& s : samples)
    if (s.sample_id == sample_id) return &s;
  return nullptr;
}

std::filesystem::path DatasetManifest::resolve_image_path(const Sample& s) const {
  std::filesystem::path p(s.image_ref);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::vector<std::string> validate_manifest(const DatasetManifest& manifest) {
  std::vector<std::string> violations;
  std::unordered_set<std::string> seen;
  for (const auto& s : manifest.samples) {
    if (!seen.insert(s.sample_id).second)
      violations.push_back("sample '" + s.sample_id + "': duplicate sample_id");
    if (s.sample_id.empty()) violations.push_back("sample with empty sample_id");
    if (s.eye_group_id.empty())
      violations.push_back("sample '" + s.sample_id + "': empty eye_group_id");
    if (s.diagnosis && *s.diagnosis != 0 && *s.diagnosis != 1)
      violations.push_back("sample '" + s.sample_id + "': diagnosis not in {0,1}");
    if (s.lesions) {
      for (int v : *s.lesions)
        if (v != 0 && v != 1) {
          violations.push_back("sample '" + s.sample_id + "': lesion value not in {0,1}");
          break;
        }
    }
    if (s.image_ref.empty()) {
      violations.push_back("sample '" + s.sample_id + "': empty image_ref");
    } else if (!std::filesystem::exists(manifest.resolve_image_path(s))) {
      violations.push_back("sample '" + s.sample_id + "': image_ref not resolvable: " +
                           manifest.resolve_image_path(s).string());
    }
  }
  return violations;
}

static json sample_to_json(const Sample& s) {
  json j;
  j["sample_id"] = s.sample_id;
  j["image_ref"] = s.image_ref;
  j["diagnosis"] = s.diagnosis ? json(*s.diagnosis) : json(nullptr);
  if (s.lesions)
    j["lesions"] = *s.lesions;
  else
    j["lesions"] = nullptr;
  j["eye_group_id"] = s.eye_group_id;
  return j;
}

static Sample sample_from_json(const json& j) {
  Sample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.image_ref = j.at("image_ref").get<std::string>();
  if (j.contains("diagnosis") && !j.at("diagnosis").is_null())
    s.diagnosis = j.at("diagnosis").get<int>();
  if (j.contains("lesions") && !j.at("lesions").is_null()) {
    const auto& arr = j.at("lesions");
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(kNumLesions))
      throw std::runtime_error("sample '" + s.sample_id + "': lesion vector length != " +
                               std::to_string(kNumLesions));
    LesionLabels labels{};
    for (int i = 0; i < kNumLesions; ++i) labels[i] = arr.at(i).get<int>();
    s.lesions = labels;
  }
  s.eye_group_id = j.at("eye_group_id").get<std::string>();
  return s;
}

DatasetManifest parse_manifest(const std::string& json_text) {
  const json j = json::parse(json_text);
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  for (const auto& js : j.at("samples")) m.samples.push_back(sample_from_json(js));
  return m;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  json j;
  j["name"] = manifest.name;
  j["samples"] = json::array();
  for (const auto& s : manifest.samples) j["samples"].push_back(sample_to_json(s));
  return j.dump(2) + "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  DatasetManifest m = parse_manifest(ss.str());
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  out << serialize_manifest(manifest);
}

FoldPlan parse_fold_plan(const std::string& json_text) {
  const json j = json::parse(json_text);
  FoldPlan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& rep : j.at("repetitions")) {
    std::vector<std::vector<std::string>> folds;
    for (const auto& fold : rep) folds.push_back(fold.get<std::vector<std::string>>());
    plan.repetitions.push_back(std::move(folds));
  }
  return plan;
}

std::string serialize_fold_plan(const FoldPlan& plan) {
  json j;
  j["seed"] = plan.seed;
  j["repetitions"] = plan.repetitions;
  return j.dump(2) + "\n";
}

FoldPlan load_fold_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fold plan: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_fold_plan(ss.str());
}

void save_fold_plan(const FoldPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fold plan: " + path.string());
  out << serialize_fold_plan(plan);
}

}  // namespace amddx
