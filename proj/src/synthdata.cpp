#include "amddx/synthdata.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "amddx/image_io.hpp"
#include "amddx/rng.hpp"
#include "amddx/tensor.hpp"

namespace amddx {

namespace {

struct Blob {
  int lesion;
  double cx, cy, radius;
};

bool in_central_third(const Blob& b, int size) {
  const double lo = size / 3.0, hi = 2.0 * size / 3.0;
  return b.cx >= lo && b.cx < hi && b.cy >= lo && b.cy < hi;
}

int count_central_drusen(const std::vector<Blob>& blobs, int size) {
  int n = 0;
  for (const Blob& b : blobs)
    if (b.lesion == static_cast<int>(LesionClass::drusen) && in_central_third(b, size)) ++n;
  return n;
}

constexpr double kDiscRadius = 0.47;

// Places a blob so that it stays within the disc, fully inside the frame,
// and keeps clear of already placed blobs (centers at least 0.9 * (r_i +
// r_j) apart, so blobs never merge into ambiguous shapes).
bool place_blob(std::vector<Blob>& blobs, int lesion, double radius, int size, bool central,
                Rng& rng) {
  const double disc_r = kDiscRadius * size;
  const double cx0 = size / 2.0, cy0 = size / 2.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double x, y;
    if (central) {
      x = rng.uniform(size / 3.0, 2.0 * size / 3.0);
      y = rng.uniform(size / 3.0, 2.0 * size / 3.0);
    } else {
      const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      const double rad = (disc_r - radius - 1.0) * std::sqrt(rng.uniform());
      x = cx0 + rad * std::cos(ang);
      y = cy0 + rad * std::sin(ang);
    }
    if (x < radius || x > size - radius || y < radius || y > size - radius) continue;
    const double dx = x - cx0, dy = y - cy0;
    if (std::sqrt(dx * dx + dy * dy) + radius > disc_r) continue;
    bool clear = true;
    for (const Blob& other : blobs) {
      const double ddx = x - other.cx, ddy = y - other.cy;
      if (std::sqrt(ddx * ddx + ddy * ddy) < 0.9 * (radius + other.radius)) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    blobs.push_back({lesion, x, y, radius});
    return true;
  }
  return false;
}

std::vector<Blob> draw_geometry(const SynthConfig& cfg, int target_diagnosis, Rng& rng) {
  const double scale = cfg.image_size / 128.0;
  auto radius_of = [&](int cls) {
    return scale * rng.uniform(cfg.recipes[cls].radius_min, cfg.recipes[cls].radius_max);
  };

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<Blob> blobs;
    bool ok = true;
    if (target_diagnosis == 1) {
      const int drusen = static_cast<int>(LesionClass::drusen);
      const int n_central = static_cast<int>(
          rng.uniform_int(std::max(2, cfg.recipes[drusen].count_min), cfg.recipes[drusen].count_max));
      for (int i = 0; i < n_central && ok; ++i)
        ok = place_blob(blobs, drusen, radius_of(drusen), cfg.image_size, true, rng);
      for (int cls = 0; cls < kNumLesions && ok; ++cls) {
        if (cls == drusen) continue;
        if (!rng.bernoulli(cfg.class_probability)) continue;
        const int n =
            static_cast<int>(rng.uniform_int(cfg.recipes[cls].count_min, cfg.recipes[cls].count_max));
        for (int i = 0; i < n && ok; ++i)
          ok = place_blob(blobs, cls, radius_of(cls), cfg.image_size, false, rng);
      }
    } else if (rng.bernoulli(cfg.single_lesion_fraction)) {
      const int cls = static_cast<int>(rng.uniform_int(0, kNumLesions - 1));
      ok = place_blob(blobs, cls, radius_of(cls), cfg.image_size, false, rng);
    } else {
      // Multi-lesion negative: at most one drusen blob, so the diagnosis rule
      // cannot fire.
      const int drusen = static_cast<int>(LesionClass::drusen);
      if (rng.bernoulli(0.5))
        ok = place_blob(blobs, drusen, radius_of(drusen), cfg.image_size, false, rng);
      for (int cls = 0; cls < kNumLesions && ok; ++cls) {
        if (cls == drusen) continue;
        if (!rng.bernoulli(cfg.class_probability)) continue;
        const int n =
            static_cast<int>(rng.uniform_int(cfg.recipes[cls].count_min, cfg.recipes[cls].count_max));
        for (int i = 0; i < n && ok; ++i)
          ok = place_blob(blobs, cls, radius_of(cls), cfg.image_size, false, rng);
      }
    }
    if (!ok) continue;
    const int central = count_central_drusen(blobs, cfg.image_size);
    if ((target_diagnosis == 1) != (central >= 2)) continue;
    return blobs;
  }
  throw std::runtime_error("could not place blobs; recipes too crowded for the image size");
}

Tensor<double> render(const SynthConfig& cfg, const std::vector<Blob>& blobs, Rng& rng) {
  const int s = cfg.image_size;
  Tensor<double> img(s, s, 3, 0);
  const double cx0 = s / 2.0, cy0 = s / 2.0, disc_r = kDiscRadius * s;
  const std::array<double, 3> base{0.42, 0.13, 0.04};
  std::array<double, 3> tint;
  for (double& t : tint) t = rng.uniform(-0.04, 0.04);

  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const double dx = x + 0.5 - cx0, dy = y + 0.5 - cy0;
      const double r = std::sqrt(dx * dx + dy * dy);
      if (r > disc_r) continue;
      const double shade = 1.0 - 0.15 * (r / disc_r) * (r / disc_r);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = (base[c] + tint[c]) * shade;
    }

  for (const Blob& b : blobs) {
    std::array<double, 3> color = cfg.recipes[b.lesion].color;
    for (double& c : color) c = std::clamp(c + rng.uniform(-0.03, 0.03), 0.0, 1.0);
    const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - b.radius - 1)));
    const int x1 = std::min(s - 1, static_cast<int>(std::ceil(b.cx + b.radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - b.radius - 1)));
    const int y1 = std::min(s - 1, static_cast<int>(std::ceil(b.cy + b.radius + 1)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - b.cx, dy = y + 0.5 - b.cy;
        const double dist = std::sqrt(dx * dx + dy * dy);
        const double alpha = std::clamp((b.radius - dist) / 1.5, 0.0, 1.0);
        if (alpha <= 0) continue;
        for (int c = 0; c < 3; ++c)
          img.at(c, y, x) = (1 - alpha) * img.at(c, y, x) + alpha * color[c];
      }
  }

  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = std::clamp(img.at(c, y, x) + rng.uniform(-0.02, 0.02), 0.0, 1.0);
  return img;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_samples < 0) throw std::invalid_argument("n_samples must be >= 0");
  if (image_size < 32) throw std::invalid_argument("image_size must be >= 32");
  if (!(class_probability >= 0 && class_probability <= 1))
    throw std::invalid_argument("class_probability must be in [0, 1]");
  if (!(single_lesion_fraction >= 0 && single_lesion_fraction <= 1))
    throw std::invalid_argument("single_lesion_fraction must be in [0, 1]");
  for (const BlobRecipe& r : recipes) {
    if (r.count_min < 0 || r.count_max < r.count_min)
      throw std::invalid_argument("blob count range invalid");
    if (r.radius_min <= 0 || r.radius_max < r.radius_min)
      throw std::invalid_argument("blob radius range invalid");
  }
}

SynthResult generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  SynthResult result;
  result.manifest.name = "synthetic";
  result.manifest.base_dir = out_dir;

  for (int i = 0; i < cfg.n_samples; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const int target = i % 2;
    const std::vector<Blob> blobs = draw_geometry(cfg, target, rng);
    const Tensor<double> img = render(cfg, blobs, rng);

    char id[32];
    std::snprintf(id, sizeof(id), "synth_%04d", i);
    encode_png(out_dir / (std::string(id) + ".png"), tensor_to_image(img));

    Sample s;
    s.sample_id = id;
    s.image_ref = std::string(id) + ".png";
    s.diagnosis = count_central_drusen(blobs, cfg.image_size) >= 2 ? 1 : 0;
    LesionLabels labels{};
    for (const Blob& b : blobs) labels[b.lesion] = 1;
    s.lesions = labels;
    s.eye_group_id = id;
    result.manifest.samples.push_back(std::move(s));

    for (const Blob& b : blobs) {
      BlobGeometry g;
      g.sample_id = id;
      g.lesion = static_cast<LesionClass>(b.lesion);
      g.bbox = {std::max(0.0, b.cx - b.radius), std::max(0.0, b.cy - b.radius),
                std::min<double>(cfg.image_size, b.cx + b.radius),
                std::min<double>(cfg.image_size, b.cy + b.radius)};
      result.geometry.push_back(std::move(g));
    }
  }
  return result;
}

std::string serialize_geometry(const std::vector<BlobGeometry>& geometry) {
  nlohmann::json arr = nlohmann::json::array();
  for (const BlobGeometry& g : geometry)
    arr.push_back({{"sample_id", g.sample_id},
                   {"class", kLesionNames[static_cast<int>(g.lesion)]},
                   {"bbox", g.bbox}});
  return arr.dump(2) + "\n";
}

std::vector<BlobGeometry> parse_geometry(const std::string& json_text) {
  const nlohmann::json arr = nlohmann::json::parse(json_text);
  std::vector<BlobGeometry> out;
  for (const auto& j : arr) {
    BlobGeometry g;
    g.sample_id = j.at("sample_id").get<std::string>();
    const std::string cls = j.at("class").get<std::string>();
    bool found = false;
    for (int i = 0; i < kNumLesions; ++i)
      if (cls == kLesionNames[i]) {
        g.lesion = static_cast<LesionClass>(i);
        found = true;
      }
    if (!found) throw std::runtime_error("unknown lesion class in geometry: " + cls);
    g.bbox = j.at("bbox").get<std::array<double, 4>>();
    out.push_back(std::move(g));
  }
  return out;
}

void save_geometry(const std::vector<BlobGeometry>& geometry, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write geometry: " + path.string());
  out << serialize_geometry(geometry);
}

std::vector<BlobGeometry> load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open geometry: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_geometry(ss.str());
}

}  // namespace amddx
