#include "amddx/params_io.hpp"

#include "json.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace amddx {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'A', 'M', 'D', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

template <typename Scalar>
const char* dtype_name() {
  return sizeof(Scalar) == 4 ? "f32" : "f64";
}

json config_to_json(const ModelConfig& cfg) {
  return json{{"block_channels", cfg.block_channels},
              {"input_channels", cfg.input_channels},
              {"n_lesions", cfg.n_lesions},
              {"pool_output", cfg.pool_output}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.block_channels = j.at("block_channels").get<std::vector<std::vector<int>>>();
  cfg.input_channels = j.at("input_channels").get<int>();
  cfg.n_lesions = j.at("n_lesions").get<int>();
  cfg.pool_output = j.at("pool_output").get<int>();
  cfg.validate();
  return cfg;
}

template <typename Scalar>
void write_archive(const std::filesystem::path& path, const ModelConfig& cfg,
                   const std::vector<std::pair<std::string, const MatrixX<Scalar>*>>& arrays,
                   const std::optional<Normalization>& normalization, bool trunk_only) {
  json header;
  header["config"] = config_to_json(cfg);
  header["dtype"] = dtype_name<Scalar>();
  header["trunk_only"] = trunk_only;
  if (normalization) {
    header["normalization"] = {
        {"mean", normalization->mean},
        {"std", normalization->stddev},
    };
  } else {
    header["normalization"] = nullptr;
  }
  json dir = json::array();
  for (const auto& [name, mat] : arrays)
    dir.push_back({{"name", name}, {"rows", mat->rows()}, {"cols", mat->cols()}});
  header["arrays"] = dir;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write parameter archive: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  const std::string header_text = header.dump();
  write_u64(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, mat] : arrays)
    out.write(reinterpret_cast<const char*>(mat->data()),
              static_cast<std::streamsize>(sizeof(Scalar) * mat->size()));
  if (!out) throw std::runtime_error("write failure on parameter archive: " + path.string());
}

}  // namespace

template <typename Scalar>
void save_params(const std::filesystem::path& path, const ModelConfig& cfg,
                 const ModelParams<Scalar>& params,
                 const std::optional<Normalization>& normalization) {
  std::vector<std::pair<std::string, const MatrixX<Scalar>*>> arrays;
  for_each_array(params, [&](const std::string& name, const MatrixX<Scalar>& m) {
    arrays.emplace_back(name, &m);
  });
  write_archive<Scalar>(path, cfg, arrays, normalization, false);
}

template <typename Scalar>
void save_trunk(const std::filesystem::path& path, const ModelConfig& cfg,
                const ModelParams<Scalar>& params, const Normalization& normalization) {
  std::vector<std::pair<std::string, const MatrixX<Scalar>*>> arrays;
  for_each_array(params, [&](const std::string& name, const MatrixX<Scalar>& m) {
    if (name.rfind("trunk.", 0) == 0) arrays.emplace_back(name, &m);
  });
  write_archive<Scalar>(path, cfg, arrays, normalization, true);
}

template <typename Scalar>
LoadedParams<Scalar> load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open parameter archive: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a parameter archive: " + path.string());
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported archive version " + std::to_string(version));
  const std::uint64_t header_len = read_u64(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated archive header: " + path.string());
  const json header = json::parse(header_text);

  LoadedParams<Scalar> result;
  result.config = config_from_json(header.at("config"));
  result.trunk_only = header.at("trunk_only").get<bool>();
  if (header.at("dtype").get<std::string>() != dtype_name<Scalar>())
    throw std::runtime_error("archive dtype is " + header.at("dtype").get<std::string>() +
                             ", expected " + dtype_name<Scalar>());
  if (!header.at("normalization").is_null()) {
    Normalization n;
    const auto& jn = header.at("normalization");
    n.mean = jn.at("mean").get<std::array<double, 3>>();
    n.stddev = jn.at("std").get<std::array<double, 3>>();
    result.normalization = n;
  }

  result.params = make_params<Scalar>(result.config);
  std::map<std::string, MatrixX<Scalar>*> by_name;
  for_each_array(result.params,
                 [&](const std::string& name, MatrixX<Scalar>& m) { by_name[name] = &m; });

  std::vector<std::string> bad_shapes;
  for (const auto& entry : header.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("unknown array in archive: " + name);
    if (it->second->rows() != rows || it->second->cols() != cols) {
      bad_shapes.push_back(name);
      in.seekg(static_cast<std::streamoff>(sizeof(Scalar) * rows * cols), std::ios::cur);
      continue;
    }
    in.read(reinterpret_cast<char*>(it->second->data()),
            static_cast<std::streamsize>(sizeof(Scalar) * it->second->size()));
  }
  if (!bad_shapes.empty()) {
    std::string msg = "archive shape mismatch in:";
    for (const auto& n : bad_shapes) msg += " " + n;
    throw std::runtime_error(msg);
  }
  if (!in) throw std::runtime_error("truncated archive data: " + path.string());
  return result;
}

template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed,
                                const std::optional<std::filesystem::path>& pretrained_trunk,
                                std::optional<Normalization>& normalization_out) {
  ModelParams<Scalar> params = init_params<Scalar>(cfg, seed);
  normalization_out.reset();
  if (!pretrained_trunk) return params;

  LoadedParams<Scalar> loaded = load_params<Scalar>(*pretrained_trunk);
  if (!loaded.normalization)
    throw std::runtime_error("pretrained trunk lacks normalization constants: " +
                             pretrained_trunk->string());
  std::vector<std::string> mismatches;
  std::map<std::string, const MatrixX<Scalar>*> source;
  for_each_array(loaded.params, [&](const std::string& name, const MatrixX<Scalar>& m) {
    if (name.rfind("trunk.", 0) == 0) source[name] = &m;
  });
  for_each_array(params, [&](const std::string& name, MatrixX<Scalar>& m) {
    if (name.rfind("trunk.", 0) != 0) return;
    auto it = source.find(name);
    if (it == source.end() || it->second->rows() != m.rows() || it->second->cols() != m.cols()) {
      mismatches.push_back(name);
      return;
    }
    m = *it->second;
  });
  if (!mismatches.empty()) {
    std::string msg = "pretrained trunk does not match model config; offending layers:";
    for (const auto& n : mismatches) msg += " " + n;
    throw std::runtime_error(msg);
  }
  normalization_out = loaded.normalization;
  return params;
}

template void save_params<float>(const std::filesystem::path&, const ModelConfig&,
                                 const ModelParams<float>&, const std::optional<Normalization>&);
template void save_params<double>(const std::filesystem::path&, const ModelConfig&,
                                  const ModelParams<double>&, const std::optional<Normalization>&);
template void save_trunk<float>(const std::filesystem::path&, const ModelConfig&,
                                const ModelParams<float>&, const Normalization&);
template void save_trunk<double>(const std::filesystem::path&, const ModelConfig&,
                                 const ModelParams<double>&, const Normalization&);
template LoadedParams<float> load_params<float>(const std::filesystem::path&);
template LoadedParams<double> load_params<double>(const std::filesystem::path&);
template ModelParams<float> init_params<float>(const ModelConfig&, std::uint64_t,
                                               const std::optional<std::filesystem::path>&,
                                               std::optional<Normalization>&);
template ModelParams<double> init_params<double>(const ModelConfig&, std::uint64_t,
                                                 const std::optional<std::filesystem::path>&,
                                                 std::optional<Normalization>&);

}  // namespace amddx
