#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trajcnn/baselines.hpp"
#include "trajcnn/model.hpp"

namespace trajcnn {

enum class ModelKind { kCnn, kLstm };

inline const char* to_string(ModelKind k) { return k == ModelKind::kCnn ? "cnn" : "lstm"; }

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "cnn") return ModelKind::kCnn;
  if (s == "lstm") return ModelKind::kLstm;
  throw std::invalid_argument("unknown model kind '" + s + "' (cnn|lstm)");
}

/// In-memory form of a saved model: config plus the ordered, named float32
/// weight tensors.
struct Checkpoint {
  ModelKind kind = ModelKind::kCnn;
  ModelConfig config;
  std::vector<std::pair<std::string, TensorPtr<float>>> tensors;
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"obs_len", c.obs_len},       {"pred_len", c.pred_len},
          {"embed_dim", c.embed_dim},   {"num_layers", c.num_layers},
          {"kernel_size", c.kernel_size}, {"decode_mode", to_string(c.decode_mode)},
          {"input_mode", to_string(c.input_mode)}, {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.obs_len = j.at("obs_len").get<std::size_t>();
  c.pred_len = j.at("pred_len").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.decode_mode = decode_mode_from_string(j.at("decode_mode").get<std::string>());
  c.input_mode = input_mode_from_string(j.at("input_mode").get<std::string>());
  c.seed = j.at("seed").get<std::uint32_t>();
  return c;
}

namespace detail {

constexpr char kCkptMagic[4] = {'T', 'C', 'N', 'N'};
constexpr std::uint8_t kCkptVersion = 1;

inline void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32_le(std::string& out, float v) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

inline float get_f32_le(const unsigned char* p) {
  return std::bit_cast<float>(get_u32_le(p));
}

}  // namespace detail

/// File layout: "TCNN", version byte 1, u32 little-endian manifest length,
/// UTF-8 JSON manifest {model_kind, config, tensors:[{name, shape}]}, then
/// every tensor's values as little-endian IEEE-754 32-bit floats in
/// manifest order.
inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    tensors.push_back({{"name", name}, {"shape", t->shape}});
  }
  const nlohmann::json manifest = {{"model_kind", to_string(ckpt.kind)},
                                   {"config", config_to_json(ckpt.config)},
                                   {"tensors", tensors}};
  const std::string manifest_str = manifest.dump();

  std::string out;
  out.append(detail::kCkptMagic, 4);
  out.push_back(static_cast<char>(detail::kCkptVersion));
  detail::put_u32_le(out, static_cast<std::uint32_t>(manifest_str.size()));
  out += manifest_str;
  for (const auto& [name, t] : ckpt.tensors) {
    for (float v : t->data) detail::put_f32_le(out, v);
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 9 || std::memcmp(bytes.data(), detail::kCkptMagic, 4) != 0) {
    throw std::runtime_error(origin + ": not a checkpoint file (bad magic)");
  }
  if (p[4] != detail::kCkptVersion) {
    throw std::runtime_error(origin + ": unsupported checkpoint version " +
                             std::to_string(static_cast<int>(p[4])));
  }
  const std::uint32_t manifest_len = detail::get_u32_le(p + 5);
  if (bytes.size() < 9 + static_cast<std::size_t>(manifest_len)) {
    throw std::runtime_error(origin + ": checkpoint truncated inside manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(9, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(origin + ": invalid checkpoint manifest: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.kind = model_kind_from_string(manifest.at("model_kind").get<std::string>());
    ckpt.config = config_from_json(manifest.at("config"));
    std::size_t offset = 9 + manifest_len;
    for (const auto& entry : manifest.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
      auto t = make_tensor<float>(shape);
      const std::size_t nbytes = t->numel() * 4;
      if (offset + nbytes > bytes.size()) {
        throw std::runtime_error(origin + ": checkpoint truncated, missing weight bytes for '" +
                                 name + "'");
      }
      for (std::size_t i = 0; i < t->numel(); ++i) {
        t->data[i] = detail::get_f32_le(p + offset + i * 4);
      }
      offset += nbytes;
      ckpt.tensors.emplace_back(name, std::move(t));
    }
    if (offset != bytes.size()) {
      throw std::runtime_error(origin + ": checkpoint has " +
                               std::to_string(bytes.size() - offset) + " trailing bytes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(origin + ": invalid checkpoint manifest: " + e.what());
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + file.string());
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint: " + file.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + file.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes, file.string());
}

namespace detail {

template <typename Model>
Checkpoint checkpoint_from_model(const Model& m, ModelKind kind) {
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.config = m.config;
  for (const auto& [name, t] : m.named_params()) {
    auto copy = make_tensor<float>(t->shape);
    copy->data = t->data;
    ckpt.tensors.emplace_back(name, std::move(copy));
  }
  return ckpt;
}

template <typename Model>
void restore_model_weights(Model& m, const Checkpoint& ckpt) {
  const auto named = m.named_params();
  if (named.size() != ckpt.tensors.size()) {
    throw std::runtime_error("checkpoint/model mismatch: expected " +
                             std::to_string(named.size()) + " tensors, found " +
                             std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [want_name, param] = named[i];
    const auto& [have_name, stored] = ckpt.tensors[i];
    if (want_name != have_name || param->shape != stored->shape) {
      throw std::runtime_error("checkpoint/model mismatch at tensor '" + have_name +
                               "' (expected '" + want_name + "' " + shape_str(param->shape) +
                               ", found " + shape_str(stored->shape) + ")");
    }
    param->data = stored->data;
  }
}

}  // namespace detail

inline Checkpoint make_checkpoint(const TrajCnn<float>& m) {
  return detail::checkpoint_from_model(m, ModelKind::kCnn);
}

inline Checkpoint make_checkpoint(const LstmModel<float>& m) {
  return detail::checkpoint_from_model(m, ModelKind::kLstm);
}

inline TrajCnn<float> cnn_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::kCnn) {
    throw std::runtime_error("checkpoint holds a " + std::string(to_string(ckpt.kind)) +
                             " model, expected cnn");
  }
  auto m = TrajCnn<float>::build(ckpt.config);
  detail::restore_model_weights(m, ckpt);
  return m;
}

inline LstmModel<float> lstm_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::kLstm) {
    throw std::runtime_error("checkpoint holds a " + std::string(to_string(ckpt.kind)) +
                             " model, expected lstm");
  }
  auto m = LstmModel<float>::build(ckpt.config);
  detail::restore_model_weights(m, ckpt);
  return m;
}

}  // namespace trajcnn
