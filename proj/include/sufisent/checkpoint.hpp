#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sufisent/model.hpp"
#include "sufisent/train.hpp"

namespace sufisent {

// Container layout:
//   bytes 0..7   magic "SUFICKPT"
//   u32          format version, little-endian
//   u64          manifest byte length, little-endian
//   manifest     JSON: configs, vocab, best accuracy, array directory
//                (name / shape / byte offset into the payload)
//   payload      raw little-endian doubles, concatenated in directory order
// Saving is canonical (sorted keys, fixed array order), so save -> load ->
// save reproduces the file byte for byte.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'U', 'F', 'I', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

struct Checkpoint {
  Model model;
  TrainConfig train_config;
  double best_val_acc = 0.0;
};

namespace detail {

struct NamedArray {
  std::string name;
  const NumArray* array;
};

inline std::vector<NamedArray> checkpoint_arrays(const Model& m) {
  std::vector<NamedArray> out;
  out.push_back({"embedding.table", &m.embeddings.table});
  auto add = [&](const std::string& prefix, const LstmParams& p) {
    out.push_back({prefix + ".wx", &p.wx});
    out.push_back({prefix + ".wh", &p.wh});
    out.push_back({prefix + ".b", &p.b});
  };
  add("encoder.fwd_prefix", m.encoder.fwd_prefix);
  if (m.encoder.fwd_suffix) add("encoder.fwd_suffix", *m.encoder.fwd_suffix);
  add("encoder.bwd_prefix", m.encoder.bwd_prefix);
  if (m.encoder.bwd_suffix) add("encoder.bwd_suffix", *m.encoder.bwd_suffix);
  out.push_back({"head.w1", &m.head.w1});
  out.push_back({"head.b1", &m.head.b1});
  out.push_back({"head.w2", &m.head.w2});
  out.push_back({"head.b2", &m.head.b2});
  out.push_back({"head.w_out", &m.head.w_out});
  out.push_back({"head.b_out", &m.head.b_out});
  return out;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_le(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
    throw DataError(path + ": truncated file");
  }
  return v;
}

}  // namespace detail

inline void checkpoint_save(const std::string& path, const Checkpoint& ckpt) {
  const Model& m = ckpt.model;
  std::vector<detail::NamedArray> arrays = detail::checkpoint_arrays(m);

  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["encoder"] = {{"variant", variant_name(m.encoder_config.variant)},
                         {"d", m.encoder_config.d},
                         {"e", m.encoder_config.e}};
  manifest["head"] = {{"hidden", m.head.hidden_dim()},
                      {"activation", activation_name(m.head.activation)}};
  manifest["train"] = {{"lr0", ckpt.train_config.lr0},
                       {"epoch_decay", ckpt.train_config.epoch_decay},
                       {"drop_decay", ckpt.train_config.drop_decay},
                       {"clip_norm", ckpt.train_config.clip_norm},
                       {"batch_size", ckpt.train_config.batch_size},
                       {"max_epochs", ckpt.train_config.max_epochs},
                       {"min_lr", ckpt.train_config.min_lr},
                       {"seed", ckpt.train_config.seed}};
  manifest["vocab"] = m.vocab.id_to_token;
  std::vector<int> pretrained(m.embeddings.pretrained.begin(), m.embeddings.pretrained.end());
  manifest["embedding"] = {{"trainable", m.embeddings.trainable}, {"pretrained", pretrained}};
  manifest["best_val_acc"] = ckpt.best_val_acc;

  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const detail::NamedArray& a : arrays) {
    dir.push_back({{"name", a.name}, {"shape", a.array->shape}, {"offset", offset}});
    offset += a.array->numel() * sizeof(double);
  }
  manifest["arrays"] = dir;

  std::string manifest_str = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_le<std::uint32_t>(out, kCheckpointVersion);
  detail::write_le<std::uint64_t>(out, manifest_str.size());
  out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
  for (const detail::NamedArray& a : arrays) {
    out.write(reinterpret_cast<const char*>(a.array->data.data()),
              static_cast<std::streamsize>(a.array->numel() * sizeof(double)));
  }
  if (!out) throw DataError("error writing " + path);
}

inline Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw DataError(path + ": not a checkpoint file");
  }
  std::uint32_t version = detail::read_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  std::uint64_t manifest_len = detail::read_le<std::uint64_t>(in, path);
  std::string manifest_str(manifest_len, '\0');
  if (!in.read(manifest_str.data(), static_cast<std::streamsize>(manifest_len))) {
    throw DataError(path + ": truncated manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_str);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad manifest: " + e.what());
  }
  if (manifest.at("version").get<std::uint32_t>() != version) {
    throw DataError(path + ": manifest version disagrees with header");
  }

  Checkpoint ckpt;
  Model& m = ckpt.model;
  m.encoder_config.variant = parse_variant(manifest.at("encoder").at("variant"));
  m.encoder_config.d = manifest.at("encoder").at("d").get<std::size_t>();
  m.encoder_config.e = manifest.at("encoder").at("e").get<std::size_t>();
  std::size_t head_hidden = manifest.at("head").at("hidden").get<std::size_t>();
  HeadActivation act = parse_activation(manifest.at("head").at("activation"));

  const nlohmann::json& tc = manifest.at("train");
  ckpt.train_config.lr0 = tc.at("lr0").get<double>();
  ckpt.train_config.epoch_decay = tc.at("epoch_decay").get<double>();
  ckpt.train_config.drop_decay = tc.at("drop_decay").get<double>();
  ckpt.train_config.clip_norm = tc.at("clip_norm").get<double>();
  ckpt.train_config.batch_size = tc.at("batch_size").get<std::size_t>();
  ckpt.train_config.max_epochs = tc.at("max_epochs").get<std::size_t>();
  ckpt.train_config.min_lr = tc.at("min_lr").get<double>();
  ckpt.train_config.seed = tc.at("seed").get<std::uint64_t>();
  ckpt.best_val_acc = manifest.at("best_val_acc").get<double>();

  m.vocab.id_to_token = manifest.at("vocab").get<std::vector<std::string>>();
  if (m.vocab.id_to_token.size() < 2 || m.vocab.id_to_token[0] != kPadToken ||
      m.vocab.id_to_token[1] != kUnkToken) {
    throw DataError(path + ": vocab is missing the reserved padding/unknown entries");
  }
  m.vocab.token_to_id.clear();
  for (std::size_t i = 0; i < m.vocab.id_to_token.size(); ++i) {
    m.vocab.token_to_id[m.vocab.id_to_token[i]] = static_cast<int>(i);
  }

  std::vector<int> pretrained =
      manifest.at("embedding").at("pretrained").get<std::vector<int>>();
  m.embeddings.pretrained.assign(pretrained.begin(), pretrained.end());
  m.embeddings.trainable = manifest.at("embedding").at("trainable").get<bool>();

  // expected shapes from the configs
  std::size_t d = m.encoder_config.d, e = m.encoder_config.e;
  std::size_t enc_dim = encoding_dim(m.encoder_config.variant, d);
  bool separate = uses_suffix(m.encoder_config.variant) && !is_tied(m.encoder_config.variant);
  std::vector<std::pair<std::string, Shape>> expected;
  expected.emplace_back("embedding.table", Shape{m.vocab.size(), e});
  auto add_lstm = [&](const std::string& prefix) {
    expected.emplace_back(prefix + ".wx", Shape{4 * d, e});
    expected.emplace_back(prefix + ".wh", Shape{4 * d, d});
    expected.emplace_back(prefix + ".b", Shape{4 * d});
  };
  add_lstm("encoder.fwd_prefix");
  if (separate) add_lstm("encoder.fwd_suffix");
  add_lstm("encoder.bwd_prefix");
  if (separate) add_lstm("encoder.bwd_suffix");
  expected.emplace_back("head.w1", Shape{4 * enc_dim, head_hidden});
  expected.emplace_back("head.b1", Shape{head_hidden});
  expected.emplace_back("head.w2", Shape{head_hidden, head_hidden});
  expected.emplace_back("head.b2", Shape{head_hidden});
  expected.emplace_back("head.w_out", Shape{head_hidden, 3});
  expected.emplace_back("head.b_out", Shape{3});

  const nlohmann::json& dir = manifest.at("arrays");
  if (dir.size() != expected.size()) {
    throw DataError(path + ": expected " + std::to_string(expected.size()) + " arrays, found " +
                    std::to_string(dir.size()));
  }
  std::vector<NumArray> loaded;
  std::uint64_t expect_offset = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const nlohmann::json& entry = dir[i];
    std::string name = entry.at("name").get<std::string>();
    Shape shape = entry.at("shape").get<Shape>();
    std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    if (name != expected[i].first) {
      throw DataError(path + ": array '" + name + "' where '" + expected[i].first +
                      "' was expected");
    }
    if (shape != expected[i].second) {
      throw DataError(path + ": array '" + name + "' has shape " + shape_str(shape) +
                      ", expected " + shape_str(expected[i].second));
    }
    if (offset != expect_offset) {
      throw DataError(path + ": array '" + name + "' at unexpected offset");
    }
    NumArray a(shape);
    if (!in.read(reinterpret_cast<char*>(a.data.data()),
                 static_cast<std::streamsize>(a.numel() * sizeof(double)))) {
      throw DataError(path + ": truncated payload at array '" + name + "'");
    }
    expect_offset += a.numel() * sizeof(double);
    loaded.push_back(std::move(a));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(path + ": trailing bytes after payload");
  }
  if (m.embeddings.pretrained.size() != m.vocab.size()) {
    throw DataError(path + ": embedding provenance length disagrees with vocab");
  }

  std::size_t k = 0;
  m.embeddings.table = std::move(loaded[k++]);
  auto take_lstm = [&]() {
    LstmParams p;
    p.wx = std::move(loaded[k++]);
    p.wh = std::move(loaded[k++]);
    p.b = std::move(loaded[k++]);
    return p;
  };
  m.encoder.fwd_prefix = take_lstm();
  if (separate) m.encoder.fwd_suffix = take_lstm();
  m.encoder.bwd_prefix = take_lstm();
  if (separate) m.encoder.bwd_suffix = take_lstm();
  m.head.w1 = std::move(loaded[k++]);
  m.head.b1 = std::move(loaded[k++]);
  m.head.w2 = std::move(loaded[k++]);
  m.head.b2 = std::move(loaded[k++]);
  m.head.w_out = std::move(loaded[k++]);
  m.head.b_out = std::move(loaded[k++]);
  m.head.activation = act;
  return ckpt;
}

}  // namespace sufisent
