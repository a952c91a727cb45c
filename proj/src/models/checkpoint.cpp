#include "ccml/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <set>

#include "ccml/error.hpp"
#include "ccml/util/hash.hpp"

namespace ccml::models {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'M', 'L'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

void put_floats(std::vector<std::uint8_t>& out, const std::vector<float>& v) {
  for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::vector<std::uint8_t> tensor_bytes(const ModelCheckpoint& c) {
  std::vector<std::uint8_t> out;
  for (const auto& t : c.tensors) put_floats(out, t.data);
  return out;
}

[[noreturn]] void fail(const std::string& origin, const std::string& field, const std::string& msg) {
  throw CheckpointError(origin + ": field '" + field + "': " + msg);
}

}  // namespace

Json Provenance::to_json() const {
  return {{"source_dataset_id", source_dataset_id},
          {"epochs_trained", epochs_trained},
          {"content_hash", content_hash},
          {"experiment_id", experiment_id}};
}

Provenance Provenance::from_json(const Json& j) {
  Provenance p;
  try {
    p.source_dataset_id = j.at("source_dataset_id").get<std::string>();
    p.epochs_trained = j.at("epochs_trained").get<std::size_t>();
    p.content_hash = j.at("content_hash").get<std::string>();
    p.experiment_id = j.value("experiment_id", std::string{});
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("field 'provenance': ") + e.what());
  }
  return p;
}

const NamedTensor& ModelCheckpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw CheckpointError("field 'tensors': no tensor named '" + name + "'");
}

std::string ModelCheckpoint::content_hash() const { return git_blob_hash(tensor_bytes(*this)); }

template <typename T>
ModelCheckpoint capture(const Model<T>& model, std::vector<std::string> vocabulary, Provenance provenance) {
  ModelCheckpoint c{model.config(), std::move(vocabulary), std::move(provenance), {}};
  for (const auto& e : model.params().entries()) {
    const auto& v = e.tensor.values();
    c.tensors.push_back({e.spec.name, e.spec.shape, std::vector<float>(v.begin(), v.end())});
  }
  c.provenance.content_hash = c.content_hash();
  return c;
}

void verify_manifest(const ModelCheckpoint& ckpt) {
  std::vector<ParamSpec> specs;
  try {
    specs = describe(ckpt.config);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("field 'config': ") + e.what());
  }
  if (ckpt.config.n_tags != ckpt.vocabulary.size()) {
    throw CheckpointError("field 'vocabulary': " + std::to_string(ckpt.vocabulary.size()) + " tags but config.n_tags = " +
                          std::to_string(ckpt.config.n_tags));
  }
  if (specs.size() != ckpt.tensors.size()) {
    throw CheckpointError("field 'tensors': " + std::to_string(ckpt.tensors.size()) + " entries, architecture has " +
                          std::to_string(specs.size()));
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    if (!seen.insert(t.name).second) throw CheckpointError("field 'tensors': duplicate name '" + t.name + "'");
    if (t.name != specs[i].name) {
      throw CheckpointError("field 'tensors[" + std::to_string(i) + "].name': expected '" + specs[i].name + "', got '" +
                            t.name + "'");
    }
    if (!(t.shape == specs[i].shape)) {
      throw CheckpointError("field 'tensors[" + std::to_string(i) + "].shape': " + t.name + " expected " +
                            specs[i].shape.str() + ", got " + t.shape.str());
    }
    if (t.data.size() != t.shape.numel()) {
      throw CheckpointError("field 'tensors[" + std::to_string(i) + "].data': size does not match shape");
    }
  }
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt) {
  verify_manifest(ckpt);
  Json header;
  header["config"] = ckpt.config.to_json();
  header["vocabulary"] = ckpt.vocabulary;
  header["provenance"] = ckpt.provenance.to_json();
  Json manifest = Json::array();
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    manifest.push_back({{"name", t.name}, {"shape", t.shape.dims()}, {"offset", offset}});
    offset += t.data.size() * sizeof(float);
  }
  header["tensors"] = manifest;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& t : ckpt.tensors) put_floats(out, t.data);
  return out;
}

ModelCheckpoint parse_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 12) fail(origin, "magic", "file too short for a header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) fail(origin, "magic", "not a checkpoint file");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) fail(origin, "version", "unsupported version " + std::to_string(version));
  const std::uint32_t hlen = get_u32(bytes.data() + 8);
  if (bytes.size() - 12 < hlen) fail(origin, "header_length", "header runs past end of file (truncated?)");

  Json h;
  try {
    h = Json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
  } catch (const Json::exception& e) {
    fail(origin, "header", e.what());
  }
  if (!h.is_object()) fail(origin, "header", "not a JSON object");

  ModelCheckpoint c;
  if (!h.contains("config")) fail(origin, "config", "missing");
  try {
    c.config = ModelConfig::from_json(h["config"]);
  } catch (const ConfigError& e) {
    fail(origin, "config", e.what());
  }
  try {
    c.vocabulary = h.at("vocabulary").get<std::vector<std::string>>();
  } catch (const Json::exception&) {
    fail(origin, "vocabulary", "missing or not a list of strings");
  }
  if (!h.contains("provenance")) fail(origin, "provenance", "missing");
  c.provenance = Provenance::from_json(h["provenance"]);
  if (!h.contains("tensors") || !h["tensors"].is_array()) fail(origin, "tensors", "missing or not an array");

  const std::uint8_t* data = bytes.data() + 12 + hlen;
  const std::size_t data_len = bytes.size() - 12 - hlen;
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < h["tensors"].size(); ++i) {
    const Json& e = h["tensors"][i];
    const std::string where = "tensors[" + std::to_string(i) + "]";
    NamedTensor t;
    std::size_t offset = 0;
    try {
      t.name = e.at("name").get<std::string>();
      t.shape = nn::Shape(e.at("shape").get<std::vector<std::size_t>>());
      offset = e.at("offset").get<std::size_t>();
    } catch (const Json::exception&) {
      fail(origin, where, "needs name, shape and offset");
    }
    if (offset != expected_offset) fail(origin, where + ".offset", "tensors are not contiguous in manifest order");
    const std::size_t n = t.shape.numel();
    if (offset + n * 4 > data_len) fail(origin, where + ".data", "tensor '" + t.name + "' runs past end of file (truncated?)");
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) t.data[k] = std::bit_cast<float>(get_u32(data + offset + 4 * k));
    expected_offset = offset + n * 4;
    c.tensors.push_back(std::move(t));
  }
  if (expected_offset != data_len) fail(origin, "tensors", "trailing bytes after the last tensor");
  verify_manifest(c);
  if (c.content_hash() != c.provenance.content_hash) {
    fail(origin, "provenance.content_hash", "does not match the tensor data");
  }
  return c;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  write_file_atomic(path, std::span<const std::uint8_t>(bytes));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_binary_file(path);
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": field 'file': " + e.what());
  }
  return parse_checkpoint(bytes, path.string());
}

template <typename T>
std::vector<std::string> import_weights(Model<T>& model, const ModelCheckpoint& ckpt,
                                        const std::function<bool(const std::string&)>& select,
                                        const std::function<std::string(const std::string&)>& rename) {
  std::vector<std::string> written;
  auto& store = model.params();
  for (const auto& t : ckpt.tensors) {
    if (select && !select(t.name)) continue;
    const std::string target = rename ? rename(t.name) : t.name;
    if (!store.contains(target)) continue;
    auto& dst = store[target];
    if (!(dst.shape() == t.shape)) {
      throw CheckpointError("field 'tensors': '" + t.name + "' has shape " + t.shape.str() + ", model expects " +
                            dst.shape().str());
    }
    auto out = dst.data();
    for (std::size_t i = 0; i < t.data.size(); ++i) out[i] = static_cast<T>(t.data[i]);
    written.push_back(target);
  }
  return written;
}

template <typename T>
std::unique_ptr<Model<T>> instantiate(const ModelCheckpoint& ckpt) {
  verify_manifest(ckpt);
  auto m = build_model<T>(ckpt.config, 0);
  import_weights(*m, ckpt);
  return m;
}

#define CCML_CKPT_INST(T)                                                                                      \
  template ModelCheckpoint capture(const Model<T>&, std::vector<std::string>, Provenance);                   \
  template std::unique_ptr<Model<T>> instantiate(const ModelCheckpoint&);                                    \
  template std::vector<std::string> import_weights(Model<T>&, const ModelCheckpoint&,                         \
                                                   const std::function<bool(const std::string&)>&,           \
                                                   const std::function<std::string(const std::string&)>&);
CCML_CKPT_INST(float)
CCML_CKPT_INST(double)

}  // namespace ccml::models
