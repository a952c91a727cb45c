#include "ccml/models/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "ccml/error.hpp"

namespace ccml::models {

std::string_view arch_name(Arch a) noexcept {
  switch (a) {
    case Arch::VggIsh: return "vggish";
    case Arch::Musicnn: return "musicnn";
    case Arch::Ast: return "ast";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "vgg-ish") lower = "vggish";
  for (Arch a : {Arch::VggIsh, Arch::Musicnn, Arch::Ast}) {
    if (arch_name(a) == lower) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

ModelConfig ModelConfig::full(Arch arch, std::size_t n_tags) {
  ModelConfig c;
  c.arch = arch;
  c.n_tags = n_tags;
  const dsp::DspConfig dsp;
  const double seconds = arch == Arch::VggIsh ? 3.69 : arch == Arch::Musicnn ? 3.0 : 8.0;
  c.chunk = dsp::ChunkSpec::for_duration(seconds, dsp);
  return c;
}

ModelConfig ModelConfig::desk(Arch arch, std::size_t n_tags, const dsp::ChunkSpec& chunk) {
  ModelConfig c = full(arch, n_tags);
  c.chunk = chunk;
  c.width_scale = 1.0 / 16.0;
  return c;
}

std::size_t ModelConfig::scaled(std::size_t width) const {
  const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(width) * width_scale));
  return std::max<std::size_t>(1, v);
}

std::size_t ModelConfig::ast_embed_dim() const {
  const std::size_t h = std::max<std::size_t>(1, ast.n_heads);
  const double per_head = static_cast<double>(ast.embed_dim) * width_scale / static_cast<double>(h);
  return h * std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(per_head)));
}

std::vector<std::size_t> ModelConfig::vgg_channels() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < vggish.n_conv_layers; ++i) out.push_back(scaled(vggish.channels.at(i)));
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> ModelConfig::vgg_pool_schedule() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t f = n_mels, t = chunk.n_frames;
  for (std::size_t i = 0; i < vggish.n_conv_layers; ++i) {
    std::pair<std::size_t, std::size_t> k;
    if (f >= 2 && t >= 2) k = {2, 2};
    else if (f >= 2) k = {2, 1};
    else if (t >= 2) k = {1, 2};
    else {
      throw ConfigError("vggish: input " + std::to_string(n_mels) + "x" + std::to_string(chunk.n_frames) +
                        " is too small for " + std::to_string(vggish.n_conv_layers) + " pooling layers (layer " +
                        std::to_string(i + 1) + ")");
    }
    f /= k.first;
    t /= k.second;
    out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> ModelConfig::musicnn_vertical_heights() const {
  std::vector<std::size_t> out;
  for (double r : musicnn.vertical_heights) {
    const auto h = static_cast<std::size_t>(std::floor(r * static_cast<double>(n_mels)));
    out.push_back(std::clamp<std::size_t>(h, 1, n_mels));
  }
  return out;
}

std::pair<std::size_t, std::size_t> ModelConfig::ast_grid() const {
  if (n_mels < ast.patch || chunk.n_frames < ast.patch) return {0, 0};
  return {(n_mels - ast.patch) / ast.patch_stride + 1, (chunk.n_frames - ast.patch) / ast.patch_stride + 1};
}

void ModelConfig::validate() const {
  if (n_tags < 1) throw ConfigError("n_tags must be >= 1");
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (chunk.n_frames < 1) throw ConfigError("chunk.n_frames must be >= 1");
  if (!(width_scale > 0.0 && width_scale <= 1.0)) throw ConfigError("width_scale must be in (0, 1]");
  switch (arch) {
    case Arch::VggIsh:
      if (vggish.n_conv_layers < 1) throw ConfigError("vggish.n_conv_layers must be >= 1");
      if (vggish.channels.size() < vggish.n_conv_layers) {
        throw ConfigError("vggish.channels lists fewer widths than n_conv_layers");
      }
      if (!(vggish.dropout >= 0.0 && vggish.dropout < 1.0)) throw ConfigError("vggish.dropout must be in [0,1)");
      vgg_pool_schedule();
      break;
    case Arch::Musicnn:
      if (musicnn.vertical_heights.empty() && musicnn.horizontal_widths.empty()) {
        throw ConfigError("musicnn: front-end needs at least one filter shape");
      }
      for (double r : musicnn.vertical_heights) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("musicnn.vertical_heights must be fractions in (0,1]");
      }
      for (auto w : musicnn.horizontal_widths) {
        if (w < 1) throw ConfigError("musicnn.horizontal_widths must be >= 1");
      }
      if (musicnn.vertical_width < 1 || musicnn.midend_kernel < 1) throw ConfigError("musicnn kernel widths must be >= 1");
      if (!(musicnn.dropout >= 0.0 && musicnn.dropout < 1.0)) throw ConfigError("musicnn.dropout must be in [0,1)");
      break;
    case Arch::Ast:
      if (ast.patch < 1 || ast.patch_stride < 1) throw ConfigError("ast.patch and ast.patch_stride must be >= 1");
      if (ast.n_heads < 1 || ast.n_layers < 1) throw ConfigError("ast.n_heads and ast.n_layers must be >= 1");
      if (ast.embed_dim % ast.n_heads != 0) throw ConfigError("ast.embed_dim must be divisible by ast.n_heads");
      if (chunk.n_frames < ast.patch) {
        throw ConfigError("ast: chunk of " + std::to_string(chunk.n_frames) + " frames is shorter than one " +
                          std::to_string(ast.patch) + "-frame patch");
      }
      if (n_mels < ast.patch) throw ConfigError("ast: n_mels smaller than the patch height");
      break;
  }
}

Json ModelConfig::to_json() const {
  Json j;
  j["arch"] = arch_name(arch);
  j["n_mels"] = n_mels;
  j["chunk"] = {{"duration_sec", chunk.duration_sec}, {"n_frames", chunk.n_frames}};
  j["n_tags"] = n_tags;
  j["width_scale"] = width_scale;
  switch (arch) {
    case Arch::VggIsh: {
      j["vggish"] = {{"n_conv_layers", vggish.n_conv_layers},
                     {"channels", vggish.channels},
                     {"dense_dim", vggish.dense_dim},
                     {"dropout", vggish.dropout}};
      Json pools = Json::array();
      try {
        for (auto [kh, kw] : vgg_pool_schedule()) pools.push_back({kh, kw});
      } catch (const ConfigError&) {
        pools = nullptr;
      }
      j["vggish"]["pool_schedule"] = pools;  // derived; recorded for readers
      break;
    }
    case Arch::Musicnn:
      j["musicnn"] = {{"vertical_heights", musicnn.vertical_heights},
                      {"vertical_width", musicnn.vertical_width},
                      {"vertical_channels", musicnn.vertical_channels},
                      {"horizontal_widths", musicnn.horizontal_widths},
                      {"horizontal_channels", musicnn.horizontal_channels},
                      {"midend_channels", musicnn.midend_channels},
                      {"midend_layers", musicnn.midend_layers},
                      {"midend_kernel", musicnn.midend_kernel},
                      {"dense_dim", musicnn.dense_dim},
                      {"dropout", musicnn.dropout}};
      break;
    case Arch::Ast:
      j["ast"] = {{"patch", ast.patch},         {"patch_stride", ast.patch_stride}, {"embed_dim", ast.embed_dim},
                  {"n_layers", ast.n_layers},   {"n_heads", ast.n_heads},           {"mlp_ratio", ast.mlp_ratio}};
      break;
  }
  return j;
}

namespace {

template <typename V>
V field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("model config: missing field '" + where + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const Json::exception&) {
    throw ConfigError("model config: field '" + where + key + "' has the wrong type");
  }
}

}  // namespace

ModelConfig ModelConfig::from_json(const Json& j) {
  ModelConfig c;
  c.arch = parse_arch(field<std::string>(j, "arch", ""));
  c.n_mels = field<std::size_t>(j, "n_mels", "");
  const Json chunk = field<Json>(j, "chunk", "");
  c.chunk.duration_sec = field<double>(chunk, "duration_sec", "chunk.");
  c.chunk.n_frames = field<std::size_t>(chunk, "n_frames", "chunk.");
  c.n_tags = field<std::size_t>(j, "n_tags", "");
  c.width_scale = field<double>(j, "width_scale", "");
  switch (c.arch) {
    case Arch::VggIsh: {
      const Json v = field<Json>(j, "vggish", "");
      c.vggish.n_conv_layers = field<std::size_t>(v, "n_conv_layers", "vggish.");
      c.vggish.channels = field<std::vector<std::size_t>>(v, "channels", "vggish.");
      c.vggish.dense_dim = field<std::size_t>(v, "dense_dim", "vggish.");
      c.vggish.dropout = field<double>(v, "dropout", "vggish.");
      break;
    }
    case Arch::Musicnn: {
      const Json m = field<Json>(j, "musicnn", "");
      c.musicnn.vertical_heights = field<std::vector<double>>(m, "vertical_heights", "musicnn.");
      c.musicnn.vertical_width = field<std::size_t>(m, "vertical_width", "musicnn.");
      c.musicnn.vertical_channels = field<std::size_t>(m, "vertical_channels", "musicnn.");
      c.musicnn.horizontal_widths = field<std::vector<std::size_t>>(m, "horizontal_widths", "musicnn.");
      c.musicnn.horizontal_channels = field<std::size_t>(m, "horizontal_channels", "musicnn.");
      c.musicnn.midend_channels = field<std::size_t>(m, "midend_channels", "musicnn.");
      c.musicnn.midend_layers = field<std::size_t>(m, "midend_layers", "musicnn.");
      c.musicnn.midend_kernel = field<std::size_t>(m, "midend_kernel", "musicnn.");
      c.musicnn.dense_dim = field<std::size_t>(m, "dense_dim", "musicnn.");
      c.musicnn.dropout = field<double>(m, "dropout", "musicnn.");
      break;
    }
    case Arch::Ast: {
      const Json a = field<Json>(j, "ast", "");
      c.ast.patch = field<std::size_t>(a, "patch", "ast.");
      c.ast.patch_stride = field<std::size_t>(a, "patch_stride", "ast.");
      c.ast.embed_dim = field<std::size_t>(a, "embed_dim", "ast.");
      c.ast.n_layers = field<std::size_t>(a, "n_layers", "ast.");
      c.ast.n_heads = field<std::size_t>(a, "n_heads", "ast.");
      c.ast.mlp_ratio = field<std::size_t>(a, "mlp_ratio", "ast.");
      break;
    }
  }
  c.validate();
  return c;
}

}  // namespace ccml::models
