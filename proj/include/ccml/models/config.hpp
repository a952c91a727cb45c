#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ccml/dsp/spectrogram.hpp"
#include "ccml/util/json_file.hpp"

namespace ccml::models {

enum class Arch { VggIsh, Musicnn, Ast };

std::string_view arch_name(Arch a) noexcept;
/// Accepts "vggish", "musicnn", "ast" (case-insensitive). ConfigError otherwise.
Arch parse_arch(std::string_view name);

struct VggConfig {
  std::size_t n_conv_layers = 7;
  std::vector<std::size_t> channels{128, 128, 256, 256, 256, 256, 512};
  std::size_t dense_dim = 512;
  double dropout = 0.5;
};

struct MusicnnConfig {
  std::vector<double> vertical_heights{0.4, 0.7};  // fractions of n_mels
  std::size_t vertical_width = 7;
  std::size_t vertical_channels = 128;  // per branch
  std::vector<std::size_t> horizontal_widths{32, 64, 128};
  std::size_t horizontal_channels = 32;  // per branch
  std::size_t midend_channels = 64;
  std::size_t midend_layers = 3;
  std::size_t midend_kernel = 7;
  std::size_t dense_dim = 200;
  double dropout = 0.5;
};

struct AstConfig {
  std::size_t patch = 16;
  std::size_t patch_stride = 16;  // < patch gives overlapping patches
  std::size_t embed_dim = 768;
  std::size_t n_layers = 12;
  std::size_t n_heads = 12;
  std::size_t mlp_ratio = 4;
};

/// One configuration type for every architecture; only the block matching
/// `arch` is used. Widths are multiplied by `width_scale` (see scaled()).
struct ModelConfig {
  Arch arch = Arch::VggIsh;
  std::size_t n_mels = 128;
  dsp::ChunkSpec chunk{3.69, 229};
  std::size_t n_tags = 50;
  double width_scale = 1.0;
  VggConfig vggish;
  MusicnnConfig musicnn;
  AstConfig ast;

  /// Full-scale defaults, with the architecture's chunk length
  /// (VGG-ish 3.69 s, Musicnn 3 s, AST 8 s at 16 kHz / hop 256).
  static ModelConfig full(Arch arch, std::size_t n_tags);
  /// Same topology and layer names as full(), widths scaled by 1/16,
  /// chunk length chosen by the caller.
  static ModelConfig desk(Arch arch, std::size_t n_tags, const dsp::ChunkSpec& chunk);

  /// max(1, round(width * width_scale)).
  std::size_t scaled(std::size_t width) const;
  /// Scaled embedding width, rounded to a multiple of n_heads.
  std::size_t ast_embed_dim() const;
  std::vector<std::size_t> vgg_channels() const;
  /// Per-layer (kh, kw) pooling windows: 2x2 while both axes allow it, else
  /// 2x1 (frequency first) or 1x2. ConfigError when neither axis can shrink.
  std::vector<std::pair<std::size_t, std::size_t>> vgg_pool_schedule() const;
  std::vector<std::size_t> musicnn_vertical_heights() const;
  /// Patch grid (frequency rows, time columns).
  std::pair<std::size_t, std::size_t> ast_grid() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  Json to_json() const;
  static ModelConfig from_json(const Json& j);

  friend bool operator==(const ModelConfig& a, const ModelConfig& b) { return a.to_json() == b.to_json(); }
};

}  // namespace ccml::models
