#include "ccml/dsp/mel_cache.hpp"

#include <cmath>
#include <cstring>

#include "ccml/error.hpp"
#include "ccml/util/hash.hpp"
#include "ccml/util/json_file.hpp"

namespace ccml::dsp {
namespace {

constexpr char kMagic[4] = {'C', 'C', 'M', 'S'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_mel(const MelSpectrogram& mel) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * mel.values.data.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kMelCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(mel.n_mels()));
  put_u32(out, static_cast<std::uint32_t>(mel.n_frames()));
  for (float v : mel.values.data) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, sizeof raw);
    put_u32(out, raw);
  }
  return out;
}

MelSpectrogram decode_mel(std::span<const std::uint8_t> bytes, const DspConfig& cfg) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CacheError("bad mel cache magic");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kMelCacheVersion) {
    throw CacheError("unsupported mel cache version " + std::to_string(version));
  }
  const std::size_t rows = get_u32(bytes.data() + 8);
  const std::size_t cols = get_u32(bytes.data() + 12);
  if (bytes.size() != kHeaderBytes + 4 * rows * cols) throw CacheError("mel cache size mismatch");
  MelSpectrogram mel;
  mel.values = Array2D(rows, cols);
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::size_t i = 0; i < rows * cols; ++i, p += 4) {
    const std::uint32_t raw = get_u32(p);
    std::memcpy(&mel.values.data[i], &raw, sizeof raw);
  }
  mel.frame_rate = cfg.frame_rate();
  mel.floor_value = static_cast<float>(std::log(cfg.log_floor));
  return mel;
}

std::string mel_cache_key(std::span<const std::uint8_t> audio_bytes, const DspConfig& cfg) {
  return sha1_hex(audio_bytes) + "-" + sha1_hex(cfg.canonical()).substr(0, 16);
}

MelCache::MelCache(std::filesystem::path root, DspConfig cfg)
    : root_(std::move(root)), cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::filesystem::path MelCache::entry_path(const std::string& key) const {
  return root_ / (key + ".ccms");
}

MelCache::Lookup MelCache::get_or_compute(const std::filesystem::path& audio_path) const {
  std::vector<std::uint8_t> audio;
  try {
    audio = read_binary_file(audio_path);
  } catch (const std::exception& e) {
    throw InvalidAudio(e.what());
  }
  const auto path = entry_path(mel_cache_key(audio, cfg_));
  if (std::filesystem::exists(path)) {
    try {
      return Lookup{decode_mel(read_binary_file(path), cfg_), false};
    } catch (const std::exception&) {
      // Unreadable entry: fall through and recompute.
    }
  }
  Lookup result{log_mel(decode_wav(audio), cfg_), true};
  write_file_atomic(path, encode_mel(result.mel));
  return result;
}

}  // namespace ccml::dsp
