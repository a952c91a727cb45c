#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ccml/dsp/spectrogram.hpp"

namespace ccml::dsp {

// On-disk layout: "CCMS", u32 version, u32 n_mels, u32 n_frames, then
// n_mels * n_frames little-endian IEEE-754 float32 values, row-major.
inline constexpr std::uint32_t kMelCacheVersion = 1;

std::vector<std::uint8_t> encode_mel(const MelSpectrogram& mel);

/// Throws CacheError on a bad magic, version or size. frame_rate and
/// floor_value are not stored; they come from the DspConfig.
MelSpectrogram decode_mel(std::span<const std::uint8_t> bytes, const DspConfig& cfg);

/// Cache key: content hash of the audio bytes combined with a hash of the
/// DSP configuration.
std::string mel_cache_key(std::span<const std::uint8_t> audio_bytes, const DspConfig& cfg);

class MelCache {
 public:
  MelCache(std::filesystem::path root, DspConfig cfg);

  const DspConfig& config() const noexcept { return cfg_; }
  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path entry_path(const std::string& key) const;

  struct Lookup {
    MelSpectrogram mel;
    bool computed = false;  // false: served from a valid cache entry
  };

  /// Returns the cached mel for the WAV at `audio_path`, computing and
  /// storing it on a miss or when the entry is unreadable. Safe to call
  /// concurrently; writes are atomic renames.
  Lookup get_or_compute(const std::filesystem::path& audio_path) const;

 private:
  std::filesystem::path root_;
  DspConfig cfg_;
};

}  // namespace ccml::dsp
