#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ccml::dsp {

/// Mono PCM in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration_sec() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Throws InvalidAudio unless the clip is non-empty, finite and has a
/// positive sample rate.
void validate(const AudioClip& clip);

/// Decodes a RIFF/WAVE byte stream: 16- or 32-bit integer PCM, or 32-bit
/// IEEE float. Multi-channel input is averaged to mono.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav(const std::filesystem::path& path);

/// 16-bit PCM mono. Samples are clipped to [-1, 1].
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);
void write_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace ccml::dsp
