#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "ccml/dsp/audio.hpp"
#include "ccml/error.hpp"
#include "ccml/util/json_file.hpp"

namespace ccml::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.sample_rate <= 0) {
    throw InvalidAudio("sample rate must be positive, got " + std::to_string(clip.sample_rate));
  }
  if (clip.samples.empty()) throw InvalidAudio("clip has no samples");
  for (float s : clip.samples) {
    if (!std::isfinite(s)) throw InvalidAudio("clip contains a non-finite sample");
  }
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw InvalidAudio("not a RIFF/WAVE stream");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Tolerate a data chunk whose declared size overruns the file (common
      // with truncated streaming writers) by taking what is present.
      if (std::memcmp(chunk, "data", 4) != 0) throw InvalidAudio("truncated chunk in WAV header");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw InvalidAudio("fmt chunk too small");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) format = le16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }

  if (channels == 0 || rate == 0) throw InvalidAudio("missing or invalid fmt chunk");
  if (!data) throw InvalidAudio("missing data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool pcm32 = format == kFormatPcm && bits == 32;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !pcm32 && !f32) {
    throw InvalidAudio("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                       std::to_string(bits) + " bits)");
  }

  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
  const std::size_t n_frames = data_size / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const std::uint8_t* p = data + i * frame_bytes + ch * (bits / 8);
      if (pcm16) {
        acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else if (pcm32) {
        acc += static_cast<std::int32_t>(le32(p)) / 2147483648.0;
      } else {
        float v;
        const std::uint32_t raw = le32(p);
        std::memcpy(&v, &raw, sizeof v);
        acc += v;
      }
    }
    clip.samples[i] = static_cast<float>(acc / channels);
  }
  validate(clip);
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_binary_file(path);
  } catch (const std::exception& e) {
    throw InvalidAudio(e.what());
  }
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  put_tag(out, "RIFF");
  put32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  put_tag(out, "data");
  put32(out, 2 * n);
  for (float s : clip.samples) {
    const double clipped = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const long q = std::lround(clipped * 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip) {
  write_file_atomic(path, encode_wav_pcm16(clip));
}

}  // namespace ccml::dsp
