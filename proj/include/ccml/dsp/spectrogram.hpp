#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ccml/dsp/audio.hpp"
#include "ccml/util/json_file.hpp"

namespace ccml::dsp {

/// Dense row-major 2-D float array.
struct Array2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Array2D() = default;
  Array2D(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Array2D&, const Array2D&) = default;
};

enum class MelScale {
  Slaney,  // linear below 1 kHz, logarithmic above
  Htk,     // 2595 * log10(1 + f / 700)
};

struct DspConfig {
  int target_sample_rate = 16000;
  std::size_t fft_size = 512;
  std::size_t hop_size = 256;
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-10;
  MelScale mel_scale = MelScale::Slaney;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;

  std::size_t n_bins() const noexcept { return fft_size / 2 + 1; }
  double frame_rate() const noexcept { return static_cast<double>(target_sample_rate) / hop_size; }

  /// Stable textual form; hashed for mel-cache keys.
  std::string canonical() const;

  Json to_json() const;
  /// Missing fields keep their defaults; ConfigError on bad values.
  static DspConfig from_json(const Json& j);

  friend bool operator==(const DspConfig&, const DspConfig&) = default;
};

double hz_to_mel(double hz, MelScale scale);
double mel_to_hz(double mel, MelScale scale);

/// 1 + floor((n_samples - fft_size) / hop_size), or 0 when the input is
/// shorter than one FFT window.
std::size_t frame_count(std::size_t n_samples, const DspConfig& cfg) noexcept;

/// Log-compressed mel energies, [n_mels x n_frames].
struct MelSpectrogram {
  Array2D values;
  double frame_rate = 0.0;
  float floor_value = 0.0f;  // ln(log_floor): the value of a silent cell

  std::size_t n_mels() const noexcept { return values.rows; }
  std::size_t n_frames() const noexcept { return values.cols; }

  /// Keeps the first `n` frames (no-op when already shorter).
  void truncate_frames(std::size_t n);
};

/// Power of the one-sided Hann-windowed spectrum, [fft_size/2+1 x n_frames].
/// Frame t covers samples [t*hop, t*hop + fft_size); no centre padding.
/// Throws TooShort when the clip is shorter than one window and InvalidAudio
/// when its rate differs from cfg.target_sample_rate.
Array2D stft_power(const AudioClip& clip, const DspConfig& cfg);

/// Triangular filters evenly spaced on the configured mel scale between
/// f_min and f_max, peak weight 1, [n_mels x fft_size/2+1]. Throws
/// DegenerateFilterbank if any filter covers no FFT bin.
Array2D mel_filterbank(const DspConfig& cfg);

/// ln(mel_filterbank * stft_power + log_floor), resampling first if needed.
MelSpectrogram log_mel(const AudioClip& clip, const DspConfig& cfg);

/// Fixed-length slice of a mel spectrogram consumed by one model.
struct ChunkSpec {
  double duration_sec = 0.0;
  std::size_t n_frames = 0;

  /// n_frames = 1 + floor((round(duration * sr) - fft_size) / hop_size).
  static ChunkSpec for_duration(double duration_sec, const DspConfig& cfg);

  friend bool operator==(const ChunkSpec&, const ChunkSpec&) = default;
};

enum class ChunkMode { TrainRandom, EvalSequential };

/// TrainRandom: one chunk at a uniformly drawn offset (seeded).
/// EvalSequential: consecutive non-overlapping chunks; a trailing partial
/// chunk is dropped. Recordings shorter than one chunk yield a single chunk
/// right-padded with the floor value.
std::vector<Array2D> chunk(const ChunkSpec& spec, const MelSpectrogram& mel, ChunkMode mode,
                           std::uint64_t seed = 0);

/// The chunk starting at `offset` (padded with the floor value past the end).
Array2D chunk_at(const ChunkSpec& spec, const MelSpectrogram& mel, std::size_t offset);

/// Number of chunks EvalSequential produces.
std::size_t eval_chunk_count(const ChunkSpec& spec, std::size_t mel_frames) noexcept;

}  // namespace ccml::dsp
