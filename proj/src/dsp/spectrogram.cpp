#include "ccml/dsp/spectrogram.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "ccml/dsp/resample.hpp"
#include "ccml/error.hpp"
#include "ccml/simd/kernels.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::dsp {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Slaney constants: 200/3 Hz per mel below 1 kHz, log steps of ln(6.4)/27 above.
constexpr double kSlaneyLinear = 200.0 / 3.0;
constexpr double kSlaneyBreakHz = 1000.0;
constexpr double kSlaneyBreakMel = kSlaneyBreakHz / kSlaneyLinear;
const double kSlaneyLogStep = std::log(6.4) / 27.0;

struct FftwBuffer {
  void operator()(void* p) const { fftwf_free(p); }
};

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are created once per size and shared.
class RealFft {
 public:
  static const RealFft& for_size(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::unique_ptr<RealFft>> plans;
    std::lock_guard lock(mu);
    auto& slot = plans[n];
    if (!slot) slot.reset(new RealFft(n));
    return *slot;
  }

  ~RealFft() { fftwf_destroy_plan(plan_); }

  // in: fftwf_malloc'd n floats; out: fftwf_malloc'd (n/2+1) complex values.
  void execute(float* in, fftwf_complex* out) const { fftwf_execute_dft_r2c(plan_, in, out); }

 private:
  explicit RealFft(std::size_t n) {
    std::unique_ptr<float, FftwBuffer> in(fftwf_alloc_real(n));
    std::unique_ptr<fftwf_complex, FftwBuffer> out(fftwf_alloc_complex(n / 2 + 1));
    plan_ = fftwf_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("fftw: planning failed");
  }

  fftwf_plan plan_ = nullptr;
};

std::vector<float> periodic_hann(std::size_t n) {
  std::vector<float> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
  }
  return w;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

void DspConfig::validate() const {
  if (target_sample_rate <= 0) throw ConfigError("target_sample_rate must be positive");
  if (fft_size < 2) throw ConfigError("fft_size must be at least 2");
  if (hop_size == 0 || hop_size > fft_size) throw ConfigError("hop_size must be in [1, fft_size]");
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (f_min < 0.0 || f_min >= f_max) throw ConfigError("require 0 <= f_min < f_max");
  if (f_max > target_sample_rate / 2.0) throw ConfigError("f_max exceeds the Nyquist frequency");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

std::string DspConfig::canonical() const {
  std::ostringstream ss;
  ss << "ccms-dsp-v1;sr=" << target_sample_rate << ";fft=" << fft_size << ";hop=" << hop_size
     << ";mels=" << n_mels << ";fmin=" << format_double(f_min) << ";fmax=" << format_double(f_max)
     << ";floor=" << format_double(log_floor)
     << ";scale=" << (mel_scale == MelScale::Slaney ? "slaney" : "htk");
  return ss.str();
}

Json DspConfig::to_json() const {
  return {{"target_sample_rate", target_sample_rate},
          {"fft_size", fft_size},
          {"hop_size", hop_size},
          {"n_mels", n_mels},
          {"f_min", f_min},
          {"f_max", f_max},
          {"log_floor", log_floor},
          {"mel_scale", mel_scale == MelScale::Slaney ? "slaney" : "htk"}};
}

DspConfig DspConfig::from_json(const Json& j) {
  DspConfig c;
  try {
    c.target_sample_rate = j.value("target_sample_rate", c.target_sample_rate);
    c.fft_size = j.value("fft_size", c.fft_size);
    c.hop_size = j.value("hop_size", c.hop_size);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.f_min = j.value("f_min", c.f_min);
    c.f_max = j.value("f_max", c.f_max);
    c.log_floor = j.value("log_floor", c.log_floor);
    const auto scale = j.value("mel_scale", std::string("slaney"));
    if (scale == "slaney") c.mel_scale = MelScale::Slaney;
    else if (scale == "htk") c.mel_scale = MelScale::Htk;
    else throw ConfigError("mel_scale must be 'slaney' or 'htk'");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("dsp config: ") + e.what());
  }
  c.validate();
  return c;
}

double hz_to_mel(double hz, MelScale scale) {
  if (scale == MelScale::Htk) return 2595.0 * std::log10(1.0 + hz / 700.0);
  if (hz < kSlaneyBreakHz) return hz / kSlaneyLinear;
  return kSlaneyBreakMel + std::log(hz / kSlaneyBreakHz) / kSlaneyLogStep;
}

double mel_to_hz(double mel, MelScale scale) {
  if (scale == MelScale::Htk) return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  if (mel < kSlaneyBreakMel) return mel * kSlaneyLinear;
  return kSlaneyBreakHz * std::exp((mel - kSlaneyBreakMel) * kSlaneyLogStep);
}

std::size_t frame_count(std::size_t n_samples, const DspConfig& cfg) noexcept {
  if (n_samples < cfg.fft_size) return 0;
  return 1 + (n_samples - cfg.fft_size) / cfg.hop_size;
}

void MelSpectrogram::truncate_frames(std::size_t n) {
  if (n >= values.cols) return;
  Array2D cut(values.rows, n);
  for (std::size_t r = 0; r < values.rows; ++r) {
    std::copy_n(values.data.begin() + static_cast<std::ptrdiff_t>(r * values.cols), n,
                cut.data.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  values = std::move(cut);
}

Array2D stft_power(const AudioClip& clip, const DspConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate != cfg.target_sample_rate) {
    throw InvalidAudio("stft_power expects " + std::to_string(cfg.target_sample_rate) +
                       " Hz input, got " + std::to_string(clip.sample_rate));
  }
  const std::size_t n = cfg.fft_size;
  const std::size_t frames = frame_count(clip.samples.size(), cfg);
  if (frames == 0) {
    throw TooShort("clip of " + std::to_string(clip.samples.size()) +
                   " samples is shorter than one FFT window (" + std::to_string(n) + ")");
  }
  const std::size_t bins = cfg.n_bins();
  const RealFft& fft = RealFft::for_size(n);
  const std::vector<float> window = periodic_hann(n);
  std::unique_ptr<float, FftwBuffer> in(fftwf_alloc_real(n));
  std::unique_ptr<fftwf_complex, FftwBuffer> out(fftwf_alloc_complex(bins));
  std::vector<float> power(bins);
  const auto& k = simd::kernels();

  Array2D result(bins, frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const float* src = clip.samples.data() + t * cfg.hop_size;
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = src[i] * window[i];
    fft.execute(in.get(), out.get());
    k.complex_power(bins, reinterpret_cast<const float*>(out.get()), power.data());
    for (std::size_t b = 0; b < bins; ++b) result(b, t) = power[b];
  }
  return result;
}

Array2D mel_filterbank(const DspConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.n_bins();
  const double mel_lo = hz_to_mel(cfg.f_min, cfg.mel_scale);
  const double mel_hi = hz_to_mel(cfg.f_max, cfg.mel_scale);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1);
    edges[i] = mel_to_hz(mel, cfg.mel_scale);
  }
  const double bin_hz = static_cast<double>(cfg.target_sample_rate) / static_cast<double>(cfg.fft_size);

  Array2D fb(cfg.n_mels, bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      const double rise = (f - lo) / (centre - lo);
      const double fall = (hi - f) / (hi - centre);
      const double w = std::max(0.0, std::min(rise, fall));
      fb(m, b) = static_cast<float>(w);
      any = any || w > 0.0;
    }
    if (!any) {
      throw DegenerateFilterbank("mel filter " + std::to_string(m) + " (" + format_double(lo) +
                                 "-" + format_double(hi) + " Hz) covers no FFT bin; reduce n_mels or "
                                 "increase fft_size");
    }
  }
  return fb;
}

MelSpectrogram log_mel(const AudioClip& clip, const DspConfig& cfg) {
  validate(clip);
  cfg.validate();
  const AudioClip* src = &clip;
  AudioClip resampled;
  if (clip.sample_rate != cfg.target_sample_rate) {
    resampled = resample(clip, cfg.target_sample_rate);
    src = &resampled;
  }
  const Array2D power = stft_power(*src, cfg);
  const Array2D fb = mel_filterbank(cfg);

  MelSpectrogram mel;
  mel.frame_rate = cfg.frame_rate();
  mel.floor_value = static_cast<float>(std::log(cfg.log_floor));
  mel.values = Array2D(cfg.n_mels, power.cols);
  simd::kernels().sgemm(simd::Trans::No, simd::Trans::No, fb.rows, power.cols, fb.cols,
                        fb.data.data(), fb.cols, power.data.data(), power.cols,
                        mel.values.data.data(), power.cols, false);
  const double floor = cfg.log_floor;
  for (float& v : mel.values.data) {
    // Tiny negative round-off from the weighted sum is clamped before the log.
    v = static_cast<float>(std::log(std::max(0.0, static_cast<double>(v)) + floor));
  }
  return mel;
}

ChunkSpec ChunkSpec::for_duration(double duration_sec, const DspConfig& cfg) {
  if (!(duration_sec > 0.0)) throw ConfigError("chunk duration must be positive");
  const auto samples = static_cast<std::size_t>(std::llround(duration_sec * cfg.target_sample_rate));
  const std::size_t frames = frame_count(samples, cfg);
  if (frames == 0) throw ConfigError("chunk duration shorter than one FFT window");
  return ChunkSpec{duration_sec, frames};
}

Array2D chunk_at(const ChunkSpec& spec, const MelSpectrogram& mel, std::size_t offset) {
  Array2D out(mel.n_mels(), spec.n_frames, mel.floor_value);
  const std::size_t avail = offset < mel.n_frames() ? std::min(spec.n_frames, mel.n_frames() - offset) : 0;
  for (std::size_t r = 0; r < mel.n_mels(); ++r) {
    const float* src = mel.values.data.data() + r * mel.n_frames() + offset;
    std::copy_n(src, avail, out.data.begin() + static_cast<std::ptrdiff_t>(r * spec.n_frames));
  }
  return out;
}

std::size_t eval_chunk_count(const ChunkSpec& spec, std::size_t mel_frames) noexcept {
  return std::max<std::size_t>(1, mel_frames / spec.n_frames);
}

std::vector<Array2D> chunk(const ChunkSpec& spec, const MelSpectrogram& mel, ChunkMode mode,
                           std::uint64_t seed) {
  if (spec.n_frames == 0) throw ConfigError("chunk spec has zero frames");
  if (mel.n_frames() == 0) throw DataError("mel spectrogram has no frames");
  std::vector<Array2D> out;
  if (mode == ChunkMode::TrainRandom) {
    std::size_t offset = 0;
    if (mel.n_frames() > spec.n_frames) {
      Rng rng(seed);
      offset = static_cast<std::size_t>(rng.below(mel.n_frames() - spec.n_frames + 1));
    }
    out.push_back(chunk_at(spec, mel, offset));
    return out;
  }
  const std::size_t count = eval_chunk_count(spec, mel.n_frames());
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) out.push_back(chunk_at(spec, mel, c * spec.n_frames));
  return out;
}

}  // namespace ccml::dsp
