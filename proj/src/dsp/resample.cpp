#include "ccml/dsp/resample.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ccml/error.hpp"

namespace ccml::dsp {
namespace {

constexpr int kTaps = 64;
constexpr int kHalf = kTaps / 2;
constexpr double kKaiserBeta = 8.6;
constexpr double kRolloff = 0.95;
constexpr double kPi = 3.14159265358979323846;

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

double kaiser(double x, double half) {
  const double r = x / half;
  if (r <= -1.0 || r >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

// taps[phase][t] weights input sample (base - kHalf + 1 + t) for an output
// located at base + phase / up.
std::vector<double> build_polyphase(long up, long down) {
  const double cutoff = kRolloff * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  std::vector<double> taps(static_cast<std::size_t>(up) * kTaps);
  for (long phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    double* row = taps.data() + phase * kTaps;
    double sum = 0.0;
    for (int t = 0; t < kTaps; ++t) {
      const double d = static_cast<double>(t - kHalf + 1) - frac;
      row[t] = cutoff * sinc(cutoff * d) * kaiser(d, kHalf + 0.5);
      sum += row[t];
    }
    for (int t = 0; t < kTaps; ++t) row[t] /= sum;
  }
  return taps;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (clip.samples.empty()) throw InvalidAudio("cannot resample an empty clip");
  if (clip.sample_rate <= 0 || target_rate <= 0) {
    throw InvalidAudio("sample rates must be positive (" + std::to_string(clip.sample_rate) +
                       " -> " + std::to_string(target_rate) + ")");
  }
  if (clip.sample_rate == target_rate) return clip;

  const long g = std::gcd(static_cast<long>(clip.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;
  const long down = clip.sample_rate / g;
  const auto n_in = static_cast<long long>(clip.samples.size());
  const long long n_out = (n_in * target_rate + clip.sample_rate / 2) / clip.sample_rate;

  const std::vector<double> taps = build_polyphase(up, down);
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (long long j = 0; j < n_out; ++j) {
    const long long pos = j * down;
    const long long base = pos / up;
    const long phase = static_cast<long>(pos % up);
    const double* row = taps.data() + phase * kTaps;
    double acc = 0.0;
    const long long first = base - kHalf + 1;
    for (int t = 0; t < kTaps; ++t) {
      const long long idx = first + t;
      if (idx < 0 || idx >= n_in) continue;
      acc += row[t] * clip.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[static_cast<std::size_t>(j)] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace ccml::dsp
