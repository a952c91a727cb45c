#include "ccml/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <set>

#include "ccml/error.hpp"
#include "ccml/util/rng.hpp"

namespace ccml::data {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kReferenceRms = 0.05;
constexpr std::size_t kNoiseComponents = 48;

Signature band(const char* name, double center) {
  Signature s;
  s.name = name;
  s.kind = SignatureKind::BandEnergy;
  s.low_hz = center - 250.0;
  s.high_hz = center + 250.0;
  return s;
}

Signature am(const char* name, double carrier, double rate) {
  Signature s;
  s.name = name;
  s.kind = SignatureKind::AmplitudeModulation;
  s.carrier_hz = carrier;
  s.rate_hz = rate;
  return s;
}

Signature harm(const char* name, double f0) {
  Signature s;
  s.name = name;
  s.kind = SignatureKind::Harmonic;
  s.f0_hz = f0;
  s.max_harmonic_hz = 700.0;
  return s;
}

/// Adds amplitude * sin(2 pi f t + phase) for t = n / sr via a rotating
/// phasor, renormalized periodically to stop magnitude drift.
void add_sine(std::vector<double>& out, double f, double phase, double amplitude, int sr,
              const std::vector<double>* envelope = nullptr) {
  const std::complex<double> step = std::polar(1.0, kTwoPi * f / sr);
  std::complex<double> z = std::polar(1.0, phase);
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double v = amplitude * z.imag();
    out[n] += envelope ? v * (*envelope)[n] : v;
    z *= step;
    if ((n & 1023) == 1023) z /= std::abs(z);
  }
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> render_signature(const Signature& sig, std::size_t n, int sr, Rng& rng) {
  std::vector<double> out(n, 0.0);
  switch (sig.kind) {
    case SignatureKind::BandEnergy:
      // Dense random-phase partials spread over the band.
      for (std::size_t k = 0; k < kNoiseComponents; ++k) {
        const double f = rng.uniform(sig.low_hz, sig.high_hz);
        add_sine(out, f, rng.uniform(0.0, kTwoPi), 1.0, sr);
      }
      break;
    case SignatureKind::AmplitudeModulation: {
      std::vector<double> env(n);
      const double phase = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) {
        env[i] = 0.5 * (1.0 + std::sin(kTwoPi * sig.rate_hz * static_cast<double>(i) / sr + phase));
      }
      add_sine(out, sig.carrier_hz, rng.uniform(0.0, kTwoPi), 1.0, sr, &env);
      break;
    }
    case SignatureKind::Harmonic:
      for (int k = 1; k * sig.f0_hz <= sig.max_harmonic_hz; ++k) {
        add_sine(out, k * sig.f0_hz, rng.uniform(0.0, kTwoPi), 1.0 / k, sr);
      }
      break;
  }
  const double r = rms(out);
  if (r > 0) {
    for (double& v : out) v /= r;
  }
  return out;
}

}  // namespace

const std::vector<Signature>& signature_family() {
  static const std::vector<Signature> family{
      band("band-1k", 1000), harm("harm-110", 110),   am("am-3hz", 1500, 3),  band("band-3k", 3000),
      harm("harm-220", 220), am("am-5hz", 4500, 5),   band("band-5k", 5000),  harm("harm-330", 330),
      band("band-2k", 2000), am("am-8hz", 5500, 8),   harm("harm-440", 440),  band("band-4k", 4000),
      am("am-12hz", 6500, 12), band("band-6k", 6000), harm("harm-165", 165), band("band-7k", 7000),
  };
  return family;
}

const Signature& signature_by_name(const std::string& name) {
  for (const auto& s : signature_family()) {
    if (s.name == name) return s;
  }
  throw SpecError("unknown signature '" + name + "'");
}

std::vector<Signature> SyntheticSpec::resolve_signatures() const {
  const auto& fam = signature_family();
  std::vector<Signature> out;
  if (!signatures.empty()) {
    if (signatures.size() != n_tags) {
      throw SpecError("signatures lists " + std::to_string(signatures.size()) + " names for n_tags = " +
                      std::to_string(n_tags));
    }
    std::set<std::string> seen;
    for (const auto& name : signatures) {
      if (!seen.insert(name).second) throw SpecError("signature '" + name + "' listed twice");
      out.push_back(signature_by_name(name));
    }
    return out;
  }
  if (signature_offset + n_tags > fam.size()) {
    throw SpecError("spec needs " + std::to_string(n_tags) + " distinct signatures from offset " +
                    std::to_string(signature_offset) + ", the family has " + std::to_string(fam.size()));
  }
  out.assign(fam.begin() + static_cast<long>(signature_offset),
             fam.begin() + static_cast<long>(signature_offset + n_tags));
  return out;
}

void SyntheticSpec::validate() const {
  if (dataset_id.empty()) throw SpecError("dataset_id must be non-empty");
  if (n_clips < 1) throw SpecError("n_clips must be >= 1");
  if (n_tags < 1) throw SpecError("n_tags must be >= 1");
  if (!(clip_seconds > 0.0)) throw SpecError("clip_seconds must be > 0");
  if (sample_rate < 16000) throw SpecError("sample_rate must be >= 16000 so every signature is representable");
  if (!(tag_probability >= 0.0 && tag_probability <= 1.0)) throw SpecError("tag_probability must be in [0,1]");
  if (!std::isfinite(snr_db)) throw SpecError("snr_db must be finite");
  resolve_signatures();
}

Json SyntheticSpec::to_json() const {
  return {{"dataset_id", dataset_id},
          {"n_clips", n_clips},
          {"n_tags", n_tags},
          {"clip_seconds", clip_seconds},
          {"seed", seed},
          {"sample_rate", sample_rate},
          {"snr_db", snr_db},
          {"tag_probability", tag_probability},
          {"signature_offset", signature_offset},
          {"signatures", signatures},
          {"splits", {{"train", splits.train}, {"valid", splits.valid}, {"test", splits.test}}}};
}

SyntheticSpec SyntheticSpec::from_json(const Json& j) {
  SyntheticSpec s;
  if (!j.is_object()) throw SpecError("spec must be a JSON object");
  try {
    s.dataset_id = j.value("dataset_id", s.dataset_id);
    s.n_clips = j.value("n_clips", s.n_clips);
    s.n_tags = j.value("n_tags", s.n_tags);
    s.clip_seconds = j.value("clip_seconds", s.clip_seconds);
    s.seed = j.value("seed", s.seed);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    s.snr_db = j.value("snr_db", s.snr_db);
    s.tag_probability = j.value("tag_probability", s.tag_probability);
    s.signature_offset = j.value("signature_offset", s.signature_offset);
    s.signatures = j.value("signatures", s.signatures);
    if (j.contains("splits")) {
      s.splits.train = j["splits"].at("train").get<double>();
      s.splits.valid = j["splits"].at("valid").get<double>();
      s.splits.test = j["splits"].at("test").get<double>();
    }
  } catch (const Json::exception& e) {
    throw SpecError(std::string("malformed synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<std::vector<std::string>> synthetic_tag_sets(const SyntheticSpec& spec) {
  const auto sigs = spec.resolve_signatures();
  Rng rng(derive_seed(spec.seed, fnv1a64("tags")));
  std::vector<std::vector<std::string>> out(spec.n_clips);
  for (auto& tags : out) {
    for (const auto& s : sigs) {
      if (rng.uniform() < spec.tag_probability) tags.push_back(s.name);
    }
  }
  return out;
}

dsp::AudioClip render_clip(const SyntheticSpec& spec, const std::vector<Signature>& active, std::uint64_t clip_seed) {
  const auto n = static_cast<std::size_t>(std::llround(spec.clip_seconds * spec.sample_rate));
  Rng rng(clip_seed);
  std::vector<double> mix(n, 0.0);
  for (const auto& sig : active) {
    const double gain = kReferenceRms * rng.uniform(0.5, 1.5);
    const auto part = render_signature(sig, n, spec.sample_rate, rng);
    for (std::size_t i = 0; i < n; ++i) mix[i] += gain * part[i];
  }
  const double noise_rms = kReferenceRms * std::pow(10.0, -spec.snr_db / 20.0);
  for (double& v : mix) v += noise_rms * rng.normal();
  dsp::AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(std::clamp(mix[i], -1.0, 1.0));
  return clip;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  const auto sigs = spec.resolve_signatures();
  const auto tag_sets = synthetic_tag_sets(spec);
  fs::create_directories(out_dir / "audio");

  DatasetManifest m;
  m.dataset_id = spec.dataset_id;
  m.base_dir = out_dir;
  for (std::size_t i = 0; i < spec.n_clips; ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%04zu", i);
    ManifestEntry e;
    e.recording_id = spec.dataset_id + "-" + id;
    e.audio_path = fs::path("audio") / (e.recording_id + ".wav");
    e.tags = tag_sets[i];
    std::vector<Signature> active;
    for (const auto& s : sigs) {
      if (std::find(e.tags.begin(), e.tags.end(), s.name) != e.tags.end()) active.push_back(s);
    }
    const auto clip = render_clip(spec, active, derive_seed(spec.seed, fnv1a64("clip"), i));
    dsp::write_wav_pcm16(out_dir / e.audio_path, clip);
    e.duration_sec = clip.duration_sec();
    m.entries.push_back(std::move(e));
  }
  m = assign_splits(std::move(m), spec.splits, spec.seed);
  const fs::path manifest_path = out_dir / "manifest.jsonl";
  save_manifest(m, manifest_path);
  write_json_file(out_dir / "spec.json", spec.to_json());
  return {std::move(m), manifest_path};
}

}  // namespace ccml::data
