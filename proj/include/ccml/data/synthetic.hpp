#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccml/data/manifest.hpp"
#include "ccml/dsp/audio.hpp"

namespace ccml::data {

enum class SignatureKind { BandEnergy, AmplitudeModulation, Harmonic };

/// One tag's acoustic fingerprint.
struct Signature {
  std::string name;  // also the tag name, e.g. "band-3k", "am-5hz", "harm-220"
  SignatureKind kind = SignatureKind::BandEnergy;
  double low_hz = 0.0, high_hz = 0.0;  // band-limited noise (BandEnergy)
  double carrier_hz = 0.0, rate_hz = 0.0;  // modulated tone (AmplitudeModulation)
  double f0_hz = 0.0;  // harmonic series up to max_harmonic_hz (Harmonic)
  double max_harmonic_hz = 0.0;
};

/// The fixed, ordered family every synthetic corpus draws from. Kinds are
/// interleaved so any contiguous run mixes them.
const std::vector<Signature>& signature_family();
const Signature& signature_by_name(const std::string& name);  // SpecError when unknown

struct SyntheticSpec {
  std::string dataset_id = "synth";
  std::size_t n_clips = 200;
  std::size_t n_tags = 8;
  double clip_seconds = 3.0;
  std::uint64_t seed = 7;
  int sample_rate = 16000;
  double snr_db = 10.0;  // per-signature level over the background noise
  double tag_probability = 0.3;
  /// Tags use family signatures [offset, offset + n_tags) unless
  /// `signatures` names them explicitly. Two specs whose ranges overlap form
  /// a related domain pair.
  std::size_t signature_offset = 0;
  std::vector<std::string> signatures;
  SplitRatios splits;

  /// Signatures in tag order. SpecError when the spec cannot be satisfied.
  std::vector<Signature> resolve_signatures() const;
  void validate() const;

  Json to_json() const;
  static SyntheticSpec from_json(const Json& j);  // SpecError on schema violations
};

/// Audio for one clip: each active signature at a random gain in [0.5, 1.5]
/// times the reference level, over white noise. Depends only on the
/// arguments, so clips can be generated independently.
dsp::AudioClip render_clip(const SyntheticSpec& spec, const std::vector<Signature>& active, std::uint64_t clip_seed);

struct SyntheticCorpus {
  DatasetManifest manifest;
  std::filesystem::path manifest_path;
};

/// Writes `out_dir/audio/<id>.wav` (16-bit PCM mono) and `out_dir/manifest.jsonl`.
/// Bitwise deterministic in the spec.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Tag assignment only (no audio), identical to what generate_synthetic uses.
std::vector<std::vector<std::string>> synthetic_tag_sets(const SyntheticSpec& spec);

}  // namespace ccml::data
