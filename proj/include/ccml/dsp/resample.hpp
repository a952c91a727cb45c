#pragma once

#include "ccml/dsp/audio.hpp"

namespace ccml::dsp {

/// Band-limited rational-ratio resampling: polyphase windowed sinc with a
/// Kaiser window and 64 taps per phase. The output holds
/// round(n * target_rate / clip.sample_rate) samples; equal rates copy.
/// Throws InvalidAudio for an empty clip or non-positive rates.
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace ccml::dsp
