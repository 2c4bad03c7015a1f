#pragma once

#include <optional>
#include <utility>

#include "respscl/common.h"
#include "respscl/dsp.h"

namespace respscl {

enum class MaskValue { Zero, Mean };

// SpecAugment masking policy. Time warping is intentionally absent; the
// masking-only policy is the one used throughout.
struct AugmentationPolicy {
  int n_freq_masks = 2;
  int freq_width = 20;  // mel bins per frequency mask
  int n_time_masks = 2;
  int time_width = 40;  // frames per time mask
  MaskValue mask_value = MaskValue::Zero;
  std::optional<uint64_t> seed;

  void validate() const;  // throws std::invalid_argument
};

// Masks n_freq_masks row blocks and n_time_masks column blocks at uniformly
// random starts (blocks may overlap; widths wider than the grid are clamped).
// Pure function of (input, policy, rng state); unmasked cells are untouched.
MelGram apply_specaugment(const MelGram& m, const AugmentationPolicy& pol, Rng& rng);

// Two independent draws of apply_specaugment from child streams of `rng`.
std::pair<MelGram, MelGram> make_views(const MelGram& m,
                                       const AugmentationPolicy& pol, Rng& rng);

}  // namespace respscl
