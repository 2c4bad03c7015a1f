#include "respscl/augment.h"

#include <algorithm>
#include <stdexcept>

namespace respscl {

void AugmentationPolicy::validate() const {
  if (n_freq_masks < 0 || n_time_masks < 0) {
    throw std::invalid_argument("augment: mask counts must be >= 0");
  }
  if (freq_width < 0 || time_width < 0) {
    throw std::invalid_argument("augment: mask widths must be >= 0");
  }
}

MelGram apply_specaugment(const MelGram& m, const AugmentationPolicy& pol, Rng& rng) {
  pol.validate();
  const int rows = m.n_mels();
  const int cols = m.n_frames();
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("apply_specaugment: empty grid");
  }

  MelGram out = m;
  const float fill =
      pol.mask_value == MaskValue::Mean ? m.grid.mean() : 0.0f;

  const int fw = std::min(pol.freq_width, rows);
  for (int i = 0; i < pol.n_freq_masks; ++i) {
    if (fw == 0) {
      break;
    }
    std::uniform_int_distribution<int> dist(0, rows - fw);
    const int r0 = dist(rng);
    out.grid.block(r0, 0, fw, cols).setConstant(fill);
  }

  const int tw = std::min(pol.time_width, cols);
  for (int i = 0; i < pol.n_time_masks; ++i) {
    if (tw == 0) {
      break;
    }
    std::uniform_int_distribution<int> dist(0, cols - tw);
    const int c0 = dist(rng);
    out.grid.block(0, c0, rows, tw).setConstant(fill);
  }
  return out;
}

std::pair<MelGram, MelGram> make_views(const MelGram& m,
                                       const AugmentationPolicy& pol, Rng& rng) {
  const uint64_t s1 = rng();
  const uint64_t s2 = rng();
  Rng r1(s1);
  Rng r2(s2);
  return {apply_specaugment(m, pol, r1), apply_specaugment(m, pol, r2)};
}

}  // namespace respscl
