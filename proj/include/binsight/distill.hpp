#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "binsight/wave.hpp"

namespace binsight::distill {

// Sequence of label grids (or any integer-quantized single-channel
// frames); all frames share one H x W shape.
struct LabelSequence {
  int height = 0;
  int width = 0;
  std::vector<std::vector<int>> frames;  // each H*W row-major
};

// Per-pixel modal value across the sequence; ties break toward the
// smallest value.
std::vector<int> mode_background(const LabelSequence& seq);

// 1 where the current frame holds a target class AND differs from the
// background, 0 elsewhere.
std::vector<std::uint8_t> soundmaking_mask(const std::vector<int>& current,
                                           const std::vector<int>& background,
                                           const std::set<int>& target_classes);

// Training-sample gate: loud enough and at least min_diff_fraction of the
// pixels changed against the background.
bool select_sample(const std::vector<dsp::Waveform>& audio,
                   const std::vector<int>& current,
                   const std::vector<int>& background,
                   double energy_threshold = 0.01,
                   double min_diff_fraction = 0.05);

}  // namespace binsight::distill
