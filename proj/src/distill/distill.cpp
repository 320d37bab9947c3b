#include "binsight/distill.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "binsight/error.hpp"

namespace binsight::distill {

std::vector<int> mode_background(const LabelSequence& seq) {
  if (seq.frames.empty())
    throw InvalidInput("mode_background: empty sequence");
  const std::size_t pixels =
      static_cast<std::size_t>(seq.height) * seq.width;
  if (pixels == 0) throw InvalidInput("mode_background: empty grid");
  for (const auto& f : seq.frames) {
    if (f.size() != pixels)
      throw InvalidInput("mode_background: frame shape mismatch");
  }

  std::vector<int> out(pixels);
  std::map<int, int> counts;
  for (std::size_t p = 0; p < pixels; ++p) {
    counts.clear();
    for (const auto& f : seq.frames) ++counts[f[p]];
    // map iterates keys in ascending order, so on ties the smallest value
    // is kept.
    int best_value = 0, best_count = -1;
    for (const auto& [value, count] : counts) {
      if (count > best_count) {
        best_value = value;
        best_count = count;
      }
    }
    out[p] = best_value;
  }
  return out;
}

std::vector<std::uint8_t> soundmaking_mask(
    const std::vector<int>& current, const std::vector<int>& background,
    const std::set<int>& target_classes) {
  if (current.size() != background.size())
    throw InvalidInput("soundmaking_mask: grid shape mismatch");
  std::vector<std::uint8_t> mask(current.size(), 0);
  for (std::size_t p = 0; p < current.size(); ++p) {
    mask[p] = (target_classes.count(current[p]) > 0 &&
               current[p] != background[p])
                  ? 1
                  : 0;
  }
  return mask;
}

bool select_sample(const std::vector<dsp::Waveform>& audio,
                   const std::vector<int>& current,
                   const std::vector<int>& background,
                   double energy_threshold, double min_diff_fraction) {
  if (current.size() != background.size())
    throw InvalidInput("select_sample: grid shape mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& ch : audio) {
    for (double v : ch.samples) acc += v * v;
    n += ch.samples.size();
  }
  const double rms = n > 0 ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
  if (rms < energy_threshold) return false;

  std::size_t diff = 0;
  for (std::size_t p = 0; p < current.size(); ++p)
    diff += current[p] != background[p] ? 1 : 0;
  return static_cast<double>(diff) >=
         min_diff_fraction * static_cast<double>(current.size());
}

}  // namespace binsight::distill
