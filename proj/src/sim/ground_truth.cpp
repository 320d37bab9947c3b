#include "binsight/ground_truth.hpp"

#include <algorithm>
#include <cmath>

#include "binsight/error.hpp"

namespace binsight::sim {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double azimuth_to_col(double az, int width) {
  double frac = std::fmod(az + kPi, 2.0 * kPi);
  if (frac < 0) frac += 2.0 * kPi;
  return frac / (2.0 * kPi) * width;
}

}  // namespace

GroundTruthMaps rasterize_ground_truth(const SceneSpec& scene, double t_mid,
                                       double t_next, int height, int width,
                                       double bg_depth,
                                       const RasterParams& rp) {
  if (height < 8 || width < 8)
    throw ConfigError("rasterize_ground_truth: grid must be at least 8x8");
  if (!(0.0 <= t_mid && t_mid < t_next && t_next <= scene.duration))
    throw InvalidInput("rasterize_ground_truth: need 0 <= t_mid < t_next <= duration");

  GroundTruthMaps gt;
  gt.height = height;
  gt.width = width;
  gt.labels.assign(static_cast<std::size_t>(height) * width, 0);
  gt.depth.assign(gt.labels.size(), static_cast<float>(bg_depth));
  gt.flow.assign(2 * gt.labels.size(), 0.0f);

  // farthest first so nearer sources overwrite
  std::vector<const SourceSpec*> order;
  for (const auto& s : scene.sources) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [t_mid](const SourceSpec* a, const SourceSpec* b) {
              return a->distance_at(t_mid) > b->distance_at(t_mid);
            });

  for (const SourceSpec* src : order) {
    const double d = src->distance_at(t_mid);
    const double az = src->azimuth_at(t_mid);
    const double col_center = azimuth_to_col(az, width);
    const double row_center = height / 2.0;

    const double half_w_px =
        0.5 * (rp.width_factor / d) / (2.0 * kPi) * width;
    const double half_h_px = 0.5 * (rp.height_factor / d) / kPi * height;

    int c0 = static_cast<int>(std::floor(col_center - half_w_px));
    int c1 = static_cast<int>(std::ceil(col_center + half_w_px));
    int r0 = static_cast<int>(std::floor(row_center - half_h_px));
    int r1 = static_cast<int>(std::ceil(row_center + half_h_px));
    if (c1 <= c0) c1 = c0 + 1;  // paint at least one column
    if (r1 <= r0) r1 = r0 + 1;
    r0 = std::max(r0, 0);
    r1 = std::min(r1, height);

    // box-center displacement between the two probe times; columns move
    // with azimuth only (elevation is fixed), so dy = 0
    const double dcol = (src->azimuth_at(t_next) - az) / (2.0 * kPi) * width;

    for (int r = r0; r < r1; ++r) {
      for (int c = c0; c < c1; ++c) {
        const int cw = ((c % width) + width) % width;  // azimuth wraps
        const std::size_t idx = static_cast<std::size_t>(r) * width + cw;
        gt.labels[idx] = static_cast<int>(src->class_id);
        gt.depth[idx] = static_cast<float>(d);
        gt.flow[idx] = static_cast<float>(dcol);
        gt.flow[gt.labels.size() + idx] = 0.0f;
      }
    }
  }
  return gt;
}

}  // namespace binsight::sim
