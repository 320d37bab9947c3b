#pragma once

#include <vector>

#include "binsight/rig.hpp"

namespace binsight::sim {

// Equirectangular panoramic grids: azimuth runs along columns (front at
// W/2, counter-clockwise to the left/right edges), elevation along rows
// with the horizon at H/2. Labels: 0 background, then SourceClass values.
struct GroundTruthMaps {
  int height = 0;
  int width = 0;
  std::vector<int> labels;    // H*W row-major
  std::vector<float> depth;   // H*W meters
  std::vector<float> flow;    // 2*H*W, plane 0 = dx, plane 1 = dy (pixels)
};

struct RasterParams {
  // Angular extent of a source box at 1 m; shrinks as 1/distance.
  double width_factor = 1.6;   // rad * m
  double height_factor = 1.0;  // rad * m
};

// Paints every source as an axis-aligned box at its t_mid position; nearer
// sources overwrite farther ones. Flow is the pixel displacement of the
// box center between t_mid and t_next.
GroundTruthMaps rasterize_ground_truth(const SceneSpec& scene, double t_mid,
                                       double t_next, int height, int width,
                                       double bg_depth,
                                       const RasterParams& rp = {});

}  // namespace binsight::sim
