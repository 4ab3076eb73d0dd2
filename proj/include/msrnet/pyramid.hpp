#pragma once

#include <utility>
#include <vector>

#include "msrnet/feature_map.hpp"
#include "msrnet/ops.hpp"

namespace msrnet {

/// Smallest accepted image side for pyramid construction. Keeps stride-32
/// features at least one pixel wide at every scale used by the toy configs.
inline constexpr int kMinImageSide = 16;

/// One input image resampled at a set of magnifying scale factors.
/// scaled[1.0] aliases the base image exactly.
struct ImagePyramid {
  Tensor base;  // (3, H, W), values in [0, 1]
  std::vector<std::pair<double, Tensor>> scaled;  // sorted by scale

  const Tensor& at(double k) const;
  bool has(double k) const;
};

/// Builds the pyramid by bilinear resampling (align_corners=false) to
/// round(k*H) x round(k*W) per scale. Scales below 1.0 are rejected unless
/// `allow_downscale` is set (the ablation baseline uses a 0.5x scale).
ImagePyramid build_pyramid(const Tensor& image, const std::vector<double>& scales,
                           bool allow_downscale = false);

/// Down-samples an auxiliary-scale feature map to target_hw as the unweighted
/// mean of adaptive max pooling and adaptive average pooling. Up-sampling is
/// rejected; alignment only shrinks.
FeatureMap align_scale(const FeatureMap& f_aux, std::pair<int, int> target_hw);

/// Same combination rule on a raw graph value.
Var align_features(const Var& x, int target_h, int target_w);

}  // namespace msrnet
