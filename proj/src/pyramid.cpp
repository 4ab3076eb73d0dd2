#include "msrnet/pyramid.hpp"

#include <algorithm>
#include <cmath>

namespace msrnet {

const Tensor& ImagePyramid::at(double k) const {
  for (const auto& [s, t] : scaled)
    if (s == k) return t;
  throw std::invalid_argument("pyramid: no image at scale " + std::to_string(k));
}

bool ImagePyramid::has(double k) const {
  for (const auto& [s, t] : scaled)
    if (s == k) return true;
  return false;
}

ImagePyramid build_pyramid(const Tensor& image, const std::vector<double>& scales,
                           bool allow_downscale) {
  require(image.ndim() == 3 && image.dim(0) == 3, "pyramid: expects a (3,H,W) image");
  int h = image.dim(1), w = image.dim(2);
  require(h >= kMinImageSide && w >= kMinImageSide, "pyramid: image smaller than minimum side");
  require(image.all_finite(), "pyramid: non-finite pixel values");
  require(image.min() >= 0.0 && image.max() <= 1.0, "pyramid: pixel values outside [0,1]");
  require(!scales.empty(), "pyramid: empty scale list");
  bool has_main = false;
  for (double k : scales) {
    require(k > 0.0, "pyramid: non-positive scale");
    if (k == 1.0) has_main = true;
    if (k < 1.0)
      require(allow_downscale, "pyramid: scale below 1.0 requires allow_downscale");
  }
  require(has_main, "pyramid: scale list must contain 1.0");

  ImagePyramid pyr;
  pyr.base = image;
  std::vector<double> sorted = scales;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (double k : sorted) {
    if (k == 1.0) {
      pyr.scaled.emplace_back(k, image);
      continue;
    }
    int sh = static_cast<int>(std::llround(k * h));
    int sw = static_cast<int>(std::llround(k * w));
    pyr.scaled.emplace_back(k, bilinear_resize_tensor(image, sh, sw));
  }
  return pyr;
}

Var align_features(const Var& x, int target_h, int target_w) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "align: expects NCHW");
  require(s[2] >= target_h && s[3] >= target_w,
          "align: target larger than source; alignment only down-samples");
  Var mx = adaptive_max_pool(x, target_h, target_w);
  Var av = adaptive_avg_pool(x, target_h, target_w);
  return scale(add(mx, av), 0.5);
}

FeatureMap align_scale(const FeatureMap& f_aux, std::pair<int, int> target_hw) {
  FeatureMap out = f_aux;
  out.data = align_features(f_aux.data, target_hw.first, target_hw.second);
  return out;
}

}  // namespace msrnet
