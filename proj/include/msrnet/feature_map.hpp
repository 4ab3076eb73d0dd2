#pragma once

#include "msrnet/autograd.hpp"

namespace msrnet {

/// Backbone feature map tagged with its encoder stage (1..4, strides
/// 4/8/16/32) and the input-pyramid scale it came from.
struct FeatureMap {
  Var data;  // (B, C, h, w)
  int stage = 1;
  double scale = 1.0;

  int height() const { return data->value.dim(2); }
  int width() const { return data->value.dim(3); }
  int channels() const { return data->value.dim(1); }
};

}  // namespace msrnet
