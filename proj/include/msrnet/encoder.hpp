#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "msrnet/feature_map.hpp"
#include "msrnet/nn.hpp"

namespace msrnet {

/// Which feature extractor to build and how wide its stages are.
/// Known names: "toy" (stage_channels taken from the spec) and the
/// pyramid-transformer family "pvt_micro", "pvtv2_b0".."pvtv2_b5"
/// (stage widths fixed by the preset).
struct BackboneSpec {
  std::string name = "toy";
  std::vector<int> stage_channels = {16, 32, 64, 96};
  bool pretrained = false;
  std::string weights_path;  // flat key->tensor archive, used when pretrained

  void validate() const;
};

/// Four-stage feature hierarchy at strides 4/8/16/32. Stage spatial dims are
/// ceil(H/stride) for any input size.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::array<Var, 4> forward(const Var& image) const = 0;
  virtual std::array<int, 4> stage_channels() const = 0;
};

std::unique_ptr<Backbone> make_backbone(const BackboneSpec& spec, ParamStore& ps, Rng& rng,
                                        const std::string& prefix = "backbone");

/// Runs the backbone and tags each stage map with (stage, scale).
/// Rejects images smaller than kMinImageSide per side.
std::vector<FeatureMap> extract_features(const Backbone& backbone, const Var& image,
                                         double scale_tag);

/// 1x1 conv + normalization + rectifier down to the decoder's common width.
class ChannelReducer {
 public:
  ChannelReducer() = default;
  ChannelReducer(ParamStore& ps, Rng& rng, const std::string& name, int c_in, int c_common);

  FeatureMap operator()(const FeatureMap& f) const;
  Var norm_only(const Var& conv_out) const;  // exposes the norm for tests

  int c_in() const { return c_in_; }

 private:
  Conv2d conv_;
  GroupNorm norm_;
  int c_in_ = 0;
};

}  // namespace msrnet
