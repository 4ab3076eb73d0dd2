#include "msrnet/encoder.hpp"

#include "msrnet/pyramid.hpp"

namespace msrnet {

void BackboneSpec::validate() const {
  if (name == "toy") {
    require(stage_channels.size() == 4, "backbone: exactly 4 stages required");
    for (int c : stage_channels) require(c > 0, "backbone: stage channels must be positive");
  }
  if (pretrained) require(!weights_path.empty(), "backbone: pretrained requires weights_path");
}

namespace {

/// Four stages of stride-2 conv blocks (two 3x3 conv+norm+relu each), first
/// stage stride 4. Cheapest structure satisfying the stride contract.
class ToyBackbone : public Backbone {
 public:
  ToyBackbone(const BackboneSpec& spec, ParamStore& ps, Rng& rng, const std::string& prefix) {
    const auto& sc = spec.stage_channels;
    channels_ = {sc[0], sc[1], sc[2], sc[3]};
    int c_prev = 3;
    for (int i = 0; i < 4; ++i) {
      std::string base = prefix + ".stage" + std::to_string(i + 1);
      int s2 = i == 0 ? 2 : 1;  // stage 1 strides twice for a total stride of 4
      a_[i] = ConvBlock(ps, rng, base + ".a", c_prev, sc[i], 3, 2);
      b_[i] = ConvBlock(ps, rng, base + ".b", sc[i], sc[i], 3, s2);
      c_prev = sc[i];
    }
  }

  std::array<Var, 4> forward(const Var& image) const override {
    std::array<Var, 4> out;
    Var x = image;
    for (int i = 0; i < 4; ++i) {
      x = b_[i](a_[i](x));
      out[i] = x;
    }
    return out;
  }

  std::array<int, 4> stage_channels() const override { return channels_; }

 private:
  std::array<ConvBlock, 4> a_, b_;
  std::array<int, 4> channels_;
};

}  // namespace

std::unique_ptr<Backbone> make_pvt_backbone(const BackboneSpec& spec, ParamStore& ps, Rng& rng,
                                            const std::string& prefix);  // encoder_pvt.cpp

std::unique_ptr<Backbone> make_backbone(const BackboneSpec& spec, ParamStore& ps, Rng& rng,
                                        const std::string& prefix) {
  spec.validate();
  if (spec.name == "toy") return std::make_unique<ToyBackbone>(spec, ps, rng, prefix);
  if (spec.name == "pvt_micro" || spec.name.rfind("pvtv2_", 0) == 0)
    return make_pvt_backbone(spec, ps, rng, prefix);
  throw std::invalid_argument("backbone: unknown name '" + spec.name + "'");
}

std::vector<FeatureMap> extract_features(const Backbone& backbone, const Var& image,
                                         double scale_tag) {
  const auto& s = image->value.shape();
  require(s.size() == 4 && s[1] == 3, "extract_features: expects (B,3,H,W)");
  require(s[2] >= kMinImageSide && s[3] >= kMinImageSide,
          "extract_features: image too small for the stride-32 stage");
  auto maps = backbone.forward(image);
  std::vector<FeatureMap> out;
  out.reserve(4);
  for (int i = 0; i < 4; ++i) out.push_back(FeatureMap{maps[i], i + 1, scale_tag});
  return out;
}

ChannelReducer::ChannelReducer(ParamStore& ps, Rng& rng, const std::string& name, int c_in,
                               int c_common)
    : conv_(ps, rng, name + ".conv", c_in, c_common, 1, 1, 0),
      norm_(ps, name + ".norm", c_common),
      c_in_(c_in) {
  require(c_common <= c_in, "reduce_channels: c_common must not exceed input width");
}

FeatureMap ChannelReducer::operator()(const FeatureMap& f) const {
  require(f.channels() == c_in_, "reduce_channels: input width mismatch");
  FeatureMap out = f;
  out.data = relu(norm_(conv_(f.data)));
  return out;
}

Var ChannelReducer::norm_only(const Var& conv_out) const { return norm_(conv_out); }

}  // namespace msrnet
