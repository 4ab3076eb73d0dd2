#include <cmath>

#include "msrnet/encoder.hpp"

namespace msrnet {

namespace {

struct PvtPreset {
  std::array<int, 4> dims;
  std::array<int, 4> depths;
  std::array<int, 4> heads;
  std::array<int, 4> sr_ratios;
  std::array<int, 4> mlp_ratios;
};

PvtPreset preset_for(const std::string& name) {
  if (name == "pvt_micro") return {{8, 16, 24, 32}, {1, 1, 1, 1}, {1, 2, 4, 8}, {8, 4, 2, 1}, {2, 2, 2, 2}};
  if (name == "pvtv2_b0") return {{32, 64, 160, 256}, {2, 2, 2, 2}, {1, 2, 5, 8}, {8, 4, 2, 1}, {8, 8, 4, 4}};
  if (name == "pvtv2_b1") return {{64, 128, 320, 512}, {2, 2, 2, 2}, {1, 2, 5, 8}, {8, 4, 2, 1}, {8, 8, 4, 4}};
  if (name == "pvtv2_b2") return {{64, 128, 320, 512}, {3, 4, 6, 3}, {1, 2, 5, 8}, {8, 4, 2, 1}, {8, 8, 4, 4}};
  if (name == "pvtv2_b3") return {{64, 128, 320, 512}, {3, 4, 18, 3}, {1, 2, 5, 8}, {8, 4, 2, 1}, {8, 8, 4, 4}};
  if (name == "pvtv2_b4") return {{64, 128, 320, 512}, {3, 8, 27, 3}, {1, 2, 5, 8}, {8, 4, 2, 1}, {8, 8, 4, 4}};
  if (name == "pvtv2_b5") return {{64, 128, 320, 512}, {3, 6, 40, 3}, {1, 2, 5, 8}, {8, 4, 2, 1}, {4, 4, 4, 4}};
  throw std::invalid_argument("backbone: unknown pyramid-transformer preset '" + name + "'");
}

/// Spatial-reduction attention over tokens; keys and values are computed
/// from a strided-conv shrunken copy of the map when sr > 1.
class SrAttention {
 public:
  SrAttention() = default;
  SrAttention(ParamStore& ps, Rng& rng, const std::string& name, int dim, int heads, int sr)
      : heads_(heads), sr_(sr), dim_(dim) {
    q_ = Linear(ps, rng, name + ".q", dim, dim);
    k_ = Linear(ps, rng, name + ".k", dim, dim);
    v_ = Linear(ps, rng, name + ".v", dim, dim);
    proj_ = Linear(ps, rng, name + ".proj", dim, dim);
    if (sr_ > 1) {
      sr_conv_ = Conv2d(ps, rng, name + ".sr", dim, dim, sr, sr, 0);
      sr_norm_ = LayerNorm(ps, name + ".sr_norm", dim);
    }
  }

  Var operator()(const Var& tokens, int h, int w) const {
    Var kv_src = tokens;
    int sr = std::min(sr_, std::min(h, w));  // tiny maps shrink less
    if (sr > 1) {
      Var m = to_map(tokens, h, w);
      // reuse the configured reduction conv only when it fits
      if (sr == sr_) {
        kv_src = sr_norm_(to_tokens(sr_conv_(m)));
      } else {
        kv_src = sr_norm_(to_tokens(adaptive_avg_pool(m, (h + sr - 1) / sr, (w + sr - 1) / sr)));
      }
    }
    int dh = dim_ / heads_;
    Var q = split_heads(q_(tokens), heads_);
    Var k = split_heads(k_(kv_src), heads_);
    Var v = split_heads(v_(kv_src), heads_);
    Var attn = softmax_lastdim(scale(bmm(q, k, /*trans_b=*/true), 1.0 / std::sqrt(dh)));
    return proj_(merge_heads(bmm(attn, v), heads_));
  }

 private:
  Linear q_, k_, v_, proj_;
  Conv2d sr_conv_;
  LayerNorm sr_norm_;
  int heads_ = 1, sr_ = 1, dim_ = 0;
};

/// fc -> 3x3 depthwise conv -> GELU -> fc, the PVTv2 mix-FFN.
class MixFfn {
 public:
  MixFfn() = default;
  MixFfn(ParamStore& ps, Rng& rng, const std::string& name, int dim, int hidden)
      : hidden_(hidden) {
    fc1_ = Linear(ps, rng, name + ".fc1", dim, hidden);
    dw_ = Conv2d(ps, rng, name + ".dw", hidden, hidden, 3, 1, 1, PadMode::kZero, hidden);
    fc2_ = Linear(ps, rng, name + ".fc2", hidden, dim);
  }

  Var operator()(const Var& tokens, int h, int w) const {
    Var x = fc1_(tokens);
    x = to_tokens(dw_(to_map(x, h, w)));
    return fc2_(gelu(x));
  }

 private:
  Linear fc1_, fc2_;
  Conv2d dw_;
  int hidden_ = 0;
};

class PvtBlock {
 public:
  PvtBlock() = default;
  PvtBlock(ParamStore& ps, Rng& rng, const std::string& name, int dim, int heads, int sr,
           int mlp_ratio)
      : norm1_(ps, name + ".norm1", dim),
        norm2_(ps, name + ".norm2", dim),
        attn_(ps, rng, name + ".attn", dim, heads, sr),
        ffn_(ps, rng, name + ".ffn", dim, dim * mlp_ratio) {}

  Var operator()(const Var& x, int h, int w) const {
    Var y = add(x, attn_(norm1_(x), h, w));
    return add(y, ffn_(norm2_(y), h, w));
  }

 private:
  LayerNorm norm1_, norm2_;
  SrAttention attn_;
  MixFfn ffn_;
};

class PvtBackbone : public Backbone {
 public:
  PvtBackbone(const BackboneSpec& spec, ParamStore& ps, Rng& rng, const std::string& prefix) {
    PvtPreset p = preset_for(spec.name);
    dims_ = p.dims;
    int c_prev = 3;
    for (int s = 0; s < 4; ++s) {
      std::string base = prefix + ".stage" + std::to_string(s + 1);
      int k = s == 0 ? 7 : 3;
      int stride = s == 0 ? 4 : 2;
      embed_conv_[s] = Conv2d(ps, rng, base + ".embed", c_prev, p.dims[s], k, stride, k / 2);
      embed_norm_[s] = LayerNorm(ps, base + ".embed_norm", p.dims[s]);
      blocks_[s].resize(p.depths[s]);
      for (int d = 0; d < p.depths[s]; ++d)
        blocks_[s][d] = PvtBlock(ps, rng, base + ".block" + std::to_string(d), p.dims[s],
                                 p.heads[s], p.sr_ratios[s], p.mlp_ratios[s]);
      out_norm_[s] = LayerNorm(ps, base + ".out_norm", p.dims[s]);
      c_prev = p.dims[s];
    }
  }

  std::array<Var, 4> forward(const Var& image) const override {
    std::array<Var, 4> out;
    Var x = image;
    for (int s = 0; s < 4; ++s) {
      Var m = embed_conv_[s](x);
      int h = m->value.dim(2), w = m->value.dim(3);
      Var t = embed_norm_[s](to_tokens(m));
      for (const auto& blk : blocks_[s]) t = blk(t, h, w);
      t = out_norm_[s](t);
      x = to_map(t, h, w);
      out[s] = x;
    }
    return out;
  }

  std::array<int, 4> stage_channels() const override { return dims_; }

 private:
  std::array<Conv2d, 4> embed_conv_;
  std::array<LayerNorm, 4> embed_norm_;
  std::array<std::vector<PvtBlock>, 4> blocks_;
  std::array<LayerNorm, 4> out_norm_;
  std::array<int, 4> dims_;
};

}  // namespace

std::unique_ptr<Backbone> make_pvt_backbone(const BackboneSpec& spec, ParamStore& ps, Rng& rng,
                                            const std::string& prefix) {
  return std::make_unique<PvtBackbone>(spec, ps, rng, prefix);
}

}  // namespace msrnet
