#include "msrnet/absiu.hpp"

namespace msrnet {

Absiu::Absiu(ParamStore& ps, Rng& rng, const std::string& name, int c_common, PadMode pad_mode)
    : c_(c_common) {
  require(c_common % kGroups == 0, "absiu: c_common must be divisible by the group count");
  for (int s = 0; s < kScales; ++s)
    pre_[s] = ConvBlock(ps, rng, name + ".pre" + std::to_string(s), c_common, c_common, 3, 1,
                        pad_mode);
  common_ = Conv2d(ps, rng, name + ".common", kScales * c_common, kScales * c_common, 1, 1, 0);
  int gw = kScales * (c_common / kGroups);  // group width: one block per scale
  for (int g = 0; g < kGroups; ++g) {
    std::string base = name + ".head" + std::to_string(g);
    head_a_[g] = ConvBlock(ps, rng, base + ".a", gw, gw, 3, 1, pad_mode);
    head_b_[g] = Conv2d(ps, rng, base + ".b", gw, kScales, 1, 1, 0);
  }
}

Var Absiu::forward(const Var& f_main, const Var& f_aux_15, const Var& f_aux_20,
                   const Tensor* force_attention, AttentionStack* attention_out) const {
  const auto& s0 = f_main->value.shape();
  require(s0.size() == 4 && s0[1] == c_, "absiu: expects (B, c_common, h, w) inputs");
  require(f_aux_15->value.shape() == s0 && f_aux_20->value.shape() == s0,
          "absiu: the three scale inputs must share one shape");
  int batch = s0[0], h = s0[2], w = s0[3];
  int cg = c_ / kGroups;

  std::array<Var, kScales> proc = {pre_[0](f_main), pre_[1](f_aux_15), pre_[2](f_aux_20)};
  Var common = common_(concat_channels({proc[0], proc[1], proc[2]}));

  if (force_attention)
    require(force_attention->shape() == std::vector<int>{batch, kGroups, kScales, h, w},
            "absiu: forced attention stack has the wrong shape");
  Tensor stack_out;
  if (attention_out) stack_out = Tensor({batch, kGroups, kScales, h, w});

  std::vector<Var> group_outs(kGroups);
  for (int g = 0; g < kGroups; ++g) {
    // block (s, g): channels [s*C + g*cg, s*C + (g+1)*cg) of the common space
    std::array<Var, kScales> blocks;
    for (int s = 0; s < kScales; ++s)
      blocks[s] = slice_channels(common, s * c_ + g * cg, s * c_ + (g + 1) * cg);

    Var attn;
    if (force_attention) {
      Tensor forced({batch, kScales, h, w});
      for (int b = 0; b < batch; ++b)
        for (int s = 0; s < kScales; ++s)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              forced.at4(b, s, y, x) =
                  (*force_attention)[(((static_cast<std::size_t>(b) * kGroups + g) * kScales + s) * h + y) * w + x];
      attn = make_const(std::move(forced));
    } else {
      Var head_in = concat_channels({blocks[0], blocks[1], blocks[2]});
      attn = softmax_channels(head_b_[g](head_a_[g](head_in)));
    }
    if (attention_out) {
      for (int b = 0; b < batch; ++b)
        for (int s = 0; s < kScales; ++s)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              stack_out[(((static_cast<std::size_t>(b) * kGroups + g) * kScales + s) * h + y) * w + x] =
                  attn->value.at4(b, s, y, x);
    }

    Var acc;
    for (int s = 0; s < kScales; ++s) {
      Var weighted = mul_map(blocks[s], slice_channels(attn, s, s + 1));
      acc = s == 0 ? weighted : add(acc, weighted);
    }
    group_outs[g] = acc;
  }

  if (attention_out) attention_out->maps = std::move(stack_out);
  return concat_channels(group_outs);
}

}  // namespace msrnet
