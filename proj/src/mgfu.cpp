#include "msrnet/mgfu.hpp"

namespace msrnet {

Mgfu::Mgfu(ParamStore& ps, Rng& rng, const std::string& name, int c_common, int feedback_count)
    : c_(c_common), n_fb_(feedback_count) {
  require(c_common >= 1, "mgfu: c_common must be positive");
  require(feedback_count >= 0, "mgfu: negative feedback count");
  int c = c_common;
  entry_ = Conv2d(ps, rng, name + ".entry", (1 + feedback_count) * c, c, 1, 1, 0);
  expand_ = ConvBlock(ps, rng, name + ".expand", c, kChainGroups * c, 1);
  for (int j = 0; j < kChainGroups; ++j) {
    int in = j == 0 ? c : 2 * c;                        // current group + previous propagate
    int out = j == kChainGroups - 1 ? 2 * c : 3 * c;    // last group has no propagate part
    chain_[j] = ConvBlock(ps, rng, name + ".chain" + std::to_string(j), in, out, 3);
  }
  int gate_w = kChainGroups * c;
  int squeezed = std::max(1, gate_w / kSqueezeRatio);
  squeeze_ = Conv2d(ps, rng, name + ".squeeze", gate_w, squeezed, 1, 1, 0);
  unsqueeze_ = Conv2d(ps, rng, name + ".unsqueeze", squeezed, gate_w, 1, 1, 0);
  refine_ = Conv2d(ps, rng, name + ".refine", gate_w, c, 3, 1, 1);
  refine_norm_ = GroupNorm(ps, name + ".refine_norm", c);
}

Var Mgfu::forward(const Var& x, const std::vector<Var>& feedback, MgfuTrace* trace) const {
  const auto& s = x->value.shape();
  require(s.size() == 4 && s[1] == c_, "mgfu: expects (B, c_common, h, w) input");
  require(static_cast<int>(feedback.size()) == n_fb_,
          "mgfu: feedback count does not match construction");
  for (const auto& f : feedback) {
    require(f->value.dim(2) == s[2] && f->value.dim(3) == s[3],
            "mgfu: feedback spatial dims must match after resize");
    require(f->value.dim(1) == c_, "mgfu: feedback channel width mismatch");
  }

  std::vector<Var> fused_in;
  fused_in.reserve(1 + feedback.size());
  fused_in.push_back(x);
  for (const auto& f : feedback) fused_in.push_back(f);
  Var t = entry_(concat_channels(fused_in));
  Var expanded = expand_(t);

  std::vector<Var> gate_parts, feat_parts;
  Var prev_prop;
  for (int j = 0; j < kChainGroups; ++j) {
    Var group = slice_channels(expanded, j * c_, (j + 1) * c_);
    Var in = j == 0 ? group : concat_channels({group, prev_prop});
    Var out = chain_[j](in);
    if (j < kChainGroups - 1) {
      prev_prop = slice_channels(out, 0, c_);
      gate_parts.push_back(slice_channels(out, c_, 2 * c_));
      feat_parts.push_back(slice_channels(out, 2 * c_, 3 * c_));
      if (trace) trace->propagate.push_back(prev_prop->value);
    } else {
      gate_parts.push_back(slice_channels(out, 0, c_));
      feat_parts.push_back(slice_channels(out, c_, 2 * c_));
    }
    if (trace) {
      trace->gate_parts.push_back(gate_parts.back()->value);
      trace->feature_parts.push_back(feat_parts.back()->value);
    }
  }

  Var gate_in = adaptive_avg_pool(concat_channels(gate_parts), 1, 1);
  Var gate = sigmoid(unsqueeze_(relu(squeeze_(gate_in))));
  if (trace) trace->gate = gate->value;

  Var rew = mul_gate(concat_channels(feat_parts), gate);
  Var refined = refine_norm_(refine_(rew));
  return relu(add(refined, x));
}

}  // namespace msrnet
