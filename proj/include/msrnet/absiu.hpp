#pragma once

#include <array>
#include <string>

#include "msrnet/nn.hpp"

namespace msrnet {

/// Per-pixel scale-attention weights produced by one ABSIU forward:
/// (B, G, S, h, w) with G attention groups and S=3 scales. Softmax runs over
/// the scale axis, so every (b,g,y,x) column sums to 1.
struct AttentionStack {
  Tensor maps;

  int groups() const { return maps.dim(1); }
  int scales() const { return maps.dim(2); }
};

/// Attention-Based Scale Integration Unit.
///
/// Fuses same-stage feature maps from the three input scales:
///  1. each scale is processed independently (3x3 conv + norm + relu),
///  2. the three maps are concatenated and projected by a 1x1 conv into a
///     common space of 3*C channels,
///  3. the common space is split into G groups, each holding a C/G-wide
///     block from every scale,
///  4. an independent head per group emits a 3-channel map softmaxed over
///     scales,
///  5. each attention channel weights its scale's block and the blocks are
///     summed over scales; group outputs tile the C output channels.
///
/// The attention stack is exposed for visualization, and a forced stack can
/// be injected in place of the softmax (both part of the public API).
class Absiu {
 public:
  static constexpr int kGroups = 4;
  static constexpr int kScales = 3;

  Absiu() = default;
  Absiu(ParamStore& ps, Rng& rng, const std::string& name, int c_common,
        PadMode pad_mode = PadMode::kZero);

  /// Inputs must share an identical (B, c_common, h, w) shape; auxiliaries
  /// are expected to have gone through scale alignment already.
  Var forward(const Var& f_main, const Var& f_aux_15, const Var& f_aux_20,
              const Tensor* force_attention = nullptr,
              AttentionStack* attention_out = nullptr) const;

  int c_common() const { return c_; }

 private:
  std::array<ConvBlock, kScales> pre_;     // per-scale processing
  Conv2d common_;                          // 1x1 into the shared space
  std::array<ConvBlock, kGroups> head_a_;  // per-group attention stack
  std::array<Conv2d, kGroups> head_b_;     // 1x1 to 3 scale channels
  int c_ = 0;
};

}  // namespace msrnet
