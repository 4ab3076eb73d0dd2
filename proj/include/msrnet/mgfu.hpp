#pragma once

#include <array>
#include <string>
#include <vector>

#include "msrnet/nn.hpp"

namespace msrnet {

/// Debug view of one MGFU forward: the channel-attention vector and the
/// three-way chain splits per group (group 6 has no propagate part).
struct MgfuTrace {
  Tensor gate;                         // (B, 6*c_common, 1, 1), values in (0,1)
  std::vector<Tensor> propagate;       // g1_j, 5 entries
  std::vector<Tensor> gate_parts;      // g2_j, 6 entries
  std::vector<Tensor> feature_parts;   // g3_j, 6 entries
};

/// Multi-Granularity Fusion Unit.
///
/// Fuses a stage's features with its feedback maps, then refines through six
/// chained channel groups:
///  0. concat(x, feedback...) -> 1x1 conv back to C (feedback maps must
///     already be resized and channel-matched; order is deepest-first and is
///     part of the contract),
///  1. 1x1 conv expansion to 6C, split into six C-wide groups,
///  2. group 1: conv -> three C-wide parts (propagate/gate/feature);
///     groups 2..5: conv(concat(group, previous propagate)) -> three parts;
///     group 6: conv -> two parts (gate/feature),
///  3. gate path: concat g2 parts -> global avg pool -> 1x1 squeeze (ratio
///     4) -> relu -> 1x1 expand -> sigmoid,
///  4. gate reweights the concat of g3 parts,
///  5. 3x3 refine conv + norm, residual add of x, relu.
class Mgfu {
 public:
  static constexpr int kChainGroups = 6;
  static constexpr int kSqueezeRatio = 4;

  Mgfu() = default;
  /// `feedback_count` fixes the width of the fusion entry conv.
  Mgfu(ParamStore& ps, Rng& rng, const std::string& name, int c_common, int feedback_count);

  Var forward(const Var& x, const std::vector<Var>& feedback, MgfuTrace* trace = nullptr) const;

  int c_common() const { return c_; }
  int feedback_count() const { return n_fb_; }

 private:
  Conv2d entry_;
  ConvBlock expand_;
  std::array<ConvBlock, kChainGroups> chain_;
  Conv2d squeeze_, unsqueeze_;
  Conv2d refine_;
  GroupNorm refine_norm_;
  int c_ = 0, n_fb_ = 0;
};

}  // namespace msrnet
