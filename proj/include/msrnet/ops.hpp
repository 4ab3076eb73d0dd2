#pragma once

#include <vector>

#include "msrnet/autograd.hpp"

namespace msrnet {

enum class PadMode { kZero, kCircular };

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var gelu(const Var& a);
Var square(const Var& a);

// ---- shape / channel plumbing (NCHW) ----
Var concat_channels(const std::vector<Var>& xs);
Var slice_channels(const Var& x, int c0, int c1);
Var reshape(const Var& x, std::vector<int> shape);

/// x:(B,C,H,W) * a:(B,1,H,W), broadcast over channels.
Var mul_map(const Var& x, const Var& a);
/// x:(B,C,H,W) * g:(B,C,1,1), broadcast over space.
Var mul_gate(const Var& x, const Var& g);

// ---- nonlinear reductions ----
Var softmax_channels(const Var& x);  // over dim 1 of NCHW
Var softmax_lastdim(const Var& x);
Var mean_all(const Var& x);                          // -> scalar
Var weighted_sum(const Var& x, const Tensor& w);     // sum(x*w) -> scalar

// ---- convolution ----
/// 2-D convolution, NCHW. w:(Cout, Cin/groups, kh, kw), optional bias:(Cout).
/// Output spatial dim: floor((H + 2*pad - kh)/stride) + 1.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad,
           PadMode pad_mode = PadMode::kZero, int groups = 1);
Var pad_spatial(const Var& x, int pad, PadMode mode);

// ---- token ops (for the transformer backbone) ----
/// x:(B,N,Cin) * w:(Cout,Cin)^T + b.
Var linear(const Var& x, const Var& w, const Var& b);
/// a:(B,M,K) x b:(B,K,N); with trans_b, b:(B,N,K).
Var bmm(const Var& a, const Var& b, bool trans_b = false);
Var to_tokens(const Var& x);                 // (B,C,H,W) -> (B,H*W,C)
Var to_map(const Var& x, int h, int w);      // (B,N,C)   -> (B,C,h,w)
Var split_heads(const Var& x, int heads);    // (B,N,C)   -> (B*heads,N,C/heads)
Var merge_heads(const Var& x, int heads);    // inverse of split_heads

// ---- normalization ----
/// Per-sample group normalization over (C/groups, H, W) with affine params.
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups,
               double eps = 1e-5);
/// Normalization over the last dim; gamma/beta of that length.
Var layer_norm_lastdim(const Var& x, const Var& gamma, const Var& beta,
                       double eps = 1e-6);

// ---- pooling / resampling ----
/// Adaptive pooling to (oh, ow); bins partition the source axis with
/// start = floor(i*S/T), end = ceil((i+1)*S/T).
Var adaptive_avg_pool(const Var& x, int oh, int ow);
Var adaptive_max_pool(const Var& x, int oh, int ow);
/// Bilinear resampling, align_corners=false convention; edges replicate.
Var bilinear_resize(const Var& x, int oh, int ow);

// Tensor-level bilinear resize used by data pipelines (no graph).
Tensor bilinear_resize_tensor(const Tensor& x, int oh, int ow);

// ---- loss kernels ----
/// mean(-g*log(p) - (1-g)*log(1-p)) with p clamped to [eps, 1-eps].
Var bce_elements(const Var& p, const Tensor& g, double eps);
/// mean(1 - (2p-1)^2).
Var ual_elements(const Var& p);

}  // namespace msrnet
