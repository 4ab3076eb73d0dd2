#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msrnet/ops.hpp"
#include "msrnet/rng.hpp"

namespace msrnet {

/// Flat named-parameter registry shared by all modules of one model.
/// Registration order is deterministic, which fixes the RNG consumption
/// order and therefore the seeded initialization.
class ParamStore {
 public:
  Var create(const std::string& name, Tensor init) {
    require(!index_.count(name), "param store: duplicate name " + name);
    Var v = make_param(std::move(init));
    index_[name] = items_.size();
    items_.emplace_back(name, v);
    return v;
  }

  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }

  std::vector<Var> vars() const {
    std::vector<Var> out;
    out.reserve(items_.size());
    for (const auto& [k, v] : items_) out.push_back(v);
    return out;
  }

  Var find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].second;
  }

  std::size_t count() const { return items_.size(); }

  // Test hook: forces every learnable tensor to zero.
  void zero_all() {
    for (auto& [k, v] : items_)
      for (std::size_t i = 0; i < v->value.numel(); ++i) v->value[i] = 0.0;
  }

 private:
  std::vector<std::pair<std::string, Var>> items_;
  std::map<std::string, std::size_t> index_;
};

inline Tensor he_normal(Rng& rng, std::vector<int> shape, int fan_in) {
  Tensor t(std::move(shape));
  double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, std_dev);
  return t;
}

/// 2-D convolution layer, optional bias.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& ps, Rng& rng, const std::string& name, int c_in, int c_out, int k,
         int stride = 1, int pad = -1, PadMode pad_mode = PadMode::kZero, int groups = 1,
         bool bias = true)
      : stride_(stride), pad_(pad < 0 ? k / 2 : pad), pad_mode_(pad_mode), groups_(groups) {
    int fan_in = (c_in / groups) * k * k;
    w_ = ps.create(name + ".weight", he_normal(rng, {c_out, c_in / groups, k, k}, fan_in));
    if (bias) b_ = ps.create(name + ".bias", Tensor({c_out}));
  }

  Var operator()(const Var& x) const { return conv2d(x, w_, b_, stride_, pad_, pad_mode_, groups_); }

  Var weight() const { return w_; }
  Var bias() const { return b_; }

 private:
  Var w_, b_;
  int stride_ = 1, pad_ = 0;
  PadMode pad_mode_ = PadMode::kZero;
  int groups_ = 1;
};

/// Per-sample group normalization (default: one group over all channels).
class GroupNorm {
 public:
  GroupNorm() = default;
  GroupNorm(ParamStore& ps, const std::string& name, int channels, int groups = 1,
            double eps = 1e-5)
      : groups_(groups), eps_(eps) {
    gamma_ = ps.create(name + ".gamma", Tensor::full({channels}, 1.0));
    beta_ = ps.create(name + ".beta", Tensor({channels}));
  }

  Var operator()(const Var& x) const { return group_norm(x, gamma_, beta_, groups_, eps_); }

 private:
  Var gamma_, beta_;
  int groups_ = 1;
  double eps_ = 1e-5;
};

/// conv -> group norm -> optional ReLU; the basic block everywhere.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(ParamStore& ps, Rng& rng, const std::string& name, int c_in, int c_out, int k,
            int stride = 1, PadMode pad_mode = PadMode::kZero, bool relu_after = true)
      : conv_(ps, rng, name + ".conv", c_in, c_out, k, stride, -1, pad_mode),
        norm_(ps, name + ".norm", c_out),
        relu_(relu_after) {}

  Var operator()(const Var& x) const {
    Var y = norm_(conv_(x));
    return relu_ ? relu(y) : y;
  }

 private:
  Conv2d conv_;
  GroupNorm norm_;
  bool relu_ = true;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, Rng& rng, const std::string& name, int c_in, int c_out,
         bool bias = true) {
    w_ = ps.create(name + ".weight", he_normal(rng, {c_out, c_in}, c_in));
    if (bias) b_ = ps.create(name + ".bias", Tensor({c_out}));
  }
  Var operator()(const Var& x) const { return linear(x, w_, b_); }

 private:
  Var w_, b_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int channels, double eps = 1e-6)
      : eps_(eps) {
    gamma_ = ps.create(name + ".gamma", Tensor::full({channels}, 1.0));
    beta_ = ps.create(name + ".beta", Tensor({channels}));
  }
  Var operator()(const Var& x) const { return layer_norm_lastdim(x, gamma_, beta_, eps_); }

 private:
  Var gamma_, beta_;
  double eps_ = 1e-6;
};

}  // namespace msrnet
