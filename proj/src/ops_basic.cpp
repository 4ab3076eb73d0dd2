#include <algorithm>
#include <cmath>

#include "msrnet/ops.hpp"

namespace msrnet {

namespace {

void accumulate(Node& dst, const Tensor& g) {
  Tensor& d = dst.ensure_grad();
  const double* src = g.data();
  double* out = d.data();
  for (std::size_t i = 0; i < g.numel(); ++i) out[i] += src[i];
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "add: shape mismatch");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) accumulate(*a, n.grad);
    if (b->requires_grad) accumulate(*b, n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) accumulate(*a, n.grad);
    if (b->requires_grad) {
      Tensor& d = b->ensure_grad();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& d = a->ensure_grad();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor& d = b->ensure_grad();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * a->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
  return make_op(std::move(out), {a}, [a, s](Node& n) {
    Tensor& d = a->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
  return make_op(std::move(out), {a}, [a](Node& n) { accumulate(*a, n.grad); });
}

Var relu(const Var& a) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& d = a->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      if (a->value[i] > 0.0) d[i] += n.grad[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
  Tensor y = out;
  return make_op(std::move(out), {a}, [a, y](Node& n) {
    Tensor& d = a->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i] * y[i] * (1.0 - y[i]);
  });
}

Var gelu(const Var& a) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double x = a->value[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& d = a->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) {
      double x = a->value[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      d[i] += n.grad[i] * (cdf + x * pdf);
    }
  });
}

Var square(const Var& a) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * a->value[i];
  return make_op(std::move(out), {a}, [a](Node& n) {
    Tensor& d = a->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += 2.0 * a->value[i] * n.grad[i];
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat: empty input list");
  const auto& s0 = xs[0]->value.shape();
  require(s0.size() == 4, "concat: expects NCHW tensors");
  int total_c = 0;
  for (const auto& x : xs) {
    const auto& s = x->value.shape();
    require(s.size() == 4 && s[0] == s0[0] && s[2] == s0[2] && s[3] == s0[3],
            "concat: non-channel dims mismatch");
    total_c += s[1];
  }
  int batch = s0[0], h = s0[2], w = s0[3];
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({batch, total_c, h, w});
  for (int b = 0; b < batch; ++b) {
    std::size_t off = static_cast<std::size_t>(b) * total_c * plane;
    for (const auto& x : xs) {
      int c = x->value.dim(1);
      const double* src = x->value.data() + static_cast<std::size_t>(b) * c * plane;
      std::copy(src, src + static_cast<std::size_t>(c) * plane, out.data() + off);
      off += static_cast<std::size_t>(c) * plane;
    }
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return make_op(std::move(out), inputs, [inputs, batch, total_c, plane](Node& n) {
    for (int b = 0; b < batch; ++b) {
      std::size_t off = static_cast<std::size_t>(b) * total_c * plane;
      for (const auto& x : inputs) {
        int c = x->value.dim(1);
        std::size_t len = static_cast<std::size_t>(c) * plane;
        if (x->requires_grad) {
          Tensor& d = x->ensure_grad();
          double* dst = d.data() + static_cast<std::size_t>(b) * len;
          const double* src = n.grad.data() + off;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
        off += len;
      }
    }
  });
}

Var slice_channels(const Var& x, int c0, int c1) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "slice: expects NCHW");
  require(0 <= c0 && c0 < c1 && c1 <= s[1], "slice: channel range out of bounds");
  int batch = s[0], c_in = s[1], h = s[2], w = s[3];
  int c_out = c1 - c0;
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({batch, c_out, h, w});
  for (int b = 0; b < batch; ++b) {
    const double* src = x->value.data() + (static_cast<std::size_t>(b) * c_in + c0) * plane;
    double* dst = out.data() + static_cast<std::size_t>(b) * c_out * plane;
    std::copy(src, src + static_cast<std::size_t>(c_out) * plane, dst);
  }
  return make_op(std::move(out), {x}, [x, c0, c_out, c_in, batch, plane](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b) {
      double* dst = d.data() + (static_cast<std::size_t>(b) * c_in + c0) * plane;
      const double* src = n.grad.data() + static_cast<std::size_t>(b) * c_out * plane;
      for (std::size_t i = 0; i < static_cast<std::size_t>(c_out) * plane; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tensor out = x->value.reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [x](Node& n) {
    Tensor& d = x->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[i] += n.grad[i];
  });
}

Var mul_map(const Var& x, const Var& a) {
  const auto& xs = x->value.shape();
  const auto& as = a->value.shape();
  require(xs.size() == 4 && as.size() == 4 && as[1] == 1 && xs[0] == as[0] &&
              xs[2] == as[2] && xs[3] == as[3],
          "mul_map: expects x:(B,C,H,W), a:(B,1,H,W)");
  int batch = xs[0], c = xs[1];
  std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
  Tensor out(xs);
  for (int b = 0; b < batch; ++b) {
    const double* ap = a->value.data() + b * plane;
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x->value.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      double* op = out.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) op[i] = xp[i] * ap[i];
    }
  }
  return make_op(std::move(out), {x, a}, [x, a, batch, c, plane](Node& n) {
    if (x->requires_grad) {
      Tensor& d = x->ensure_grad();
      for (int b = 0; b < batch; ++b) {
        const double* ap = a->value.data() + b * plane;
        for (int ch = 0; ch < c; ++ch) {
          std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
          for (std::size_t i = 0; i < plane; ++i) d[off + i] += n.grad[off + i] * ap[i];
        }
      }
    }
    if (a->requires_grad) {
      Tensor& d = a->ensure_grad();
      for (int b = 0; b < batch; ++b) {
        double* dp = d.data() + b * plane;
        for (int ch = 0; ch < c; ++ch) {
          std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
          for (std::size_t i = 0; i < plane; ++i) dp[i] += n.grad[off + i] * x->value[off + i];
        }
      }
    }
  });
}

Var mul_gate(const Var& x, const Var& g) {
  const auto& xs = x->value.shape();
  const auto& gs = g->value.shape();
  require(xs.size() == 4 && gs.size() == 4 && gs[0] == xs[0] && gs[1] == xs[1] &&
              gs[2] == 1 && gs[3] == 1,
          "mul_gate: expects x:(B,C,H,W), g:(B,C,1,1)");
  int batch = xs[0], c = xs[1];
  std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
  Tensor out(xs);
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      double gv = g->value[static_cast<std::size_t>(b) * c + ch];
      std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = x->value[off + i] * gv;
    }
  return make_op(std::move(out), {x, g}, [x, g, batch, c, plane](Node& n) {
    for (int b = 0; b < batch; ++b)
      for (int ch = 0; ch < c; ++ch) {
        std::size_t off = (static_cast<std::size_t>(b) * c + ch) * plane;
        if (x->requires_grad) {
          Tensor& d = x->ensure_grad();
          double gv = g->value[static_cast<std::size_t>(b) * c + ch];
          for (std::size_t i = 0; i < plane; ++i) d[off + i] += n.grad[off + i] * gv;
        }
        if (g->requires_grad) {
          Tensor& d = g->ensure_grad();
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += n.grad[off + i] * x->value[off + i];
          d[static_cast<std::size_t>(b) * c + ch] += acc;
        }
      }
  });
}

Var softmax_channels(const Var& x) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "softmax_channels: expects NCHW");
  int batch = s[0], c = s[1];
  std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
  Tensor out(s);
  for (int b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < plane; ++i) {
      double mx = -1e300;
      for (int ch = 0; ch < c; ++ch)
        mx = std::max(mx, x->value[(static_cast<std::size_t>(b) * c + ch) * plane + i]);
      double sum = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        std::size_t k = (static_cast<std::size_t>(b) * c + ch) * plane + i;
        out[k] = std::exp(x->value[k] - mx);
        sum += out[k];
      }
      for (int ch = 0; ch < c; ++ch) out[(static_cast<std::size_t>(b) * c + ch) * plane + i] /= sum;
    }
  Tensor y = out;
  return make_op(std::move(out), {x}, [x, y, batch, c, plane](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < plane; ++i) {
        double dot = 0.0;
        for (int ch = 0; ch < c; ++ch) {
          std::size_t k = (static_cast<std::size_t>(b) * c + ch) * plane + i;
          dot += n.grad[k] * y[k];
        }
        for (int ch = 0; ch < c; ++ch) {
          std::size_t k = (static_cast<std::size_t>(b) * c + ch) * plane + i;
          d[k] += y[k] * (n.grad[k] - dot);
        }
      }
  });
}

Var softmax_lastdim(const Var& x) {
  const auto& s = x->value.shape();
  require(!s.empty(), "softmax_lastdim: empty shape");
  int c = s.back();
  std::size_t rows = x->value.numel() / static_cast<std::size_t>(c);
  Tensor out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = x->value.data() + r * c;
    double* oi = out.data() + r * c;
    double mx = xi[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      sum += oi[j];
    }
    for (int j = 0; j < c; ++j) oi[j] /= sum;
  }
  Tensor y = out;
  return make_op(std::move(out), {x}, [x, y, rows, c](Node& n) {
    Tensor& d = x->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yi = y.data() + r * c;
      const double* gi = n.grad.data() + r * c;
      double* di = d.data() + r * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += gi[j] * yi[j];
      for (int j = 0; j < c; ++j) di[j] += yi[j] * (gi[j] - dot);
    }
  });
}

Var mean_all(const Var& x) {
  double n = static_cast<double>(x->value.numel());
  Tensor out = Tensor::scalar(x->value.sum() / n);
  return make_op(std::move(out), {x}, [x, n](Node& node) {
    Tensor& d = x->ensure_grad();
    double g = node.grad[0] / n;
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g;
  });
}

Var weighted_sum(const Var& x, const Tensor& w) {
  require(x->value.same_shape(w), "weighted_sum: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < w.numel(); ++i) acc += x->value[i] * w[i];
  return make_op(Tensor::scalar(acc), {x}, [x, w](Node& n) {
    Tensor& d = x->ensure_grad();
    for (std::size_t i = 0; i < w.numel(); ++i) d[i] += n.grad[0] * w[i];
  });
}

Var bce_elements(const Var& p, const Tensor& g, double eps) {
  require(p->value.same_shape(g), "bce: shape mismatch between prediction and target");
  const std::size_t n = p->value.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double gi = g[i];
    require(gi == 0.0 || gi == 1.0, "bce: ground truth must be binary");
    double pc = std::min(std::max(p->value[i], eps), 1.0 - eps);
    acc += -gi * std::log(pc) - (1.0 - gi) * std::log(1.0 - pc);
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return make_op(std::move(out), {p}, [p, g, eps, n](Node& node) {
    Tensor& d = p->ensure_grad();
    double s = node.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      double pv = p->value[i];
      if (pv <= eps || pv >= 1.0 - eps) continue;  // clamped region: flat
      d[i] += s * (-g[i] / pv + (1.0 - g[i]) / (1.0 - pv));
    }
  });
}

Var ual_elements(const Var& p) {
  const std::size_t n = p->value.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double t = 2.0 * p->value[i] - 1.0;
    acc += 1.0 - t * t;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return make_op(std::move(out), {p}, [p, n](Node& node) {
    Tensor& d = p->ensure_grad();
    double s = node.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) d[i] += s * (-4.0 * (2.0 * p->value[i] - 1.0));
  });
}

}  // namespace msrnet
