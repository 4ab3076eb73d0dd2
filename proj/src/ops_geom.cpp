#include <algorithm>
#include <cmath>

#include "msrnet/ops.hpp"

namespace msrnet {

namespace {

inline int bin_start(int i, int src, int dst) {
  return static_cast<int>((static_cast<long long>(i) * src) / dst);
}
inline int bin_end(int i, int src, int dst) {
  return static_cast<int>(((static_cast<long long>(i) + 1) * src + dst - 1) / dst);
}

struct Lerp {
  int lo, hi;
  double t;
};

// align_corners=false source coordinate; edges replicate.
Lerp lerp_coeff(int out_i, int out_n, int in_n) {
  double src = (out_i + 0.5) * (static_cast<double>(in_n) / out_n) - 0.5;
  double f = std::floor(src);
  int lo = static_cast<int>(f);
  double t = src - f;
  int lo_c = std::clamp(lo, 0, in_n - 1);
  int hi_c = std::clamp(lo + 1, 0, in_n - 1);
  return {lo_c, hi_c, t};
}

}  // namespace

Var adaptive_avg_pool(const Var& x, int oh, int ow) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "avg_pool: expects NCHW");
  require(oh >= 1 && ow >= 1 && oh <= s[2] && ow <= s[3],
          "avg_pool: target larger than source");
  int batch = s[0], c = s[1], h = s[2], w = s[3];
  Tensor out({batch, c, oh, ow});
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = x->value.data() + (static_cast<std::size_t>(b) * c + ch) *
                                                static_cast<std::size_t>(h) * w;
      double* dst = out.data() + (static_cast<std::size_t>(b) * c + ch) *
                                     static_cast<std::size_t>(oh) * ow;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          int y0 = bin_start(oy, h, oh), y1 = bin_end(oy, h, oh);
          int x0 = bin_start(ox, w, ow), x1 = bin_end(ox, w, ow);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y)
            for (int xx = x0; xx < x1; ++xx) acc += src[static_cast<std::size_t>(y) * w + xx];
          dst[static_cast<std::size_t>(oy) * ow + ox] = acc / ((y1 - y0) * (x1 - x0));
        }
    }
  return make_op(std::move(out), {x}, [x, oh, ow, batch, c, h, w](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (int ch = 0; ch < c; ++ch) {
        double* dst = d.data() + (static_cast<std::size_t>(b) * c + ch) *
                                     static_cast<std::size_t>(h) * w;
        const double* g = n.grad.data() + (static_cast<std::size_t>(b) * c + ch) *
                                              static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            int y0 = bin_start(oy, h, oh), y1 = bin_end(oy, h, oh);
            int x0 = bin_start(ox, w, ow), x1 = bin_end(ox, w, ow);
            double gv = g[static_cast<std::size_t>(oy) * ow + ox] / ((y1 - y0) * (x1 - x0));
            for (int y = y0; y < y1; ++y)
              for (int xx = x0; xx < x1; ++xx) dst[static_cast<std::size_t>(y) * w + xx] += gv;
          }
      }
  });
}

Var adaptive_max_pool(const Var& x, int oh, int ow) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "max_pool: expects NCHW");
  require(oh >= 1 && ow >= 1 && oh <= s[2] && ow <= s[3],
          "max_pool: target larger than source");
  int batch = s[0], c = s[1], h = s[2], w = s[3];
  Tensor out({batch, c, oh, ow});
  // First-maximum tie break keeps backward deterministic.
  std::vector<std::size_t> argmax(out.numel());
  std::size_t oi = 0;
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      std::size_t base = (static_cast<std::size_t>(b) * c + ch) * static_cast<std::size_t>(h) * w;
      const double* src = x->value.data() + base;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          int y0 = bin_start(oy, h, oh), y1 = bin_end(oy, h, oh);
          int x0 = bin_start(ox, w, ow), x1 = bin_end(ox, w, ow);
          double best = src[static_cast<std::size_t>(y0) * w + x0];
          std::size_t best_i = static_cast<std::size_t>(y0) * w + x0;
          for (int y = y0; y < y1; ++y)
            for (int xx = x0; xx < x1; ++xx) {
              std::size_t k = static_cast<std::size_t>(y) * w + xx;
              if (src[k] > best) {
                best = src[k];
                best_i = k;
              }
            }
          out[oi] = best;
          argmax[oi] = base + best_i;
        }
    }
  return make_op(std::move(out), {x}, [x, argmax](Node& n) {
    Tensor& d = x->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i) d[argmax[i]] += n.grad[i];
  });
}

Var bilinear_resize(const Var& x, int oh, int ow) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "resize: expects NCHW");
  require(oh >= 1 && ow >= 1, "resize: bad target size");
  int batch = s[0], c = s[1], h = s[2], w = s[3];
  if (oh == h && ow == w) return x;
  std::vector<Lerp> ys(oh), xs(ow);
  for (int i = 0; i < oh; ++i) ys[i] = lerp_coeff(i, oh, h);
  for (int i = 0; i < ow; ++i) xs[i] = lerp_coeff(i, ow, w);
  Tensor out({batch, c, oh, ow});
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = x->value.data() + (static_cast<std::size_t>(b) * c + ch) *
                                                static_cast<std::size_t>(h) * w;
      double* dst = out.data() + (static_cast<std::size_t>(b) * c + ch) *
                                     static_cast<std::size_t>(oh) * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const Lerp& ly = ys[oy];
        for (int ox = 0; ox < ow; ++ox) {
          const Lerp& lx = xs[ox];
          double v00 = src[static_cast<std::size_t>(ly.lo) * w + lx.lo];
          double v01 = src[static_cast<std::size_t>(ly.lo) * w + lx.hi];
          double v10 = src[static_cast<std::size_t>(ly.hi) * w + lx.lo];
          double v11 = src[static_cast<std::size_t>(ly.hi) * w + lx.hi];
          double top = v00 + (v01 - v00) * lx.t;
          double bot = v10 + (v11 - v10) * lx.t;
          dst[static_cast<std::size_t>(oy) * ow + ox] = top + (bot - top) * ly.t;
        }
      }
    }
  return make_op(std::move(out), {x}, [x, ys, xs, batch, c, h, w, oh, ow](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (int ch = 0; ch < c; ++ch) {
        double* dst = d.data() + (static_cast<std::size_t>(b) * c + ch) *
                                     static_cast<std::size_t>(h) * w;
        const double* g = n.grad.data() + (static_cast<std::size_t>(b) * c + ch) *
                                              static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const Lerp& ly = ys[oy];
          for (int ox = 0; ox < ow; ++ox) {
            const Lerp& lx = xs[ox];
            double gv = g[static_cast<std::size_t>(oy) * ow + ox];
            dst[static_cast<std::size_t>(ly.lo) * w + lx.lo] += gv * (1 - ly.t) * (1 - lx.t);
            dst[static_cast<std::size_t>(ly.lo) * w + lx.hi] += gv * (1 - ly.t) * lx.t;
            dst[static_cast<std::size_t>(ly.hi) * w + lx.lo] += gv * ly.t * (1 - lx.t);
            dst[static_cast<std::size_t>(ly.hi) * w + lx.hi] += gv * ly.t * lx.t;
          }
        }
      }
  });
}

Tensor bilinear_resize_tensor(const Tensor& x, int oh, int ow) {
  Tensor in = x;
  bool was_2d = false, was_3d = false;
  if (in.ndim() == 2) {
    in = in.reshaped({1, 1, x.dim(0), x.dim(1)});
    was_2d = true;
  } else if (in.ndim() == 3) {
    in = in.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
    was_3d = true;
  }
  Var v = make_const(std::move(in));
  Tensor out = bilinear_resize(v, oh, ow)->value;
  if (was_2d) return out.reshaped({oh, ow});
  if (was_3d) return out.reshaped({out.dim(1), oh, ow});
  return out;
}

Var to_tokens(const Var& x) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "to_tokens: expects NCHW");
  int batch = s[0], c = s[1], h = s[2], w = s[3];
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({batch, h * w, c});
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = x->value.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        out[(static_cast<std::size_t>(b) * plane + i) * c + ch] = src[i];
    }
  return make_op(std::move(out), {x}, [x, batch, c, plane](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (int ch = 0; ch < c; ++ch) {
        double* dst = d.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          dst[i] += n.grad[(static_cast<std::size_t>(b) * plane + i) * c + ch];
      }
  });
}

Var to_map(const Var& x, int h, int w) {
  const auto& s = x->value.shape();
  require(s.size() == 3 && s[1] == h * w, "to_map: token count does not match h*w");
  int batch = s[0], c = s[2];
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({batch, c, h, w});
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      double* dst = out.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        dst[i] = x->value[(static_cast<std::size_t>(b) * plane + i) * c + ch];
    }
  return make_op(std::move(out), {x}, [x, batch, c, plane](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (int ch = 0; ch < c; ++ch) {
        const double* g = n.grad.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          d[(static_cast<std::size_t>(b) * plane + i) * c + ch] += g[i];
      }
  });
}

Var split_heads(const Var& x, int heads) {
  const auto& s = x->value.shape();
  require(s.size() == 3 && s[2] % heads == 0, "split_heads: channels not divisible by heads");
  int batch = s[0], n_tok = s[1], c = s[2];
  int dh = c / heads;
  Tensor out({batch * heads, n_tok, dh});
  for (int b = 0; b < batch; ++b)
    for (int hd = 0; hd < heads; ++hd)
      for (int t = 0; t < n_tok; ++t) {
        const double* src =
            x->value.data() + (static_cast<std::size_t>(b) * n_tok + t) * c + hd * dh;
        double* dst = out.data() +
                      ((static_cast<std::size_t>(b) * heads + hd) * n_tok + t) * dh;
        std::copy(src, src + dh, dst);
      }
  return make_op(std::move(out), {x}, [x, heads, batch, n_tok, c, dh](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (int hd = 0; hd < heads; ++hd)
        for (int t = 0; t < n_tok; ++t) {
          double* dst = d.data() + (static_cast<std::size_t>(b) * n_tok + t) * c + hd * dh;
          const double* src = n.grad.data() +
                              ((static_cast<std::size_t>(b) * heads + hd) * n_tok + t) * dh;
          for (int j = 0; j < dh; ++j) dst[j] += src[j];
        }
  });
}

Var merge_heads(const Var& x, int heads) {
  const auto& s = x->value.shape();
  require(s.size() == 3 && s[0] % heads == 0, "merge_heads: batch not divisible by heads");
  int batch = s[0] / heads, n_tok = s[1], dh = s[2];
  int c = dh * heads;
  Tensor out({batch, n_tok, c});
  for (int b = 0; b < batch; ++b)
    for (int hd = 0; hd < heads; ++hd)
      for (int t = 0; t < n_tok; ++t) {
        const double* src = x->value.data() +
                            ((static_cast<std::size_t>(b) * heads + hd) * n_tok + t) * dh;
        double* dst = out.data() + (static_cast<std::size_t>(b) * n_tok + t) * c + hd * dh;
        std::copy(src, src + dh, dst);
      }
  return make_op(std::move(out), {x}, [x, heads, batch, n_tok, c, dh](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (int hd = 0; hd < heads; ++hd)
        for (int t = 0; t < n_tok; ++t) {
          const double* src =
              n.grad.data() + (static_cast<std::size_t>(b) * n_tok + t) * c + hd * dh;
          double* dst = d.data() +
                        ((static_cast<std::size_t>(b) * heads + hd) * n_tok + t) * dh;
          for (int j = 0; j < dh; ++j) dst[j] += src[j];
        }
  });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "group_norm: expects NCHW");
  int batch = s[0], c = s[1], h = s[2], w = s[3];
  require(groups >= 1 && c % groups == 0, "group_norm: channels not divisible by groups");
  require(gamma->value.numel() == static_cast<std::size_t>(c) &&
              beta->value.numel() == static_cast<std::size_t>(c),
          "group_norm: affine size mismatch");
  int cg = c / groups;
  std::size_t plane = static_cast<std::size_t>(h) * w;
  std::size_t m = static_cast<std::size_t>(cg) * plane;
  Tensor out(s);
  Tensor xhat(s);
  std::vector<double> inv_sigma(static_cast<std::size_t>(batch) * groups);
  for (int b = 0; b < batch; ++b)
    for (int g = 0; g < groups; ++g) {
      std::size_t base = (static_cast<std::size_t>(b) * c + static_cast<std::size_t>(g) * cg) * plane;
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += x->value[base + i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double dv = x->value[base + i] - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(m);
      double inv = 1.0 / std::sqrt(var + eps);
      inv_sigma[static_cast<std::size_t>(b) * groups + g] = inv;
      for (int cc = 0; cc < cg; ++cc) {
        double gm = gamma->value[static_cast<std::size_t>(g) * cg + cc];
        double bt = beta->value[static_cast<std::size_t>(g) * cg + cc];
        std::size_t off = base + static_cast<std::size_t>(cc) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          double xh = (x->value[off + i] - mean) * inv;
          xhat[off + i] = xh;
          out[off + i] = gm * xh + bt;
        }
      }
    }
  return make_op(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_sigma, batch, c, groups, cg, plane, m](Node& n) {
        for (int b = 0; b < batch; ++b)
          for (int g = 0; g < groups; ++g) {
            std::size_t base =
                (static_cast<std::size_t>(b) * c + static_cast<std::size_t>(g) * cg) * plane;
            double inv = inv_sigma[static_cast<std::size_t>(b) * groups + g];
            if (gamma->requires_grad || beta->requires_grad) {
              Tensor& dg = gamma->ensure_grad();
              Tensor& db = beta->ensure_grad();
              for (int cc = 0; cc < cg; ++cc) {
                std::size_t off = base + static_cast<std::size_t>(cc) * plane;
                double ag = 0.0, ab = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                  ag += n.grad[off + i] * xhat[off + i];
                  ab += n.grad[off + i];
                }
                dg[static_cast<std::size_t>(g) * cg + cc] += ag;
                db[static_cast<std::size_t>(g) * cg + cc] += ab;
              }
            }
            if (x->requires_grad) {
              // t = dy * gamma; dx = inv * (t - mean(t) - xhat * mean(t*xhat))
              double sum_t = 0.0, sum_txh = 0.0;
              for (int cc = 0; cc < cg; ++cc) {
                double gm = gamma->value[static_cast<std::size_t>(g) * cg + cc];
                std::size_t off = base + static_cast<std::size_t>(cc) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                  double t = n.grad[off + i] * gm;
                  sum_t += t;
                  sum_txh += t * xhat[off + i];
                }
              }
              double mean_t = sum_t / static_cast<double>(m);
              double mean_txh = sum_txh / static_cast<double>(m);
              Tensor& dx = x->ensure_grad();
              for (int cc = 0; cc < cg; ++cc) {
                double gm = gamma->value[static_cast<std::size_t>(g) * cg + cc];
                std::size_t off = base + static_cast<std::size_t>(cc) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                  double t = n.grad[off + i] * gm;
                  dx[off + i] += inv * (t - mean_t - xhat[off + i] * mean_txh);
                }
              }
            }
          }
      });
}

Var layer_norm_lastdim(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const auto& s = x->value.shape();
  require(!s.empty(), "layer_norm: empty shape");
  int c = s.back();
  require(gamma->value.numel() == static_cast<std::size_t>(c) &&
              beta->value.numel() == static_cast<std::size_t>(c),
          "layer_norm: affine size mismatch");
  std::size_t rows = x->value.numel() / static_cast<std::size_t>(c);
  Tensor out(s);
  Tensor xhat(s);
  std::vector<double> inv_sigma(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = x->value.data() + r * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += xi[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double dv = xi[j] - mean;
      var += dv * dv;
    }
    var /= c;
    double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = inv;
    for (int j = 0; j < c; ++j) {
      double xh = (xi[j] - mean) * inv;
      xhat[r * c + j] = xh;
      out[r * c + j] = gamma->value[j] * xh + beta->value[j];
    }
  }
  return make_op(std::move(out), {x, gamma, beta},
                 [x, gamma, beta, xhat, inv_sigma, rows, c](Node& n) {
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* gi = n.grad.data() + r * c;
                     const double* xh = xhat.data() + r * c;
                     if (gamma->requires_grad || beta->requires_grad) {
                       Tensor& dg = gamma->ensure_grad();
                       Tensor& db = beta->ensure_grad();
                       for (int j = 0; j < c; ++j) {
                         dg[j] += gi[j] * xh[j];
                         db[j] += gi[j];
                       }
                     }
                     if (x->requires_grad) {
                       double sum_t = 0.0, sum_txh = 0.0;
                       for (int j = 0; j < c; ++j) {
                         double t = gi[j] * gamma->value[j];
                         sum_t += t;
                         sum_txh += t * xh[j];
                       }
                       double mean_t = sum_t / c, mean_txh = sum_txh / c;
                       Tensor& dx = x->ensure_grad();
                       for (int j = 0; j < c; ++j) {
                         double t = gi[j] * gamma->value[j];
                         dx[r * c + j] += inv_sigma[r] * (t - mean_t - xh[j] * mean_txh);
                       }
                     }
                   }
                 });
}

}  // namespace msrnet
