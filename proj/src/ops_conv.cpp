#include <algorithm>
#include <cmath>

#include "msrnet/ops.hpp"

namespace msrnet {

namespace {

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(int m_dim, int n_dim, int k_dim, const double* a, const double* b, double* c) {
  for (int m = 0; m < m_dim; ++m) {
    double* cm = c + static_cast<std::size_t>(m) * n_dim;
    const double* am = a + static_cast<std::size_t>(m) * k_dim;
    for (int k = 0; k < k_dim; ++k) {
      double av = am[k];
      if (av == 0.0) continue;
      const double* bk = b + static_cast<std::size_t>(k) * n_dim;
      for (int n = 0; n < n_dim; ++n) cm[n] += av * bk[n];
    }
  }
}

// C[M,N] += A^T * B, with A stored as [K,M]
void gemm_tn(int m_dim, int n_dim, int k_dim, const double* a, const double* b, double* c) {
  for (int k = 0; k < k_dim; ++k) {
    const double* ak = a + static_cast<std::size_t>(k) * m_dim;
    const double* bk = b + static_cast<std::size_t>(k) * n_dim;
    for (int m = 0; m < m_dim; ++m) {
      double av = ak[m];
      if (av == 0.0) continue;
      double* cm = c + static_cast<std::size_t>(m) * n_dim;
      for (int n = 0; n < n_dim; ++n) cm[n] += av * bk[n];
    }
  }
}

// C[M,N] += A * B^T, with B stored as [N,K]
void gemm_nt(int m_dim, int n_dim, int k_dim, const double* a, const double* b, double* c) {
  for (int m = 0; m < m_dim; ++m) {
    const double* am = a + static_cast<std::size_t>(m) * k_dim;
    double* cm = c + static_cast<std::size_t>(m) * n_dim;
    for (int n = 0; n < n_dim; ++n) {
      const double* bn = b + static_cast<std::size_t>(n) * k_dim;
      double acc = 0.0;
      for (int k = 0; k < k_dim; ++k) acc += am[k] * bn[k];
      cm[n] += acc;
    }
  }
}

// cols: [Cin*kh*kw, Ho*Wo] from one image (C,H,W), no padding (pre-padded input).
void im2col(const double* img, int c_in, int h, int w, int kh, int kw, int stride,
            int ho, int wo, double* cols) {
  std::size_t l = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        double* row = cols + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * l;
        const double* plane = img + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride + ky;
          const double* src = plane + static_cast<std::size_t>(iy) * w + kx;
          double* dst = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) dst[ox] = src[ox * stride];
        }
      }
}

void col2im(const double* cols, int c_in, int h, int w, int kh, int kw, int stride,
            int ho, int wo, double* img) {
  std::size_t l = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const double* row = cols + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * l;
        double* plane = img + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride + ky;
          double* dst = plane + static_cast<std::size_t>(iy) * w + kx;
          const double* src = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) dst[ox * stride] += src[ox];
        }
      }
}

}  // namespace

Var pad_spatial(const Var& x, int pad, PadMode mode) {
  const auto& s = x->value.shape();
  require(s.size() == 4, "pad: expects NCHW");
  require(pad >= 0, "pad: negative padding");
  if (pad == 0) return x;
  int batch = s[0], c = s[1], h = s[2], w = s[3];
  int hp = h + 2 * pad, wp = w + 2 * pad;
  if (mode == PadMode::kCircular)
    require(h >= pad && w >= pad, "pad: circular padding wider than the map");
  Tensor out({batch, c, hp, wp});
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = x->value.data() + (static_cast<std::size_t>(b) * c + ch) *
                                                static_cast<std::size_t>(h) * w;
      double* dst = out.data() + (static_cast<std::size_t>(b) * c + ch) *
                                     static_cast<std::size_t>(hp) * wp;
      for (int y = 0; y < hp; ++y)
        for (int xx = 0; xx < wp; ++xx) {
          int sy = y - pad, sx = xx - pad;
          if (mode == PadMode::kCircular) {
            sy = (sy % h + h) % h;
            sx = (sx % w + w) % w;
            dst[static_cast<std::size_t>(y) * wp + xx] = src[static_cast<std::size_t>(sy) * w + sx];
          } else if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
            dst[static_cast<std::size_t>(y) * wp + xx] = src[static_cast<std::size_t>(sy) * w + sx];
          }
        }
    }
  return make_op(std::move(out), {x}, [x, pad, mode, batch, c, h, w, hp, wp](Node& n) {
    Tensor& d = x->ensure_grad();
    for (int b = 0; b < batch; ++b)
      for (int ch = 0; ch < c; ++ch) {
        double* dst = d.data() + (static_cast<std::size_t>(b) * c + ch) *
                                     static_cast<std::size_t>(h) * w;
        const double* src = n.grad.data() + (static_cast<std::size_t>(b) * c + ch) *
                                                static_cast<std::size_t>(hp) * wp;
        for (int y = 0; y < hp; ++y)
          for (int xx = 0; xx < wp; ++xx) {
            int sy = y - pad, sx = xx - pad;
            if (mode == PadMode::kCircular) {
              sy = (sy % h + h) % h;
              sx = (sx % w + w) % w;
            } else if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              continue;
            }
            dst[static_cast<std::size_t>(sy) * w + sx] += src[static_cast<std::size_t>(y) * wp + xx];
          }
      }
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad,
           PadMode pad_mode, int groups) {
  Var xin = pad > 0 ? pad_spatial(x, pad, pad_mode) : x;
  const auto& xs = xin->value.shape();
  const auto& ws = w->value.shape();
  require(xs.size() == 4 && ws.size() == 4, "conv2d: expects NCHW input and OIHW weights");
  int batch = xs[0], c_in = xs[1], h = xs[2], wd = xs[3];
  int c_out = ws[0], kh = ws[2], kw = ws[3];
  require(groups >= 1 && c_in % groups == 0 && c_out % groups == 0,
          "conv2d: channels not divisible by groups");
  require(ws[1] == c_in / groups, "conv2d: weight input-channel mismatch");
  require(stride >= 1, "conv2d: bad stride");
  require(h >= kh && wd >= kw, "conv2d: input smaller than kernel");
  if (b) require(b->value.numel() == static_cast<std::size_t>(c_out), "conv2d: bias size mismatch");

  int ho = (h - kh) / stride + 1;
  int wo = (wd - kw) / stride + 1;
  std::size_t l = static_cast<std::size_t>(ho) * wo;
  int cg_in = c_in / groups, cg_out = c_out / groups;
  std::size_t krows = static_cast<std::size_t>(cg_in) * kh * kw;

  Tensor out({batch, c_out, ho, wo});
  // The column buffer is shared across output rows but rebuilt in backward;
  // keeping it out of the closure trades compute for tape memory.
  std::vector<double> cols(static_cast<std::size_t>(c_in) * kh * kw * l);
  for (int bi = 0; bi < batch; ++bi) {
    im2col(xin->value.data() + static_cast<std::size_t>(bi) * c_in * h * wd, c_in, h, wd, kh,
           kw, stride, ho, wo, cols.data());
    for (int g = 0; g < groups; ++g) {
      gemm_nn(cg_out, static_cast<int>(l), static_cast<int>(krows),
              w->value.data() + static_cast<std::size_t>(g) * cg_out * krows,
              cols.data() + static_cast<std::size_t>(g) * krows * l,
              out.data() + (static_cast<std::size_t>(bi) * c_out + g * cg_out) * l);
    }
    if (b) {
      for (int co = 0; co < c_out; ++co) {
        double bias = b->value[co];
        double* op = out.data() + (static_cast<std::size_t>(bi) * c_out + co) * l;
        for (std::size_t i = 0; i < l; ++i) op[i] += bias;
      }
    }
  }

  std::vector<Var> inputs = b ? std::vector<Var>{xin, w, b} : std::vector<Var>{xin, w};
  return make_op(
      std::move(out), inputs,
      [xin, w, b, stride, groups, batch, c_in, h, wd, c_out, kh, kw, ho, wo, l, cg_in,
       cg_out, krows](Node& n) {
        std::vector<double> cols(static_cast<std::size_t>(c_in) * kh * kw * l);
        std::vector<double> dcols;
        if (xin->requires_grad) dcols.assign(cols.size(), 0.0);
        for (int bi = 0; bi < batch; ++bi) {
          const double* gout = n.grad.data() + static_cast<std::size_t>(bi) * c_out * l;
          if (w->requires_grad || xin->requires_grad)
            im2col(xin->value.data() + static_cast<std::size_t>(bi) * c_in * h * wd, c_in, h,
                   wd, kh, kw, stride, ho, wo, cols.data());
          if (w->requires_grad) {
            Tensor& dw = w->ensure_grad();
            for (int g = 0; g < groups; ++g)
              gemm_nt(cg_out, static_cast<int>(krows), static_cast<int>(l),
                      gout + static_cast<std::size_t>(g) * cg_out * l,
                      cols.data() + static_cast<std::size_t>(g) * krows * l,
                      dw.data() + static_cast<std::size_t>(g) * cg_out * krows);
          }
          if (b && b->requires_grad) {
            Tensor& db = b->ensure_grad();
            for (int co = 0; co < c_out; ++co) {
              const double* gp = gout + static_cast<std::size_t>(co) * l;
              double acc = 0.0;
              for (std::size_t i = 0; i < l; ++i) acc += gp[i];
              db[co] += acc;
            }
          }
          if (xin->requires_grad) {
            std::fill(dcols.begin(), dcols.end(), 0.0);
            for (int g = 0; g < groups; ++g)
              gemm_tn(static_cast<int>(krows), static_cast<int>(l), cg_out,
                      w->value.data() + static_cast<std::size_t>(g) * cg_out * krows,
                      gout + static_cast<std::size_t>(g) * cg_out * l,
                      dcols.data() + static_cast<std::size_t>(g) * krows * l);
            Tensor& dx = xin->ensure_grad();
            col2im(dcols.data(), c_in, h, wd, kh, kw, stride, ho, wo,
                   dx.data() + static_cast<std::size_t>(bi) * c_in * h * wd);
          }
        }
      });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  require(xs.size() == 3 && ws.size() == 2 && xs[2] == ws[1],
          "linear: expects x:(B,N,Cin), w:(Cout,Cin)");
  int batch = xs[0], n_tok = xs[1], c_in = xs[2], c_out = ws[0];
  if (b) require(b->value.numel() == static_cast<std::size_t>(c_out), "linear: bias size mismatch");
  int rows = batch * n_tok;
  Tensor out({batch, n_tok, c_out});
  gemm_nt(rows, c_out, c_in, x->value.data(), w->value.data(), out.data());
  if (b)
    for (int r = 0; r < rows; ++r)
      for (int o = 0; o < c_out; ++o) out[static_cast<std::size_t>(r) * c_out + o] += b->value[o];
  std::vector<Var> inputs = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_op(std::move(out), inputs, [x, w, b, rows, c_in, c_out](Node& n) {
    if (x->requires_grad) {
      Tensor& dx = x->ensure_grad();
      gemm_nn(rows, c_in, c_out, n.grad.data(), w->value.data(), dx.data());
    }
    if (w->requires_grad) {
      Tensor& dw = w->ensure_grad();
      gemm_tn(c_out, c_in, rows, n.grad.data(), x->value.data(), dw.data());
    }
    if (b && b->requires_grad) {
      Tensor& db = b->ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int o = 0; o < c_out; ++o) db[o] += n.grad[static_cast<std::size_t>(r) * c_out + o];
    }
  });
}

Var bmm(const Var& a, const Var& b, bool trans_b) {
  const auto& as = a->value.shape();
  const auto& bs = b->value.shape();
  require(as.size() == 3 && bs.size() == 3 && as[0] == bs[0], "bmm: expects (B,M,K)x(B,K,N)");
  int batch = as[0], m = as[1], k = as[2];
  int n = trans_b ? bs[1] : bs[2];
  require((trans_b ? bs[2] : bs[1]) == k, "bmm: inner dim mismatch");
  Tensor out({batch, m, n});
  for (int bi = 0; bi < batch; ++bi) {
    const double* ap = a->value.data() + static_cast<std::size_t>(bi) * m * k;
    const double* bp = b->value.data() + static_cast<std::size_t>(bi) * (trans_b ? n * k : k * n);
    double* op = out.data() + static_cast<std::size_t>(bi) * m * n;
    if (trans_b)
      gemm_nt(m, n, k, ap, bp, op);
    else
      gemm_nn(m, n, k, ap, bp, op);
  }
  return make_op(std::move(out), {a, b}, [a, b, trans_b, batch, m, k, n](Node& node) {
    for (int bi = 0; bi < batch; ++bi) {
      const double* g = node.grad.data() + static_cast<std::size_t>(bi) * m * n;
      const double* ap = a->value.data() + static_cast<std::size_t>(bi) * m * k;
      const double* bp =
          b->value.data() + static_cast<std::size_t>(bi) * (trans_b ? n * k : k * n);
      if (a->requires_grad) {
        double* da = a->ensure_grad().data() + static_cast<std::size_t>(bi) * m * k;
        if (trans_b)
          gemm_nn(m, k, n, g, bp, da);  // dA = G * B
        else
          gemm_nt(m, k, n, g, bp, da);  // dA = G * B^T
      }
      if (b->requires_grad) {
        double* db =
            b->ensure_grad().data() + static_cast<std::size_t>(bi) * (trans_b ? n * k : k * n);
        if (trans_b)
          gemm_tn(n, k, m, g, ap, db);  // dB = G^T * A
        else
          gemm_tn(k, n, m, ap, g, db);  // dB = A^T * G
      }
    }
  });
}

}  // namespace msrnet
