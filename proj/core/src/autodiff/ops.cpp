#include "mdeeg/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "mdeeg/rng.hpp"

namespace mdeeg::ad {
inline namespace MDEEG_AD_ABI {
namespace {

using MatR = Eigen::Matrix<real_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using Ptr = std::shared_ptr<TensorData>;

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

void require_rank(const std::string& op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) shape_error(op, "expected rank " + std::to_string(rank) + ", got " + to_string(t.shape()));
}

void require_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, to_string(a.shape()) + " vs " + to_string(b.shape()));
}

bool tracks(const Graph& g, std::initializer_list<const Tensor*> inputs) {
  if (!g.recording()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Gradient buffer of an input that needs one, or nullptr.
real_t* grad_of(const Ptr& p) {
  if (!p->requires_grad) return nullptr;
  p->ensure_grad();
  return p->grad.data();
}

template <typename Forward, typename Derivative>
Tensor unary(Graph& g, const Tensor& x, Forward f, Derivative df) {
  Tensor y(x.shape());
  const auto xv = x.data();
  auto yv = y.data();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = f(xv[i]);
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [xp, yp, df] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      for (std::size_t i = 0; i < yp->value.size(); ++i) gx[i] += yp->grad[i] * df(xp->value[i], yp->value[i]);
    });
  }
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

Tensor fc(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("fc", x, 2);
  require_rank("fc", w, 2);
  require_rank("fc", b, 1);
  const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(1);
  if (w.dim(0) != in) shape_error("fc", "x " + to_string(x.shape()) + " vs W " + to_string(w.shape()));
  if (b.dim(0) != out) shape_error("fc", "bias " + to_string(b.shape()) + " vs W " + to_string(w.shape()));

  Tensor y({n, out});
  const auto ei = static_cast<Eigen::Index>(in), eo = static_cast<Eigen::Index>(out),
             en = static_cast<Eigen::Index>(n);
  MapR ym(y.data().data(), en, eo);
  ym.noalias() = CMapR(x.data().data(), en, ei) * CMapR(w.data().data(), ei, eo);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < out; ++c) y[r * out + c] += b[c];
  }
  if (tracks(g, {&x, &w, &b})) {
    Ptr xp = x.impl(), wp = w.impl(), bp = b.impl(), yp = y.impl();
    g.record({yp}, [=] {
      CMapR dy(yp->grad.data(), en, eo);
      if (real_t* gx = grad_of(xp)) {
        MapR(gx, en, ei).noalias() += dy * CMapR(wp->value.data(), ei, eo).transpose();
      }
      if (real_t* gw = grad_of(wp)) {
        MapR(gw, ei, eo).noalias() += CMapR(xp->value.data(), en, ei).transpose() * dy;
      }
      if (real_t* gb = grad_of(bp)) {
        for (std::size_t c = 0; c < out; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < n; ++r) s += yp->grad[r * out + c];
          gb[c] += static_cast<real_t>(s);
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

constexpr std::size_t kTile = 64;

// out[t] (+)= sum_{r, kk} w[r * ksz + kk] * in[r * stride + t + kk] for t < width,
// over `nrows` input rows. The accumulator tile stays in registers.
template <std::size_t W>
void correlate_tile(const real_t* in, std::size_t stride, std::size_t nrows, const real_t* w, std::size_t ksz,
                    real_t* out) {
  real_t acc[W] = {};
  for (std::size_t r = 0; r < nrows; ++r) {
    const real_t* row = in + r * stride;
    const real_t* wr = w + r * ksz;
    for (std::size_t kk = 0; kk < ksz; ++kk) {
      const real_t wv = wr[kk];
      const real_t* src = row + kk;
      for (std::size_t t = 0; t < W; ++t) acc[t] += wv * src[t];
    }
  }
  for (std::size_t t = 0; t < W; ++t) out[t] += acc[t];
}

void correlate_tail(const real_t* in, std::size_t stride, std::size_t nrows, const real_t* w, std::size_t ksz,
                    real_t* out, std::size_t width) {
  for (std::size_t r = 0; r < nrows; ++r) {
    for (std::size_t kk = 0; kk < ksz; ++kk) {
      const real_t wv = w[r * ksz + kk];
      const real_t* src = in + r * stride + kk;
      for (std::size_t t = 0; t < width; ++t) out[t] += wv * src[t];
    }
  }
}

// out[0..width) += valid cross-correlation of `nrows` rows of `in` with w[nrows, ksz].
void correlate_rows(const real_t* in, std::size_t stride, std::size_t nrows, const real_t* w, std::size_t ksz,
                    real_t* out, std::size_t width) {
  std::size_t t0 = 0;
  for (; t0 + kTile <= width; t0 += kTile) correlate_tile<kTile>(in + t0, stride, nrows, w, ksz, out + t0);
  if (t0 < width) correlate_tail(in + t0, stride, nrows, w, ksz, out + t0, width - t0);
}

// sum_t a[t] * b[t + kk] for every kk < ksz, accumulated into out[kk].
void lagged_dots(const real_t* a, const real_t* b, std::size_t len, std::size_t ksz, real_t* out) {
  constexpr std::size_t kLanes = 64;
  const std::size_t body = len - len % kLanes;
  for (std::size_t kk = 0; kk < ksz; ++kk) {
    const real_t* bk = b + kk;
    real_t lanes[kLanes] = {};
    for (std::size_t t = 0; t < body; t += kLanes) {
      for (std::size_t l = 0; l < kLanes; ++l) lanes[l] += a[t + l] * bk[t + l];
    }
    real_t sum = 0;
    for (std::size_t l = 0; l < kLanes; ++l) sum += lanes[l];
    for (std::size_t t = body; t < len; ++t) sum += a[t] * bk[t];
    out[kk] += sum;
  }
}

}  // namespace

// Narrow layers run a direct register-tiled correlation; wide ones go through
// im2col + GEMM, which wins once the output channel count fills a GEMM panel.
constexpr std::size_t kGemmMinChannels = 32;

Tensor conv1d(Graph& g, const Tensor& x, const Tensor& k) {
  require_rank("conv1d", x, 3);
  require_rank("conv1d", k, 3);
  const std::size_t n = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = k.dim(0), ksz = k.dim(2);
  if (k.dim(1) != cin) shape_error("conv1d", "x " + to_string(x.shape()) + " vs kernel " + to_string(k.shape()));
  if (len < ksz) {
    throw std::domain_error("conv1d: input length " + std::to_string(len) + " < kernel " + std::to_string(ksz));
  }
  const std::size_t lout = len - ksz + 1;
  const bool gemm = cout >= kGemmMinChannels;
  const std::size_t rows = cin * ksz;
  const auto er = static_cast<Eigen::Index>(rows), eo = static_cast<Eigen::Index>(lout),
             ec = static_cast<Eigen::Index>(cout);

  auto im2col = [=](const real_t* xs, real_t* col) {
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t kk = 0; kk < ksz; ++kk) {
        std::copy_n(xs + c * len + kk, lout, col + (c * ksz + kk) * lout);
      }
    }
  };

  Tensor y({n, cout, lout});
  const real_t* xv = x.data().data();
  const real_t* kv = k.data().data();
  real_t* yv = y.data().data();
  if (gemm) {
    std::vector<real_t> col(rows * lout);
    CMapR km(kv, ec, er);
    for (std::size_t s = 0; s < n; ++s) {
      im2col(xv + s * cin * len, col.data());
      MapR(yv + s * cout * lout, ec, eo).noalias() = km * CMapR(col.data(), er, eo);
    }
  } else {
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t o = 0; o < cout; ++o) {
        correlate_rows(xv + s * cin * len, len, cin, kv + o * cin * ksz, ksz, yv + (s * cout + o) * lout, lout);
      }
    }
  }

  if (tracks(g, {&x, &k})) {
    Ptr xp = x.impl(), kp = k.impl(), yp = y.impl();
    g.record({yp}, [=] {
      real_t* gx = grad_of(xp);
      real_t* gk = grad_of(kp);
      const real_t* dy = yp->grad.data();
      const real_t* xs = xp->value.data();
      if (gemm) {
        std::vector<real_t> col(rows * lout), dcol;
        if (gx) dcol.resize(rows * lout);
        CMapR km(kp->value.data(), ec, er);
        for (std::size_t s = 0; s < n; ++s) {
          CMapR dys(dy + s * cout * lout, ec, eo);
          if (gk) {
            im2col(xs + s * cin * len, col.data());
            MapR(gk, ec, er).noalias() += dys * CMapR(col.data(), er, eo).transpose();
          }
          if (gx) {
            MapR(dcol.data(), er, eo).noalias() = km.transpose() * dys;
            real_t* gxs = gx + s * cin * len;
            for (std::size_t c = 0; c < cin; ++c) {
              for (std::size_t kk = 0; kk < ksz; ++kk) {
                const real_t* src = dcol.data() + (c * ksz + kk) * lout;
                real_t* dst = gxs + c * len + kk;
                for (std::size_t t = 0; t < lout; ++t) dst[t] += src[t];
              }
            }
          }
        }
        return;
      }
      // dx[c, u] = sum_{o, kk} w[o, c, kk] * dy[o, u - kk]: a valid correlation of the
      // zero-padded dy with the flipped kernel, gathered per input channel.
      const std::size_t padded = lout + 2 * (ksz - 1);
      std::vector<real_t> dyp, wflip;
      if (gx) {
        dyp.assign(cout * padded, real_t(0));
        wflip.resize(cin * cout * ksz);
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t o = 0; o < cout; ++o) {
            for (std::size_t kk = 0; kk < ksz; ++kk) {
              wflip[(c * cout + o) * ksz + kk] = kp->value[(o * cin + c) * ksz + (ksz - 1 - kk)];
            }
          }
        }
      }
      for (std::size_t s = 0; s < n; ++s) {
        const real_t* dys = dy + s * cout * lout;
        const real_t* xss = xs + s * cin * len;
        if (gk) {
          for (std::size_t o = 0; o < cout; ++o) {
            for (std::size_t c = 0; c < cin; ++c) {
              lagged_dots(dys + o * lout, xss + c * len, lout, ksz, gk + (o * cin + c) * ksz);
            }
          }
        }
        if (gx) {
          for (std::size_t o = 0; o < cout; ++o) {
            std::copy_n(dys + o * lout, lout, dyp.data() + o * padded + (ksz - 1));
          }
          for (std::size_t c = 0; c < cin; ++c) {
            correlate_rows(dyp.data(), padded, cout, wflip.data() + c * cout * ksz, ksz, gx + (s * cin + c) * len,
                           len);
          }
        }
      }
    });
  }
  return y;
}

Tensor conv2d_same(Graph& g, const Tensor& x, const Tensor& k) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", k, 4);
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = k.dim(0), ksz = k.dim(2);
  if (k.dim(1) != cin) shape_error("conv2d", "x " + to_string(x.shape()) + " vs kernel " + to_string(k.shape()));
  if (k.dim(3) != ksz || ksz % 2 == 0) shape_error("conv2d", "kernel must be odd and square");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(ksz / 2);
  const std::size_t hw = h * w;
  const std::size_t rows = cin * ksz * ksz;
  const auto er = static_cast<Eigen::Index>(rows), ehw = static_cast<Eigen::Index>(hw),
             ec = static_cast<Eigen::Index>(cout);
  const auto sh = static_cast<std::ptrdiff_t>(h), sw = static_cast<std::ptrdiff_t>(w);

  // col[(c, ky, kx), (i, j)] = x[c, i + ky - pad, j + kx - pad] or 0 outside.
  auto im2col = [=](const real_t* xs, real_t* col) {
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t ky = 0; ky < ksz; ++ky) {
        for (std::size_t kx = 0; kx < ksz; ++kx) {
          real_t* row = col + ((c * ksz + ky) * ksz + kx) * hw;
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
          for (std::ptrdiff_t i = 0; i < sh; ++i) {
            const std::ptrdiff_t si = i + dy;
            for (std::ptrdiff_t j = 0; j < sw; ++j) {
              const std::ptrdiff_t sj = j + dx;
              row[i * sw + j] = (si >= 0 && si < sh && sj >= 0 && sj < sw) ? xs[c * hw + si * sw + sj] : real_t(0);
            }
          }
        }
      }
    }
  };

  Tensor y({n, cout, h, w});
  std::vector<real_t> col(rows * hw);
  CMapR km(k.data().data(), ec, er);
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.data().data() + s * cin * hw, col.data());
    MapR(y.data().data() + s * cout * hw, ec, ehw).noalias() = km * CMapR(col.data(), er, ehw);
  }

  if (tracks(g, {&x, &k})) {
    Ptr xp = x.impl(), kp = k.impl(), yp = y.impl();
    g.record({yp}, [=] {
      real_t* gx = grad_of(xp);
      real_t* gk = grad_of(kp);
      std::vector<real_t> col(rows * hw), dcol;
      if (gx) dcol.resize(rows * hw);
      CMapR km(kp->value.data(), ec, er);
      for (std::size_t s = 0; s < n; ++s) {
        CMapR dy(yp->grad.data() + s * cout * hw, ec, ehw);
        if (gk) {
          im2col(xp->value.data() + s * cin * hw, col.data());
          MapR(gk, ec, er).noalias() += dy * CMapR(col.data(), er, ehw).transpose();
        }
        if (gx) {
          MapR(dcol.data(), er, ehw).noalias() = km.transpose() * dy;
          real_t* gxs = gx + s * cin * hw;
          for (std::size_t c = 0; c < cin; ++c) {
            for (std::size_t ky = 0; ky < ksz; ++ky) {
              for (std::size_t kx = 0; kx < ksz; ++kx) {
                const real_t* row = dcol.data() + ((c * ksz + ky) * ksz + kx) * hw;
                const std::ptrdiff_t dy_off = static_cast<std::ptrdiff_t>(ky) - pad;
                const std::ptrdiff_t dx_off = static_cast<std::ptrdiff_t>(kx) - pad;
                for (std::ptrdiff_t i = 0; i < sh; ++i) {
                  const std::ptrdiff_t si = i + dy_off;
                  if (si < 0 || si >= sh) continue;
                  for (std::ptrdiff_t j = 0; j < sw; ++j) {
                    const std::ptrdiff_t sj = j + dx_off;
                    if (sj < 0 || sj >= sw) continue;
                    gxs[c * hw + si * sw + sj] += row[i * sw + j];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Batch normalization

Tensor batchnorm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                 Mode mode) {
  if (x.rank() < 2) shape_error("batchnorm", "expected [N, C, ...], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), ch = x.dim(1);
  const std::size_t spatial = x.numel() / (n * ch);
  if (gamma.numel() != ch || beta.numel() != ch || stats.running_mean.numel() != ch ||
      stats.running_var.numel() != ch) {
    shape_error("batchnorm", "parameter size does not match " + std::to_string(ch) + " channels");
  }
  const bool train = mode == Mode::Train;
  if (train && n < 2) throw std::domain_error("batchnorm: train mode needs a batch of at least 2");

  const std::size_t m = n * spatial;
  std::vector<real_t> mean(ch), inv_std(ch);
  Tensor xhat(x.shape());
  Tensor y(x.shape());
  const real_t* xv = x.data().data();

  for (std::size_t c = 0; c < ch; ++c) {
    double mu, var;
    if (train) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const real_t* p = xv + (b * ch + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) s += p[i];
      }
      mu = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const real_t* p = xv + (b * ch + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      var = ss / static_cast<double>(m);
      const double unbiased = m > 1 ? ss / static_cast<double>(m - 1) : var;
      auto rm = stats.running_mean.data();
      auto rv = stats.running_var.data();
      rm[c] = static_cast<real_t>((1.0 - kBatchNormMomentum) * rm[c] + kBatchNormMomentum * mu);
      rv[c] = static_cast<real_t>((1.0 - kBatchNormMomentum) * rv[c] + kBatchNormMomentum * unbiased);
    } else {
      mu = stats.running_mean[c];
      var = stats.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + kBatchNormEps);
    mean[c] = static_cast<real_t>(mu);
    inv_std[c] = static_cast<real_t>(is);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * ch + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        const double xh = (xv[off + i] - mu) * is;
        xhat[off + i] = static_cast<real_t>(xh);
        y[off + i] = static_cast<real_t>(gamma[c] * xh + beta[c]);
      }
    }
  }

  if (tracks(g, {&x, &gamma, &beta})) {
    Ptr xp = x.impl(), gp = gamma.impl(), bp = beta.impl(), yp = y.impl(), xhp = xhat.impl();
    g.record({yp}, [=] {
      real_t* gx = grad_of(xp);
      real_t* gg = grad_of(gp);
      real_t* gb = grad_of(bp);
      const real_t* dy = yp->grad.data();
      const real_t* xh = xhp->value.data();
      for (std::size_t c = 0; c < ch; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
          const std::size_t off = (b * ch + c) * spatial;
          for (std::size_t i = 0; i < spatial; ++i) {
            sum_dy += dy[off + i];
            sum_dy_xh += static_cast<double>(dy[off + i]) * xh[off + i];
          }
        }
        if (gg) gg[c] += static_cast<real_t>(sum_dy_xh);
        if (gb) gb[c] += static_cast<real_t>(sum_dy);
        if (!gx) continue;
        const double gm = gp->value[c];
        const double is = inv_std[c];
        if (train) {
          const double md = static_cast<double>(m);
          const double mean_dy = sum_dy / md, mean_dy_xh = sum_dy_xh / md;
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * ch + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
              gx[off + i] += static_cast<real_t>(gm * is * (dy[off + i] - mean_dy - xh[off + i] * mean_dy_xh));
            }
          }
        } else {
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * ch + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) gx[off + i] += static_cast<real_t>(gm * is * dy[off + i]);
          }
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Pooling

Tensor maxpool1d(Graph& g, const Tensor& x) {
  require_rank("maxpool1d", x, 3);
  const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2), lout = len / 2;
  if (len < 2) throw std::domain_error("maxpool1d: length must be >= 2");
  Tensor y({x.dim(0), x.dim(1), lout});
  std::vector<std::size_t> argmax(rows * lout);
  const real_t* xv = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < lout; ++t) {
      const std::size_t i0 = r * len + 2 * t;
      const std::size_t best = xv[i0 + 1] > xv[i0] ? i0 + 1 : i0;
      argmax[r * lout + t] = best;
      y[r * lout + t] = xv[best];
    }
  }
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [xp, yp, argmax = std::move(argmax)] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += yp->grad[i];
    });
  }
  return y;
}

Tensor maxpool2d(Graph& g, const Tensor& x) {
  require_rank("maxpool2d", x, 4);
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) throw std::domain_error("maxpool2d: spatial dims must be >= 2");
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor y({x.dim(0), x.dim(1), ho, wo});
  std::vector<std::size_t> argmax(planes * ho * wo);
  const real_t* xv = x.data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        const std::size_t base = p * h * w + 2 * i * w + 2 * j;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (std::size_t q = 1; q < 4; ++q) {
          if (xv[cand[q]] > xv[best]) best = cand[q];
        }
        const std::size_t o = (p * ho + i) * wo + j;
        argmax[o] = best;
        y[o] = xv[best];
      }
    }
  }
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [xp, yp, argmax = std::move(argmax)] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += yp->grad[i];
    });
  }
  return y;
}

Tensor global_avg_pool(Graph& g, const Tensor& x) {
  if (x.rank() < 3) shape_error("global_avg_pool", "expected [N, C, ...], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), ch = x.dim(1);
  const std::size_t spatial = x.numel() / (n * ch);
  Tensor y({n, ch});
  const real_t* xv = x.data().data();
  for (std::size_t r = 0; r < n * ch; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) s += xv[r * spatial + i];
    y[r] = static_cast<real_t>(s / static_cast<double>(spatial));
  }
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [=] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      const real_t inv = real_t(1) / static_cast<real_t>(spatial);
      for (std::size_t r = 0; r < n * ch; ++r) {
        const real_t d = yp->grad[r] * inv;
        for (std::size_t i = 0; i < spatial; ++i) gx[r * spatial + i] += d;
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor relu(Graph& g, const Tensor& x) {
  return unary(
      g, x, [](real_t v) { return v > real_t(0) ? v : real_t(0); },
      [](real_t in, real_t) { return in > real_t(0) ? real_t(1) : real_t(0); });
}

Tensor tanh(Graph& g, const Tensor& x) {
  return unary(
      g, x, [](real_t v) { return std::tanh(v); }, [](real_t, real_t out) { return real_t(1) - out * out; });
}

Tensor sigmoid(Graph& g, const Tensor& x) {
  return unary(
      g, x,
      [](real_t v) {
        // Split by sign so exp never overflows.
        if (v >= real_t(0)) return real_t(1) / (real_t(1) + std::exp(-v));
        const real_t e = std::exp(v);
        return e / (real_t(1) + e);
      },
      [](real_t, real_t out) { return out * (real_t(1) - out); });
}

Tensor dropout(Graph& g, const Tensor& x, double p, Mode mode, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (mode == Mode::Eval || p == 0.0) return x;
  Rng rng(seed);
  std::bernoulli_distribution keep(1.0 - p);
  const real_t s = static_cast<real_t>(1.0 / (1.0 - p));
  std::vector<real_t> mask(x.numel());
  for (real_t& m : mask) m = keep(rng) ? s : real_t(0);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) y[i] = x[i] * mask[i];
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [xp, yp, mask = std::move(mask)] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += yp->grad[i] * mask[i];
    });
  }
  return y;
}

Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits, 2);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) shape_error("softmax_cross_entropy", "label count does not match batch");
  std::vector<real_t> probs(n * c);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    }
    const real_t* row = logits.data().data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(row[k] - mx);
    const double log_z = std::log(z) + mx;
    for (std::size_t k = 0; k < c; ++k) probs[r * c + k] = static_cast<real_t>(std::exp(row[k] - log_z));
    loss += log_z - row[labels[r]];
  }
  Tensor y = Tensor::scalar(static_cast<real_t>(loss / static_cast<double>(n)));
  if (tracks(g, {&logits})) {
    Ptr lp = logits.impl(), yp = y.impl();
    std::vector<int> lab(labels.begin(), labels.end());
    g.record({yp}, [=, probs = std::move(probs), lab = std::move(lab)] {
      real_t* gl = grad_of(lp);
      if (!gl) return;
      const real_t d = yp->grad[0] / static_cast<real_t>(n);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < c; ++k) {
          const real_t onehot = static_cast<int>(k) == lab[r] ? real_t(1) : real_t(0);
          gl[r * c + k] += d * (probs[r * c + k] - onehot);
        }
      }
    });
  }
  return y;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a[i] + b[i];
  if (tracks(g, {&a, &b})) {
    Ptr ap = a.impl(), bp = b.impl(), yp = y.impl();
    g.record({yp}, [=] {
      if (real_t* ga = grad_of(ap)) {
        for (std::size_t i = 0; i < yp->grad.size(); ++i) ga[i] += yp->grad[i];
      }
      if (real_t* gb = grad_of(bp)) {
        for (std::size_t i = 0; i < yp->grad.size(); ++i) gb[i] += yp->grad[i];
      }
    });
  }
  return y;
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a[i] - b[i];
  if (tracks(g, {&a, &b})) {
    Ptr ap = a.impl(), bp = b.impl(), yp = y.impl();
    g.record({yp}, [=] {
      if (real_t* ga = grad_of(ap)) {
        for (std::size_t i = 0; i < yp->grad.size(); ++i) ga[i] += yp->grad[i];
      }
      if (real_t* gb = grad_of(bp)) {
        for (std::size_t i = 0; i < yp->grad.size(); ++i) gb[i] -= yp->grad[i];
      }
    });
  }
  return y;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a[i] * b[i];
  if (tracks(g, {&a, &b})) {
    Ptr ap = a.impl(), bp = b.impl(), yp = y.impl();
    g.record({yp}, [=] {
      // Read both operands before accumulating: a and b may alias.
      real_t* ga = grad_of(ap);
      real_t* gb = grad_of(bp);
      for (std::size_t i = 0; i < yp->grad.size(); ++i) {
        const real_t av = ap->value[i], bv = bp->value[i], d = yp->grad[i];
        if (ga) ga[i] += d * bv;
        if (gb) gb[i] += d * av;
      }
    });
  }
  return y;
}

Tensor scale(Graph& g, const Tensor& x, double s) {
  const real_t k = static_cast<real_t>(s);
  return unary(g, x, [k](real_t v) { return k * v; }, [k](real_t, real_t) { return k; });
}

Tensor one_minus(Graph& g, const Tensor& x) {
  return unary(g, x, [](real_t v) { return real_t(1) - v; }, [](real_t, real_t) { return real_t(-1); });
}

Tensor add_constant(Graph& g, const Tensor& x, double c) {
  const real_t k = static_cast<real_t>(c);
  return unary(g, x, [k](real_t v) { return v + k; }, [](real_t, real_t) { return real_t(1); });
}

Tensor sum(Graph& g, const Tensor& x) {
  double s = 0.0;
  for (real_t v : x.data()) s += v;
  Tensor y = Tensor::scalar(static_cast<real_t>(s));
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [=] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      for (std::size_t i = 0; i < xp->value.size(); ++i) gx[i] += yp->grad[0];
    });
  }
  return y;
}

Tensor weighted_sum(Graph& g, const Tensor& x, std::span<const real_t> weights) {
  if (weights.size() != x.numel()) shape_error("weighted_sum", "weight count does not match tensor size");
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += static_cast<double>(weights[i]) * x[i];
  Tensor y = Tensor::scalar(static_cast<real_t>(s));
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    std::vector<real_t> w(weights.begin(), weights.end());
    g.record({yp}, [xp, yp, w = std::move(w)] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      for (std::size_t i = 0; i < w.size(); ++i) gx[i] += w[i] * yp->grad[0];
    });
  }
  return y;
}

Tensor concat_columns(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank("concat_columns", a, 2);
  require_rank("concat_columns", b, 2);
  if (a.dim(0) != b.dim(0)) shape_error("concat_columns", "row counts differ");
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), cw = ca + cb;
  Tensor y({n, cw});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a.data().data() + r * ca, ca, y.data().data() + r * cw);
    std::copy_n(b.data().data() + r * cb, cb, y.data().data() + r * cw + ca);
  }
  if (tracks(g, {&a, &b})) {
    Ptr ap = a.impl(), bp = b.impl(), yp = y.impl();
    g.record({yp}, [=] {
      real_t* ga = grad_of(ap);
      real_t* gb = grad_of(bp);
      for (std::size_t r = 0; r < n; ++r) {
        const real_t* d = yp->grad.data() + r * cw;
        if (ga) {
          for (std::size_t k = 0; k < ca; ++k) ga[r * ca + k] += d[k];
        }
        if (gb) {
          for (std::size_t k = 0; k < cb; ++k) gb[r * cb + k] += d[ca + k];
        }
      }
    });
  }
  return y;
}

Tensor l2_normalize_rows(Graph& g, const Tensor& x, double eps) {
  require_rank("l2_normalize_rows", x, 2);
  const std::size_t n = x.dim(0), m = x.dim(1);
  Tensor y(x.shape());
  std::vector<real_t> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    double ss = 0.0;
    for (std::size_t k = 0; k < m; ++k) ss += static_cast<double>(x[r * m + k]) * x[r * m + k];
    const double nrm = std::sqrt(ss);
    norms[r] = static_cast<real_t>(nrm);
    if (nrm <= eps) continue;
    for (std::size_t k = 0; k < m; ++k) y[r * m + k] = static_cast<real_t>(x[r * m + k] / nrm);
  }
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [=, norms = std::move(norms)] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      for (std::size_t r = 0; r < n; ++r) {
        if (norms[r] <= eps) continue;
        const real_t* yr = yp->value.data() + r * m;
        const real_t* dr = yp->grad.data() + r * m;
        double dot = 0.0;
        for (std::size_t k = 0; k < m; ++k) dot += static_cast<double>(yr[k]) * dr[k];
        for (std::size_t k = 0; k < m; ++k) {
          gx[r * m + k] += static_cast<real_t>((dr[k] - yr[k] * dot) / norms[r]);
        }
      }
    });
  }
  return y;
}

Tensor gram(Graph& g, const Tensor& x) {
  require_rank("gram", x, 2);
  const auto n = static_cast<Eigen::Index>(x.dim(0)), m = static_cast<Eigen::Index>(x.dim(1));
  Tensor y({x.dim(0), x.dim(0)});
  CMapR xm(x.data().data(), n, m);
  MapR(y.data().data(), n, n).noalias() = xm * xm.transpose();
  if (tracks(g, {&x})) {
    Ptr xp = x.impl(), yp = y.impl();
    g.record({yp}, [=] {
      real_t* gx = grad_of(xp);
      if (!gx) return;
      CMapR dy(yp->grad.data(), n, n);
      CMapR xm(xp->value.data(), n, m);
      MapR(gx, n, m).noalias() += (dy + dy.transpose()) * xm;
    });
  }
  return y;
}

}  // namespace MDEEG_AD_ABI
}  // namespace mdeeg::ad
