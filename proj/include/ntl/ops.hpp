#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ntl/parallel.hpp"
#include "ntl/tensor.hpp"

namespace ntl::ad {

namespace detail {

inline void check_nchw(const std::vector<int>& s, const char* who) {
  if (s.size() != 4 || s[0] <= 0 || s[1] <= 0 || s[2] <= 0 || s[3] <= 0)
    throw DataError(std::string(who) + ": expected a positive NCHW shape");
}

inline std::size_t idx4(const std::vector<int>& s, int n, int c, int h, int w) {
  return ((std::size_t(n) * s[1] + c) * s[2] + h) * s[3] + w;
}

}  // namespace detail

// Cross-correlation with zero padding, square odd kernel, optional bias.
// x: (N, Cin, H, W), w: (Cout, Cin, k, k), b: (Cout) or undefined.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int stride = 1, int pad = 0) {
  detail::check_nchw(x.shape(), "conv2d input");
  detail::check_nchw(w.shape(), "conv2d weight");
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != Cin) throw DataError("conv2d: weight Cin mismatch");
  if (w.dim(3) != k || k % 2 == 0) throw DataError("conv2d: kernel must be odd square");
  if (stride < 1 || pad < 0) throw DataError("conv2d: bad stride/pad");
  const bool has_bias = b.numel() > 0;
  if (has_bias && (b.rank() != 1 || b.dim(0) != Cout))
    throw DataError("conv2d: bias shape mismatch");
  if ((H + 2 * pad - k) % stride != 0 || (W + 2 * pad - k) % stride != 0)
    throw DataError("conv2d: output extent is not integral");
  const int OH = (H + 2 * pad - k) / stride + 1;
  const int OW = (W + 2 * pad - k) / stride + 1;
  if (OH <= 0 || OW <= 0) throw DataError("conv2d: empty output");

  std::vector<T> out(std::size_t(N) * Cout * OH * OW);
  const T* xv = x.values().data();
  const T* wv = w.values().data();
  const T* bv = has_bias ? b.values().data() : nullptr;

  auto lo_bound = [&](int kk) { return (pad - kk) > 0 ? (pad - kk + stride - 1) / stride : 0; };
  auto hi_bound = [&](int kk, int extent, int out_extent) {
    const int top = extent - 1 - kk + pad;
    return top >= 0 ? std::min(out_extent, top / stride + 1) : 0;
  };

  parallel_for(std::size_t(N) * Cout, 4, [&](std::size_t begin, std::size_t end) {
    for (std::size_t nc = begin; nc < end; ++nc) {
      const int n = int(nc / Cout), co = int(nc % Cout);
      T* oplane = out.data() + (std::size_t(n) * Cout + co) * OH * OW;
      const T bias = bv ? bv[co] : T(0);
      for (std::size_t i = 0; i < std::size_t(OH) * OW; ++i) oplane[i] = bias;
      for (int ci = 0; ci < Cin; ++ci) {
        const T* xplane = xv + (std::size_t(n) * Cin + ci) * H * W;
        const T* wbase = wv + (std::size_t(co) * Cin + ci) * k * k;
        for (int ki = 0; ki < k; ++ki) {
          const int oh_lo = lo_bound(ki), oh_hi = hi_bound(ki, H, OH);
          for (int kj = 0; kj < k; ++kj) {
            const T wgt = wbase[ki * k + kj];
            const int ow_lo = lo_bound(kj), ow_hi = hi_bound(kj, W, OW);
            for (int oh = oh_lo; oh < oh_hi; ++oh) {
              const int ih = oh * stride - pad + ki;
              T* orow = oplane + std::size_t(oh) * OW;
              const T* xrow = xplane + std::size_t(ih) * W;
              if (stride == 1) {
                const T* xoff = xrow + (kj - pad);
                for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wgt * xoff[ow];
              } else {
                int iw = ow_lo * stride - pad + kj;
                for (int ow = ow_lo; ow < ow_hi; ++ow, iw += stride)
                  orow[ow] += wgt * xrow[iw];
              }
            }
          }
        }
      }
    }
  });

  auto backprop = [stride, pad, N, Cin, H, W, Cout, k, OH, OW,
                   has_bias](Node<T>& self) {
    const std::vector<T>& gy = self.grad;
    Node<T>& xn = *self.parents[0];
    Node<T>& wn = *self.parents[1];
    auto lo_bound = [&](int kk) {
      return (pad - kk) > 0 ? (pad - kk + stride - 1) / stride : 0;
    };
    auto hi_bound = [&](int kk, int extent, int out_extent) {
      const int top = extent - 1 - kk + pad;
      return top >= 0 ? std::min(out_extent, top / stride + 1) : 0;
    };

    if (has_bias) {
      Node<T>& bn = *self.parents[2];
      if (bn.requires_grad) {
        std::vector<T>& gb = grad_buffer(bn);
        for (int n = 0; n < N; ++n)
          for (int co = 0; co < Cout; ++co) {
            const T* gplane = gy.data() + (std::size_t(n) * Cout + co) * OH * OW;
            T acc = 0;
            for (std::size_t i = 0; i < std::size_t(OH) * OW; ++i) acc += gplane[i];
            gb[co] += acc;
          }
      }
    }

    if (wn.requires_grad) {
      std::vector<T>& gw = grad_buffer(wn);
      const T* xv = xn.value.data();
      parallel_for(std::size_t(Cout), 1, [&](std::size_t begin, std::size_t end) {
        for (std::size_t co = begin; co < end; ++co) {
          for (int ci = 0; ci < Cin; ++ci) {
            T* gwbase = gw.data() + (co * Cin + ci) * k * k;
            for (int ki = 0; ki < k; ++ki) {
              const int oh_lo = lo_bound(ki), oh_hi = hi_bound(ki, H, OH);
              for (int kj = 0; kj < k; ++kj) {
                const int ow_lo = lo_bound(kj), ow_hi = hi_bound(kj, W, OW);
                T acc = 0;
                for (int n = 0; n < N; ++n) {
                  const T* gplane = gy.data() + (std::size_t(n) * Cout + co) * OH * OW;
                  const T* xplane = xv + (std::size_t(n) * Cin + ci) * H * W;
                  for (int oh = oh_lo; oh < oh_hi; ++oh) {
                    const int ih = oh * stride - pad + ki;
                    const T* grow = gplane + std::size_t(oh) * OW;
                    const T* xrow = xplane + std::size_t(ih) * W;
                    if (stride == 1) {
                      const T* xoff = xrow + (kj - pad);
                      for (int ow = ow_lo; ow < ow_hi; ++ow) acc += grow[ow] * xoff[ow];
                    } else {
                      int iw = ow_lo * stride - pad + kj;
                      for (int ow = ow_lo; ow < ow_hi; ++ow, iw += stride)
                        acc += grow[ow] * xrow[iw];
                    }
                  }
                }
                gwbase[ki * k + kj] += acc;
              }
            }
          }
        }
      });
    }

    if (xn.requires_grad) {
      std::vector<T>& gx = grad_buffer(xn);
      const T* wv = wn.value.data();
      parallel_for(std::size_t(N) * Cin, 1, [&](std::size_t begin, std::size_t end) {
        for (std::size_t nc = begin; nc < end; ++nc) {
          const int n = int(nc / Cin), ci = int(nc % Cin);
          T* gxplane = gx.data() + (std::size_t(n) * Cin + ci) * H * W;
          for (int co = 0; co < Cout; ++co) {
            const T* gplane = gy.data() + (std::size_t(n) * Cout + co) * OH * OW;
            const T* wbase = wv + (std::size_t(co) * Cin + ci) * k * k;
            for (int ki = 0; ki < k; ++ki) {
              const int oh_lo = lo_bound(ki), oh_hi = hi_bound(ki, H, OH);
              for (int kj = 0; kj < k; ++kj) {
                const T wgt = wbase[ki * k + kj];
                const int ow_lo = lo_bound(kj), ow_hi = hi_bound(kj, W, OW);
                for (int oh = oh_lo; oh < oh_hi; ++oh) {
                  const int ih = oh * stride - pad + ki;
                  const T* grow = gplane + std::size_t(oh) * OW;
                  T* gxrow = gxplane + std::size_t(ih) * W;
                  if (stride == 1) {
                    T* gxoff = gxrow + (kj - pad);
                    for (int ow = ow_lo; ow < ow_hi; ++ow) gxoff[ow] += wgt * grow[ow];
                  } else {
                    int iw = ow_lo * stride - pad + kj;
                    for (int ow = ow_lo; ow < ow_hi; ++ow, iw += stride)
                      gxrow[iw] += wgt * grow[ow];
                  }
                }
              }
            }
          }
        }
      });
    }
  };

  std::vector<NodePtr<T>> parents = {x.node(), w.node()};
  if (has_bias) parents.push_back(b.node());
  return make_op<T>({N, Cout, OH, OW}, std::move(out), std::move(parents),
                    std::move(backprop));
}

// Batch normalization over (N, H, W) per channel, population variance.
// Training mode normalizes with batch statistics and blends them into the
// running buffers in place: r <- (1 - momentum) * r + momentum * batch.
// Inference mode is a fixed affine map using the running buffers.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     double eps = 1e-5, double momentum = 0.1) {
  detail::check_nchw(x.shape(), "batch_norm input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  auto check_c = [&](const Tensor<T>& t, const char* who) {
    if (t.rank() != 1 || t.dim(0) != C)
      throw DataError(std::string("batch_norm: ") + who + " must have shape (C)");
  };
  check_c(gamma, "gamma");
  check_c(beta, "beta");
  check_c(running_mean, "running_mean");
  check_c(running_var, "running_var");

  const std::size_t plane = std::size_t(H) * W;
  const std::size_t m = std::size_t(N) * plane;
  const T* xv = x.values().data();
  std::vector<T> out(x.numel());
  std::vector<T> mean(C), invstd(C);

  if (training) {
    for (int c = 0; c < C; ++c) {
      double sum = 0.0;
      for (int n = 0; n < N; ++n) {
        const T* p = xv + (std::size_t(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += double(p[i]);
      }
      const double mu = sum / double(m);
      double ss = 0.0;
      for (int n = 0; n < N; ++n) {
        const T* p = xv + (std::size_t(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = double(p[i]) - mu;
          ss += d * d;
        }
      }
      const double var = ss / double(m);
      mean[c] = T(mu);
      invstd[c] = T(1.0 / std::sqrt(var + eps));
      running_mean.values()[c] =
          T((1.0 - momentum) * double(running_mean.values()[c]) + momentum * mu);
      running_var.values()[c] =
          T((1.0 - momentum) * double(running_var.values()[c]) + momentum * var);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean.values()[c];
      invstd[c] = T(1.0 / std::sqrt(double(running_var.values()[c]) + eps));
    }
  }

  const T* gv = gamma.values().data();
  const T* bv = beta.values().data();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* p = xv + (std::size_t(n) * C + c) * plane;
      T* o = out.data() + (std::size_t(n) * C + c) * plane;
      const T mu = mean[c], is = invstd[c], g = gv[c], bb = bv[c];
      for (std::size_t i = 0; i < plane; ++i) o[i] = g * (p[i] - mu) * is + bb;
    }

  auto backprop = [N, C, plane, m, training, mean, invstd](Node<T>& self) {
    const std::vector<T>& gy = self.grad;
    Node<T>& xn = *self.parents[0];
    Node<T>& gn = *self.parents[1];
    Node<T>& bn = *self.parents[2];
    const T* xv = xn.value.data();

    for (int c = 0; c < C; ++c) {
      const T mu = mean[c], is = invstd[c];
      // Reduce dy and dy * xhat for this channel.
      T s1 = 0, s2 = 0;
      for (int n = 0; n < N; ++n) {
        const T* g = gy.data() + (std::size_t(n) * C + c) * plane;
        const T* p = xv + (std::size_t(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          s1 += g[i];
          s2 += g[i] * (p[i] - mu) * is;
        }
      }
      if (bn.requires_grad) grad_buffer(bn)[c] += s1;
      if (gn.requires_grad) grad_buffer(gn)[c] += s2;
      if (xn.requires_grad) {
        std::vector<T>& gx = grad_buffer(xn);
        const T gamma_c = gn.value[c];
        if (training) {
          const T inv_m = T(1) / T(m);
          for (int n = 0; n < N; ++n) {
            const T* g = gy.data() + (std::size_t(n) * C + c) * plane;
            const T* p = xv + (std::size_t(n) * C + c) * plane;
            T* gx_p = gx.data() + (std::size_t(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const T xhat = (p[i] - mu) * is;
              gx_p[i] += gamma_c * is * (g[i] - s1 * inv_m - xhat * s2 * inv_m);
            }
          }
        } else {
          for (int n = 0; n < N; ++n) {
            const T* g = gy.data() + (std::size_t(n) * C + c) * plane;
            T* gx_p = gx.data() + (std::size_t(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) gx_p[i] += gamma_c * is * g[i];
          }
        }
      }
    }
  };

  return make_op<T>(x.shape(), std::move(out),
                    {x.node(), gamma.node(), beta.node()}, std::move(backprop));
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  auto backprop = [](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    std::vector<T>& gx = grad_buffer(xn);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xn.value[i] > T(0)) gx[i] += self.grad[i];
  };
  return make_op<T>(x.shape(), std::move(out), {x.node()}, std::move(backprop));
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-xv[i]));
  auto y = out;  // saved activation
  auto backprop = [y = std::move(y)](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    std::vector<T>& gx = grad_buffer(xn);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      gx[i] += self.grad[i] * y[i] * (T(1) - y[i]);
  };
  return make_op<T>(x.shape(), std::move(out), {x.node()}, std::move(backprop));
}

namespace detail {

template <class T, class Fwd>
Tensor<T> binary_elementwise(const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, T sign_b,
                             const char* who) {
  if (a.shape() != b.shape()) throw DataError(std::string(who) + ": shape mismatch");
  std::vector<T> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  auto backprop = [sign_b](Node<T>& self) {
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    if (an.requires_grad) {
      std::vector<T>& ga = grad_buffer(an);
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      std::vector<T>& gb = grad_buffer(bn);
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += sign_b * self.grad[i];
    }
  };
  return make_op<T>(a.shape(), std::move(out), {a.node(), b.node()}, std::move(backprop));
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_elementwise(
      a, b, [](T x, T y) { return x + y; }, T(1), "add");
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary_elementwise(
      a, b, [](T x, T y) { return x - y; }, T(-1), "sub");
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_nchw(a.shape(), "concat_channels a");
  detail::check_nchw(b.shape(), "concat_channels b");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw DataError("concat_channels: N/H/W mismatch");
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  const std::size_t plane = std::size_t(H) * W;
  std::vector<T> out(std::size_t(N) * (Ca + Cb) * plane);
  for (int n = 0; n < N; ++n) {
    std::copy(a.values().begin() + std::size_t(n) * Ca * plane,
              a.values().begin() + std::size_t(n + 1) * Ca * plane,
              out.begin() + std::size_t(n) * (Ca + Cb) * plane);
    std::copy(b.values().begin() + std::size_t(n) * Cb * plane,
              b.values().begin() + std::size_t(n + 1) * Cb * plane,
              out.begin() + std::size_t(n) * (Ca + Cb) * plane + Ca * plane);
  }
  auto backprop = [N, Ca, Cb, plane](Node<T>& self) {
    Node<T>& an = *self.parents[0];
    Node<T>& bn = *self.parents[1];
    for (int n = 0; n < N; ++n) {
      const T* g = self.grad.data() + std::size_t(n) * (Ca + Cb) * plane;
      if (an.requires_grad) {
        T* ga = grad_buffer(an).data() + std::size_t(n) * Ca * plane;
        for (std::size_t i = 0; i < std::size_t(Ca) * plane; ++i) ga[i] += g[i];
      }
      if (bn.requires_grad) {
        T* gb = grad_buffer(bn).data() + std::size_t(n) * Cb * plane;
        const T* gsrc = g + std::size_t(Ca) * plane;
        for (std::size_t i = 0; i < std::size_t(Cb) * plane; ++i) gb[i] += gsrc[i];
      }
    }
  };
  return make_op<T>({N, Ca + Cb, H, W}, std::move(out), {a.node(), b.node()},
                    std::move(backprop));
}

template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  detail::check_nchw(x.shape(), "global_avg_pool");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t plane = std::size_t(x.dim(2)) * x.dim(3);
  std::vector<T> out(std::size_t(N) * C);
  const T* xv = x.values().data();
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    const T* p = xv + nc * plane;
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    out[nc] = acc / T(plane);
  }
  auto backprop = [plane](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    std::vector<T>& gx = grad_buffer(xn);
    for (std::size_t nc = 0; nc < self.grad.size(); ++nc) {
      const T g = self.grad[nc] / T(plane);
      T* p = gx.data() + nc * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += g;
    }
  };
  return make_op<T>({N, C, 1, 1}, std::move(out), {x.node()}, std::move(backprop));
}

// (N, C, H, W) -> (N, C / r^2, H * r, W * r);
// out(n, c, h, w) = in(n, c * r^2 + (h % r) * r + (w % r), h / r, w / r).
template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  detail::check_nchw(x.shape(), "pixel_shuffle");
  if (r < 1) throw DataError("pixel_shuffle: upscale factor must be positive");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (C % (r * r) != 0) throw DataError("pixel_shuffle: channels not divisible by r^2");
  const int Co = C / (r * r), Ho = H * r, Wo = W * r;
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  const std::vector<int> os = {N, Co, Ho, Wo};
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < Co; ++c)
      for (int h = 0; h < Ho; ++h)
        for (int w = 0; w < Wo; ++w)
          out[detail::idx4(os, n, c, h, w)] =
              xv[detail::idx4(x.shape(), n, c * r * r + (h % r) * r + (w % r), h / r,
                              w / r)];
  auto backprop = [N, Co, Ho, Wo, r](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    std::vector<T>& gx = grad_buffer(xn);
    const std::vector<int> os = {N, Co, Ho, Wo};
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < Co; ++c)
        for (int h = 0; h < Ho; ++h)
          for (int w = 0; w < Wo; ++w)
            gx[detail::idx4(xn.shape, n, c * r * r + (h % r) * r + (w % r), h / r,
                            w / r)] += self.grad[detail::idx4(os, n, c, h, w)];
  };
  return make_op<T>({N, Co, Ho, Wo}, std::move(out), {x.node()}, std::move(backprop));
}

// Per-channel scaling: x (N, C, H, W) * s (N, C, 1, 1).
template <class T>
Tensor<T> mul_channels(const Tensor<T>& x, const Tensor<T>& s) {
  detail::check_nchw(x.shape(), "mul_channels x");
  detail::check_nchw(s.shape(), "mul_channels scale");
  if (s.dim(0) != x.dim(0) || s.dim(1) != x.dim(1) || s.dim(2) != 1 || s.dim(3) != 1)
    throw DataError("mul_channels: scale must be (N, C, 1, 1)");
  const std::size_t plane = std::size_t(x.dim(2)) * x.dim(3);
  std::vector<T> out(x.numel());
  const T* xv = x.values().data();
  const T* sv = s.values().data();
  for (std::size_t nc = 0; nc < s.numel(); ++nc) {
    const T w = sv[nc];
    const T* p = xv + nc * plane;
    T* o = out.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) o[i] = w * p[i];
  }
  auto backprop = [plane](Node<T>& self) {
    Node<T>& xn = *self.parents[0];
    Node<T>& sn = *self.parents[1];
    if (xn.requires_grad) {
      std::vector<T>& gx = grad_buffer(xn);
      for (std::size_t nc = 0; nc < sn.value.size(); ++nc) {
        const T w = sn.value[nc];
        const T* g = self.grad.data() + nc * plane;
        T* p = gx.data() + nc * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += w * g[i];
      }
    }
    if (sn.requires_grad) {
      std::vector<T>& gs = grad_buffer(sn);
      for (std::size_t nc = 0; nc < sn.value.size(); ++nc) {
        const T* g = self.grad.data() + nc * plane;
        const T* p = xn.value.data() + nc * plane;
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += g[i] * p[i];
        gs[nc] += acc;
      }
    }
  };
  return make_op<T>(x.shape(), std::move(out), {x.node(), s.node()}, std::move(backprop));
}

// Mean over batch elements of the per-example L1 norm:
// (1 / N) * sum_n sum_i |pred - gt|. Ties get subgradient zero.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
  if (pred.shape() != gt.shape()) throw DataError("l1_loss: shape mismatch");
  if (pred.rank() < 1 || pred.dim(0) <= 0) throw DataError("l1_loss: empty batch");
  const T inv_n = T(1) / T(pred.dim(0));
  const auto& pv = pred.values();
  const auto& gv = gt.values();
  T acc = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const T d = pv[i] - gv[i];
    acc += d < T(0) ? -d : d;
  }
  std::vector<T> out = {acc * inv_n};
  auto backprop = [inv_n](Node<T>& self) {
    Node<T>& pn = *self.parents[0];
    Node<T>& gn = *self.parents[1];
    const T g = self.grad[0] * inv_n;
    for (std::size_t i = 0; i < pn.value.size(); ++i) {
      const T d = pn.value[i] - gn.value[i];
      const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
      if (pn.requires_grad) grad_buffer(pn)[i] += s;
      if (gn.requires_grad) grad_buffer(gn)[i] -= s;
    }
  };
  return make_op<T>({1}, std::move(out), {pred.node(), gt.node()}, std::move(backprop));
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
};

// Central finite differences against one reverse sweep. The relative error
// is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
template <class T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& f,
                           const std::vector<Tensor<T>>& leaves, double eps = 1e-3) {
  Tensor<T> loss = f();
  if (loss.numel() != 1) throw DataError("grad_check: f must produce a scalar");
  backward(loss);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    if (leaf.grad().size() != leaf.numel())
      throw DataError("grad_check: leaf did not receive a gradient");
    analytic.push_back(leaf.grad());
  }

  GradCheckReport rep;
  NoGradGuard<T> quiet;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    std::vector<T>& vals = const_cast<Tensor<T>&>(leaves[li]).values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const T saved = vals[i];
      vals[i] = saved + T(eps);
      const double up = double(f().values()[0]);
      vals[i] = saved - T(eps);
      const double down = double(f().values()[0]);
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = double(analytic[li][i]);
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max(1e-8, std::abs(a) + std::abs(numeric));
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace ntl::ad
