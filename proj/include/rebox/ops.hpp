#pragma once

#include <Eigen/Dense>
#include <cstring>
#include <vector>

#include "rebox/errors.hpp"
#include "rebox/rng.hpp"
#include "rebox/tensor.hpp"

namespace rebox {

enum class Padding { same, valid };

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvDims {
  int out_h = 0, out_w = 0, pad_top = 0, pad_left = 0;
};

/// "Same" padding follows the ceil-division convention: out = ceil(in/stride),
/// total pad = max((out-1)*stride + k - in, 0), split with the smaller half in
/// front. This is what halves 128 -> 64 -> 32 -> 16 -> 8 with 3x3 kernels.
inline ConvDims conv_dims(int in_h, int in_w, int kh, int kw, int stride, Padding pad) {
  ConvDims d;
  if (pad == Padding::same) {
    d.out_h = (in_h + stride - 1) / stride;
    d.out_w = (in_w + stride - 1) / stride;
    d.pad_top = std::max((d.out_h - 1) * stride + kh - in_h, 0) / 2;
    d.pad_left = std::max((d.out_w - 1) * stride + kw - in_w, 0) / 2;
  } else {
    d.out_h = (in_h - kh) / stride + 1;
    d.out_w = (in_w - kw) / stride + 1;
    if (d.out_h < 1 || d.out_w < 1) throw ShapeError("kernel larger than input");
  }
  return d;
}

namespace detail {

// Lowered patch matrix: one row per (n, oy, ox), columns ordered (ky, kx, c).
template <typename T>
MatrixRM<T> im2col(const TensorT<T>& in, int kh, int kw, int stride, const ConvDims& d) {
  const int n = in.extent(0), h = in.extent(1), w = in.extent(2), c = in.extent(3);
  MatrixRM<T> col(std::int64_t(n) * d.out_h * d.out_w, kh * kw * c);
  std::int64_t row = 0;
  for (int img = 0; img < n; ++img) {
    for (int oy = 0; oy < d.out_h; ++oy) {
      for (int ox = 0; ox < d.out_w; ++ox, ++row) {
        T* dst = col.data() + row * col.cols();
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - d.pad_top + ky;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + kw * c, T(0));
            dst += kw * c;
            continue;
          }
          for (int kx = 0; kx < kw; ++kx, dst += c) {
            const int ix = ox * stride - d.pad_left + kx;
            if (ix < 0 || ix >= w)
              std::fill(dst, dst + c, T(0));
            else
              std::memcpy(dst, &in.at4(img, iy, ix, 0), sizeof(T) * c);
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im_add(const MatrixRM<T>& col, TensorT<T>& in_grad, int kh, int kw, int stride,
                const ConvDims& d) {
  const int n = in_grad.extent(0), h = in_grad.extent(1), w = in_grad.extent(2),
            c = in_grad.extent(3);
  std::int64_t row = 0;
  for (int img = 0; img < n; ++img) {
    for (int oy = 0; oy < d.out_h; ++oy) {
      for (int ox = 0; ox < d.out_w; ++ox, ++row) {
        const T* src = col.data() + row * col.cols();
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - d.pad_top + ky;
          if (iy < 0 || iy >= h) {
            src += kw * c;
            continue;
          }
          for (int kx = 0; kx < kw; ++kx, src += c) {
            const int ix = ox * stride - d.pad_left + kx;
            if (ix < 0 || ix >= w) continue;
            T* dst = &in_grad.at4(img, iy, ix, 0);
            for (int k = 0; k < c; ++k) dst[k] += src[k];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// input (N, H, W, C), weights (KH, KW, C, OC), bias (OC). Cross-correlation,
/// lowered to a single matrix product per batch.
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b,
                          int stride, Padding pad) {
  if (in.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d expects 4-axis input and weights");
  if (in.extent(3) != w.extent(2)) throw ShapeError("conv2d channel mismatch");
  if (b.numel() != w.extent(3)) throw ShapeError("conv2d bias length mismatch");
  const int kh = w.extent(0), kw = w.extent(1), oc = w.extent(3);
  const ConvDims d = conv_dims(in.extent(1), in.extent(2), kh, kw, stride, pad);

  const MatrixRM<T> col = detail::im2col(in, kh, kw, stride, d);
  Eigen::Map<const MatrixRM<T>> wmat(w.data(), kh * kw * w.extent(2), oc);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(b.data(), oc);

  TensorT<T> out({in.extent(0), d.out_h, d.out_w, oc});
  Eigen::Map<MatrixRM<T>> omat(out.data(), col.rows(), oc);
  omat.noalias() = col * wmat;
  omat.rowwise() += bvec.transpose();
  return out;
}

template <typename T>
struct ConvGrads {
  TensorT<T> input, weights, bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& gout,
                             int stride, Padding pad) {
  const int kh = w.extent(0), kw = w.extent(1), oc = w.extent(3);
  const ConvDims d = conv_dims(in.extent(1), in.extent(2), kh, kw, stride, pad);
  if (gout.extent(1) != d.out_h || gout.extent(2) != d.out_w || gout.extent(3) != oc)
    throw ShapeError("conv2d_backward gradient shape mismatch");

  const MatrixRM<T> col = detail::im2col(in, kh, kw, stride, d);
  Eigen::Map<const MatrixRM<T>> gmat(gout.data(), col.rows(), oc);
  Eigen::Map<const MatrixRM<T>> wmat(w.data(), kh * kw * w.extent(2), oc);

  ConvGrads<T> g{TensorT<T>(in.shape()), TensorT<T>(w.shape()), TensorT<T>({oc})};
  Eigen::Map<MatrixRM<T>> gwmat(g.weights.data(), wmat.rows(), oc);
  gwmat.noalias() = col.transpose() * gmat;
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gbvec(g.bias.data(), oc);
  gbvec = gmat.colwise().sum();
  const MatrixRM<T> gcol = gmat * wmat.transpose();
  detail::col2im_add(gcol, g.input, kh, kw, stride, d);
  return g;
}

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& in) {
  TensorT<T> out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& in, const TensorT<T>& gout) {
  if (!in.same_shape(gout)) throw ShapeError("relu_backward shape mismatch");
  TensorT<T> gin(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) gin[i] = in[i] > T(0) ? gout[i] : T(0);
  return gin;
}

template <typename T>
struct MaxPoolResult {
  TensorT<T> out;
  std::vector<std::int32_t> argmax;  // flat input index per output cell, -1 when a pad cell won
};

/// 3x3/2-style pooling with implicit zero padding: padded cells take part in
/// the max with value 0. Window cells are visited in row-major order and ties
/// keep the first, so a leading pad zero can win; its gradient is dropped.
template <typename T>
MaxPoolResult<T> maxpool_forward(const TensorT<T>& in, int k, int stride) {
  if (in.rank() != 4) throw ShapeError("maxpool expects a 4-axis input");
  const int n = in.extent(0), h = in.extent(1), w = in.extent(2), c = in.extent(3);
  const ConvDims d = conv_dims(h, w, k, k, stride, Padding::same);
  MaxPoolResult<T> r{TensorT<T>({n, d.out_h, d.out_w, c}), {}};
  r.argmax.assign(std::size_t(r.out.numel()), -1);
  std::size_t o = 0;
  for (int img = 0; img < n; ++img) {
    for (int oy = 0; oy < d.out_h; ++oy) {
      for (int ox = 0; ox < d.out_w; ++ox) {
        for (int ch = 0; ch < c; ++ch, ++o) {
          T best = std::numeric_limits<T>::lowest();
          std::int32_t best_idx = -1;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - d.pad_top + ky;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - d.pad_left + kx;
              const bool pad = iy < 0 || iy >= h || ix < 0 || ix >= w;
              const T v = pad ? T(0) : in.at4(img, iy, ix, ch);
              if (v > best) {
                best = v;
                best_idx = pad ? -1 : std::int32_t(in.idx4(img, iy, ix, ch));
              }
            }
          }
          r.out[o] = best;
          r.argmax[std::size_t(o)] = best_idx;
        }
      }
    }
  }
  return r;
}

template <typename T>
TensorT<T> maxpool_backward(const std::vector<std::int32_t>& argmax,
                            const std::vector<int>& in_shape, const TensorT<T>& gout) {
  if (argmax.size() != std::size_t(gout.numel()))
    throw ShapeError("maxpool_backward argmax length mismatch");
  TensorT<T> gin(in_shape);
  for (std::size_t i = 0; i < gout.numel(); ++i)
    if (argmax[std::size_t(i)] >= 0) gin[argmax[std::size_t(i)]] += gout[i];
  return gin;
}

/// input (N, D), weights (D, U), bias (U).
template <typename T>
TensorT<T> fc_forward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b) {
  if (in.rank() != 2 || w.rank() != 2) throw ShapeError("fc expects 2-axis input and weights");
  if (in.extent(1) != w.extent(0)) throw ShapeError("fc input width mismatch");
  if (b.numel() != w.extent(1)) throw ShapeError("fc bias length mismatch");
  const int n = in.extent(0), dim = in.extent(1), u = w.extent(1);
  TensorT<T> out({n, u});
  Eigen::Map<const MatrixRM<T>> imat(in.data(), n, dim), wmat(w.data(), dim, u);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(b.data(), u);
  Eigen::Map<MatrixRM<T>> omat(out.data(), n, u);
  omat.noalias() = imat * wmat;
  omat.rowwise() += bvec.transpose();
  return out;
}

template <typename T>
struct FcGrads {
  TensorT<T> input, weights, bias;
};

template <typename T>
FcGrads<T> fc_backward(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& gout) {
  const int n = in.extent(0), dim = in.extent(1), u = w.extent(1);
  if (gout.extent(0) != n || gout.extent(1) != u)
    throw ShapeError("fc_backward gradient shape mismatch");
  FcGrads<T> g{TensorT<T>(in.shape()), TensorT<T>(w.shape()), TensorT<T>({u})};
  Eigen::Map<const MatrixRM<T>> imat(in.data(), n, dim), wmat(w.data(), dim, u),
      gmat(gout.data(), n, u);
  Eigen::Map<MatrixRM<T>> gi(g.input.data(), n, dim), gw(g.weights.data(), dim, u);
  gi.noalias() = gmat * wmat.transpose();
  gw.noalias() = imat.transpose() * gmat;
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(g.bias.data(), u);
  gb = gmat.colwise().sum();
  return g;
}

template <typename T>
struct DropoutResult {
  TensorT<T> out;
  std::vector<std::uint8_t> mask;  // 1 = kept
};

/// Inverted dropout: survivors are scaled by 1/(1-p) at train time so the
/// test-time pass is the identity.
template <typename T>
DropoutResult<T> dropout_forward(const TensorT<T>& in, double p, bool train, Rng& rng) {
  if (p < 0 || p >= 1) throw std::invalid_argument("dropout probability must be in [0,1)");
  DropoutResult<T> r{TensorT<T>(in.shape()), {}};
  if (!train || p == 0) {
    r.out = in;
    r.mask.assign(std::size_t(in.numel()), 1);
    return r;
  }
  r.mask.resize(std::size_t(in.numel()));
  const T scale = T(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const bool keep = !rng.bernoulli(p);
    r.mask[std::size_t(i)] = keep ? 1 : 0;
    r.out[i] = keep ? in[i] * scale : T(0);
  }
  return r;
}

template <typename T>
TensorT<T> dropout_backward(const std::vector<std::uint8_t>& mask, double p,
                            const TensorT<T>& gout) {
  if (mask.size() != std::size_t(gout.numel()))
    throw ShapeError("dropout_backward mask length mismatch");
  TensorT<T> gin(gout.shape());
  const T scale = p > 0 ? T(1.0 / (1.0 - p)) : T(1);
  for (std::size_t i = 0; i < gout.numel(); ++i)
    gin[i] = mask[std::size_t(i)] ? gout[i] * scale : T(0);
  return gin;
}

/// (N, H, W, C) -> (N, H*W*C) without copying semantics beyond the reshape.
template <typename T>
TensorT<T> flatten(const TensorT<T>& in) {
  if (in.rank() == 2) return in;
  if (in.rank() != 4) throw ShapeError("flatten expects a 2- or 4-axis tensor");
  return in.reshaped({in.extent(0), int(in.numel() / in.extent(0))});
}

/// Concatenates per-sample vectors: parts (N, D_i) -> (N, sum D_i), order kept.
template <typename T>
TensorT<T> concat_forward(const std::vector<const TensorT<T>*>& parts) {
  if (parts.empty()) throw ShapeError("concat of zero parts");
  const int n = parts[0]->extent(0);
  int total = 0;
  for (const auto* p : parts) {
    if (p->rank() != 2 || p->extent(0) != n) throw ShapeError("concat parts disagree on batch");
    total += p->extent(1);
  }
  TensorT<T> out({n, total});
  for (int row = 0; row < n; ++row) {
    T* dst = &out.at2(row, 0);
    for (const auto* p : parts) {
      std::memcpy(dst, &p->at2(row, 0), sizeof(T) * p->extent(1));
      dst += p->extent(1);
    }
  }
  return out;
}

template <typename T>
std::vector<TensorT<T>> concat_backward(const TensorT<T>& gout,
                                        const std::vector<std::vector<int>>& part_shapes) {
  std::vector<TensorT<T>> grads;
  grads.reserve(part_shapes.size());
  int offset = 0;
  const int n = gout.extent(0);
  for (const auto& shape : part_shapes) {
    TensorT<T> g(shape);
    const int width = shape[1];
    for (int row = 0; row < n; ++row)
      std::memcpy(&g.at2(row, 0), &gout.at2(row, offset), sizeof(T) * width);
    offset += width;
    grads.push_back(std::move(g));
  }
  if (offset != gout.extent(1)) throw ShapeError("concat_backward widths do not cover gradient");
  return grads;
}

}  // namespace rebox
