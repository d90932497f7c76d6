#include "rebox/ops.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rebox/rng.hpp"

namespace rebox {
namespace {

template <typename T>
TensorT<T> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1, double hi = 1) {
  TensorT<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = T(rng.uniform(lo, hi));
  return t;
}

/// Direct six-loop cross-correlation with the same ceil-division zero padding.
template <typename T>
TensorT<T> conv_oracle(const TensorT<T>& in, const TensorT<T>& w, const TensorT<T>& b,
                       int stride, Padding pad) {
  const int n = in.extent(0), h = in.extent(1), wd = in.extent(2), c = in.extent(3);
  const int kh = w.extent(0), kw = w.extent(1), oc = w.extent(3);
  const ConvDims d = conv_dims(h, wd, kh, kw, stride, pad);
  TensorT<T> out({n, d.out_h, d.out_w, oc});
  for (int img = 0; img < n; ++img)
    for (int oy = 0; oy < d.out_h; ++oy)
      for (int ox = 0; ox < d.out_w; ++ox)
        for (int o = 0; o < oc; ++o) {
          double acc = b[o];
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
              for (int ci = 0; ci < c; ++ci) {
                const int iy = oy * stride - d.pad_top + ky;
                const int ix = ox * stride - d.pad_left + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += double(in.at4(img, iy, ix, ci)) * double(w.at4(ky, kx, ci, o));
              }
          out.at4(img, oy, ox, o) = T(acc);
        }
  return out;
}

TEST(ConvDims, CeilDivisionAndPadSplit) {
  ConvDims d = conv_dims(5, 5, 3, 3, 2, Padding::same);
  EXPECT_EQ(d.out_h, 3);
  EXPECT_EQ(d.pad_top, 1);
  EXPECT_EQ(d.pad_left, 1);

  d = conv_dims(4, 4, 3, 3, 1, Padding::same);
  EXPECT_EQ(d.out_h, 4);
  EXPECT_EQ(d.pad_top, 1);

  d = conv_dims(6, 6, 3, 3, 2, Padding::same);  // odd total pad goes right-heavy
  EXPECT_EQ(d.out_h, 3);
  EXPECT_EQ(d.pad_top, 0);

  d = conv_dims(8, 8, 1, 1, 1, Padding::same);
  EXPECT_EQ(d.out_h, 8);
  EXPECT_EQ(d.pad_top, 0);

  d = conv_dims(5, 5, 3, 3, 1, Padding::valid);
  EXPECT_EQ(d.out_h, 3);
  EXPECT_EQ(d.pad_top, 0);
}

TEST(Conv, OneByOneIdentityKernel) {
  Rng rng(1);
  const auto in = random_tensor<float>({2, 5, 5, 3}, rng);
  Tensor w({1, 1, 3, 3});
  for (int c = 0; c < 3; ++c) w.at4(0, 0, c, c) = 1.0f;
  Tensor b({3});
  const auto out = conv2d_forward(in, w, b, 1, Padding::same);
  ASSERT_TRUE(out.same_shape(in));
  for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_FLOAT_EQ(out[i], in[i]);
}

TEST(Conv, ImpulseRevealsKernel) {
  Tensor in({1, 5, 5, 1});
  in.at4(0, 2, 2, 0) = 1.0f;
  Rng rng(2);
  const auto w = random_tensor<float>({3, 3, 1, 1}, rng);
  Tensor b({1});
  const auto out = conv2d_forward(in, w, b, 1, Padding::same);
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx)
      EXPECT_FLOAT_EQ(out.at4(0, 2 - (ky - 1), 2 - (kx - 1), 0), w.at4(ky, kx, 0, 0));
}

TEST(Conv, MatchesLoopOracle) {
  Rng rng(3);
  struct Case {
    int n, h, w, c, k, oc, stride;
    Padding pad;
  };
  const Case cases[] = {
      {2, 7, 7, 3, 3, 4, 1, Padding::same}, {1, 8, 6, 2, 3, 5, 2, Padding::same},
      {3, 5, 5, 1, 1, 2, 1, Padding::same}, {1, 9, 9, 4, 3, 3, 2, Padding::same},
      {2, 6, 6, 2, 3, 2, 1, Padding::valid},
  };
  for (const auto& cs : cases) {
    const auto in = random_tensor<float>({cs.n, cs.h, cs.w, cs.c}, rng);
    const auto w = random_tensor<float>({cs.k, cs.k, cs.c, cs.oc}, rng);
    const auto b = random_tensor<float>({cs.oc}, rng);
    const auto got = conv2d_forward(in, w, b, cs.stride, cs.pad);
    const auto want = conv_oracle(in, w, b, cs.stride, cs.pad);
    ASSERT_TRUE(got.same_shape(want));
    for (std::size_t i = 0; i < got.numel(); ++i)
      ASSERT_NEAR(got[i], want[i], 1e-5) << "case n=" << cs.n << " k=" << cs.k;
  }
}

/// Central-difference audit of all three convolution gradients in double.
TEST(Conv, BackwardMatchesFiniteDifferences) {
  Rng rng(4);
  auto in = random_tensor<double>({2, 5, 5, 2}, rng);
  auto w = random_tensor<double>({3, 3, 2, 3}, rng);
  auto b = random_tensor<double>({3}, rng);
  const int stride = 2;
  const auto out0 = conv2d_forward(in, w, b, stride, Padding::same);
  const auto gout = random_tensor<double>({out0.extent(0), out0.extent(1), out0.extent(2),
                                           out0.extent(3)}, rng);

  auto scalar_loss = [&]() {
    const auto out = conv2d_forward(in, w, b, stride, Padding::same);
    double acc = 0;
    for (std::size_t i = 0; i < out.numel(); ++i) acc += out[i] * gout[i];
    return acc;
  };
  const auto g = conv2d_backward(in, w, gout, stride, Padding::same);

  const double h = 1e-6;
  auto check = [&](TensorT<double>& t, const TensorT<double>& gt, const char* name) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = scalar_loss();
      t[i] = keep - h;
      const double dn = scalar_loss();
      t[i] = keep;
      EXPECT_NEAR(gt[i], (up - dn) / (2 * h), 1e-6) << name << "[" << i << "]";
    }
  };
  check(in, g.input, "input");
  check(w, g.weights, "weights");
  check(b, g.bias, "bias");
}

TEST(Relu, ForwardAndBackward) {
  Tensor in({2, 2});
  in.at2(0, 0) = -1.5f;
  in.at2(0, 1) = 2.0f;
  in.at2(1, 0) = 0.0f;
  in.at2(1, 1) = -0.0f;
  const auto out = relu_forward(in);
  EXPECT_FLOAT_EQ(out.at2(0, 0), 0.0f);
  EXPECT_FLOAT_EQ(out.at2(0, 1), 2.0f);
  EXPECT_FLOAT_EQ(out.at2(1, 0), 0.0f);

  Tensor gout({2, 2});
  gout.fill(1.0f);
  const auto gin = relu_backward(in, gout);
  EXPECT_FLOAT_EQ(gin.at2(0, 0), 0.0f);
  EXPECT_FLOAT_EQ(gin.at2(0, 1), 1.0f);
  EXPECT_FLOAT_EQ(gin.at2(1, 0), 0.0f);  // gradient dies exactly at zero
}

template <typename T>
MaxPoolResult<T> maxpool_oracle(const TensorT<T>& in, int k, int stride) {
  const int n = in.extent(0), h = in.extent(1), w = in.extent(2), c = in.extent(3);
  const ConvDims d = conv_dims(h, w, k, k, stride, Padding::same);
  MaxPoolResult<T> r{TensorT<T>({n, d.out_h, d.out_w, c}), {}};
  for (int img = 0; img < n; ++img)
    for (int oy = 0; oy < d.out_h; ++oy)
      for (int ox = 0; ox < d.out_w; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          T best = std::numeric_limits<T>::lowest();
          std::int32_t arg = -1;
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride - d.pad_top + ky;
              const int ix = ox * stride - d.pad_left + kx;
              const bool pad = iy < 0 || iy >= h || ix < 0 || ix >= w;
              const T v = pad ? T(0) : in.at4(img, iy, ix, ch);
              if (v > best) {
                best = v;
                arg = pad ? -1 : std::int32_t(in.idx4(img, iy, ix, ch));
              }
            }
          r.out.at4(img, oy, ox, ch) = best;
          r.argmax.push_back(arg);
        }
  return r;
}

TEST(MaxPool, ConstantInput) {
  Tensor in({1, 4, 4, 1});
  in.fill(2.5f);
  const auto r = maxpool_forward(in, 3, 2);
  EXPECT_EQ(r.out.extent(1), 2);
  for (std::size_t i = 0; i < r.out.numel(); ++i) EXPECT_FLOAT_EQ(r.out[i], 2.5f);
}

TEST(MaxPool, MatchesLoopOracleIncludingPadWins) {
  Rng rng(5);
  const auto in = random_tensor<float>({2, 7, 7, 3}, rng, -2, 0.5);  // mostly negative
  const auto got = maxpool_forward(in, 3, 2);
  const auto want = maxpool_oracle(in, 3, 2);
  ASSERT_TRUE(got.out.same_shape(want.out));
  bool saw_pad_win = false;
  for (std::size_t i = 0; i < got.out.numel(); ++i) {
    EXPECT_FLOAT_EQ(got.out[i], want.out[i]);
    EXPECT_EQ(got.argmax[i], want.argmax[i]);
    saw_pad_win = saw_pad_win || got.argmax[i] == -1;
  }
  EXPECT_TRUE(saw_pad_win);  // negative borders must lose to the implicit zero
}

TEST(MaxPool, TieKeepsFirstInWindowOrder) {
  Tensor in({1, 2, 2, 1});
  in.fill(3.0f);
  const auto r = maxpool_forward(in, 2, 2);
  ASSERT_EQ(r.out.numel(), std::size_t(1));
  EXPECT_EQ(r.argmax[0], std::int32_t(in.idx4(0, 0, 0, 0)));
}

TEST(MaxPool, BackwardRoutesToArgmaxAndDropsPadWins) {
  Tensor in({1, 2, 2, 1});
  in.at4(0, 0, 0, 0) = -1;
  in.at4(0, 0, 1, 0) = 5;
  in.at4(0, 1, 0, 0) = -2;
  in.at4(0, 1, 1, 0) = -3;
  const auto r = maxpool_forward(in, 3, 2);  // one output, window covers pad ring
  ASSERT_EQ(r.out.numel(), std::size_t(1));
  EXPECT_FLOAT_EQ(r.out[0], 5.0f);
  Tensor gout({1, 1, 1, 1});
  gout[0] = 7.0f;
  const auto gin = maxpool_backward(r.argmax, {1, 2, 2, 1}, gout);
  EXPECT_FLOAT_EQ(gin.at4(0, 0, 1, 0), 7.0f);
  EXPECT_FLOAT_EQ(gin.at4(0, 0, 0, 0), 0.0f);

  Tensor neg({1, 2, 2, 1});
  neg.fill(-1.0f);
  const auto rp = maxpool_forward(neg, 3, 2);
  EXPECT_EQ(rp.argmax[0], -1);  // pad zero beat every real cell
  const auto ginp = maxpool_backward(rp.argmax, {1, 2, 2, 1}, gout);
  for (std::size_t i = 0; i < ginp.numel(); ++i) EXPECT_FLOAT_EQ(ginp[i], 0.0f);
}

TEST(Fc, IdentityWeights) {
  Rng rng(6);
  const auto in = random_tensor<float>({3, 4}, rng);
  Tensor w({4, 4});
  for (int i = 0; i < 4; ++i) w.at2(i, i) = 1.0f;
  Tensor b({4});
  const auto out = fc_forward(in, w, b);
  for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_FLOAT_EQ(out[i], in[i]);
}

TEST(Fc, BackwardMatchesFiniteDifferences) {
  Rng rng(7);
  auto in = random_tensor<double>({3, 5}, rng);
  auto w = random_tensor<double>({5, 4}, rng);
  auto b = random_tensor<double>({4}, rng);
  const auto gout = random_tensor<double>({3, 4}, rng);

  auto scalar_loss = [&]() {
    const auto out = fc_forward(in, w, b);
    double acc = 0;
    for (std::size_t i = 0; i < out.numel(); ++i) acc += out[i] * gout[i];
    return acc;
  };
  const auto g = fc_backward(in, w, gout);
  const double h = 1e-6;
  auto check = [&](TensorT<double>& t, const TensorT<double>& gt, const char* name) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = scalar_loss();
      t[i] = keep - h;
      const double dn = scalar_loss();
      t[i] = keep;
      EXPECT_NEAR(gt[i], (up - dn) / (2 * h), 1e-7) << name << "[" << i << "]";
    }
  };
  check(in, g.input, "input");
  check(w, g.weights, "weights");
  check(b, g.bias, "bias");
}

TEST(Dropout, TestModeAndZeroProbabilityPassThrough) {
  Rng rng(8);
  const auto in = random_tensor<float>({2, 10}, rng);
  Rng d1(9);
  const auto test_mode = dropout_forward(in, 0.5, false, d1);
  for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_FLOAT_EQ(test_mode.out[i], in[i]);

  Rng d2(9);
  const auto p0 = dropout_forward(in, 0.0, true, d2);
  for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_FLOAT_EQ(p0.out[i], in[i]);
  EXPECT_EQ(d2.uniform(), Rng(9).uniform());  // no draws consumed
}

TEST(Dropout, KeepRateAndInvertedScaling) {
  const double p = 0.25;
  Tensor in({1, 1000000});
  in.fill(2.0f);
  Rng rng(10);
  const auto r = dropout_forward(in, p, true, rng);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < in.numel(); ++i) {
    if (r.mask[i]) {
      ++kept;
      EXPECT_FLOAT_EQ(r.out[i], float(2.0 / (1 - p)));
    } else {
      EXPECT_FLOAT_EQ(r.out[i], 0.0f);
    }
  }
  const double frac = double(kept) / double(in.numel());
  EXPECT_NEAR(frac, 1 - p, 3 * std::sqrt(p * (1 - p) / double(in.numel())));

  Tensor gout(in.shape());
  gout.fill(1.0f);
  const auto gin = dropout_backward(r.mask, p, gout);
  for (std::size_t i = 0; i < 1000; ++i)
    EXPECT_FLOAT_EQ(gin[i], r.mask[i] ? float(1.0 / (1 - p)) : 0.0f);
}

TEST(Flatten, RowMajorLayoutPreserved) {
  Tensor in({2, 2, 3, 2});
  for (std::size_t i = 0; i < in.numel(); ++i) in[i] = float(i);
  const auto out = flatten(in);
  ASSERT_EQ(out.rank(), 2);
  EXPECT_EQ(out.extent(0), 2);
  EXPECT_EQ(out.extent(1), 12);
  for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_FLOAT_EQ(out[i], float(i));
  EXPECT_FLOAT_EQ(out.at2(1, 0), in.at4(1, 0, 0, 0));
}

TEST(Concat, ForwardThenBackwardRoundTrips) {
  Rng rng(11);
  const auto a = random_tensor<float>({3, 2}, rng);
  const auto b = random_tensor<float>({3, 5}, rng);
  const auto c = random_tensor<float>({3, 1}, rng);
  const auto out = concat_forward<float>({&a, &b, &c});
  ASSERT_EQ(out.extent(1), 8);
  EXPECT_FLOAT_EQ(out.at2(1, 0), a.at2(1, 0));
  EXPECT_FLOAT_EQ(out.at2(1, 2), b.at2(1, 0));
  EXPECT_FLOAT_EQ(out.at2(2, 7), c.at2(2, 0));

  const auto parts = concat_backward(out, {{3, 2}, {3, 5}, {3, 1}});
  ASSERT_EQ(parts.size(), std::size_t(3));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_FLOAT_EQ(parts[0][i], a[i]);
  for (std::size_t i = 0; i < b.numel(); ++i) EXPECT_FLOAT_EQ(parts[1][i], b[i]);
  for (std::size_t i = 0; i < c.numel(); ++i) EXPECT_FLOAT_EQ(parts[2][i], c[i]);
}

TEST(Concat, ShapeErrors) {
  Tensor a({3, 2}), b({4, 2});
  EXPECT_THROW(concat_forward<float>({&a, &b}), ShapeError);
  EXPECT_THROW(concat_forward<float>({}), ShapeError);
  Tensor g({3, 5});
  EXPECT_THROW(concat_backward(g, {{3, 2}, {3, 2}}), ShapeError);
}

}  // namespace
}  // namespace rebox
