#pragma once

#include <cmath>
#include <cstddef>

// Raw numeric routines shared by the autodiff ops and the workspace
// predictors. Keeping both paths on the same loops makes graph-recorded
// forwards and inference forwards bit-identical.

namespace trajcnn::kernels {

// out[r,j] = bias[j] + sum_i x[r,i] * w[i,j]
// x: rows x din, w: din x dout, bias: dout (may be null), out: rows x dout
template <typename S>
void linear_forward(const S* x, const S* w, const S* bias, S* out,
                    std::size_t rows, std::size_t din, std::size_t dout) {
  for (std::size_t r = 0; r < rows; ++r) {
    S* o = out + r * dout;
    for (std::size_t j = 0; j < dout; ++j) o[j] = bias ? bias[j] : S(0);
    const S* xr = x + r * din;
    for (std::size_t i = 0; i < din; ++i) {
      const S xi = xr[i];
      const S* wr = w + i * dout;
      for (std::size_t j = 0; j < dout; ++j) o[j] += xi * wr[j];
    }
  }
}

template <typename S>
void linear_backward_input(const S* gout, const S* w, S* gx,
                           std::size_t rows, std::size_t din, std::size_t dout) {
  for (std::size_t r = 0; r < rows; ++r) {
    const S* go = gout + r * dout;
    S* gxr = gx + r * din;
    for (std::size_t i = 0; i < din; ++i) {
      const S* wr = w + i * dout;
      S acc = S(0);
      for (std::size_t j = 0; j < dout; ++j) acc += go[j] * wr[j];
      gxr[i] += acc;
    }
  }
}

template <typename S>
void linear_backward_weight(const S* gout, const S* x, S* gw,
                            std::size_t rows, std::size_t din, std::size_t dout) {
  for (std::size_t r = 0; r < rows; ++r) {
    const S* go = gout + r * dout;
    const S* xr = x + r * din;
    for (std::size_t i = 0; i < din; ++i) {
      const S xi = xr[i];
      S* gwr = gw + i * dout;
      for (std::size_t j = 0; j < dout; ++j) gwr[j] += xi * go[j];
    }
  }
}

template <typename S>
void linear_backward_bias(const S* gout, S* gb, std::size_t rows, std::size_t dout) {
  for (std::size_t r = 0; r < rows; ++r) {
    const S* go = gout + r * dout;
    for (std::size_t j = 0; j < dout; ++j) gb[j] += go[j];
  }
}

// Temporal convolution over a time-major sequence.
// x: t_in x cin, k: ksize x cin x cout, bias: cout (may be null),
// out: t_out x cout with t_out = t_in + 2*pad - ksize + 1. Zero padding.
template <typename S>
void conv1d_forward(const S* x, const S* k, const S* bias, S* out,
                    std::size_t t_in, std::size_t cin, std::size_t cout,
                    std::size_t ksize, std::size_t pad) {
  const std::size_t t_out = t_in + 2 * pad - ksize + 1;
  for (std::size_t t = 0; t < t_out; ++t) {
    S* o = out + t * cout;
    for (std::size_t j = 0; j < cout; ++j) o[j] = bias ? bias[j] : S(0);
    for (std::size_t kk = 0; kk < ksize; ++kk) {
      const std::ptrdiff_t s =
          static_cast<std::ptrdiff_t>(t + kk) - static_cast<std::ptrdiff_t>(pad);
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(t_in)) continue;
      const S* xr = x + static_cast<std::size_t>(s) * cin;
      const S* kr = k + kk * cin * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const S xi = xr[ci];
        const S* kc = kr + ci * cout;
        for (std::size_t co = 0; co < cout; ++co) o[co] += xi * kc[co];
      }
    }
  }
}

template <typename S>
void conv1d_backward_input(const S* gout, const S* k, S* gx,
                           std::size_t t_in, std::size_t cin, std::size_t cout,
                           std::size_t ksize, std::size_t pad) {
  const std::size_t t_out = t_in + 2 * pad - ksize + 1;
  for (std::size_t t = 0; t < t_out; ++t) {
    const S* go = gout + t * cout;
    for (std::size_t kk = 0; kk < ksize; ++kk) {
      const std::ptrdiff_t s =
          static_cast<std::ptrdiff_t>(t + kk) - static_cast<std::ptrdiff_t>(pad);
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(t_in)) continue;
      S* gxr = gx + static_cast<std::size_t>(s) * cin;
      const S* kr = k + kk * cin * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const S* kc = kr + ci * cout;
        S acc = S(0);
        for (std::size_t co = 0; co < cout; ++co) acc += go[co] * kc[co];
        gxr[ci] += acc;
      }
    }
  }
}

template <typename S>
void conv1d_backward_kernel(const S* gout, const S* x, S* gk,
                            std::size_t t_in, std::size_t cin, std::size_t cout,
                            std::size_t ksize, std::size_t pad) {
  const std::size_t t_out = t_in + 2 * pad - ksize + 1;
  for (std::size_t t = 0; t < t_out; ++t) {
    const S* go = gout + t * cout;
    for (std::size_t kk = 0; kk < ksize; ++kk) {
      const std::ptrdiff_t s =
          static_cast<std::ptrdiff_t>(t + kk) - static_cast<std::ptrdiff_t>(pad);
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(t_in)) continue;
      const S* xr = x + static_cast<std::size_t>(s) * cin;
      S* gkr = gk + kk * cin * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const S xi = xr[ci];
        S* gkc = gkr + ci * cout;
        for (std::size_t co = 0; co < cout; ++co) gkc[co] += xi * go[co];
      }
    }
  }
}

template <typename S>
void conv1d_backward_bias(const S* gout, S* gb, std::size_t t_out, std::size_t cout) {
  for (std::size_t t = 0; t < t_out; ++t) {
    const S* go = gout + t * cout;
    for (std::size_t co = 0; co < cout; ++co) gb[co] += go[co];
  }
}

template <typename S>
void relu_forward(const S* x, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > S(0) ? x[i] : S(0);
}

// Subgradient at exactly 0 is 0.
template <typename S>
void relu_backward(const S* x, const S* gout, S* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > S(0) ? gout[i] : S(0);
}

// Split form never evaluates exp of a large positive argument.
template <typename S>
S sigmoid_scalar(S x) {
  if (x >= S(0)) {
    return S(1) / (S(1) + std::exp(-x));
  }
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
void sigmoid_forward(const S* x, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(x[i]);
}

template <typename S>
void sigmoid_backward(const S* out, const S* gout, S* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += gout[i] * out[i] * (S(1) - out[i]);
}

template <typename S>
void tanh_forward(const S* x, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

template <typename S>
void tanh_backward(const S* out, const S* gout, S* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += gout[i] * (S(1) - out[i] * out[i]);
}

template <typename S>
S mse_forward(const S* pred, const S* target, std::size_t n) {
  S acc = S(0);
  for (std::size_t i = 0; i < n; ++i) {
    const S d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<S>(n);
}

}  // namespace trajcnn::kernels
