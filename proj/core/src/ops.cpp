// SPDX-License-Identifier: Apache-2.0
#include "distilkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "distilkit/error.hpp"
#include "distilkit/rng.hpp"

namespace distilkit::ops {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " + shape_to_string(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_to_string(t.shape()));
  }
}

Tape& tape_of(Var a, Var b, const char* op) {
  if (a.tape() != b.tape()) throw ValidationError(std::string(op) + ": inputs recorded on different tapes");
  return *a.tape();
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

// Accumulates an R x C tile of C in locals so the compiler keeps it in
// registers across the whole k loop.
template <std::size_t R, std::size_t C>
inline void gemm_tile(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
  double acc[R][C] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    for (std::size_t r = 0; r < R; ++r) {
      const double av = a[r * k + p];
      for (std::size_t j = 0; j < C; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) c[r * n + j] += acc[r][j];
}

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  constexpr std::size_t R = 4, C = 8;
  std::size_t i = 0;
  for (; i + R <= m; i += R) {
    std::size_t j = 0;
    for (; j + C <= n; j += C) gemm_tile<R, C>(a + i * k, b + j, c + i * n + j, k, n);
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < R; ++r) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[(i + r) * k + p] * b[p * n + j];
        c[(i + r) * n + j] += s;
      }
    }
  }
  for (; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + p * n, c + i * n, n);
  }
}

void transpose_into(const double* src, std::size_t rows, std::size_t cols, std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  thread_local std::vector<double> bt;
  transpose_into(b, n, k, bt);
  gemm_nn(a, bt.data(), c, m, k, n);
}

// C[K,N] += A[M,K]^T * B[M,N]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  thread_local std::vector<double> at;
  transpose_into(a, m, k, at);
  gemm_nn(at.data(), b, c, k, m, n);
}

template <typename F>
Var unary(Var a, const char* op, F&& f, Tape::BackwardFn backward) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  auto o = out.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < xs.size(); ++i) o[i] = f(xs[i]);
  return a.tape()->record(std::move(out), {a}, std::move(backward), op);
}

}  // namespace

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b, "add");
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    for (Var v : {a, b}) {
      if (Tensor* gv = t.grad_sink(v)) {
        auto d = gv->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
      }
    }
  }, "add");
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b, "sub");
  if (a.shape() != b.shape()) shape_mismatch("sub", a.shape(), b.shape());
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
    }
    if (Tensor* gb = t.grad_sink(b)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] -= g[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b, "mul");
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor* gb = t.grad_sink(b)) {
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i] * av[i];
    }
  }, "mul");
}

Var scale(Var a, double factor) {
  return unary(a, "scale", [factor](double x) { return x * factor; }, [a, factor](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * factor;
    }
  });
}

Var add_scalar(Var a, double value) {
  return unary(a, "add_scalar", [value](double x) { return x + value; }, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = tape_of(x, bias, "add_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || xv.rank() == 0 || xv.shape().back() != bv.dim(0)) {
    shape_mismatch("add_bias", xv.shape(), bv.shape());
  }
  const std::size_t d = bv.dim(0);
  const std::size_t rows = d ? xv.numel() / d : 0;
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data().data() + r * d;
    for (std::size_t j = 0; j < d; ++j) o[j] += bv[j];
  }
  return tape.record(std::move(out), {x, bias}, [x, bias, rows, d](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i];
    }
    if (Tensor* gb = t.grad_sink(bias)) {
      for (std::size_t r = 0; r < rows; ++r) axpy(1.0, g.data().data() + r * d, gb->data().data(), d);
    }
  }, "add_bias");
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) shape_mismatch("matmul", av.shape(), bv.shape());
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out(Shape{m, n}, 0.0);
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return tape.record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) gemm_nt(g.data().data(), b.value().data().data(), ga->data().data(), m, n, k);
    if (Tensor* gb = t.grad_sink(b)) gemm_tn(a.value().data().data(), g.data().data(), gb->data().data(), m, k, n);
  }, "matmul");
}

Var bmm(Var a, Var b, bool transpose_b) {
  Tape& tape = tape_of(a, b, "bmm");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0)) shape_mismatch("bmm", av.shape(), bv.shape());
  const std::size_t groups = av.dim(0), m = av.dim(1), k = av.dim(2);
  const std::size_t bk = transpose_b ? bv.dim(2) : bv.dim(1);
  const std::size_t n = transpose_b ? bv.dim(1) : bv.dim(2);
  if (bk != k) shape_mismatch("bmm", av.shape(), bv.shape());
  Tensor out(Shape{groups, m, n}, 0.0);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const double* ap = av.data().data() + gi * m * k;
    const double* bp = bv.data().data() + gi * k * n;
    double* cp = out.data().data() + gi * m * n;
    if (transpose_b) {
      gemm_nt(ap, bp, cp, m, k, n);
    } else {
      gemm_nn(ap, bp, cp, m, k, n);
    }
  }
  return tape.record(std::move(out), {a, b}, [a, b, groups, m, k, n, transpose_b](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_sink(a);
    Tensor* gb = t.grad_sink(b);
    const double* avp = a.value().data().data();
    const double* bvp = b.value().data().data();
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const double* gp = g.data().data() + gi * m * n;
      const double* ap = avp + gi * m * k;
      const double* bp = bvp + gi * k * n;
      if (transpose_b) {
        // C = A B^T with B[N,K]: dA = G B, dB = G^T A
        if (ga) gemm_nn(gp, bp, ga->data().data() + gi * m * k, m, n, k);
        if (gb) gemm_tn(gp, ap, gb->data().data() + gi * k * n, m, n, k);
      } else {
        if (ga) gemm_nt(gp, bp, ga->data().data() + gi * m * k, m, n, k);
        if (gb) gemm_tn(ap, gp, gb->data().data() + gi * k * n, m, k, n);
      }
    }
  }, "bmm");
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      const Tensor& x = a.value();
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * std::exp(x[i]);
    }
  });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) throw NumericalError("log: non-positive input " + std::to_string(x));
  }
  return unary(a, "log", [](double x) { return std::log(x); }, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      const Tensor& x = a.value();
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] / x[i];
    }
  });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      const Tensor& x = a.value();
      for (std::size_t i = 0; i < g.numel(); ++i) {
        if (x[i] > 0.0) (*ga)[i] += g[i];
      }
    }
  });
}

Var gelu(Var a) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  constexpr double inv_sqrt2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return unary(a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
               [a](Tape& t, const Tensor& g) {
                 if (Tensor* ga = t.grad_sink(a)) {
                   const Tensor& x = a.value();
                   for (std::size_t i = 0; i < g.numel(); ++i) {
                     const double xi = x[i];
                     const double cdf = 0.5 * (1.0 + std::erf(xi * inv_sqrt2));
                     const double pdf = inv_sqrt2pi * std::exp(-0.5 * xi * xi);
                     (*ga)[i] += g[i] * (cdf + xi * pdf);
                   }
                 }
               });
}

Var sum(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  require_rank("sum", x, 2);
  if (axis > 1) throw ShapeError("sum: axis " + std::to_string(axis) + " invalid for shape " + shape_to_string(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out(Shape{axis == 0 ? c : r}, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += x.at(i, j);
  }
  return a.tape()->record(std::move(out), {a}, [a, axis, r, c](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga->at(i, j) += g[axis == 0 ? j : i];
      }
    }
  }, "sum");
}

Var sum_all(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape()->record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) {
      const double gv = g[0];
      for (double& v : ga->data()) v += gv;
    }
  }, "sum_all");
}

Var mean_all(Var a) {
  const std::size_t n = a.value().numel();
  if (n == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& tape = tape_of(x, gamma, "layer_norm");
  tape_of(x, beta, "layer_norm");
  const Tensor& xv = x.value();
  require_rank("layer_norm", xv, 2);
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  if (gamma.value().shape() != Shape{d}) shape_mismatch("layer_norm", xv.shape(), gamma.shape());
  if (beta.value().shape() != Shape{d}) shape_mismatch("layer_norm", xv.shape(), beta.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();

  Tensor out(Shape{n, d});
  std::vector<double> xhat(n * d);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = xv.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * is;
      xhat[i * d + j] = h;
      out.at(i, j) = gv[j] * h + bv[j];
    }
  }
  return tape.record(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
                       Tensor* gx = t.grad_sink(x);
                       Tensor* gg = t.grad_sink(gamma);
                       Tensor* gb = t.grad_sink(beta);
                       const Tensor& gam = gamma.value();
                       std::vector<double> dxhat(d);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double* h = xhat.data() + i * d;
                         const double* gr = g.data().data() + i * d;
                         if (gg) {
                           for (std::size_t j = 0; j < d; ++j) (*gg)[j] += gr[j] * h[j];
                         }
                         if (gb) {
                           for (std::size_t j = 0; j < d; ++j) (*gb)[j] += gr[j];
                         }
                         if (gx) {
                           double mean_dh = 0.0, mean_dh_h = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             dxhat[j] = gr[j] * gam[j];
                             mean_dh += dxhat[j];
                             mean_dh_h += dxhat[j] * h[j];
                           }
                           mean_dh /= static_cast<double>(d);
                           mean_dh_h /= static_cast<double>(d);
                           double* gxr = gx->data().data() + i * d;
                           for (std::size_t j = 0; j < d; ++j) {
                             gxr[j] += inv_std[i] * (dxhat[j] - mean_dh - h[j] * mean_dh_h);
                           }
                         }
                       }
                     },
                     "layer_norm");
}

namespace {

// Row softmax over the last axis, writing into `out`.
void softmax_rows(const Tensor& x, Tensor& out) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = d ? x.numel() / d : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * d;
    double* o = out.data().data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    for (std::size_t j = 0; j < d; ++j) o[j] /= s;
  }
}

}  // namespace

Var softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0 || xv.shape().back() == 0) throw ShapeError("softmax: empty last axis in " + shape_to_string(xv.shape()));
  Tensor out(xv.shape());
  softmax_rows(xv, out);
  const std::size_t d = xv.shape().back();
  Tensor y = out;
  return x.tape()->record(std::move(out), {x}, [x, d, y = std::move(y)](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      const std::size_t rows = y.numel() / d;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data().data() + r * d;
        const double* gr = g.data().data() + r * d;
        const double s = dot(yr, gr, d);
        double* o = gx->data().data() + r * d;
        for (std::size_t j = 0; j < d; ++j) o[j] += yr[j] * (gr[j] - s);
      }
    }
  }, "softmax");
}

Var log_softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0 || xv.shape().back() == 0) throw ShapeError("log_softmax: empty last axis in " + shape_to_string(xv.shape()));
  const std::size_t d = xv.shape().back();
  const std::size_t rows = xv.numel() / d;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data().data() + r * d;
    double* o = out.data().data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(in[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < d; ++j) o[j] = in[j] - lse;
  }
  Tensor y = out;
  return x.tape()->record(std::move(out), {x}, [x, d, rows, y = std::move(y)](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data().data() + r * d;
        const double* gr = g.data().data() + r * d;
        double gs = 0.0;
        for (std::size_t j = 0; j < d; ++j) gs += gr[j];
        double* o = gx->data().data() + r * d;
        for (std::size_t j = 0; j < d; ++j) o[j] += gr[j] - std::exp(yr[j]) * gs;
      }
    }
  }, "log_softmax");
}

Var masked_softmax(Var scores, std::span<const std::uint8_t> key_mask, std::size_t heads) {
  const Tensor& sv = scores.value();
  require_rank("masked_softmax", sv, 3);
  const std::size_t groups = sv.dim(0), lq = sv.dim(1), lk = sv.dim(2);
  if (heads == 0 || groups % heads != 0 || key_mask.size() != (groups / heads) * lk) {
    throw ShapeError("masked_softmax: mask of " + std::to_string(key_mask.size()) + " entries incompatible with scores " +
                     shape_to_string(sv.shape()));
  }
  Tensor out(sv.shape(), 0.0);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::uint8_t* mask = key_mask.data() + (gi / heads) * lk;
    for (std::size_t i = 0; i < lq; ++i) {
      const double* in = sv.data().data() + (gi * lq + i) * lk;
      double* o = out.data().data() + (gi * lq + i) * lk;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < lk; ++j) {
        if (mask[j]) mx = std::max(mx, in[j]);
      }
      if (!std::isfinite(mx)) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < lk; ++j) {
        if (mask[j]) {
          o[j] = std::exp(in[j] - mx);
          s += o[j];
        }
      }
      for (std::size_t j = 0; j < lk; ++j) o[j] /= s;
    }
  }
  Tensor y = out;
  return scores.tape()->record(std::move(out), {scores}, [scores, lk, y = std::move(y)](Tape& t, const Tensor& g) {
    if (Tensor* gs = t.grad_sink(scores)) {
      const std::size_t rows = y.numel() / lk;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data().data() + r * lk;
        const double* gr = g.data().data() + r * lk;
        const double s = dot(yr, gr, lk);
        double* o = gs->data().data() + r * lk;
        for (std::size_t j = 0; j < lk; ++j) o[j] += yr[j] * (gr[j] - s);
      }
    }
  }, "masked_softmax");
}

Var segment_attention(Var q, Var k, Var v, std::span<const AttentionSegment> segments, std::size_t heads) {
  Tape& tape = tape_of(q, k, "segment_attention");
  tape_of(k, v, "segment_attention");
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  require_rank("segment_attention", qv, 2);
  require_rank("segment_attention", kv, 2);
  if (kv.shape() != vv.shape() || qv.dim(1) != kv.dim(1)) shape_mismatch("segment_attention", qv.shape(), kv.shape());
  const std::size_t d = qv.dim(1);
  if (heads == 0 || d % heads != 0) throw ShapeError("segment_attention: width " + std::to_string(d) + " not divisible into " + std::to_string(heads) + " heads");
  const std::size_t dh = d / heads;
  std::vector<AttentionSegment> segs(segments.begin(), segments.end());
  std::size_t prob_size = 0;
  for (const auto& s : segs) {
    if (s.q_begin + s.q_len > qv.dim(0) || s.k_begin + s.k_len > kv.dim(0) || s.k_len == 0) {
      throw ShapeError("segment_attention: segment out of range for shapes " + shape_to_string(qv.shape()) + " and " +
                       shape_to_string(kv.shape()));
    }
    prob_size += heads * s.q_len * s.k_len;
  }

  // probs holds softmax rows for every (segment, head, query) in order.
  auto probs = std::make_shared<std::vector<double>>(prob_size);
  Tensor out(qv.shape(), 0.0);
  std::size_t off = 0;
  for (const auto& s : segs) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * dh;
      for (std::size_t i = 0; i < s.q_len; ++i) {
        const double* qr = qv.data().data() + (s.q_begin + i) * d + c0;
        double* p = probs->data() + off;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < s.k_len; ++j) {
          p[j] = dot(qr, kv.data().data() + (s.k_begin + j) * d + c0, dh);
          mx = std::max(mx, p[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < s.k_len; ++j) {
          p[j] = std::exp(p[j] - mx);
          sum += p[j];
        }
        double* o = out.data().data() + (s.q_begin + i) * d + c0;
        for (std::size_t j = 0; j < s.k_len; ++j) {
          p[j] /= sum;
          axpy(p[j], vv.data().data() + (s.k_begin + j) * d + c0, o, dh);
        }
        off += s.k_len;
      }
    }
  }

  return tape.record(std::move(out), {q, k, v}, [q, k, v, segs = std::move(segs), probs, heads, d, dh](Tape& t, const Tensor& g) {
    Tensor* gq = t.grad_sink(q);
    Tensor* gk = t.grad_sink(k);
    Tensor* gv = t.grad_sink(v);
    const double* qd = q.value().data().data();
    const double* kd = k.value().data().data();
    const double* vd = v.value().data().data();
    std::vector<double> ds;
    std::size_t off = 0;
    for (const auto& s : segs) {
      ds.resize(s.k_len);
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * dh;
        for (std::size_t i = 0; i < s.q_len; ++i) {
          const double* p = probs->data() + off;
          const double* go = g.data().data() + (s.q_begin + i) * d + c0;
          double inner = 0.0;
          for (std::size_t j = 0; j < s.k_len; ++j) {
            const double* vr = vd + (s.k_begin + j) * d + c0;
            if (gv) axpy(p[j], go, gv->data().data() + (s.k_begin + j) * d + c0, dh);
            ds[j] = dot(go, vr, dh);
            inner += ds[j] * p[j];
          }
          for (std::size_t j = 0; j < s.k_len; ++j) {
            const double dsj = p[j] * (ds[j] - inner);
            if (gq) axpy(dsj, kd + (s.k_begin + j) * d + c0, gq->data().data() + (s.q_begin + i) * d + c0, dh);
            if (gk) axpy(dsj, qd + (s.q_begin + i) * d + c0, gk->data().data() + (s.k_begin + j) * d + c0, dh);
          }
          off += s.k_len;
        }
      }
    }
  }, "segment_attention");
}

Var embedding(Var table, std::span<const std::int32_t> ids) {
  const Tensor& tv = table.value();
  require_rank("embedding", tv, 2);
  const std::size_t v = tv.dim(0), d = tv.dim(1);
  Tensor out(Shape{ids.size(), d});
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= v) {
      throw ValidationError("embedding: id " + std::to_string(idx[i]) + " out of range for vocabulary of " +
                            std::to_string(v));
    }
    auto src = tv.row(static_cast<std::size_t>(idx[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return table.tape()->record(std::move(out), {table}, [table, d, idx = std::move(idx)](Tape& t, const Tensor& g) {
    if (Tensor* gt = t.grad_sink(table)) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        axpy(1.0, g.data().data() + i * d, gt->data().data() + static_cast<std::size_t>(idx[i]) * d, d);
      }
    }
  }, "embedding");
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  require_rank("gather_rows", xv, 2);
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  Tensor out(Shape{rows.size(), d});
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) throw ShapeError("gather_rows: row " + std::to_string(idx[i]) + " out of range for " + shape_to_string(xv.shape()));
    auto src = xv.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return x.tape()->record(std::move(out), {x}, [x, d, idx = std::move(idx)](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (std::size_t i = 0; i < idx.size(); ++i) axpy(1.0, g.data().data() + i * d, gx->data().data() + idx[i] * d, d);
    }
  }, "gather_rows");
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value();
  out.reshape(std::move(shape));
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i];
    }
  }, "reshape");
}

Var split_heads(Var x, std::size_t batch, std::size_t length, std::size_t heads) {
  const Tensor& xv = x.value();
  require_rank("split_heads", xv, 2);
  if (heads == 0 || xv.dim(0) != batch * length || xv.dim(1) % heads != 0) {
    throw ShapeError("split_heads: shape " + shape_to_string(xv.shape()) + " incompatible with batch=" +
                     std::to_string(batch) + " length=" + std::to_string(length) + " heads=" + std::to_string(heads));
  }
  const std::size_t d = xv.dim(1), dh = d / heads;
  Tensor out(Shape{batch * heads, length, dh});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t l = 0; l < length; ++l)
      for (std::size_t h = 0; h < heads; ++h) {
        const double* src = xv.data().data() + (b * length + l) * d + h * dh;
        double* dst = out.data().data() + ((b * heads + h) * length + l) * dh;
        std::copy(src, src + dh, dst);
      }
  return x.tape()->record(std::move(out), {x}, [x, batch, length, heads, d, dh](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t l = 0; l < length; ++l)
          for (std::size_t h = 0; h < heads; ++h) {
            axpy(1.0, g.data().data() + ((b * heads + h) * length + l) * dh,
                 gx->data().data() + (b * length + l) * d + h * dh, dh);
          }
    }
  }, "split_heads");
}

Var merge_heads(Var x, std::size_t batch, std::size_t length, std::size_t heads) {
  const Tensor& xv = x.value();
  require_rank("merge_heads", xv, 3);
  if (xv.dim(0) != batch * heads || xv.dim(1) != length) {
    throw ShapeError("merge_heads: shape " + shape_to_string(xv.shape()) + " incompatible with batch=" +
                     std::to_string(batch) + " length=" + std::to_string(length) + " heads=" + std::to_string(heads));
  }
  const std::size_t dh = xv.dim(2), d = dh * heads;
  Tensor out(Shape{batch * length, d});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t l = 0; l < length; ++l)
      for (std::size_t h = 0; h < heads; ++h) {
        const double* src = xv.data().data() + ((b * heads + h) * length + l) * dh;
        double* dst = out.data().data() + (b * length + l) * d + h * dh;
        std::copy(src, src + dh, dst);
      }
  return x.tape()->record(std::move(out), {x}, [x, batch, length, heads, d, dh](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t l = 0; l < length; ++l)
          for (std::size_t h = 0; h < heads; ++h) {
            axpy(1.0, g.data().data() + (b * length + l) * d + h * dh,
                 gx->data().data() + ((b * heads + h) * length + l) * dh, dh);
          }
    }
  }, "merge_heads");
}

Var dropout(Var x, double rate, SeededRng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("dropout: rate must lie in [0,1)");
  const Tensor& xv = x.value();
  std::vector<double> mask(xv.numel());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor out = xv;
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] *= mask[i];
  return x.tape()->record(std::move(out), {x}, [x, mask = std::move(mask)](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (std::size_t i = 0; i < mask.size(); ++i) (*gx)[i] += g[i] * mask[i];
    }
  }, "dropout");
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) throw ValidationError("clamp: lower bound exceeds upper bound");
  return unary(x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); }, [x, lo, hi](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      const Tensor& xv = x.value();
      for (std::size_t i = 0; i < g.numel(); ++i) {
        if (xv[i] > lo && xv[i] < hi) (*gx)[i] += g[i];
      }
    }
  });
}

Var detach(Var x) { return x.tape()->constant(x.value()); }

}  // namespace distilkit::ops
