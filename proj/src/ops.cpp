// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "oadt/parallel.hpp"

namespace oadt {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif
}  // namespace

bool finite_checks_enabled() { return g_finite_checks; }
void set_finite_checks(bool enabled) { g_finite_checks = enabled; }

namespace detail {

template <typename T>
static void check_finite_impl(std::span<const T> values, const char* op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorKind::kNumeric, std::string("non-finite value produced by ") + op +
                                    " at flat index " + std::to_string(i));
    }
  }
}

void check_finite(std::span<const float> values, const char* op) { check_finite_impl(values, op); }
void check_finite(std::span<const double> values, const char* op) { check_finite_impl(values, op); }

}  // namespace detail

namespace ops {
namespace {

// Gradient accumulation target; takes the handle by value so the closure
// can stay const.
template <typename T>
std::span<T> grad_of(Tensor<T> t) {
  return t.grad_buffer();
}

struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_stride;
  std::vector<std::size_t> b_stride;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Broadcast p;
  p.out.assign(rank, 1);
  p.a_stride.assign(rank, 0);
  p.b_stride.assign(rank, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t d = rank - 1 - i;
    const std::size_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      fail(ErrorKind::kShape,
           "cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    }
    p.out[d] = std::max(ea, eb);
    p.a_stride[d] = ea == 1 ? 0 : sa;
    p.b_stride[d] = eb == 1 ? 0 : sb;
    sa *= ea;
    sb *= eb;
  }
  return p;
}

// Calls f(out_index, a_offset, b_offset) for every output element in order.
template <typename F>
void for_each_broadcast(const Broadcast& p, F&& f) {
  const std::size_t rank = p.out.size();
  const std::size_t n = shape_numel(p.out);
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, oa, ob);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += p.a_stride[d];
      ob += p.b_stride[d];
      if (idx[d] < p.out[d]) break;
      oa -= p.a_stride[d] * p.out[d];
      ob -= p.b_stride[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

template <typename T, typename Fwd, typename GradA, typename GradB>
Tensor<T> binary(const char* name, const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, GradA grad_a,
                 GradB grad_b) {
  Broadcast plan = plan_broadcast(a.shape(), b.shape());
  std::vector<T> out(shape_numel(plan.out));
  const auto ad = a.data();
  const auto bd = b.data();
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(ad[i], bd[i]);
  } else {
    for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      out[i] = fwd(ad[ia], bd[ib]);
    });
  }
  Shape shape = plan.out;
  return make_result<T>(name, std::move(shape), std::move(out), {a, b},
                        [a, b, plan = std::move(plan), grad_a, grad_b](const Tensor<T>& o) {
                          const auto g = o.grad();
                          const auto ad = a.data();
                          const auto bd = b.data();
                          const auto od = o.data();
                          std::span<T> ga, gb;
                          if (a.requires_grad()) ga = grad_of(a);
                          if (b.requires_grad()) gb = grad_of(b);
                          for_each_broadcast(plan, [&](std::size_t i, std::size_t ia,
                                                       std::size_t ib) {
                            if (!ga.empty()) ga[ia] += grad_a(ad[ia], bd[ib], od[i], g[i]);
                            if (!gb.empty()) gb[ib] += grad_b(ad[ia], bd[ib], od[i], g[i]);
                          });
                        });
}

template <typename T, typename Fwd, typename Grad>
Tensor<T> unary(const char* name, const Tensor<T>& x, Fwd fwd, Grad grad) {
  const auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  return make_result<T>(name, x.shape(), std::move(out), {x}, [x, grad](const Tensor<T>& o) {
    const auto g = o.grad();
    const auto xd = x.data();
    const auto od = o.data();
    auto gx = grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += grad(xd[i], od[i]) * g[i];
  });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T, T g) { return g; },
      [](T, T, T, T g) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T, T g) { return g; },
      [](T, T, T, T g) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T, T g) { return g * y; },
      [](T x, T, T, T g) { return g * x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T, T g) { return g / y; },
      [](T x, T y, T, T g) { return -g * x / (y * y); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary<T>(
      "add_scalar", x, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T value) {
  return unary<T>(
      "mul_scalar", x, [value](T v) { return v * value; }, [value](T, T) { return value; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T kInvSqrt2Pi = std::numbers::inv_sqrtpi_v<T> * kInvSqrt2;
  return unary<T>(
      "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * kInvSqrt2)); },
      [](T v, T) {
        return T(0.5) * (T(1) + std::erf(v * kInvSqrt2)) +
               v * kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
      });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x, [](T v) { return stable_sigmoid(v); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary<T>(
      "softplus", x,
      [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) { return stable_sigmoid(v); });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2 || a.extent(-1) != b.extent(-2)) {
    fail(ErrorKind::kShape,
         "matmul dimension mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.extent(-2), k = a.extent(-1), p = b.extent(-1);
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  Broadcast plan = plan_broadcast(a_batch, b_batch);
  auto blocks = std::make_shared<std::vector<std::array<std::size_t, 3>>>();
  for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
    blocks->push_back({o, ia, ib});
  });

  Shape out_shape = plan.out;
  out_shape.push_back(m);
  out_shape.push_back(p);
  std::vector<T> out(blocks->size() * m * p, T(0));
  const T* ad = a.data().data();
  const T* bd = b.data().data();
  parallel_for(blocks->size() * m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto& blk = (*blocks)[r / m];
      const std::size_t i = r % m;
      const T* arow = ad + blk[1] * m * k + i * k;
      T* crow = out.data() + blk[0] * m * p + i * p;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T aik = arow[kk];
        const T* brow = bd + blk[2] * k * p + kk * p;
        for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
      }
    }
  });

  return make_result<T>("matmul", std::move(out_shape), std::move(out), {a, b},
                        [a, b, blocks, m, k, p](const Tensor<T>& o) {
                          const T* g = o.grad().data();
                          const T* ad = a.data().data();
                          const T* bd = b.data().data();
                          T* ga = a.requires_grad() ? grad_of(a).data() : nullptr;
                          T* gb = b.requires_grad() ? grad_of(b).data() : nullptr;
                          for (const auto& blk : *blocks) {
                            const T* gblk = g + blk[0] * m * p;
                            const T* ablk = ad + blk[1] * m * k;
                            const T* bblk = bd + blk[2] * k * p;
                            for (std::size_t i = 0; i < m; ++i) {
                              const T* grow = gblk + i * p;
                              for (std::size_t kk = 0; kk < k; ++kk) {
                                const T* brow = bblk + kk * p;
                                if (ga != nullptr) {
                                  T acc = T(0);
                                  for (std::size_t j = 0; j < p; ++j) acc += grow[j] * brow[j];
                                  ga[blk[1] * m * k + i * k + kk] += acc;
                                }
                                if (gb != nullptr) {
                                  const T aik = ablk[i * k + kk];
                                  T* gbrow = gb + blk[2] * k * p + kk * p;
                                  for (std::size_t j = 0; j < p; ++j) gbrow[j] += aik * grow[j];
                                }
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.extent(-1) != weight.extent(1) ||
      (bias.defined() && (bias.rank() != 1 || bias.extent(0) != weight.extent(0)))) {
    fail(ErrorKind::kShape, "linear dimension mismatch: x " + shape_str(x.shape()) + ", weight " +
                                shape_str(weight.shape()) +
                                (bias.defined() ? ", bias " + shape_str(bias.shape()) : ""));
  }
  const std::size_t in = weight.extent(1), out_dim = weight.extent(0);
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  std::vector<T> out(rows * out_dim);
  const T* xd = x.data().data();
  const T* wd = weight.data().data();
  const T* bd = bias.defined() ? bias.data().data() : nullptr;
  parallel_for(rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const T* xr = xd + r * in;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const T* wr = wd + o * in;
        T acc = bd != nullptr ? bd[o] : T(0);
        for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
        out[r * out_dim + o] = acc;
      }
    }
  });
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(
      "linear", std::move(out_shape), std::move(out), inputs,
      [x, weight, bias, rows, in, out_dim](const Tensor<T>& o) {
        const T* g = o.grad().data();
        const T* xd = x.data().data();
        const T* wd = weight.data().data();
        T* gx = x.requires_grad() ? grad_of(x).data() : nullptr;
        T* gw = weight.requires_grad() ? grad_of(weight).data() : nullptr;
        T* gb = bias.defined() && bias.requires_grad() ? grad_of(bias).data() : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g + r * out_dim;
          const T* xr = xd + r * in;
          for (std::size_t oo = 0; oo < out_dim; ++oo) {
            const T go = gr[oo];
            if (gx != nullptr) {
              const T* wr = wd + oo * in;
              T* gxr = gx + r * in;
              for (std::size_t i = 0; i < in; ++i) gxr[i] += go * wr[i];
            }
            if (gw != nullptr) {
              T* gwr = gw + oo * in;
              for (std::size_t i = 0; i < in; ++i) gwr[i] += go * xr[i];
            }
            if (gb != nullptr) gb[oo] += go;
          }
        }
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    fail(ErrorKind::kShape,
         "cannot reshape " + shape_str(x.shape()) + " into " + shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {x}, [x](const Tensor<T>& o) {
    const auto g = o.grad();
    auto gx = grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x, int axis0, int axis1) {
  const std::size_t a0 = x.axis_index(axis0), a1 = x.axis_index(axis1);
  const Shape& in_shape = x.shape();
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t d = rank - 1; d > 0; --d) in_stride[d - 1] = in_stride[d] * in_shape[d];
  Shape out_shape = in_shape;
  std::swap(out_shape[a0], out_shape[a1]);
  std::vector<std::size_t> stride = in_stride;
  std::swap(stride[a0], stride[a1]);

  // Gather map: out[i] = x[(*source)[i]].
  auto source = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < source->size(); ++i) {
    (*source)[i] = off;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out_shape[d]) break;
      off -= stride[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  const auto xd = x.data();
  std::vector<T> out(source->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[(*source)[i]];
  return make_result<T>("transpose", std::move(out_shape), std::move(out), {x},
                        [x, source](const Tensor<T>& o) {
                          const auto g = o.grad();
                          auto gx = grad_of(x);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[(*source)[i]] += g[i];
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = x.axis_index(axis);
  if (begin >= end || end > x.shape()[ax]) {
    fail(ErrorKind::kShape, "slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") out of range for axis " + std::to_string(axis) + " of " +
                                shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), ax);
  const std::size_t len = end - begin;
  Shape out_shape = x.shape();
  out_shape[ax] = len;
  std::vector<T> out(s.outer * len * s.inner);
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xd.begin() + (o * s.n + begin) * s.inner, len * s.inner,
                out.begin() + o * len * s.inner);
  }
  return make_result<T>("slice", std::move(out_shape), std::move(out), {x},
                        [x, s, begin, len](const Tensor<T>& o) {
                          const auto g = o.grad();
                          auto gx = grad_of(x);
                          for (std::size_t oo = 0; oo < s.outer; ++oo) {
                            const std::size_t src = oo * len * s.inner;
                            const std::size_t dst = (oo * s.n + begin) * s.inner;
                            for (std::size_t i = 0; i < len * s.inner; ++i) gx[dst + i] += g[src + i];
                          }
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) fail(ErrorKind::kShape, "concat of zero tensors");
  const std::size_t ax = parts[0].axis_index(axis);
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == out_shape.size();
    for (std::size_t d = 0; ok && d < out_shape.size(); ++d) {
      ok = d == ax || p.shape()[d] == out_shape[d];
    }
    if (!ok) {
      fail(ErrorKind::kShape, "concat shape mismatch: " + shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()));
    }
    out_shape[ax] += p.shape()[ax];
  }
  const AxisSplit s = split_at(out_shape, ax);
  std::vector<T> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    const std::size_t len = p.shape()[ax];
    const auto pd = p.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(pd.begin() + o * len * s.inner, len * s.inner,
                  out.begin() + (o * s.n + at) * s.inner);
    }
    at += len;
  }
  return make_result<T>(
      "concat", std::move(out_shape), std::move(out), parts,
      [parts, offsets, s, ax](const Tensor<T>& o) {
        const auto g = o.grad();
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
          if (!parts[pi].requires_grad()) continue;
          const std::size_t len = parts[pi].shape()[ax];
          auto gp = grad_of(parts[pi]);
          for (std::size_t oo = 0; oo < s.outer; ++oo) {
            const std::size_t src = (oo * s.n + offsets[pi]) * s.inner;
            const std::size_t dst = oo * len * s.inner;
            for (std::size_t i = 0; i < len * s.inner; ++i) gp[dst + i] += g[src + i];
          }
        }
      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  return make_result<T>("sum", Shape{}, {acc}, {x}, [x](const Tensor<T>& o) {
    const T g = o.grad()[0];
    for (T& v : grad_of(x)) v += g;
  });
}

namespace {

template <typename T>
Tensor<T> reduce_axis(const char* name, const Tensor<T>& x, int axis, bool keepdim, T scale) {
  const std::size_t ax = x.axis_index(axis);
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[ax] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  }
  std::vector<T> out(s.outer * s.inner, T(0));
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.n; ++j) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[o * s.inner + i] += xd[(o * s.n + j) * s.inner + i];
      }
    }
  }
  for (T& v : out) v *= scale;
  return make_result<T>(name, std::move(out_shape), std::move(out), {x},
                        [x, s, scale](const Tensor<T>& o) {
                          const auto g = o.grad();
                          auto gx = grad_of(x);
                          for (std::size_t oo = 0; oo < s.outer; ++oo) {
                            for (std::size_t j = 0; j < s.n; ++j) {
                              for (std::size_t i = 0; i < s.inner; ++i) {
                                gx[(oo * s.n + j) * s.inner + i] += scale * g[oo * s.inner + i];
                              }
                            }
                          }
                        });
}

}  // namespace

template <typename T>
Tensor<T> sum(const Tensor<T>& x, int axis, bool keepdim) {
  return reduce_axis<T>("sum", x, axis, keepdim, T(1));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, int axis, bool keepdim) {
  return reduce_axis<T>("mean", x, axis, keepdim,
                        T(1) / static_cast<T>(x.shape()[x.axis_index(axis)]));
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const AxisSplit s = split_at(x.shape(), x.axis_index(axis));
  const auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xd[base + j * s.inner]);
      T total = T(0);
      for (std::size_t j = 0; j < s.n; ++j) {
        const T e = std::exp(xd[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= total;
    }
  }
  return make_result<T>("softmax", x.shape(), std::move(out), {x}, [x, s](const Tensor<T>& o) {
    const auto g = o.grad();
    const auto y = o.data();
    auto gx = grad_of(x);
    for (std::size_t oo = 0; oo < s.outer; ++oo) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = oo * s.n * s.inner + i;
        T dot = T(0);
        for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t at = base + j * s.inner;
          gx[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps) {
  const std::size_t n = x.extent(-1);
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.extent(0) != n || beta.extent(0) != n) {
    fail(ErrorKind::kShape, "layer_norm parameter mismatch: x " + shape_str(x.shape()) +
                                ", gamma " + shape_str(gamma.shape()) + ", beta " +
                                shape_str(beta.shape()));
  }
  if (!(eps > 0.0)) fail(ErrorKind::kContract, "layer_norm requires eps > 0");
  const std::size_t rows = x.numel() / n;
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  std::vector<T> out(x.numel());
  const auto xd = x.data();
  const auto gd = gamma.data();
  const auto bd = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T mu = T(0);
    for (std::size_t i = 0; i < n; ++i) mu += xd[r * n + i];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = xd[r * n + i] - mu;
      var += d * d;
    }
    var /= static_cast<T>(n);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(eps));
    (*rstd)[r] = rs;
    for (std::size_t i = 0; i < n; ++i) {
      const T h = (xd[r * n + i] - mu) * rs;
      (*xhat)[r * n + i] = h;
      out[r * n + i] = h * gd[i] + bd[i];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, rstd, rows, n](const Tensor<T>& o) {
        const auto g = o.grad();
        const auto gd = gamma.data();
        T* gx = x.requires_grad() ? grad_of(x).data() : nullptr;
        T* gg = gamma.requires_grad() ? grad_of(gamma).data() : nullptr;
        T* gb = beta.requires_grad() ? grad_of(beta).data() : nullptr;
        std::vector<T> dh(n);
        for (std::size_t r = 0; r < rows; ++r) {
          T sum_dh = T(0), sum_dh_h = T(0);
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t at = r * n + i;
            dh[i] = g[at] * gd[i];
            sum_dh += dh[i];
            sum_dh_h += dh[i] * (*xhat)[at];
            if (gg != nullptr) gg[i] += g[at] * (*xhat)[at];
            if (gb != nullptr) gb[i] += g[at];
          }
          if (gx != nullptr) {
            const T scale = (*rstd)[r] / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t at = r * n + i;
              gx[at] += scale * (static_cast<T>(n) * dh[i] - sum_dh - (*xhat)[at] * sum_dh_h);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> max_pool1d(const Tensor<T>& x, std::size_t stride, std::span<const std::uint8_t> valid) {
  if (x.rank() != 2 && x.rank() != 3) {
    fail(ErrorKind::kShape, "max_pool1d expects [B,T,D] or [T,D], got " + shape_str(x.shape()));
  }
  if (stride == 0) fail(ErrorKind::kContract, "max_pool1d stride must be positive");
  const std::size_t batch = x.rank() == 3 ? x.extent(0) : 1;
  const std::size_t len = x.extent(-2), dim = x.extent(-1);
  if (!valid.empty() && valid.size() != batch * len) {
    fail(ErrorKind::kShape, "max_pool1d mask has " + std::to_string(valid.size()) +
                                " flags for " + shape_str(x.shape()));
  }
  const std::size_t out_len = (len + stride - 1) / stride;
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = out_len;
  std::vector<T> out(batch * out_len * dim, T(0));
  auto winner = std::make_shared<std::vector<std::ptrdiff_t>>(out.size(), -1);
  const auto xd = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t lo = t * stride, hi = std::min(len, lo + stride);
      for (std::size_t d = 0; d < dim; ++d) {
        const std::size_t at = (b * out_len + t) * dim + d;
        for (std::size_t j = lo; j < hi; ++j) {
          if (!valid.empty() && !valid[b * len + j]) continue;
          const std::size_t src = (b * len + j) * dim + d;
          if ((*winner)[at] < 0 || xd[src] > out[at]) {
            out[at] = xd[src];
            (*winner)[at] = static_cast<std::ptrdiff_t>(src);
          }
        }
      }
    }
  }
  return make_result<T>("max_pool1d", std::move(out_shape), std::move(out), {x},
                        [x, winner](const Tensor<T>& o) {
                          const auto g = o.grad();
                          auto gx = grad_of(x);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            if ((*winner)[i] >= 0) gx[static_cast<std::size_t>((*winner)[i])] += g[i];
                          }
                        });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) fail(ErrorKind::kContract, "dropout rate must be < 1");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < rate ? T(0) : keep_scale;
  return mul(x, Tensor<T>(x.shape(), std::move(mask)));
}

#define OADT_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> gelu(const Tensor<T>&);                                                 \
  template Tensor<T> exp(const Tensor<T>&);                                                  \
  template Tensor<T> log(const Tensor<T>&);                                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                              \
  template Tensor<T> softplus(const Tensor<T>&);                                             \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> transpose(const Tensor<T>&, int, int);                                  \
  template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);                 \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                             \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&, int, bool);                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                 \
  template Tensor<T> mean(const Tensor<T>&, int, bool);                                      \
  template Tensor<T> softmax(const Tensor<T>&, int);                                         \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> max_pool1d(const Tensor<T>&, std::size_t, std::span<const std::uint8_t>); \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&);

OADT_INSTANTIATE_OPS(float)
OADT_INSTANTIATE_OPS(double)

#undef OADT_INSTANTIATE_OPS

}  // namespace ops
}  // namespace oadt
