#include <algorithm>
#include <cmath>
#include <type_traits>

#include "hllm/autograd.hpp"
#include "hllm/error.hpp"
#include "hllm/kernels.hpp"

namespace hllm::tensor {
namespace {

// Inner loops: float goes through the runtime-selected SIMD table, double
// runs the same sequence of operations in scalar code.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().gemm(a, b, c, m, k, n, accumulate);
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      T* ci = c + i * n;
      if (!accumulate) std::fill(ci, ci + n, T{0});
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = a[i * k + p];
        for (std::size_t j = 0; j < n; ++j) ci[j] = ci[j] + aip * b[p * n + j];
      }
    }
  }
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().axpy(alpha, x, y, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
  }
}

template <typename T>
void vadd(const T* x, const T* y, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().add(x, y, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
  }
}

template <typename T>
void vmul(const T* x, const T* y, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().mul(x, y, out, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
  }
}

template <typename T>
std::vector<T> transposed(std::span<const T> a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(a.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = a[r * cols + c];
  return t;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw UsageError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_rank2(const char* op, const Shape& s) {
  if (s.size() != 2) throw UsageError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(s));
}

// Broadcast form: b covers exactly the last extent of a.
bool broadcasts_over_rows(const Shape& a, const Shape& b) {
  if (a.empty()) return false;
  const std::size_t last = a.back();
  return (b.size() == 1 && b[0] == last) || (b.size() == 2 && b[0] == 1 && b[1] == last);
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) shape_error("matmul", sa, sb);
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<T> out(m * n);
  gemm(a.value().data(), b.value().data(), out.data(), m, k, n, false);
  return a.tape()->record("matmul", {m, n}, std::move(out), {a, b},
                          [a, b, m, k, n](Tape<T>& tape, std::span<const T> g) {
                            if (tape.requires_grad(a)) {
                              // dA = dC * B^T
                              const auto bt = transposed(b.value(), k, n);
                              gemm(g.data(), bt.data(), tape.grad_buffer(a).data(), m, n, k, true);
                            }
                            if (tape.requires_grad(b)) {
                              // dB = A^T * dC
                              const auto at = transposed(a.value(), m, k);
                              gemm(at.data(), g.data(), tape.grad_buffer(b).data(), k, m, n, true);
                            }
                          });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  if (sa == sb) {
    vadd(av.data(), bv.data(), out.data(), av.size());
    return a.tape()->record("add", sa, std::move(out), {a, b},
                            [a, b](Tape<T>& tape, std::span<const T> g) {
                              tape.accumulate_grad(a, g);
                              tape.accumulate_grad(b, g);
                            });
  }
  if (!broadcasts_over_rows(sa, sb)) shape_error("add", sa, sb);
  const std::size_t cols = sa.back(), rows = av.size() / cols;
  for (std::size_t r = 0; r < rows; ++r)
    vadd(av.data() + r * cols, bv.data(), out.data() + r * cols, cols);
  return a.tape()->record("add", sa, std::move(out), {a, b},
                          [a, b, rows, cols](Tape<T>& tape, std::span<const T> g) {
                            tape.accumulate_grad(a, g);
                            if (tape.requires_grad(b)) {
                              auto gb = tape.grad_buffer(b);
                              for (std::size_t r = 0; r < rows; ++r)
                                axpy(T{1}, g.data() + r * cols, gb.data(), cols);
                            }
                          });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  if (sa == sb) {
    vmul(av.data(), bv.data(), out.data(), av.size());
    return a.tape()->record("mul", sa, std::move(out), {a, b},
                            [a, b](Tape<T>& tape, std::span<const T> g) {
                              const std::size_t n = g.size();
                              std::vector<T> tmp(n);
                              if (tape.requires_grad(a)) {
                                vmul(g.data(), b.value().data(), tmp.data(), n);
                                tape.accumulate_grad(a, tmp);
                              }
                              if (tape.requires_grad(b)) {
                                vmul(g.data(), a.value().data(), tmp.data(), n);
                                tape.accumulate_grad(b, tmp);
                              }
                            });
  }
  if (!broadcasts_over_rows(sa, sb)) shape_error("mul", sa, sb);
  const std::size_t cols = sa.back(), rows = av.size() / cols;
  for (std::size_t r = 0; r < rows; ++r)
    vmul(av.data() + r * cols, bv.data(), out.data() + r * cols, cols);
  return a.tape()->record(
      "mul", sa, std::move(out), {a, b}, [a, b, rows, cols](Tape<T>& tape, std::span<const T> g) {
        const auto av = a.value(), bv = b.value();
        std::vector<T> tmp(cols);
        if (tape.requires_grad(a)) {
          auto ga = tape.grad_buffer(a);
          for (std::size_t r = 0; r < rows; ++r) {
            vmul(g.data() + r * cols, bv.data(), tmp.data(), cols);
            vadd(ga.data() + r * cols, tmp.data(), ga.data() + r * cols, cols);
          }
        }
        if (tape.requires_grad(b)) {
          auto gb = tape.grad_buffer(b);
          for (std::size_t r = 0; r < rows; ++r) {
            vmul(g.data() + r * cols, av.data() + r * cols, tmp.data(), cols);
            vadd(gb.data(), tmp.data(), gb.data(), cols);
          }
        }
      });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  const auto av = a.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  return a.tape()->record("scale", a.shape(), std::move(out), {a},
                          [a, factor](Tape<T>& tape, std::span<const T> g) {
                            auto ga = tape.grad_buffer(a);
                            axpy(factor, g.data(), ga.data(), g.size());
                          });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  require_rank2("transpose", a.shape());
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  return a.tape()->record("transpose", {c, r}, transposed(a.value(), r, c), {a},
                          [a, r, c](Tape<T>& tape, std::span<const T> g) {
                            tape.accumulate_grad(a, transposed(g, c, r));
                          });
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  if (element_count(shape) != a.value().size()) shape_error("reshape", a.shape(), shape);
  const auto av = a.value();
  return a.tape()->record("reshape", std::move(shape), std::vector<T>(av.begin(), av.end()), {a},
                          [a](Tape<T>& tape, std::span<const T> g) { tape.accumulate_grad(a, g); });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T total{0};
  for (T x : a.value()) total += x;
  return a.tape()->record("sum", {1}, {total}, {a}, [a](Tape<T>& tape, std::span<const T> g) {
    auto ga = tape.grad_buffer(a);
    for (auto& x : ga) x += g[0];
  });
}

template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::uint32_t> ids) {
  require_rank2("embedding_lookup", table.shape());
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  const auto tv = table.value();
  std::vector<T> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab)
      throw UsageError("embedding_lookup: id " + std::to_string(ids[i]) + " >= " +
                       std::to_string(vocab) + " rows");
    std::copy_n(tv.data() + ids[i] * d, d, out.data() + i * d);
  }
  std::vector<std::uint32_t> rows(ids.begin(), ids.end());
  return table.tape()->record("embedding_lookup", {ids.size(), d}, std::move(out), {table},
                              [table, rows = std::move(rows), d](Tape<T>& tape, std::span<const T> g) {
                                auto gt = tape.grad_buffer(table);
                                for (std::size_t i = 0; i < rows.size(); ++i)
                                  axpy(T{1}, g.data() + i * d, gt.data() + rows[i] * d, d);
                              });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t start, std::size_t width) {
  require_rank2("slice_cols", a.shape());
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (start + width > c)
    throw UsageError("slice_cols: columns [" + std::to_string(start) + "," +
                     std::to_string(start + width) + ") out of " + shape_str(a.shape()));
  const auto av = a.value();
  std::vector<T> out(r * width);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(av.data() + i * c + start, width, out.data() + i * width);
  return a.tape()->record("slice_cols", {r, width}, std::move(out), {a},
                          [a, r, c, start, width](Tape<T>& tape, std::span<const T> g) {
                            auto ga = tape.grad_buffer(a);
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < width; ++j)
                                ga[i * c + start + j] += g[i * width + j];
                          });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t r = parts[0].shape().at(0);
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2("concat_cols", p.shape());
    if (p.shape()[0] != r) shape_error("concat_cols", parts[0].shape(), p.shape());
    total += p.shape()[1];
  }
  std::vector<T> out(r * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[1];
    const auto pv = p.value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(pv.data() + i * w, w, out.data() + i * total + offset);
    offset += w;
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(
      "concat_cols", {r, total}, std::move(out), inputs,
      [inputs, r, total](Tape<T>& tape, std::span<const T> g) {
        std::size_t offset = 0;
        for (const auto& p : inputs) {
          const std::size_t w = p.shape()[1];
          if (tape.requires_grad(p)) {
            auto gp = tape.grad_buffer(p);
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + offset + j];
          }
          offset += w;
        }
      });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t c = parts[0].shape().at(1);
  std::size_t rows = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    require_rank2("concat_rows", p.shape());
    if (p.shape()[1] != c) shape_error("concat_rows", parts[0].shape(), p.shape());
    rows += p.shape()[0];
    const auto pv = p.value();
    out.insert(out.end(), pv.begin(), pv.end());
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record("concat_rows", {rows, c}, std::move(out), inputs,
                                 [inputs](Tape<T>& tape, std::span<const T> g) {
                                   std::size_t offset = 0;
                                   for (const auto& p : inputs) {
                                     const std::size_t n = p.value().size();
                                     tape.accumulate_grad(p, g.subspan(offset, n));
                                     offset += n;
                                   }
                                 });
}

namespace {

// y = softmax(x) over the first `valid` entries of a row, zeros after.
template <typename T>
void softmax_row(const T* x, T* y, std::size_t n, std::size_t valid) {
  T mx = x[0];
  for (std::size_t j = 1; j < valid; ++j) mx = std::max(mx, x[j]);
  T denom{0};
  for (std::size_t j = 0; j < valid; ++j) {
    y[j] = std::exp(x[j] - mx);
    denom += y[j];
  }
  for (std::size_t j = 0; j < valid; ++j) y[j] /= denom;
  for (std::size_t j = valid; j < n; ++j) y[j] = T{0};
}

// dx = y * (dy - sum(dy * y)) over one row.
template <typename T>
void softmax_row_backward(const T* y, const T* dy, T* dx, std::size_t valid) {
  T dot{0};
  for (std::size_t j = 0; j < valid; ++j) dot += dy[j] * y[j];
  for (std::size_t j = 0; j < valid; ++j) dx[j] += y[j] * (dy[j] - dot);
}

}  // namespace

template <typename T>
Var<T> softmax_rows(Var<T> x) {
  const auto xv = x.value();
  if (xv.empty()) return x;
  const std::size_t n = x.shape().back(), rows = xv.size() / n;
  std::vector<T> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) softmax_row(xv.data() + r * n, out.data() + r * n, n, n);
  std::vector<T> y = out;
  return x.tape()->record("softmax_rows", x.shape(), std::move(out), {x},
                          [x, n, rows, y = std::move(y)](Tape<T>& tape, std::span<const T> g) {
                            auto gx = tape.grad_buffer(x);
                            for (std::size_t r = 0; r < rows; ++r)
                              softmax_row_backward(y.data() + r * n, g.data() + r * n,
                                                   gx.data() + r * n, n);
                          });
}

template <typename T>
Var<T> causal_softmax(Var<T> scores) {
  require_rank2("causal_softmax", scores.shape());
  const std::size_t t = scores.shape()[0];
  if (scores.shape()[1] != t) shape_error("causal_softmax", scores.shape(), {t, t});
  const auto sv = scores.value();
  std::vector<T> out(sv.size());
  for (std::size_t r = 0; r < t; ++r) softmax_row(sv.data() + r * t, out.data() + r * t, t, r + 1);
  std::vector<T> y = out;
  return scores.tape()->record("causal_softmax", scores.shape(), std::move(out), {scores},
                               [scores, t, y = std::move(y)](Tape<T>& tape, std::span<const T> g) {
                                 auto gs = tape.grad_buffer(scores);
                                 for (std::size_t r = 0; r < t; ++r)
                                   softmax_row_backward(y.data() + r * t, g.data() + r * t,
                                                        gs.data() + r * t, r + 1);
                               });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const auto xv = x.value();
  const std::size_t d = x.shape().back(), rows = xv.size() / d;
  if (gain.shape() != Shape{d}) shape_error("layer_norm", x.shape(), gain.shape());
  if (bias.shape() != Shape{d}) shape_error("layer_norm", x.shape(), bias.shape());
  const auto gv = gain.value(), bv = bias.value();
  std::vector<T> out(xv.size()), xhat(xv.size()), rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * d;
    T mean{0};
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(d);
    rstd[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mean) * rstd[r];
      out[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  return x.tape()->record(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [x, gain, bias, d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](
          Tape<T>& tape, std::span<const T> g) {
        const auto gv = gain.value();
        if (tape.requires_grad(gain) || tape.requires_grad(bias)) {
          std::vector<T> dg(d, T{0}), db(d, T{0});
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) {
              dg[j] += g[r * d + j] * xhat[r * d + j];
              db[j] += g[r * d + j];
            }
          tape.accumulate_grad(gain, dg);
          tape.accumulate_grad(bias, db);
        }
        if (!tape.requires_grad(x)) return;
        auto gx = tape.grad_buffer(x);
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_dxhat{0}, mean_dxhat_xhat{0};
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = g[r * d + j] * gv[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xhat[r * d + j];
          }
          mean_dxhat /= static_cast<T>(d);
          mean_dxhat_xhat /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] += rstd[r] * (dxhat[j] - mean_dxhat - xhat[r * d + j] * mean_dxhat_xhat);
        }
      });
}

namespace {
template <typename T>
constexpr T kGeluC = T(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = T(0.044715);
}  // namespace

template <typename T>
Var<T> gelu(Var<T> x) {
  const auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    out[i] = T(0.5) * v * (T{1} + std::tanh(kGeluC<T> * (v + kGeluA<T> * v * v * v)));
  }
  return x.tape()->record("gelu", x.shape(), std::move(out), {x},
                          [x](Tape<T>& tape, std::span<const T> g) {
                            const auto xv = x.value();
                            auto gx = tape.grad_buffer(x);
                            for (std::size_t i = 0; i < xv.size(); ++i) {
                              const T v = xv[i];
                              const T th = std::tanh(kGeluC<T> * (v + kGeluA<T> * v * v * v));
                              const T dinner = kGeluC<T> * (T{1} + T{3} * kGeluA<T> * v * v);
                              const T dy = T(0.5) * (T{1} + th) + T(0.5) * v * (T{1} - th * th) * dinner;
                              gx[i] += g[i] * dy;
                            }
                          });
}

template <typename T>
Var<T> cross_entropy_logits(Var<T> logits, std::span<const std::uint32_t> targets,
                            std::optional<std::uint32_t> ignore_id) {
  require_rank2("cross_entropy_logits", logits.shape());
  const std::size_t t = logits.shape()[0], vocab = logits.shape()[1];
  if (targets.size() != t)
    throw UsageError("cross_entropy_logits: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(t) + " rows");
  const auto lv = logits.value();
  std::vector<T> probs(lv.size(), T{0});
  std::vector<std::uint32_t> tg(targets.begin(), targets.end());
  T total{0};
  std::size_t counted = 0;
  for (std::size_t r = 0; r < t; ++r) {
    if (ignore_id && tg[r] == *ignore_id) continue;
    if (tg[r] >= vocab)
      throw UsageError("cross_entropy_logits: target " + std::to_string(tg[r]) +
                       " out of range for " + std::to_string(vocab) + " classes");
    const T* row = lv.data() + r * vocab;
    softmax_row(row, probs.data() + r * vocab, vocab, vocab);
    T mx = row[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    T se{0};
    for (std::size_t j = 0; j < vocab; ++j) se += std::exp(row[j] - mx);
    total += (mx + std::log(se)) - row[tg[r]];
    ++counted;
  }
  if (counted == 0) throw UsageError("cross_entropy_logits: every position is ignored");
  const T inv = T{1} / static_cast<T>(counted);
  return logits.tape()->record(
      "cross_entropy_logits", {1}, {total * inv}, {logits},
      [logits, t, vocab, inv, ignore_id, tg = std::move(tg), probs = std::move(probs)](
          Tape<T>& tape, std::span<const T> g) {
        auto gl = tape.grad_buffer(logits);
        const T s = g[0] * inv;
        for (std::size_t r = 0; r < t; ++r) {
          if (ignore_id && tg[r] == *ignore_id) continue;
          for (std::size_t j = 0; j < vocab; ++j) gl[r * vocab + j] += s * probs[r * vocab + j];
          gl[r * vocab + tg[r]] -= s;
        }
      });
}

namespace {

template <typename T, typename S>
GradCheckResult check_gradients(const TapedFn<T>& f, const TapedFn<S>& numeric_fn,
                                const std::vector<BasicTensor<T>>& inputs, double eps) {
  std::vector<BasicTensor<T>> analytic;
  {
    Tape<T> tape;
    std::vector<Var<T>> vars;
    for (const auto& in : inputs) vars.push_back(tape.leaf(in));
    const Var<T> out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  std::vector<BasicTensor<S>> shadow;
  for (const auto& in : inputs) shadow.push_back(in.template cast<S>());
  const auto evaluate = [&] {
    Tape<S> tape;
    std::vector<Var<S>> vars;
    for (const auto& in : shadow) vars.push_back(tape.leaf(in, false));
    return numeric_fn(tape, vars).value()[0];
  };
  GradCheckResult worst;
  for (std::size_t i = 0; i < shadow.size(); ++i) {
    for (std::size_t e = 0; e < shadow[i].size(); ++e) {
      const S saved = shadow[i][e];
      const auto at = [&](double offset) {
        shadow[i][e] = saved + static_cast<S>(offset);
        return evaluate();
      };
      const S p1 = at(eps), m1 = at(-eps), p2 = at(2 * eps), m2 = at(-2 * eps);
      shadow[i][e] = saved;
      const double numeric = static_cast<double>((8 * (p1 - m1) - (p2 - m2)) / (12 * static_cast<S>(eps)));
      const double a = analytic[i][e];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (rel > worst.max_rel_error || (i == 0 && e == 0))
        worst = {rel, i, e, a, numeric};
    }
  }
  return worst;
}

}  // namespace

template <typename T>
GradCheckResult grad_check(const TapedFn<T>& f, std::vector<BasicTensor<T>> inputs, double eps) {
  return check_gradients<T, T>(f, f, inputs, eps);
}

template <typename T>
GradCheckResult grad_check(const TapedFn<T>& f, const TapedFn<long double>& shadow,
                           std::vector<BasicTensor<T>> inputs, double eps) {
  return check_gradients<T, long double>(f, shadow, inputs, eps);
}

#define HLLM_INSTANTIATE_OPS(T)                                                              \
  template Var<T> matmul(Var<T>, Var<T>);                                                    \
  template Var<T> add(Var<T>, Var<T>);                                                       \
  template Var<T> mul(Var<T>, Var<T>);                                                       \
  template Var<T> scale(Var<T>, T);                                                          \
  template Var<T> transpose(Var<T>);                                                         \
  template Var<T> reshape(Var<T>, Shape);                                                    \
  template Var<T> sum(Var<T>);                                                               \
  template Var<T> embedding_lookup(Var<T>, std::span<const std::uint32_t>);                  \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                              \
  template Var<T> concat_cols(std::span<const Var<T>>);                                      \
  template Var<T> concat_rows(std::span<const Var<T>>);                                      \
  template Var<T> softmax_rows(Var<T>);                                                      \
  template Var<T> causal_softmax(Var<T>);                                                    \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                     \
  template Var<T> gelu(Var<T>);                                                              \
  template Var<T> cross_entropy_logits(Var<T>, std::span<const std::uint32_t>,               \
                                       std::optional<std::uint32_t>);                        \
  template GradCheckResult grad_check(const TapedFn<T>&, std::vector<BasicTensor<T>>, double);  \
  template GradCheckResult grad_check(const TapedFn<T>&, const TapedFn<long double>&,         \
                                      std::vector<BasicTensor<T>>, double);

HLLM_INSTANTIATE_OPS(float)
HLLM_INSTANTIATE_OPS(double)
HLLM_INSTANTIATE_OPS(long double)

}  // namespace hllm::tensor
