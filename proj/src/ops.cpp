#include "fgfm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fgfm/errors.hpp"

namespace fgfm {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void record(Tensor& out, std::function<void()> backward_step) {
  out.set_requires_grad(true);
  Tape::active()->record(out, std::move(backward_step));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) + b.at(i);
  check_finite(out, "add");
  if (recording({&a, &b})) {
    Tensor ac = a, bc = b, oc = out;
    record(out, [ac, bc, oc]() mutable {
      const auto& og = oc.grad();
      if (ac.requires_grad()) {
        auto& g = ac.grad();
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
      }
      if (bc.requires_grad()) {
        auto& g = bc.grad();
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
  check_finite(out, "mul");
  if (recording({&a, &b})) {
    Tensor ac = a, bc = b, oc = out;
    record(out, [ac, bc, oc]() mutable {
      const auto& og = oc.grad();
      if (ac.requires_grad()) {
        auto& g = ac.grad();
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * bc.at(i);
      }
      if (bc.requires_grad()) {
        auto& g = bc.grad();
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * ac.at(i);
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out(a.shape());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * factor;
  check_finite(out, "scale");
  if (recording({&a})) {
    Tensor ac = a, oc = out;
    record(out, [ac, oc, factor]() mutable {
      if (!ac.requires_grad()) return;
      const auto& og = oc.grad();
      auto& g = ac.grad();
      for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i] * factor;
    });
  }
  return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_rowvec");
  require_rank(bias, 1, "add_rowvec");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.dim(0) != cols) {
    throw DimensionError("add_rowvec: bias length " + std::to_string(bias.dim(0)) +
                         " vs " + std::to_string(cols) + " columns");
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = x.at(i, j) + bias.at(j);
  check_finite(out, "add_rowvec");
  if (recording({&x, &bias})) {
    Tensor xc = x, bc = bias, oc = out;
    record(out, [xc, bc, oc, rows, cols]() mutable {
      const auto& og = oc.grad();
      if (xc.requires_grad()) {
        auto& g = xc.grad();
        for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
      }
      if (bc.requires_grad()) {
        auto& g = bc.grad();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) g[j] += og[i * cols + j];
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dims " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor out(Shape{m, n});
  const double* ap = a.data();
  const double* bp = b.data();
  double* op = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ap[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bp + p * n;
      double* orow = op + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  check_finite(out, "matmul");
  if (recording({&a, &b})) {
    Tensor ac = a, bc = b, oc = out;
    record(out, [ac, bc, oc, m, k, n]() mutable {
      const auto& og = oc.grad();
      if (ac.requires_grad()) {
        auto& g = ac.grad();
        // dA = dOut * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* orow = og.data() + i * n;
            const double* brow = bc.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += orow[j] * brow[j];
            g[i * k + p] += acc;
          }
      }
      if (bc.requires_grad()) {
        auto& g = bc.grad();
        // dB = A^T * dOut
        for (std::size_t i = 0; i < m; ++i) {
          const double* arow = ac.data() + i * k;
          const double* orow = og.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* grow = g.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) grow[j] += av * orow[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  if (recording({&a})) {
    Tensor ac = a, oc = out;
    record(out, [ac, oc, m, n]() mutable {
      if (!ac.requires_grad()) return;
      auto& g = ac.grad();
      const auto& og = oc.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += og[j * m + i];
    });
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("softmax: rank-1 or rank-2 input, got " +
                         shape_str(x.shape()));
  }
  const std::size_t n = x.rank() == 1 ? x.dim(0) : x.dim(1);
  const std::size_t rows = x.size() / n;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    double* or_ = out.data() + r * n;
    double mx = xr[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      or_[j] = std::exp(xr[j] - mx);
      denom += or_[j];
    }
    for (std::size_t j = 0; j < n; ++j) or_[j] /= denom;
  }
  check_finite(out, "softmax");
  if (recording({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc, rows, n]() mutable {
      if (!xc.requires_grad()) return;
      auto& g = xc.grad();
      const auto& og = oc.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = oc.data() + r * n;
        const double* dy = og.data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (dy[j] - dot);
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("layer_norm: rank-1 or rank-2 input, got " +
                         shape_str(x.shape()));
  }
  const std::size_t d = x.rank() == 1 ? x.dim(0) : x.dim(1);
  const std::size_t rows = x.size() / d;
  if (d < 2) throw DimensionError("layer_norm: feature dim must be >= 2");
  if (gamma.size() != d || beta.size() != d) {
    throw DimensionError("layer_norm: gamma/beta length mismatch");
  }
  constexpr double kEps = 1e-5;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double* or_ = out.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (std::size_t j = 0; j < d; ++j) {
      or_[j] = (xr[j] - mean) * inv * gamma.at(j) + beta.at(j);
    }
  }
  check_finite(out, "layer_norm");
  if (recording({&x, &gamma, &beta})) {
    Tensor xc = x, gc = gamma, bc = beta, oc = out;
    record(out, [xc, gc, bc, oc, rows, d]() mutable {
      const auto& og = oc.grad();
      const double dn = static_cast<double>(d);
      std::vector<double> xhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xc.data() + r * d;
        const double* dy = og.data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= dn;
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double c = xr[j] - mean;
          var += c * c;
        }
        var /= dn;
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        for (std::size_t j = 0; j < d; ++j) xhat[j] = (xr[j] - mean) * inv;
        if (gc.requires_grad()) {
          auto& gg = gc.grad();
          for (std::size_t j = 0; j < d; ++j) gg[j] += dy[j] * xhat[j];
        }
        if (bc.requires_grad()) {
          auto& bg = bc.grad();
          for (std::size_t j = 0; j < d; ++j) bg[j] += dy[j];
        }
        if (xc.requires_grad()) {
          auto& xg = xc.grad();
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = dy[j] * gc.at(j);
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat[j];
          }
          mean_dxhat /= dn;
          mean_dxhat_xhat /= dn;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxhat = dy[j] * gc.at(j);
            xg[r * d + j] +=
                inv * (dxhat - mean_dxhat - xhat[j] * mean_dxhat_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x.at(i);
    out.at(i) = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  check_finite(out, "gelu");
  if (recording({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc, n]() mutable {
      if (!xc.requires_grad()) return;
      auto& g = xc.grad();
      const auto& og = oc.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double v = xc.at(i);
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        g[i] += og[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

Tensor conv1d_same(const Tensor& signal, const Tensor& kernel) {
  require_rank(signal, 1, "conv1d_same");
  require_rank(kernel, 1, "conv1d_same");
  const std::size_t t = signal.dim(0), w = kernel.dim(0);
  if (w % 2 == 0) {
    throw ConfigError("conv1d_same: kernel width must be odd, got " +
                      std::to_string(w));
  }
  const std::ptrdiff_t c = static_cast<std::ptrdiff_t>((w - 1) / 2);
  Tensor out(signal.shape());
  for (std::size_t i = 0; i < t; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t d = -c; d <= c; ++d) {
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + d;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(t)) continue;
      acc += kernel.at(static_cast<std::size_t>(c + d)) *
             signal.at(static_cast<std::size_t>(j));
    }
    out.at(i) = acc;
  }
  check_finite(out, "conv1d_same");
  if (recording({&signal, &kernel})) {
    Tensor sc = signal, kc = kernel, oc = out;
    record(out, [sc, kc, oc, t, c]() mutable {
      const auto& og = oc.grad();
      for (std::size_t i = 0; i < t; ++i) {
        const double go = og[i];
        if (go == 0.0) continue;
        for (std::ptrdiff_t d = -c; d <= c; ++d) {
          const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + d;
          if (j < 0 || j >= static_cast<std::ptrdiff_t>(t)) continue;
          if (sc.requires_grad()) {
            sc.grad()[static_cast<std::size_t>(j)] +=
                go * kc.at(static_cast<std::size_t>(c + d));
          }
          if (kc.requires_grad()) {
            kc.grad()[static_cast<std::size_t>(c + d)] +=
                go * sc.at(static_cast<std::size_t>(j));
          }
        }
      }
    });
  }
  return out;
}

Tensor depthwise_conv_same(const Tensor& x, const Tensor& kernel,
                           const Tensor& bias) {
  require_rank(x, 2, "depthwise_conv_same");
  require_rank(kernel, 2, "depthwise_conv_same");
  require_rank(bias, 1, "depthwise_conv_same");
  const std::size_t n = x.dim(0), ch = x.dim(1), w = kernel.dim(1);
  if (kernel.dim(0) != ch || bias.dim(0) != ch) {
    throw DimensionError("depthwise_conv_same: channel mismatch");
  }
  if (w % 2 == 0) {
    throw ConfigError("depthwise_conv_same: kernel width must be odd, got " +
                      std::to_string(w));
  }
  const std::ptrdiff_t c = static_cast<std::ptrdiff_t>((w - 1) / 2);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ci = 0; ci < ch; ++ci) {
      double acc = bias.at(ci);
      for (std::ptrdiff_t d = -c; d <= c; ++d) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + d;
        if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
        acc += kernel.at(ci, static_cast<std::size_t>(c + d)) *
               x.at(static_cast<std::size_t>(j), ci);
      }
      out.at(i, ci) = acc;
    }
  }
  check_finite(out, "depthwise_conv_same");
  if (recording({&x, &kernel, &bias})) {
    Tensor xc = x, kc = kernel, bc = bias, oc = out;
    record(out, [xc, kc, bc, oc, n, ch, c]() mutable {
      const auto& og = oc.grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ci = 0; ci < ch; ++ci) {
          const double go = og[i * ch + ci];
          if (go == 0.0) continue;
          if (bc.requires_grad()) bc.grad()[ci] += go;
          for (std::ptrdiff_t d = -c; d <= c; ++d) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + d;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
            const std::size_t ju = static_cast<std::size_t>(j);
            const std::size_t kd = static_cast<std::size_t>(c + d);
            if (xc.requires_grad()) xc.grad()[ju * ch + ci] += go * kc.at(ci, kd);
            if (kc.requires_grad())
              kc.grad()[ci * kc.dim(1) + kd] += go * xc.at(ju, ci);
          }
        }
      }
    });
  }
  return out;
}

Tensor conv1d_strided(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      std::size_t stride) {
  require_rank(x, 2, "conv1d_strided");
  require_rank(weight, 3, "conv1d_strided");
  require_rank(bias, 1, "conv1d_strided");
  const std::size_t t_in = x.dim(0), c_in = x.dim(1);
  const std::size_t c_out = weight.dim(0), kw = weight.dim(2);
  if (weight.dim(1) != c_in || bias.dim(0) != c_out) {
    throw DimensionError("conv1d_strided: channel mismatch");
  }
  if (stride == 0) throw ConfigError("conv1d_strided: stride must be positive");
  if (t_in < kw) {
    throw DimensionError("conv1d_strided: input length " + std::to_string(t_in) +
                         " shorter than kernel " + std::to_string(kw));
  }
  const std::size_t t_out = (t_in - kw) / stride + 1;
  Tensor out(Shape{t_out, c_out});
  for (std::size_t t = 0; t < t_out; ++t) {
    const std::size_t base = t * stride;
    for (std::size_t o = 0; o < c_out; ++o) {
      double acc = bias.at(o);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* wrow = weight.data() + (o * c_in + ci) * kw;
        for (std::size_t d = 0; d < kw; ++d) {
          acc += wrow[d] * x.at(base + d, ci);
        }
      }
      out.at(t, o) = acc;
    }
  }
  check_finite(out, "conv1d_strided");
  if (recording({&x, &weight, &bias})) {
    Tensor xc = x, wc = weight, bc = bias, oc = out;
    record(out, [xc, wc, bc, oc, t_out, c_out, c_in, kw, stride]() mutable {
      const auto& og = oc.grad();
      for (std::size_t t = 0; t < t_out; ++t) {
        const std::size_t base = t * stride;
        for (std::size_t o = 0; o < c_out; ++o) {
          const double go = og[t * c_out + o];
          if (go == 0.0) continue;
          if (bc.requires_grad()) bc.grad()[o] += go;
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t d = 0; d < kw; ++d) {
              const std::size_t widx = (o * c_in + ci) * kw + d;
              if (xc.requires_grad())
                xc.grad()[(base + d) * c_in + ci] += go * wc.at(widx);
              if (wc.requires_grad())
                wc.grad()[widx] += go * xc.at(base + d, ci);
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices) {
  require_rank(x, 2, "gather_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  for (std::size_t idx : indices) {
    if (idx >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(idx) +
                           " out of range [0," + std::to_string(n) + ")");
    }
  }
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  Tensor out(Shape{indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r)
    for (std::size_t j = 0; j < d; ++j) out.at(r, j) = x.at(indices[r], j);
  if (recording({&x})) {
    Tensor xc = x, oc = out;
    std::vector<std::size_t> idx = indices;
    record(out, [xc, oc, idx, d]() mutable {
      if (!xc.requires_grad()) return;
      auto& g = xc.grad();
      const auto& og = oc.grad();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < d; ++j)
          g[idx[r] * d + j] += og[r * d + j];
    });
  }
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t d = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != d) throw DimensionError("concat_rows: column mismatch");
    rows += p.dim(0);
  }
  Tensor out(Shape{rows, d});
  std::size_t r0 = 0;
  for (const Tensor& p : parts) {
    for (std::size_t r = 0; r < p.dim(0); ++r)
      for (std::size_t j = 0; j < d; ++j) out.at(r0 + r, j) = p.at(r, j);
    r0 += p.dim(0);
  }
  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
  if (Tape::active() && any_grad) {
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    record(out, [pc, oc, d]() mutable {
      const auto& og = oc.grad();
      std::size_t r0 = 0;
      for (Tensor& p : pc) {
        if (p.requires_grad()) {
          auto& g = p.grad();
          for (std::size_t r = 0; r < p.dim(0); ++r)
            for (std::size_t j = 0; j < d; ++j)
              g[r * d + j] += og[(r0 + r) * d + j];
        }
        r0 += p.dim(0);
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
  require_rank(x, 2, "slice_cols");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (len == 0 || start + len > d) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of " +
                         std::to_string(d) + " columns");
  }
  Tensor out(Shape{n, len});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < len; ++j) out.at(i, j) = x.at(i, start + j);
  if (recording({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc, start, len, n, d]() mutable {
      if (!xc.requires_grad()) return;
      auto& g = xc.grad();
      const auto& og = oc.grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < len; ++j)
          g[i * d + start + j] += og[i * len + j];
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t n = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t cols = 0;
  for (const Tensor& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != n) throw DimensionError("concat_cols: row mismatch");
    cols += p.dim(1);
  }
  Tensor out(Shape{n, cols});
  std::size_t c0 = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p.dim(1); ++j) out.at(i, c0 + j) = p.at(i, j);
    c0 += p.dim(1);
  }
  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
  if (Tape::active() && any_grad) {
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    record(out, [pc, oc, n, cols]() mutable {
      const auto& og = oc.grad();
      std::size_t c0 = 0;
      for (Tensor& p : pc) {
        const std::size_t pc_cols = p.dim(1);
        if (p.requires_grad()) {
          auto& g = p.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < pc_cols; ++j)
              g[i * pc_cols + j] += og[i * cols + c0 + j];
        }
        c0 += pc_cols;
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
  }
  Tensor out(std::move(shape), x.values());
  if (recording({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc]() mutable {
      if (!xc.requires_grad()) return;
      auto& g = xc.grad();
      const auto& og = oc.grad();
      for (std::size_t i = 0; i < og.size(); ++i) g[i] += og[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.at(i);
  Tensor out = Tensor::scalar(acc);
  check_finite(out, "sum");
  if (recording({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc]() mutable {
      if (!xc.requires_grad()) return;
      auto& g = xc.grad();
      const double go = oc.grad()[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go;
    });
  }
  return out;
}

Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t label) {
  require_rank(logits, 1, "cross_entropy");
  const std::size_t n = logits.dim(0);
  if (label >= n) {
    throw UsageError("cross_entropy: label " + std::to_string(label) +
                     " out of range [0," + std::to_string(n) + ")");
  }
  double mx = logits.at(0);
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits.at(i));
  double denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) denom += std::exp(logits.at(i) - mx);
  const double loss = mx + std::log(denom) - logits.at(label);
  Tensor out = Tensor::scalar(loss);
  check_finite(out, "cross_entropy");
  if (recording({&logits})) {
    Tensor lc = logits, oc = out;
    record(out, [lc, oc, label, n]() mutable {
      if (!lc.requires_grad()) return;
      auto& g = lc.grad();
      const double go = oc.grad()[0];
      double mx = lc.at(0);
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, lc.at(i));
      double denom = 0.0;
      for (std::size_t i = 0; i < n; ++i) denom += std::exp(lc.at(i) - mx);
      for (std::size_t i = 0; i < n; ++i) {
        double p = std::exp(lc.at(i) - mx) / denom;
        if (i == label) p -= 1.0;
        g[i] += go * p;
      }
    });
  }
  return out;
}

std::vector<std::size_t> topk_indices(const std::vector<double>& x,
                                      std::size_t k) {
  const std::size_t n = x.size();
  if (k < 1 || k > n) {
    throw SelectionError("topk_indices: k=" + std::to_string(k) + " with n=" +
                         std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Value-descending, index-ascending on ties: smaller index wins.
  std::sort(order.begin(), order.end(), [&x](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] > x[b];
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> topk_indices(const Tensor& x, std::size_t k) {
  if (x.rank() != 1) {
    throw DimensionError("topk_indices: rank-1 input, got " +
                         shape_str(x.shape()));
  }
  return topk_indices(x.values(), k);
}

}  // namespace fgfm
