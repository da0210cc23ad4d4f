#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ammsnn/error.hpp"

namespace ammsnn {

enum class Activation { tanh, relu, sigmoid };

// Axis names the slices that survive the reduction: rows -> one value per
// row (max over its columns), cols -> one value per column.
enum class Axis { rows, cols };

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major tensor of doubles with an accumulating gradient buffer.
// Copying a Tensor copies the handle, not the storage; ops on a Tape see
// parameter updates through the shared storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.s_ = std::make_shared<Storage>();
    t.s_->shape = std::move(shape);
    std::size_t n = 1;
    for (int d : t.s_->shape) {
      if (d <= 0) throw DimError("tensor dimensions must be positive, got " + shape_str(t.s_->shape));
      n *= static_cast<std::size_t>(d);
    }
    t.s_->data.assign(n, 0.0);
    t.s_->grad.assign(n, 0.0);
    t.s_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (values.size() != t.size())
      throw DimError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(t.shape()));
    t.s_->data = std::move(values);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(s_); }
  const std::vector<int>& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int dim(int i) const { return s_->shape[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return s_->data.size(); }

  std::vector<double>& data() { return s_->data; }
  const std::vector<double>& data() const { return s_->data; }
  std::vector<double>& grad() { return s_->grad; }
  const std::vector<double>& grad() const { return s_->grad; }

  bool requires_grad() const { return s_->requires_grad; }

  void zero_grad() { std::fill(s_->grad.begin(), s_->grad.end(), 0.0); }

  // Scalar convenience.
  double value() const {
    if (size() != 1) throw UsageError("value() on non-scalar tensor " + shape_str(shape()));
    return s_->data[0];
  }

  double at(int i) const { return s_->data[static_cast<std::size_t>(i)]; }
  double& at(int i) { return s_->data[static_cast<std::size_t>(i)]; }
  double at(int i, int j) const {
    return s_->data[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) +
                    static_cast<std::size_t>(j)];
  }
  double& at(int i, int j) {
    return s_->data[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) +
                    static_cast<std::size_t>(j)];
  }

  bool same_storage(const Tensor& o) const { return s_ == o.s_; }

  // Detached deep copy (fresh zero gradient).
  Tensor clone_detached() const {
    Tensor t = zeros(s_->shape, s_->requires_grad);
    t.s_->data = s_->data;
    return t;
  }

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

struct MaxReduce {
  Tensor values;
  std::vector<int> argmax;  // first-occurrence index within each slice
};

// Proximity of the nearest nondifferentiable point seen during forward
// evaluation on this tape. The gradient-check harness resamples inputs when
// either margin is too small; see gradcheck.hpp.
struct TapeStats {
  double min_max_gap = std::numeric_limits<double>::infinity();   // top-2 gap in any max
  double min_relu_margin = std::numeric_limits<double>::infinity();  // |x| at any relu input
};

// Append-only record of differentiable operations. Backward visits nodes in
// strict reverse creation order, which is a valid topological order because
// graphs are built eagerly. A tape is confined to one thread; independent
// tapes may run in parallel.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // When recording is off (inference), ops skip node creation and their
  // outputs do not require grad.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  std::size_t node_count() const { return nodes_.size(); }
  const TapeStats& stats() const { return stats_; }
  void reset_stats() { stats_ = TapeStats{}; }

  // Module-defined differentiable ops (embed, cosine, dropout, ...) append
  // their backward rule here; tensor-core primitives use it too.
  void record(const char* op, std::function<void()> backward_fn) {
    nodes_.push_back(Node{op, std::move(backward_fn)});
  }

  bool track(const Tensor& a) const { return recording_ && a.requires_grad(); }
  bool track(const Tensor& a, const Tensor& b) const {
    return recording_ && (a.requires_grad() || b.requires_grad());
  }
  bool track(const Tensor& a, const Tensor& b, const Tensor& c) const {
    return recording_ && (a.requires_grad() || b.requires_grad() || c.requires_grad());
  }

  void clear() {
    nodes_.clear();
    stats_ = TapeStats{};
  }

  // --- primitives -------------------------------------------------------

  Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
      throw DimError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n}, track(a, b));
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* op = out.data().data();
    for (int i = 0; i < m; ++i) {
      for (int kk = 0; kk < k; ++kk) {
        const double aik = ap[i * k + kk];
        const double* brow = bp + kk * n;
        double* orow = op + i * n;
        for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
      }
    }
    check_finite(out, "matmul");
    if (out.requires_grad()) {
      record("matmul", [a, b, out, m, k, n]() mutable {
        const double* g = out.grad().data();
        if (a.requires_grad()) {
          double* ga = a.grad().data();
          const double* bp2 = b.data().data();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
              const double gij = g[i * n + j];
              for (int kk = 0; kk < k; ++kk) ga[i * k + kk] += gij * bp2[kk * n + j];
            }
        }
        if (b.requires_grad()) {
          double* gb = b.grad().data();
          const double* ap2 = a.data().data();
          for (int kk = 0; kk < k; ++kk)
            for (int i = 0; i < m; ++i) {
              const double aik = ap2[i * k + kk];
              for (int j = 0; j < n; ++j) gb[kk * n + j] += aik * g[i * n + j];
            }
        }
      });
    }
    return out;
  }

  // 1-D convolution over the length axis with zero "same" padding, so the
  // output keeps L columns. input: d x L, filters: c x d x k (k odd),
  // bias: c. Activation is a separate op.
  Tensor conv1d_same(const Tensor& input, const Tensor& filters, const Tensor& bias) {
    if (input.rank() != 2) throw DimError("conv1d_same: input must be d x L, got " + shape_str(input.shape()));
    if (filters.rank() != 3)
      throw DimError("conv1d_same: filters must be c x d x k, got " + shape_str(filters.shape()));
    const int d = input.dim(0), len = input.dim(1);
    const int c = filters.dim(0), fd = filters.dim(1), k = filters.dim(2);
    if (fd != d)
      throw DimError("conv1d_same: filter depth " + std::to_string(fd) +
                     " does not match input depth " + std::to_string(d));
    if (k % 2 == 0) throw ConfigError("conv1d_same: filter width must be odd, got " + std::to_string(k));
    if (bias.rank() != 1 || bias.dim(0) != c)
      throw DimError("conv1d_same: bias must have length " + std::to_string(c) + ", got " +
                     shape_str(bias.shape()));
    const int pad = (k - 1) / 2;
    Tensor out = Tensor::zeros({c, len}, track(input, filters, bias));
    const double* in = input.data().data();
    const double* f = filters.data().data();
    double* op = out.data().data();
    for (int j = 0; j < c; ++j) {
      double* orow = op + j * len;
      const double bj = bias.at(j);
      for (int t = 0; t < len; ++t) orow[t] = bj;
      for (int dd = 0; dd < d; ++dd) {
        const double* irow = in + dd * len;
        const double* frow = f + (j * d + dd) * k;
        for (int o = 0; o < k; ++o) {
          const double w = frow[o];
          const int shift = o - pad;
          const int t0 = std::max(0, -shift);
          const int t1 = std::min(len, len - shift);
          for (int t = t0; t < t1; ++t) orow[t] += w * irow[t + shift];
        }
      }
    }
    check_finite(out, "conv1d_same");
    if (out.requires_grad()) {
      record("conv1d_same", [input, filters, bias, out, d, len, c, k, pad]() mutable {
        const double* g = out.grad().data();
        const double* in2 = input.data().data();
        const double* f2 = filters.data().data();
        for (int j = 0; j < c; ++j) {
          const double* grow = g + j * len;
          if (bias.requires_grad()) {
            double sum = 0.0;
            for (int t = 0; t < len; ++t) sum += grow[t];
            bias.grad()[static_cast<std::size_t>(j)] += sum;
          }
          for (int dd = 0; dd < d; ++dd) {
            const double* irow = in2 + dd * len;
            const double* frow = f2 + (j * d + dd) * k;
            double* girow = input.requires_grad() ? input.grad().data() + dd * len : nullptr;
            double* gfrow = filters.requires_grad() ? filters.grad().data() + (j * d + dd) * k : nullptr;
            for (int o = 0; o < k; ++o) {
              const int shift = o - pad;
              const int t0 = std::max(0, -shift);
              const int t1 = std::min(len, len - shift);
              if (gfrow) {
                double acc = 0.0;
                for (int t = t0; t < t1; ++t) acc += grow[t] * irow[t + shift];
                gfrow[o] += acc;
              }
              if (girow) {
                const double w = frow[o];
                for (int t = t0; t < t1; ++t) girow[t + shift] += w * grow[t];
              }
            }
          }
        }
      });
    }
    return out;
  }

  Tensor activation(const Tensor& x, Activation kind) {
    Tensor out = Tensor::zeros(x.shape(), track(x));
    const std::size_t n = x.size();
    const double* xp = x.data().data();
    double* op = out.data().data();
    switch (kind) {
      case Activation::tanh:
        for (std::size_t i = 0; i < n; ++i) op[i] = std::tanh(xp[i]);
        break;
      case Activation::relu:
        for (std::size_t i = 0; i < n; ++i) {
          op[i] = xp[i] > 0.0 ? xp[i] : 0.0;
          stats_.min_relu_margin = std::min(stats_.min_relu_margin, std::abs(xp[i]));
        }
        break;
      case Activation::sigmoid:
        for (std::size_t i = 0; i < n; ++i) op[i] = 1.0 / (1.0 + std::exp(-xp[i]));
        break;
    }
    check_finite(out, "activation");
    if (out.requires_grad()) {
      record("activation", [x, out, kind, n]() mutable {
        const double* g = out.grad().data();
        const double* y = out.data().data();
        const double* xin = x.data().data();
        double* gx = x.grad().data();
        switch (kind) {
          case Activation::tanh:
            for (std::size_t i = 0; i < n; ++i) gx[i] += (1.0 - y[i] * y[i]) * g[i];
            break;
          case Activation::relu:
            for (std::size_t i = 0; i < n; ++i)
              if (xin[i] > 0.0) gx[i] += g[i];
            break;
          case Activation::sigmoid:
            for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (1.0 - y[i]) * g[i];
            break;
        }
      });
    }
    return out;
  }

  // Numerically stabilized softmax over a vector (max subtraction; identical
  // to the plain form in exact arithmetic).
  Tensor softmax_vec(const Tensor& x) {
    if (x.rank() != 1 || x.dim(0) < 1)
      throw DimError("softmax_vec: expected nonempty vector, got " + shape_str(x.shape()));
    const int n = x.dim(0);
    Tensor out = Tensor::zeros({n}, track(x));
    const double* xp = x.data().data();
    double* op = out.data().data();
    double mx = xp[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, xp[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      op[i] = std::exp(xp[i] - mx);
      sum += op[i];
    }
    for (int i = 0; i < n; ++i) op[i] /= sum;
    check_finite(out, "softmax_vec");
    if (out.requires_grad()) {
      record("softmax_vec", [x, out, n]() mutable {
        const double* g = out.grad().data();
        const double* y = out.data().data();
        double* gx = x.grad().data();
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += g[i] * y[i];
        for (int i = 0; i < n; ++i) gx[i] += y[i] * (g[i] - dot);
      });
    }
    return out;
  }

  // Per-slice maximum with first-occurrence argmax; backward routes the
  // incoming gradient only to the argmax positions.
  MaxReduce max_reduce(const Tensor& x, Axis axis) {
    if (x.rank() != 2) throw DimError("max_reduce: expected matrix, got " + shape_str(x.shape()));
    const int r = x.dim(0), c = x.dim(1);
    const int slices = axis == Axis::rows ? r : c;
    MaxReduce res;
    res.values = Tensor::zeros({slices}, track(x));
    res.argmax.assign(static_cast<std::size_t>(slices), 0);
    const double* xp = x.data().data();
    double* vp = res.values.data().data();
    for (int s = 0; s < slices; ++s) {
      double best;
      double second = -std::numeric_limits<double>::infinity();
      int arg = 0;
      if (axis == Axis::rows) {
        const double* row = xp + s * c;
        best = row[0];
        for (int j = 1; j < c; ++j) {
          if (row[j] > best) {
            second = best;
            best = row[j];
            arg = j;
          } else {
            second = std::max(second, row[j]);
          }
        }
      } else {
        best = xp[s];
        for (int i = 1; i < r; ++i) {
          const double v = xp[i * c + s];
          if (v > best) {
            second = best;
            best = v;
            arg = i;
          } else {
            second = std::max(second, v);
          }
        }
      }
      vp[s] = best;
      res.argmax[static_cast<std::size_t>(s)] = arg;
      if (std::isfinite(second))
        stats_.min_max_gap = std::min(stats_.min_max_gap, best - second);
    }
    if (res.values.requires_grad()) {
      Tensor values = res.values;
      std::vector<int> argmax = res.argmax;
      record("max_reduce", [x, values, argmax, axis, c, slices]() mutable {
        const double* g = values.grad().data();
        double* gx = x.grad().data();
        for (int s = 0; s < slices; ++s) {
          const int arg = argmax[static_cast<std::size_t>(s)];
          const std::size_t idx = axis == Axis::rows
                                      ? static_cast<std::size_t>(s) * c + arg
                                      : static_cast<std::size_t>(arg) * c + s;
          gx[idx] += g[s];
        }
      });
    }
    return res;
  }

  // out[i,j] = m[i,j] * v[j]; v length must equal the column count.
  Tensor hadamard_broadcast(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || v.dim(0) != m.dim(1))
      throw DimError("hadamard_broadcast: shapes " + shape_str(m.shape()) + " and " +
                     shape_str(v.shape()) + " do not align");
    const int r = m.dim(0), c = m.dim(1);
    Tensor out = Tensor::zeros({r, c}, track(m, v));
    const double* mp = m.data().data();
    const double* vp = v.data().data();
    double* op = out.data().data();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) op[i * c + j] = mp[i * c + j] * vp[j];
    check_finite(out, "hadamard_broadcast");
    if (out.requires_grad()) {
      record("hadamard_broadcast", [m, v, out, r, c]() mutable {
        const double* g = out.grad().data();
        const double* mp2 = m.data().data();
        const double* vp2 = v.data().data();
        if (m.requires_grad()) {
          double* gm = m.grad().data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) gm[i * c + j] += g[i * c + j] * vp2[j];
        }
        if (v.requires_grad()) {
          double* gv = v.grad().data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) gv[j] += g[i * c + j] * mp2[i * c + j];
        }
      });
    }
    return out;
  }

  // Contiguous stacking of two tensors along an axis (vectors: axis 0;
  // matrices: 0 = rows, 1 = cols).
  Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    if (a.rank() != b.rank())
      throw DimError("concat: rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.rank() == 1) {
      if (axis != 0) throw DimError("concat: vector axis must be 0");
      const int n1 = a.dim(0), n2 = b.dim(0);
      Tensor out = Tensor::zeros({n1 + n2}, track(a, b));
      std::copy(a.data().begin(), a.data().end(), out.data().begin());
      std::copy(b.data().begin(), b.data().end(), out.data().begin() + n1);
      if (out.requires_grad()) {
        record("concat", [a, b, out, n1, n2]() mutable {
          const double* g = out.grad().data();
          if (a.requires_grad())
            for (int i = 0; i < n1; ++i) a.grad()[static_cast<std::size_t>(i)] += g[i];
          if (b.requires_grad())
            for (int i = 0; i < n2; ++i) b.grad()[static_cast<std::size_t>(i)] += g[n1 + i];
        });
      }
      return out;
    }
    if (a.rank() != 2 || (axis != 0 && axis != 1))
      throw DimError("concat: only vectors and matrices are supported");
    if (axis == 0) {
      if (a.dim(1) != b.dim(1))
        throw DimError("concat: column counts differ, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
      const int r1 = a.dim(0), r2 = b.dim(0), c = a.dim(1);
      Tensor out = Tensor::zeros({r1 + r2, c}, track(a, b));
      std::copy(a.data().begin(), a.data().end(), out.data().begin());
      std::copy(b.data().begin(), b.data().end(),
                out.data().begin() + static_cast<std::ptrdiff_t>(r1) * c);
      if (out.requires_grad()) {
        record("concat", [a, b, out, r1, r2, c]() mutable {
          const double* g = out.grad().data();
          if (a.requires_grad()) {
            double* ga = a.grad().data();
            for (int i = 0; i < r1 * c; ++i) ga[i] += g[i];
          }
          if (b.requires_grad()) {
            double* gb = b.grad().data();
            for (int i = 0; i < r2 * c; ++i) gb[i] += g[r1 * c + i];
          }
        });
      }
      return out;
    }
    if (a.dim(0) != b.dim(0))
      throw DimError("concat: row counts differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
    const int r = a.dim(0), c1 = a.dim(1), c2 = b.dim(1);
    Tensor out = Tensor::zeros({r, c1 + c2}, track(a, b));
    for (int i = 0; i < r; ++i) {
      std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i) * c1, c1,
                  out.data().begin() + static_cast<std::ptrdiff_t>(i) * (c1 + c2));
      std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(i) * c2, c2,
                  out.data().begin() + static_cast<std::ptrdiff_t>(i) * (c1 + c2) + c1);
    }
    if (out.requires_grad()) {
      record("concat", [a, b, out, r, c1, c2]() mutable {
        const double* g = out.grad().data();
        for (int i = 0; i < r; ++i) {
          if (a.requires_grad()) {
            double* ga = a.grad().data() + static_cast<std::ptrdiff_t>(i) * c1;
            for (int j = 0; j < c1; ++j) ga[j] += g[i * (c1 + c2) + j];
          }
          if (b.requires_grad()) {
            double* gb = b.grad().data() + static_cast<std::ptrdiff_t>(i) * c2;
            for (int j = 0; j < c2; ++j) gb[j] += g[i * (c1 + c2) + c1 + j];
          }
        }
      });
    }
    return out;
  }

  // Copy of a contiguous range along an axis; backward scatters back.
  Tensor slice(const Tensor& x, int axis, int start, int len) {
    if (len <= 0 || start < 0) throw DimError("slice: invalid range");
    if (x.rank() == 1) {
      if (axis != 0 || start + len > x.dim(0)) throw DimError("slice: range exceeds " + shape_str(x.shape()));
      Tensor out = Tensor::zeros({len}, track(x));
      std::copy_n(x.data().begin() + start, len, out.data().begin());
      if (out.requires_grad()) {
        record("slice", [x, out, start, len]() mutable {
          const double* g = out.grad().data();
          double* gx = x.grad().data();
          for (int i = 0; i < len; ++i) gx[start + i] += g[i];
        });
      }
      return out;
    }
    if (x.rank() != 2 || (axis != 0 && axis != 1))
      throw DimError("slice: only vectors and matrices are supported");
    const int r = x.dim(0), c = x.dim(1);
    if (axis == 0) {
      if (start + len > r) throw DimError("slice: row range exceeds " + shape_str(x.shape()));
      Tensor out = Tensor::zeros({len, c}, track(x));
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(start) * c, static_cast<std::ptrdiff_t>(len) * c,
                  out.data().begin());
      if (out.requires_grad()) {
        record("slice", [x, out, start, len, c]() mutable {
          const double* g = out.grad().data();
          double* gx = x.grad().data() + static_cast<std::ptrdiff_t>(start) * c;
          for (int i = 0; i < len * c; ++i) gx[i] += g[i];
        });
      }
      return out;
    }
    if (start + len > c) throw DimError("slice: column range exceeds " + shape_str(x.shape()));
    Tensor out = Tensor::zeros({r, len}, track(x));
    for (int i = 0; i < r; ++i)
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(i) * c + start, len,
                  out.data().begin() + static_cast<std::ptrdiff_t>(i) * len);
    if (out.requires_grad()) {
      record("slice", [x, out, r, c, start, len]() mutable {
        const double* g = out.grad().data();
        double* gx = x.grad().data();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < len; ++j) gx[i * c + start + j] += g[i * len + j];
      });
    }
    return out;
  }

  Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw DimError("transpose: expected matrix, got " + shape_str(x.shape()));
    const int r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r}, track(x));
    const double* xp = x.data().data();
    double* op = out.data().data();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) op[j * r + i] = xp[i * c + j];
    if (out.requires_grad()) {
      record("transpose", [x, out, r, c]() mutable {
        const double* g = out.grad().data();
        double* gx = x.grad().data();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
      });
    }
    return out;
  }

  Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
      throw DimError("add: shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape(), track(a, b));
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    check_finite(out, "add");
    if (out.requires_grad()) {
      record("add", [a, b, out, n]() mutable {
        const double* g = out.grad().data();
        if (a.requires_grad())
          for (std::size_t i = 0; i < n; ++i) a.grad()[i] += g[i];
        if (b.requires_grad())
          for (std::size_t i = 0; i < n; ++i) b.grad()[i] += g[i];
      });
    }
    return out;
  }

  Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
      throw DimError("sub: shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape(), track(a, b));
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    check_finite(out, "sub");
    if (out.requires_grad()) {
      record("sub", [a, b, out, n]() mutable {
        const double* g = out.grad().data();
        if (a.requires_grad())
          for (std::size_t i = 0; i < n; ++i) a.grad()[i] += g[i];
        if (b.requires_grad())
          for (std::size_t i = 0; i < n; ++i) b.grad()[i] -= g[i];
      });
    }
    return out;
  }

  // k * x + c elementwise.
  Tensor affine(const Tensor& x, double k, double c) {
    Tensor out = Tensor::zeros(x.shape(), track(x));
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = k * x.data()[i] + c;
    check_finite(out, "affine");
    if (out.requires_grad()) {
      record("affine", [x, out, k, n]() mutable {
        const double* g = out.grad().data();
        double* gx = x.grad().data();
        for (std::size_t i = 0; i < n; ++i) gx[i] += k * g[i];
      });
    }
    return out;
  }

  Tensor sum(const Tensor& x) {
    Tensor out = Tensor::zeros({1}, track(x));
    double s = 0.0;
    for (double v : x.data()) s += v;
    out.data()[0] = s;
    check_finite(out, "sum");
    if (out.requires_grad()) {
      record("sum", [x, out]() mutable {
        const double g = out.grad()[0];
        for (double& gv : x.grad()) gv += g;
      });
    }
    return out;
  }

  // --- backward ----------------------------------------------------------

  // Seeds dLoss/dLoss = 1 and replays the tape in reverse creation order.
  // The tape is cleared afterwards; gradients stay in the tensors.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
      throw UsageError("backward: loss must be a scalar tensor");
    if (loss.requires_grad()) loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_fn();
    clear();
  }

 private:
  struct Node {
    const char* op;
    std::function<void()> backward_fn;
  };

  static void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data())
      if (!std::isfinite(v))
        throw NumericError(std::string(op) + ": non-finite value in output (overflow or NaN input)");
  }

  std::vector<Node> nodes_;
  TapeStats stats_;
  bool recording_ = true;
};

}  // namespace ammsnn
