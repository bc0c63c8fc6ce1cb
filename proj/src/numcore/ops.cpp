#include "flowbind/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flowbind {

namespace {

using detail::GraphNode;
using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

void check_finite(const std::vector<double>& values, const char* op) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << op << ": non-finite result " << values[i] << " at index " << i;
      throw NumericError(msg.str());
    }
  }
}

// Gradient buffer of an input, or nullptr when the input is not tracked.
double* grad_slot(const ImplPtr& impl) {
  if (!impl->requires_grad) return nullptr;
  if (impl->grad.size() != impl->data.size()) {
    impl->grad.assign(impl->data.size(), 0.0);
  }
  return impl->grad.data();
}

template <typename Backward>
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::initializer_list<const Tensor*> inputs,
                   Backward&& backward) {
  check_finite(data, op);
  bool track = false;
  if (grad_mode_enabled()) {
    for (const Tensor* t : inputs) track = track || t->requires_grad();
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (track) {
    impl->requires_grad = true;
    auto node = std::make_shared<GraphNode>();
    node->op = op;
    for (const Tensor* t : inputs) node->inputs.push_back(t->impl());
    node->backward = std::forward<Backward>(backward);
    impl->node = std::move(node);
  }
  return Tensor::from_impl(std::move(impl));
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Output shape of a trailing-broadcast binary op.
Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (is_suffix(b.shape(), a.shape())) return a.shape();
  if (is_suffix(a.shape(), b.shape())) return b.shape();
  throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) +
                   " and " + shape_to_string(b.shape()) +
                   " are not trailing-broadcast compatible");
}

// Visits (out index, a index, b index) for a trailing-broadcast pair whose
// sizes divide the output size.
template <typename Fn>
void broadcast_loop(std::size_t n, std::size_t na, std::size_t nb, Fn&& fn) {
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  const std::size_t inner = std::min(na, nb);
  for (std::size_t base = 0; base < n; base += inner) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t i = base + j;
      fn(i, na == n ? i : j, nb == n ? i : j);
    }
  }
}

Tensor binary(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  const char* name = op == ElementwiseOp::add   ? "add"
                     : op == ElementwiseOp::sub ? "sub"
                                                : "mul";
  Shape out_shape = broadcast_shape(a, b, name);
  const std::size_t n = shape_numel(out_shape);
  const auto& ad = a.impl()->data;
  const auto& bd = b.impl()->data;
  const std::size_t na = ad.size(), nb = bd.size();
  std::vector<double> out(n);
  switch (op) {
    case ElementwiseOp::add:
      broadcast_loop(n, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        out[i] = ad[ia] + bd[ib];
      });
      break;
    case ElementwiseOp::sub:
      broadcast_loop(n, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        out[i] = ad[ia] - bd[ib];
      });
      break;
    default:
      broadcast_loop(n, na, nb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        out[i] = ad[ia] * bd[ib];
      });
      break;
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(
      name, std::move(out_shape), std::move(out), {&a, &b},
      [op, ai, bi](std::span<const double> g) {
        const std::size_t na = ai->data.size(), nb = bi->data.size();
        double* ga = grad_slot(ai);
        double* gb = grad_slot(bi);
        const auto& ad = ai->data;
        const auto& bd = bi->data;
        broadcast_loop(g.size(), na, nb,
                       [&](std::size_t i, std::size_t ia, std::size_t ib) {
                         switch (op) {
                           case ElementwiseOp::add:
                             if (ga) ga[ia] += g[i];
                             if (gb) gb[ib] += g[i];
                             break;
                           case ElementwiseOp::sub:
                             if (ga) ga[ia] += g[i];
                             if (gb) gb[ib] -= g[i];
                             break;
                           default:
                             if (ga) ga[ia] += g[i] * bd[ib];
                             if (gb) gb[ib] += g[i] * ad[ia];
                             break;
                         }
                       });
      });
}

}  // namespace

Tensor elementwise(ElementwiseOp op, const Tensor& a,
                   const std::optional<Tensor>& b) {
  switch (op) {
    case ElementwiseOp::tanh:
      return tanh(a);
    case ElementwiseOp::silu:
      return silu(a);
    default:
      if (!b) throw ArgumentError("elementwise: binary op needs two operands");
      return binary(op, a, *b);
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(ElementwiseOp::add, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(ElementwiseOp::sub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(ElementwiseOp::mul, a, b);
}

Tensor tanh(const Tensor& x) {
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = std::tanh(xd[i]);
  ImplPtr xi = x.impl();
  std::vector<double> y = out;
  return make_result("tanh", x.shape(), std::move(out), {&x},
                     [xi, y = std::move(y)](std::span<const double> g) {
                       double* gx = grad_slot(xi);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * (1.0 - y[i] * y[i]);
                       }
                     });
}

Tensor silu(const Tensor& x) {
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    out[i] = xd[i] / (1.0 + std::exp(-xd[i]));
  }
  ImplPtr xi = x.impl();
  return make_result("silu", x.shape(), std::move(out), {&x},
                     [xi](std::span<const double> g) {
                       double* gx = grad_slot(xi);
                       const auto& xd = xi->data;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double s = 1.0 / (1.0 + std::exp(-xd[i]));
                         gx[i] += g[i] * s * (1.0 + xd[i] * (1.0 - s));
                       }
                     });
}

Tensor scale(const Tensor& x, double factor) {
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] * factor;
  ImplPtr xi = x.impl();
  return make_result("scale", x.shape(), std::move(out), {&x},
                     [xi, factor](std::span<const double> g) {
                       double* gx = grad_slot(xi);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * factor;
                       }
                     });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: operands must be rank 2, got " +
                     shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner extents differ: " +
                     shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  const double* ad = a.impl()->data.data();
  const double* bd = b.impl()->data.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      const double* brow = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  return make_result(
      "matmul", Shape{m, n}, std::move(out), {&a, &b},
      [ai, bi, m, k, n](std::span<const double> g) {
        const double* ad = ai->data.data();
        const double* bd = bi->data.data();
        if (double* ga = grad_slot(ai)) {
          // dA = G . B^T, accumulated row-wise against an explicit B^T so the
          // inner loop is a contiguous axpy.
          std::vector<double> bt(n * k);
          for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = bd[p * n + j];
          }
          std::vector<double> acc(k);
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g.data() + i * n;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
              const double gij = grow[j];
              const double* btrow = bt.data() + j * k;
              for (std::size_t p = 0; p < k; ++p) acc[p] += gij * btrow[p];
            }
            double* garow = ga + i * k;
            for (std::size_t p = 0; p < k; ++p) garow[p] += acc[p];
          }
        }
        if (double* gb = grad_slot(bi)) {
          // dB = A^T . G
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g.data() + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = ad[i * k + p];
              double* gbrow = gb + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
          }
        }
      });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.impl()->data) acc += v;
  ImplPtr xi = x.impl();
  return make_result("sum", Shape{}, {acc}, {&x},
                     [xi](std::span<const double> g) {
                       double* gx = grad_slot(xi);
                       for (std::size_t i = 0; i < xi->data.size(); ++i) {
                         gx[i] += g[0];
                       }
                     });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_squares(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.impl()->data) acc += v * v;
  ImplPtr xi = x.impl();
  return make_result("sum_squares", Shape{}, {acc}, {&x},
                     [xi](std::span<const double> g) {
                       double* gx = grad_slot(xi);
                       for (std::size_t i = 0; i < xi->data.size(); ++i) {
                         gx[i] += 2.0 * xi->data[i] * g[0];
                       }
                     });
}

Tensor layer_norm(const Tensor& x, double eps) {
  if (x.rank() != 2) {
    throw ShapeError("layer_norm expects [rows x width], got " +
                     shape_to_string(x.shape()));
  }
  const std::size_t rows = x.shape()[0], width = x.shape()[1];
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * width;
    double mu = 0.0;
    for (std::size_t c = 0; c < width; ++c) mu += xr[c];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(width);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = (xr[c] - mu) * is;
  }
  ImplPtr xi = x.impl();
  std::vector<double> xhat = out;
  return make_result(
      "layer_norm", x.shape(), std::move(out), {&x},
      [xi, rows, width, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](std::span<const double> g) {
        double* gx = grad_slot(xi);
        const double w = static_cast<double>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * width;
          const double* hr = xhat.data() + r * width;
          double g_mean = 0.0, gh_mean = 0.0;
          for (std::size_t c = 0; c < width; ++c) {
            g_mean += gr[c];
            gh_mean += gr[c] * hr[c];
          }
          g_mean /= w;
          gh_mean /= w;
          for (std::size_t c = 0; c < width; ++c) {
            gx[r * width + c] += inv_std[r] * (gr[c] - g_mean - hr[c] * gh_mean);
          }
        }
      });
}

Tensor scale_rows(const Tensor& x, const Tensor& factors) {
  if (x.rank() == 0 || factors.numel() != x.rows() || factors.rank() != 1) {
    throw ShapeError("scale_rows: factors " + shape_to_string(factors.shape()) +
                     " do not match rows of " + shape_to_string(x.shape()));
  }
  const std::size_t rows = x.rows(), width = x.cols();
  const auto& xd = x.impl()->data;
  const auto& fd = factors.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      out[r * width + c] = fd[r] * xd[r * width + c];
    }
  }
  ImplPtr xi = x.impl(), fi = factors.impl();
  return make_result(
      "scale_rows", x.shape(), std::move(out), {&x, &factors},
      [xi, fi, rows, width](std::span<const double> g) {
        if (double* gx = grad_slot(xi)) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
              gx[r * width + c] += fi->data[r] * g[r * width + c];
            }
          }
        }
        if (double* gf = grad_slot(fi)) {
          for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < width; ++c) {
              acc += g[r * width + c] * xi->data[r * width + c];
            }
            gf[r] += acc;
          }
        }
      });
}

Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (x.rank() != 2) {
    throw ShapeError("index_rows expects a rank-2 tensor, got " +
                     shape_to_string(x.shape()));
  }
  const std::size_t width = x.cols(), n = x.rows();
  const auto& xd = x.impl()->data;
  std::vector<double> out(rows.size() * width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("index_rows: row " + std::to_string(rows[r]) +
                       " out of range " + std::to_string(n));
    }
    std::copy_n(xd.data() + rows[r] * width, width, out.data() + r * width);
  }
  ImplPtr xi = x.impl();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result("index_rows", Shape{rows.size(), width}, std::move(out),
                     {&x},
                     [xi, width, idx = std::move(idx)](std::span<const double> g) {
                       double* gx = grad_slot(xi);
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         for (std::size_t c = 0; c < width; ++c) {
                           gx[idx[r] * width + c] += g[r * width + c];
                         }
                       }
                     });
}

Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> rows,
                    std::size_t out_rows) {
  if (x.rank() != 2 || x.rows() != rows.size()) {
    throw ShapeError("scatter_rows: " + std::to_string(rows.size()) +
                     " indices for tensor " + shape_to_string(x.shape()));
  }
  const std::size_t width = x.cols();
  const auto& xd = x.impl()->data;
  std::vector<double> out(out_rows * width, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= out_rows) {
      throw ShapeError("scatter_rows: target row " + std::to_string(rows[r]) +
                       " out of range " + std::to_string(out_rows));
    }
    for (std::size_t c = 0; c < width; ++c) {
      out[rows[r] * width + c] += xd[r * width + c];
    }
  }
  ImplPtr xi = x.impl();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result("scatter_rows", Shape{out_rows, width}, std::move(out),
                     {&x},
                     [xi, width, idx = std::move(idx)](std::span<const double> g) {
                       double* gx = grad_slot(xi);
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         for (std::size_t c = 0; c < width; ++c) {
                           gx[r * width + c] += g[idx[r] * width + c];
                         }
                       }
                     });
}

Tensor where_rows(std::span<const bool> take_first, const Tensor& a,
                  const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() == 0 || take_first.size() != a.rows()) {
    throw ShapeError("where_rows: mask of " + std::to_string(take_first.size()) +
                     " rows for " + shape_to_string(a.shape()) + " / " +
                     shape_to_string(b.shape()));
  }
  const std::size_t width = a.cols();
  const auto& ad = a.impl()->data;
  const auto& bd = b.impl()->data;
  std::vector<double> out(ad.size());
  for (std::size_t r = 0; r < take_first.size(); ++r) {
    const auto& src = take_first[r] ? ad : bd;
    std::copy_n(src.data() + r * width, width, out.data() + r * width);
  }
  ImplPtr ai = a.impl(), bi = b.impl();
  std::vector<bool> mask(take_first.begin(), take_first.end());
  return make_result(
      "where_rows", a.shape(), std::move(out), {&a, &b},
      [ai, bi, width, mask = std::move(mask)](std::span<const double> g) {
        double* ga = grad_slot(ai);
        double* gb = grad_slot(bi);
        for (std::size_t r = 0; r < mask.size(); ++r) {
          double* dst = mask[r] ? ga : gb;
          if (!dst) continue;
          for (std::size_t c = 0; c < width; ++c) {
            dst[r * width + c] += g[r * width + c];
          }
        }
      });
}

Tensor detach(const Tensor& x) {
  return Tensor(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

}  // namespace flowbind
