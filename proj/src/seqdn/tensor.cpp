#include "seqdn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "seqdn/errors.hpp"

namespace seqdn::ad {
namespace {

// C[m,n] += A[m,k] * B[k,n], all row-major. Each output element adds its
// k products in ascending order; the inner loop runs along rows of B and C,
// so it vectorizes without reassociating any sum and results do not depend
// on buffer addresses.
void mm_acc(double* __restrict c, const double* __restrict a, const double* __restrict b, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

std::vector<double> transposed(const double* x, std::size_t r, std::size_t c) {
  std::vector<double> t(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = x[i * c + j];
  }
  return t;
}

[[noreturn]] void shape_fail(std::string_view op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank) {
  if (!t.defined()) shape_fail(op, "undefined tensor");
  if (t.rank() != rank) {
    shape_fail(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

void require_same(std::string_view op, const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) shape_fail(op, "undefined tensor");
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Rows/cols of a rank-1 (as one row) or rank-2 tensor.
std::pair<std::size_t, std::size_t> as_rows_cols(const Tensor& t) {
  if (t.rank() == 1) return {1, t.shape()[0]};
  return {t.shape()[0], t.shape()[1]};
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = numel_of(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw ShapeError("tensor: empty shape");
  for (const auto d : shape) {
    if (d == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
  }
  if (numel_of(shape) != values.size()) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return from(std::move(s), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return from({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }
std::size_t Tensor::cols() const { return rank() == 2 ? shape()[1] : shape()[0]; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not scalar");
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor Tensor::clone() const {
  return from(node_->shape, node_->value, node_->requires_grad);
}

// ---------------------------------------------------------------------------

Tensor Graph::record(Shape shape, std::vector<double> value,
                     std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  bool needs = false;
  if (grad_enabled_) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = needs;
  node->leaf = !needs;
  if (needs) tape_.push_back({node, std::move(fn)});
  return Tensor(std::move(node));
}

Tensor Graph::record_many(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                          BackwardFn fn) {
  bool needs = false;
  if (grad_enabled_) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = needs;
  node->leaf = !needs;
  if (needs) tape_.push_back({node, std::move(fn)});
  return Tensor(std::move(node));
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    shape_fail("matmul", "inner dimensions differ " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  mm_acc(out.data(), a.node().value.data(), b.node().value.data(), m, k, n);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record({m, n}, std::move(out), {&a, &b}, [an, bn, m, k, n](Node& o) {
    if (an->requires_grad) {
      const auto bt = transposed(bn->value.data(), k, n);
      mm_acc(an->grad_buffer().data(), o.grad.data(), bt.data(), m, n, k);
    }
    if (bn->requires_grad) {
      const auto at = transposed(an->value.data(), m, k);
      mm_acc(bn->grad_buffer().data(), at.data(), o.grad.data(), k, m, n);
    }
  });
}

Tensor Graph::matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank("matmul_nt", a, 2);
  require_rank("matmul_nt", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    shape_fail("matmul_nt", "inner dimensions differ " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  {
    const auto bt = transposed(b.node().value.data(), n, k);
    mm_acc(out.data(), a.node().value.data(), bt.data(), m, k, n);
  }
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record({m, n}, std::move(out), {&a, &b}, [an, bn, m, k, n](Node& o) {
    if (an->requires_grad) mm_acc(an->grad_buffer().data(), o.grad.data(), bn->value.data(), m, n, k);
    if (bn->requires_grad) {
      const auto ct = transposed(o.grad.data(), m, n);
      mm_acc(bn->grad_buffer().data(), ct.data(), an->value.data(), n, m, k);
    }
  });
}

Tensor Graph::affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank("affine", x, 2);
  require_rank("affine", w, 2);
  require_rank("affine", bias, 1);
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
  if (w.shape()[0] != k || bias.shape()[0] != n) {
    shape_fail("affine", "incompatible shapes x" + shape_str(x.shape()) + " w" +
                             shape_str(w.shape()) + " b" + shape_str(bias.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(bias.node().value.data(), n, out.data() + i * n);
  mm_acc(out.data(), x.node().value.data(), w.node().value.data(), m, k, n);
  auto xn = x.node_ptr(), wn = w.node_ptr(), bn = bias.node_ptr();
  return record({m, n}, std::move(out), {&x, &w, &bias}, [xn, wn, bn, m, k, n](Node& o) {
    if (xn->requires_grad) {
      const auto wt = transposed(wn->value.data(), k, n);
      mm_acc(xn->grad_buffer().data(), o.grad.data(), wt.data(), m, n, k);
    }
    if (wn->requires_grad) {
      const auto xt = transposed(xn->value.data(), m, k);
      mm_acc(wn->grad_buffer().data(), xt.data(), o.grad.data(), k, m, n);
    }
    if (bn->requires_grad) {
      auto& gb = bn->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gb[j] += o.grad[i * n + j];
      }
    }
  });
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record(a.shape(), std::move(out), {&a, &b}, [an, bn](Node& o) {
    for (Node* in : {an.get(), bn.get()}) {
      if (!in->requires_grad) continue;
      auto& g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record(a.shape(), std::move(out), {&a, &b}, [an, bn](Node& o) {
    if (an->requires_grad) {
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record(a.shape(), std::move(out), {&a, &b}, [an, bn](Node& o) {
    if (an->requires_grad) {
      auto& g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * an->value[i];
    }
  });
}

Tensor Graph::scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * factor;
  auto xn = x.node_ptr();
  return record(x.shape(), std::move(out), {&x}, [xn, factor](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
  });
}

Tensor Graph::add_scalar(const Tensor& x, double offset) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) + offset;
  auto xn = x.node_ptr();
  return record(x.shape(), std::move(out), {&x}, [xn](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor Graph::row_scale(const Tensor& x, const Tensor& s) {
  require_rank("row_scale", x, 2);
  require_rank("row_scale", s, 1);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (s.shape()[0] != m) {
    shape_fail("row_scale", "scale " + shape_str(s.shape()) + " does not match rows of " +
                                shape_str(x.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double f = s.at(r);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x.at(r * n + c) * f;
  }
  auto xn = x.node_ptr(), sn = s.node_ptr();
  return record({m, n}, std::move(out), {&x, &s}, [xn, sn, m, n](Node& o) {
    if (xn->requires_grad) {
      auto& g = xn->grad_buffer();
      for (std::size_t r = 0; r < m; ++r) {
        const double f = sn->value[r];
        for (std::size_t c = 0; c < n; ++c) g[r * n + c] += o.grad[r * n + c] * f;
      }
    }
    if (sn->requires_grad) {
      auto& g = sn->grad_buffer();
      for (std::size_t r = 0; r < m; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += o.grad[r * n + c] * xn->value[r * n + c];
        g[r] += acc;
      }
    }
  });
}

Tensor Graph::where_rows(std::span<const char> flags, const Tensor& if_set, const Tensor& otherwise) {
  require_rank("where_rows", if_set, 2);
  require_same("where_rows", if_set, otherwise);
  const std::size_t m = if_set.shape()[0], n = if_set.shape()[1];
  if (flags.size() != m) {
    shape_fail("where_rows", std::to_string(flags.size()) + " flags for " + shape_str(if_set.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const auto src = flags[r] ? if_set.data() : otherwise.data();
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(r * n), n, out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  auto an = if_set.node_ptr(), bn = otherwise.node_ptr();
  std::vector<char> f(flags.begin(), flags.end());
  return record({m, n}, std::move(out), {&if_set, &otherwise}, [an, bn, m, n, f = std::move(f)](Node& o) {
    for (std::size_t r = 0; r < m; ++r) {
      Node* dst = f[r] ? an.get() : bn.get();
      if (!dst->requires_grad) continue;
      auto& g = dst->grad_buffer();
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += o.grad[r * n + c];
    }
  });
}

Tensor Graph::concat(std::span<const Tensor> parts) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  const std::size_t rank = parts[0].rank();
  if (rank != 1 && rank != 2) shape_fail("concat", "rank must be 1 or 2");
  const std::size_t cols = rank == 2 ? parts[0].shape()[1] : 1;
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.shape()[1] != cols)) {
      shape_fail("concat", "incompatible part " + shape_str(p.shape()) + " vs " +
                               shape_str(parts[0].shape()));
    }
    offsets.push_back(rows * cols);
    rows += p.shape()[0];
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Shape shape = rank == 2 ? Shape{rows, cols} : Shape{rows};
  std::vector<std::shared_ptr<Node>> ins;
  for (const auto& p : parts) ins.push_back(p.node_ptr());
  return record_many(std::move(shape), std::move(out), parts, [ins, offsets](Node& o) {
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!ins[k]->requires_grad) continue;
      auto& g = ins[k]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[offsets[k] + i];
    }
  });
}

Tensor Graph::stack(std::span<const Tensor> vectors) {
  if (vectors.empty()) shape_fail("stack", "no inputs");
  for (const auto& v : vectors) {
    require_rank("stack", v, 1);
    if (v.shape() != vectors[0].shape()) {
      shape_fail("stack", "length mismatch " + shape_str(v.shape()) + " vs " +
                              shape_str(vectors[0].shape()));
    }
  }
  Tensor flat = concat(vectors);
  const std::size_t n = vectors[0].shape()[0];
  // Reinterpret the concatenated vector as a matrix, sharing gradients.
  std::vector<double> out(flat.data().begin(), flat.data().end());
  auto fn = flat.node_ptr();
  return record({vectors.size(), n}, std::move(out), {&flat}, [fn](Node& o) {
    auto& g = fn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor Graph::slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 1 && x.rank() != 2) shape_fail("slice_rows", "rank must be 1 or 2");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.rank() == 2 ? x.shape()[1] : 1;
  if (begin >= end || end > rows) {
    shape_fail("slice_rows", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                 ") out of " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * cols));
  Shape shape = x.rank() == 2 ? Shape{end - begin, cols} : Shape{end - begin};
  auto xn = x.node_ptr();
  const std::size_t offset = begin * cols;
  return record(std::move(shape), std::move(out), {&x}, [xn, offset](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[offset + i] += o.grad[i];
  });
}

Tensor Graph::gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() != 1 && x.rank() != 2) shape_fail("gather_rows", "rank must be 1 or 2");
  if (index.empty()) shape_fail("gather_rows", "empty index");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.rank() == 2 ? x.shape()[1] : 1;
  std::vector<double> out(index.size() * cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) {
      shape_fail("gather_rows", "index " + std::to_string(index[i]) + " out of range for " +
                                    shape_str(x.shape()));
    }
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(index[i] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  Shape shape = x.rank() == 2 ? Shape{index.size(), cols} : Shape{index.size()};
  auto xn = x.node_ptr();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return record(std::move(shape), std::move(out), {&x}, [xn, idx = std::move(idx), cols](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < cols; ++c) g[idx[i] * cols + c] += o.grad[i * cols + c];
    }
  });
}

Tensor Graph::row(const Tensor& x, std::size_t r) {
  require_rank("row", x, 2);
  const std::size_t cols = x.shape()[1];
  if (r >= x.shape()[0]) shape_fail("row", "row " + std::to_string(r) + " out of " + shape_str(x.shape()));
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(r * cols),
                          x.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  auto xn = x.node_ptr();
  return record({cols}, std::move(out), {&x}, [xn, r, cols](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += o.grad[c];
  });
}

Tensor Graph::sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(x.at(i));
  auto xn = x.node_ptr();
  return record(x.shape(), std::move(out), {&x}, [xn](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = o.value[i];
      g[i] += o.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor Graph::tanh(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.at(i));
  auto xn = x.node_ptr();
  return record(x.shape(), std::move(out), {&x}, [xn](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = o.value[i];
      g[i] += o.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor Graph::exp(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.at(i));
  auto xn = x.node_ptr();
  return record(x.shape(), std::move(out), {&x}, [xn](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * o.value[i];
  });
}

Tensor Graph::log(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(x.at(i));
  auto xn = x.node_ptr();
  return record(x.shape(), std::move(out), {&x}, [xn](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] / xn->value[i];
  });
}

Tensor Graph::sum(const Tensor& x) {
  double s = 0.0;
  for (const double v : x.data()) s += v;
  auto xn = x.node_ptr();
  return record({1}, {s}, {&x}, [xn](Node& o) {
    auto& g = xn->grad_buffer();
    for (double& v : g) v += o.grad[0];
  });
}

Tensor Graph::mean(const Tensor& x) {
  double s = 0.0;
  for (const double v : x.data()) s += v;
  const double inv = 1.0 / static_cast<double>(x.numel());
  auto xn = x.node_ptr();
  return record({1}, {s * inv}, {&x}, [xn, inv](Node& o) {
    auto& g = xn->grad_buffer();
    for (double& v : g) v += o.grad[0] * inv;
  });
}

Tensor Graph::l2_norm(const Tensor& x) {
  double ss = 0.0;
  for (const double v : x.data()) ss += v * v;
  const double norm = std::sqrt(ss);
  auto xn = x.node_ptr();
  return record({1}, {norm}, {&x}, [xn, norm](Node& o) {
    if (norm == 0.0) return;
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[0] * xn->value[i] / norm;
  });
}

namespace {

// Cosine of two length-n spans plus its gradient factors. A zero-norm input
// yields cosine 0 with zero gradient.
struct CosineParts {
  double dot, na, nb, denom, value;
};

CosineParts cosine_parts(const double* a, const double* b, std::size_t n) {
  double dot = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
  }
  CosineParts p{dot, std::sqrt(saa), std::sqrt(sbb), 0.0, 0.0};
  p.denom = p.na * p.nb + Graph::kCosineEps;
  p.value = dot / p.denom;
  return p;
}

void cosine_backward(const double* a, const double* b, std::size_t n, const CosineParts& p,
                     double upstream, double* ga, double* gb) {
  if (p.na == 0.0 || p.nb == 0.0) return;
  const double inv = 1.0 / p.denom;
  const double coef = p.dot * inv * inv;
  for (std::size_t i = 0; i < n; ++i) {
    if (ga) ga[i] += upstream * (b[i] * inv - coef * p.nb * a[i] / p.na);
    if (gb) gb[i] += upstream * (a[i] * inv - coef * p.na * b[i] / p.nb);
  }
}

}  // namespace

Tensor Graph::cosine_similarity(const Tensor& a, const Tensor& b) {
  require_rank("cosine_similarity", a, 1);
  require_same("cosine_similarity", a, b);
  const std::size_t n = a.numel();
  const CosineParts p = cosine_parts(a.data().data(), b.data().data(), n);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record({1}, {p.value}, {&a, &b}, [an, bn, n, p](Node& o) {
    cosine_backward(an->value.data(), bn->value.data(), n, p, o.grad[0],
                    an->requires_grad ? an->grad_buffer().data() : nullptr,
                    bn->requires_grad ? bn->grad_buffer().data() : nullptr);
  });
}

Tensor Graph::row_cosine(const Tensor& a, const Tensor& b) {
  require_rank("row_cosine", a, 2);
  require_same("row_cosine", a, b);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<CosineParts> parts(m);
  std::vector<double> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    parts[r] = cosine_parts(a.data().data() + r * n, b.data().data() + r * n, n);
    out[r] = parts[r].value;
  }
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record({m}, std::move(out), {&a, &b}, [an, bn, m, n, parts = std::move(parts)](Node& o) {
    double* ga = an->requires_grad ? an->grad_buffer().data() : nullptr;
    double* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
    for (std::size_t r = 0; r < m; ++r) {
      cosine_backward(an->value.data() + r * n, bn->value.data() + r * n, n, parts[r], o.grad[r],
                      ga ? ga + r * n : nullptr, gb ? gb + r * n : nullptr);
    }
  });
}

Tensor Graph::normalize_rows(const Tensor& x) {
  require_rank("normalize_rows", x, 2);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  std::vector<double> norms(m);
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < n; ++c) ss += x.at(r * n + c) * x.at(r * n + c);
    norms[r] = std::sqrt(ss);
    const double d = norms[r] + kCosineEps;
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x.at(r * n + c) / d;
  }
  auto xn = x.node_ptr();
  return record({m, n}, std::move(out), {&x}, [xn, m, n, norms = std::move(norms)](Node& o) {
    auto& g = xn->grad_buffer();
    for (std::size_t r = 0; r < m; ++r) {
      const double nr = norms[r];
      if (nr == 0.0) continue;
      const double d = nr + kCosineEps;
      double xdy = 0.0;
      for (std::size_t c = 0; c < n; ++c) xdy += xn->value[r * n + c] * o.grad[r * n + c];
      const double coef = xdy / (nr * d * d);
      for (std::size_t c = 0; c < n; ++c) {
        g[r * n + c] += o.grad[r * n + c] / d - coef * xn->value[r * n + c];
      }
    }
  });
}

Tensor Graph::softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                                    std::span<const double> weights) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    shape_fail("softmax_cross_entropy", "logits must be rank 1 or 2, got " + shape_str(logits.shape()));
  }
  const auto [m, c] = as_rows_cols(logits);
  if (targets.size() != m) {
    shape_fail("softmax_cross_entropy", std::to_string(targets.size()) + " targets for logits " +
                                            shape_str(logits.shape()));
  }
  if (!weights.empty() && weights.size() != m) {
    shape_fail("softmax_cross_entropy", std::to_string(weights.size()) + " weights for logits " +
                                            shape_str(logits.shape()));
  }
  std::vector<double> probs(m * c);
  std::vector<double> w(m, 1.0);
  if (!weights.empty()) std::copy(weights.begin(), weights.end(), w.begin());
  double total_w = 0.0, loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (targets[r] >= c) {
      shape_fail("softmax_cross_entropy", "target " + std::to_string(targets[r]) +
                                              " out of range for " + std::to_string(c) + " classes");
    }
    const double* z = logits.data().data() + r * c;
    const double zmax = *std::max_element(z, z + c);
    double se = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[r * c + j] = std::exp(z[j] - zmax);
      se += probs[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] /= se;
    const double lse = zmax + std::log(se);
    loss += w[r] * (lse - z[targets[r]]);
    total_w += w[r];
  }
  const double value = total_w > 0.0 ? loss / total_w : 0.0;
  auto ln = logits.node_ptr();
  std::vector<std::size_t> t(targets.begin(), targets.end());
  return record({1}, {value}, {&logits},
                [ln, m, c, total_w, probs = std::move(probs), w = std::move(w), t = std::move(t)](Node& o) {
                  if (total_w <= 0.0) return;
                  auto& g = ln->grad_buffer();
                  for (std::size_t r = 0; r < m; ++r) {
                    const double f = o.grad[0] * w[r] / total_w;
                    if (f == 0.0) continue;
                    for (std::size_t j = 0; j < c; ++j) g[r * c + j] += f * probs[r * c + j];
                    g[r * c + t[r]] -= f;
                  }
                });
}

Tensor Graph::mse(const Tensor& a, const Tensor& b) {
  require_same("mse", a, b);
  const std::size_t n = a.numel();
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.at(i) - b.at(i);
    ss += d * d;
  }
  auto an = a.node_ptr(), bn = b.node_ptr();
  return record({1}, {ss / static_cast<double>(n)}, {&a, &b}, [an, bn, n](Node& o) {
    const double f = 2.0 * o.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = an->value[i] - bn->value[i];
      if (an->requires_grad) an->grad_buffer()[i] += f * d;
      if (bn->requires_grad) bn->grad_buffer()[i] -= f * d;
    }
  });
}

Tensor Graph::detach(const Tensor& x) {
  return Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  for (auto& e : tape_) e.out->grad.clear();
  Node& root = loss.node();
  root.grad_buffer()[0] += 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    if (it->out->grad.empty()) continue;
    it->backward(*it->out);
  }
}

}  // namespace seqdn::ad
