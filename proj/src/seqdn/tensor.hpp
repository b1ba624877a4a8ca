#pragma once

// Dense float64 tensors with a tape-based reverse-mode gradient graph.
//
// Tensors are reference handles: copying a Tensor aliases the same buffer.
// Parameters are leaf tensors created with requires_grad = true; every op
// executed through a Graph records a backward closure when any input needs
// a gradient. Only rank-1 and rank-2 tensors are supported by the ops, and
// shapes must match exactly except where an op is explicitly row- or
// scalar-wise (affine, row_scale, scale, add_scalar).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace seqdn::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t numel_of(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool leaf = true;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  // Allocates the gradient buffer if needed and fills it with zeros.
  void zero_grad();

  // Deep copy; keeps requires_grad but not graph history.
  Tensor clone() const;

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend class Graph;
};

// Records operations and replays them in reverse for backward().
// A Graph is single-threaded; separate graphs may live on separate threads.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // When disabled, ops compute values only and nothing is recorded.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return tape_.size(); }

  // [m,k] x [k,n] -> [m,n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  // [m,k] x [n,k]^T -> [m,n]
  Tensor matmul_nt(const Tensor& a, const Tensor& b);
  // x[m,k] * w[k,n] + bias[n] added to every row.
  Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& x, double factor);
  Tensor add_scalar(const Tensor& x, double offset);
  // x[m,n] with row r multiplied by s[r]; s has shape [m].
  Tensor row_scale(const Tensor& x, const Tensor& s);
  // Row r taken from if_set when flags[r] != 0, else from otherwise.
  Tensor where_rows(std::span<const char> flags, const Tensor& if_set, const Tensor& otherwise);

  // Rank-1 inputs concatenate into one vector; rank-2 inputs stack by rows.
  Tensor concat(std::span<const Tensor> parts);
  // Equal-length vectors -> [count, len] matrix.
  Tensor stack(std::span<const Tensor> vectors);
  // Rows [begin, end) of a matrix, or elements of a vector.
  Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
  // Rows of a matrix (or elements of a vector) at the given indices.
  Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
  // Row r of a matrix as a vector.
  Tensor row(const Tensor& x, std::size_t r);

  Tensor sigmoid(const Tensor& x);
  Tensor tanh(const Tensor& x);
  Tensor exp(const Tensor& x);
  Tensor log(const Tensor& x);

  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);
  // Frobenius / Euclidean norm of all elements.
  Tensor l2_norm(const Tensor& x);

  // dot(a,b) / (|a| |b| + kCosineEps) for equal-length vectors.
  Tensor cosine_similarity(const Tensor& a, const Tensor& b);
  // Per-row cosine of two equally shaped matrices -> [m].
  Tensor row_cosine(const Tensor& a, const Tensor& b);
  // Each row divided by (|row| + kCosineEps).
  Tensor normalize_rows(const Tensor& x);

  // Weighted mean over rows of -log softmax(logits)[target]. logits is [m,c]
  // or a single [c] vector. Empty weights means all ones.
  Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                               std::span<const double> weights = {});
  // mean((a - b)^2)
  Tensor mse(const Tensor& a, const Tensor& b);

  // Same values, cut from the graph.
  Tensor detach(const Tensor& x);

  // Accumulates d loss / d leaf into every requires_grad leaf reachable
  // from loss. Intermediate gradients are reset at the start of each call,
  // so repeated calls add up on leaves only.
  void backward(const Tensor& loss);

  static constexpr double kCosineEps = 1e-12;

 private:
  using BackwardFn = std::function<void(Node& out)>;

  Tensor record(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
                BackwardFn fn);
  Tensor record_many(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                     BackwardFn fn);

  struct Entry {
    std::shared_ptr<Node> out;
    BackwardFn backward;
  };
  std::vector<Entry> tape_;
  bool grad_enabled_ = true;
};

}  // namespace seqdn::ad
