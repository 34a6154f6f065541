#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace msglab::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Node;

/// Handle to a dense rank-2 value that may take part in reverse-mode
/// differentiation. Rows are the batch dimension.
///
/// Copies share the same underlying node, so a parameter tensor held by a
/// network and a copy handed to an optimizer see the same value and grad.
class Tensor {
 public:
  Tensor();

  /// Leaf that never receives a gradient.
  static Tensor constant(Matrix value);
  static Tensor constant(double value);
  /// Leaf whose gradient is accumulated by backward().
  static Tensor parameter(Matrix value);

  const Matrix& value() const;
  /// Writable value of a leaf; used by optimizers. Throws for op outputs.
  Matrix& leaf_value();
  /// Gradient, same shape as value(). Zero until backward() reaches it.
  const Matrix& grad() const;
  bool requires_grad() const;
  bool is_leaf() const;

  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }
  /// Value of a 1x1 tensor.
  double item() const;

  void zero_grad();

  /// Populates grads of every requires_grad leaf reachable from this scalar.
  /// Leaf grads accumulate across calls until zero_grad().
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_op(const char*, Matrix, std::vector<Tensor>,
                        std::function<void(Node&)>);
};

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t sequence = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Receives the node itself; adds into inputs[k]->grad.
  std::function<void(Node&)> propagate;

  Matrix& grad_buffer();
};

/// The computation graph reachable from a tensor, in append order.
/// Backward passes visit it in reverse.
class Graph {
 public:
  static Graph trace(const Tensor& root);

  const std::vector<Node*>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(const Tensor& t) const;

 private:
  std::vector<Node*> nodes_;
};

// -- Element-wise and linear algebra --------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
/// a (n x c) plus a 1 x c row broadcast over the batch dimension.
Tensor add_row(const Tensor& a, const Tensor& row);
/// Multiplies each row of a (n x c) by the matching entry of col (n x 1).
Tensor mul_col(const Tensor& a, const Tensor& col);
Tensor scale(const Tensor& a, double factor);
Tensor shift(const Tensor& a, double offset);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator*(double factor, const Tensor& a);

// -- Nonlinearities --------------------------------------------------------

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
/// min(0, x), the negative-part operator.
Tensor clamp_max_zero(const Tensor& a);
/// max(0, x), the positive-part operator.
Tensor clamp_min_zero(const Tensor& a);

/// Row-wise softmax over the last axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// -- Reductions and indexing -----------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Row sums, n x 1.
Tensor sum_cols(const Tensor& a);
/// out(r) = a(r, index[r]), n x 1.
Tensor gather(const Tensor& a, const std::vector<int>& index);
/// Rows a(index[k], :), k-th output row.
Tensor select_rows(const Tensor& a, const std::vector<int>& index);
Tensor column(const Tensor& a, Eigen::Index c);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor detach(const Tensor& a);

// -- Sampling ----------------------------------------------------------------

/// Standard Gumbel noise, -log(-log(u)) with u clamped to [1e-10, 1 - 1e-10].
Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

/// Gumbel-softmax with caller-supplied noise. Soft: softmax((logits + noise)/T).
/// Hard: one-hot forward with the soft gradient (straight-through).
Tensor gumbel_softmax(const Tensor& logits, const Matrix& noise, double temperature,
                      bool hard);
/// Forward value `hard`, gradient passed unchanged to `soft`.
Tensor straight_through(const Matrix& hard, const Tensor& soft);
Tensor gumbel_softmax_sample(const Tensor& logits, double temperature, bool hard,
                             std::mt19937_64& rng);

/// Uniform [0,1) draw with 53 bits, independent of the standard library's
/// distribution implementations.
double uniform01(std::mt19937_64& rng);
int sample_categorical(const Eigen::Ref<const Vector>& probs, std::mt19937_64& rng);

}  // namespace msglab::ad
