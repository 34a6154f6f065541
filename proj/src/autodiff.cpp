#include "msglab/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace msglab::ad {

namespace {

std::atomic<std::uint64_t> g_sequence{0};

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail(op, a.value(), b.value());
}

std::shared_ptr<Node> make_leaf(Matrix value, bool requires_grad) {
  if (!value.allFinite()) throw NumericError("tensor construction: non-finite value");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->sequence = g_sequence.fetch_add(1, std::memory_order_relaxed);
  if (requires_grad) node->grad = Matrix::Zero(node->value.rows(), node->value.cols());
  return node;
}

void accumulate(Node& input, const Matrix& contribution) {
  if (!input.requires_grad) return;
  input.grad_buffer() += contribution;
}

}  // namespace

Matrix& Node::grad_buffer() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols())
    grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Tensor make_op(const char* op, Matrix value, std::vector<Tensor> inputs,
               std::function<void(Node&)> propagate) {
  if (!value.allFinite()) throw NumericError(std::string(op) + ": non-finite output");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->leaf = false;
  node->op = op;
  node->sequence = g_sequence.fetch_add(1, std::memory_order_relaxed);
  for (auto& t : inputs) {
    node->requires_grad = node->requires_grad || t.requires_grad();
    node->inputs.push_back(t.node());
  }
  if (node->requires_grad) node->propagate = std::move(propagate);
  return Tensor(std::move(node));
}

// -- Tensor -----------------------------------------------------------------

Tensor::Tensor() : node_(make_leaf(Matrix::Zero(1, 1), false)) {}

Tensor Tensor::constant(Matrix value) { return Tensor(make_leaf(std::move(value), false)); }

Tensor Tensor::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Tensor Tensor::parameter(Matrix value) { return Tensor(make_leaf(std::move(value), true)); }

const Matrix& Tensor::value() const { return node_->value; }

Matrix& Tensor::leaf_value() {
  if (!node_->leaf) throw std::logic_error("leaf_value: tensor is an op output");
  return node_->value;
}

const Matrix& Tensor::grad() const { return node_->grad_buffer(); }

bool Tensor::requires_grad() const { return node_->requires_grad; }

bool Tensor::is_leaf() const { return node_->leaf; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor is " + shape_str(value()));
  return value()(0, 0);
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad_buffer().setZero();
}

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(value()));
  Graph graph = Graph::trace(*this);
  for (Node* n : graph.nodes())
    if (!n->leaf && n->requires_grad) n->grad_buffer().setZero();
  if (!node_->requires_grad) return;
  node_->grad_buffer()(0, 0) += 1.0;
  const auto& nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    Node& n = **it;
    if (n.propagate) n.propagate(n);
  }
}

// -- Graph ------------------------------------------------------------------

Graph Graph::trace(const Tensor& root) {
  Graph g;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    g.nodes_.push_back(n);
    for (auto& in : n->inputs) stack.push_back(in.get());
  }
  std::sort(g.nodes_.begin(), g.nodes_.end(),
            [](const Node* a, const Node* b) { return a->sequence < b->sequence; });
  return g;
}

bool Graph::contains(const Tensor& t) const {
  return std::find(nodes_.begin(), nodes_.end(), t.node().get()) != nodes_.end();
}

// -- Element-wise and linear algebra ----------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_op("add", a.value() + b.value(), {a, b}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad);
    accumulate(*n.inputs[1], n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_op("sub", a.value() - b.value(), {a, b}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad);
    accumulate(*n.inputs[1], -n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return make_op("mul", a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad.cwiseProduct(n.inputs[1]->value));
    accumulate(*n.inputs[1], n.grad.cwiseProduct(n.inputs[0]->value));
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  return make_op("matmul", a.value() * b.value(), {a, b}, [](Node& n) {
    const Matrix& av = n.inputs[0]->value;
    const Matrix& bv = n.inputs[1]->value;
    if (n.inputs[0]->requires_grad) accumulate(*n.inputs[0], n.grad * bv.transpose());
    if (n.inputs[1]->requires_grad) accumulate(*n.inputs[1], av.transpose() * n.grad);
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_fail("add_row", a.value(), row.value());
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_op("add_row", std::move(out), {a, row}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) accumulate(*n.inputs[1], n.grad.colwise().sum());
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) shape_fail("mul_col", a.value(), col.value());
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make_op("mul_col", std::move(out), {a, col}, [](Node& n) {
    const Matrix& av = n.inputs[0]->value;
    const Matrix& cv = n.inputs[1]->value;
    if (n.inputs[0]->requires_grad)
      accumulate(*n.inputs[0], (n.grad.array().colwise() * cv.col(0).array()).matrix());
    if (n.inputs[1]->requires_grad)
      accumulate(*n.inputs[1], n.grad.cwiseProduct(av).rowwise().sum());
  });
}

Tensor scale(const Tensor& a, double factor) {
  return make_op("scale", a.value() * factor, {a},
                 [factor](Node& n) { accumulate(*n.inputs[0], n.grad * factor); });
}

Tensor shift(const Tensor& a, double offset) {
  return make_op("shift", (a.value().array() + offset).matrix(), {a},
                 [](Node& n) { accumulate(*n.inputs[0], n.grad); });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator-(const Tensor& a) { return scale(a, -1.0); }
Tensor operator*(double factor, const Tensor& a) { return scale(a, factor); }

// -- Nonlinearities ---------------------------------------------------------

Tensor tanh(const Tensor& a) {
  return make_op("tanh", a.value().array().tanh().matrix(), {a}, [](Node& n) {
    accumulate(*n.inputs[0], (n.grad.array() * (1.0 - n.value.array().square())).matrix());
  });
}

Tensor relu(const Tensor& a) {
  return make_op("relu", a.value().cwiseMax(0.0), {a}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    accumulate(*n.inputs[0], (x.array() > 0.0).select(n.grad, 0.0));
  });
}

Tensor exp(const Tensor& a) {
  return make_op("exp", a.value().array().exp().matrix(), {a}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad.cwiseProduct(n.value));
  });
}

Tensor log(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw NumericError("log: non-positive input");
  return make_op("log", a.value().array().log().matrix(), {a}, [](Node& n) {
    accumulate(*n.inputs[0], n.grad.cwiseQuotient(n.inputs[0]->value));
  });
}

Tensor square(const Tensor& a) {
  return make_op("square", a.value().array().square().matrix(), {a}, [](Node& n) {
    accumulate(*n.inputs[0], 2.0 * n.grad.cwiseProduct(n.inputs[0]->value));
  });
}

Tensor clamp_max_zero(const Tensor& a) {
  return make_op("clamp_max_zero", a.value().cwiseMin(0.0), {a}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    accumulate(*n.inputs[0], (x.array() < 0.0).select(n.grad, 0.0));
  });
}

Tensor clamp_min_zero(const Tensor& a) {
  return make_op("clamp_min_zero", a.value().cwiseMax(0.0), {a}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    accumulate(*n.inputs[0], (x.array() > 0.0).select(n.grad, 0.0));
  });
}

namespace {

Matrix row_softmax(const Matrix& x) {
  Matrix out = x.colwise() - x.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

}  // namespace

Tensor softmax(const Tensor& a) {
  return make_op("softmax", row_softmax(a.value()), {a}, [](Node& n) {
    const Matrix& p = n.value;
    Eigen::VectorXd dot = n.grad.cwiseProduct(p).rowwise().sum();
    accumulate(*n.inputs[0], (p.array() * (n.grad.colwise() - dot).array()).matrix());
  });
}

Tensor log_softmax(const Tensor& a) {
  const Matrix& x = a.value();
  Eigen::VectorXd mx = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - mx;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix out = shifted.colwise() - lse;
  return make_op("log_softmax", std::move(out), {a}, [](Node& n) {
    Matrix p = n.value.array().exp().matrix();
    Eigen::VectorXd gsum = n.grad.rowwise().sum();
    accumulate(*n.inputs[0], n.grad - (p.array().colwise() * gsum.array()).matrix());
  });
}

// -- Reductions and indexing ------------------------------------------------

Tensor sum(const Tensor& a) {
  return make_op("sum", Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    accumulate(*n.inputs[0], Matrix::Constant(x.rows(), x.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_op("mean", Matrix::Constant(1, 1, a.value().mean()), {a}, [inv](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    accumulate(*n.inputs[0], Matrix::Constant(x.rows(), x.cols(), n.grad(0, 0) * inv));
  });
}

Tensor sum_cols(const Tensor& a) {
  return make_op("sum_cols", a.value().rowwise().sum(), {a}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    accumulate(*n.inputs[0], n.grad.col(0).replicate(1, x.cols()));
  });
}

Tensor gather(const Tensor& a, const std::vector<int>& index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows())
    throw ShapeError("gather: index length does not match rows");
  Matrix out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const int c = index[static_cast<std::size_t>(r)];
    if (c < 0 || c >= a.cols()) throw ShapeError("gather: index out of range");
    out(r, 0) = a.value()(r, c);
  }
  return make_op("gather", std::move(out), {a}, [index](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) g(r, index[static_cast<std::size_t>(r)]) = n.grad(r, 0);
    accumulate(*n.inputs[0], g);
  });
}

Tensor select_rows(const Tensor& a, const std::vector<int>& index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= a.rows()) throw ShapeError("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(index[k]);
  }
  return make_op("select_rows", std::move(out), {a}, [index](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t k = 0; k < index.size(); ++k)
      g.row(index[k]) += n.grad.row(static_cast<Eigen::Index>(k));
    accumulate(*n.inputs[0], g);
  });
}

Tensor column(const Tensor& a, Eigen::Index c) {
  if (c < 0 || c >= a.cols()) throw ShapeError("column: index out of range");
  return make_op("column", a.value().col(c), {a}, [c](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    g.col(c) = n.grad.col(0);
    accumulate(*n.inputs[0], g);
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) shape_fail("concat_cols", a.value(), b.value());
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index split = a.cols();
  return make_op("concat_cols", std::move(out), {a, b}, [split](Node& n) {
    if (n.inputs[0]->requires_grad) accumulate(*n.inputs[0], n.grad.leftCols(split));
    if (n.inputs[1]->requires_grad)
      accumulate(*n.inputs[1], n.grad.rightCols(n.grad.cols() - split));
  });
}

Tensor transpose(const Tensor& a) {
  return make_op("transpose", a.value().transpose(), {a},
                 [](Node& n) { accumulate(*n.inputs[0], n.grad.transpose()); });
}

Tensor detach(const Tensor& a) { return Tensor::constant(a.value()); }

// -- Sampling ---------------------------------------------------------------

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int sample_categorical(const Eigen::Ref<const Vector>& probs, std::mt19937_64& rng) {
  const double u = uniform01(rng) * probs.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  for (Eigen::Index k = probs.size() - 1; k >= 0; --k)
    if (probs[k] > 0.0) return static_cast<int>(k);
  return static_cast<int>(probs.size() - 1);
}

Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Matrix g(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double u = std::clamp(uniform01(rng), 1e-10, 1.0 - 1e-10);
      g(r, c) = -std::log(-std::log(u));
    }
  return g;
}

Tensor gumbel_softmax(const Tensor& logits, const Matrix& noise, double temperature,
                      bool hard) {
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
  if (noise.rows() != logits.rows() || noise.cols() != logits.cols())
    shape_fail("gumbel_softmax", logits.value(), noise);
  Tensor soft = softmax(scale(logits + Tensor::constant(noise), 1.0 / temperature));
  if (!hard) return soft;
  Matrix one_hot = Matrix::Zero(soft.rows(), soft.cols());
  for (Eigen::Index r = 0; r < soft.rows(); ++r) {
    Eigen::Index best = 0;
    soft.value().row(r).maxCoeff(&best);
    one_hot(r, best) = 1.0;
  }
  return straight_through(one_hot, soft);
}

Tensor straight_through(const Matrix& hard, const Tensor& soft) {
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols())
    shape_fail("straight_through", hard, soft.value());
  return make_op("straight_through", hard, {soft},
                 [](Node& n) { accumulate(*n.inputs[0], n.grad); });
}

Tensor gumbel_softmax_sample(const Tensor& logits, double temperature, bool hard,
                             std::mt19937_64& rng) {
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
  return gumbel_softmax(logits, gumbel_noise(logits.rows(), logits.cols(), rng), temperature,
                        hard);
}

}  // namespace msglab::ad
