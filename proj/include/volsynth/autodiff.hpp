#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace volsynth::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One value in the computation graph. Gradients flow from a node into its
// parents through `backward`, which reads `grad` and accumulates into the
// parents' `grad`.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

// Handle to a graph node. Copies share the node; leaf parameters keep their
// gradient until zero_grad() is called.
class Var {
 public:
  Var() = default;

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero matrix when no gradient has reached this node.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  // Reverse pass from a 1x1 node; the seed scales every accumulated gradient.
  void backward(double seed = 1.0) const;

  const std::shared_ptr<Node>& node() const { return node_; }

  static Var make(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward);

 private:
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
// Adds a 1 x c row to every row of a.
Var add_row(const Var& a, const Var& row);
Var hadamard(const Var& a, const Var& b);
// Elementwise product with a fixed matrix (dropout masks).
Var hadamard_const(const Var& a, const Matrix& mask);
Var scale(const Var& a, double s);
Var relu(const Var& a);
// Rowwise softmax where entry (i, j) with j > i is excluded.
Var causal_softmax(const Var& scores);
// Normalizes each row, then applies the 1 x c gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var columns(const Var& a, Eigen::Index start, Eigen::Index width);
Var hconcat(const std::vector<Var>& parts);
// Repeats the columns of a `reps` times: [a a ... a].
Var tile_columns(const Var& a, Eigen::Index reps);
// mean((pred - target)^2) as a 1x1 node.
Var mse(const Var& pred, const Matrix& target);

}  // namespace volsynth::ad
