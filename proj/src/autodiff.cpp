#include "volsynth/autodiff.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>
#include <utility>

#include "volsynth/error.hpp"

namespace volsynth::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kShape, what);
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Var Var::constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

Var Var::make(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_);
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

void Var::backward(double seed) const {
  require(rows() == 1 && cols() == 1, "backward() needs a scalar node");
  if (!node_->requires_grad) return;

  // Post-order DFS gives parents before children; walk it in reverse.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()(0, 0) += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return Var::make(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.grad_buffer().noalias() += self.grad * pb.value.transpose();
    if (pb.requires_grad) pb.grad_buffer().noalias() += pa.value.transpose() * self.grad;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  return Var::make(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.grad_buffer().noalias() += self.grad * pb.value;
    if (pb.requires_grad) pb.grad_buffer().noalias() += self.grad.transpose() * pa.value;
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shapes differ");
  return Var::make(a.value() + b.value(), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      Node& p = parent(self, i);
      if (p.requires_grad) p.grad_buffer() += self.grad;
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: row shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return Var::make(std::move(out), {a, row}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pr = parent(self, 1);
    if (pa.requires_grad) pa.grad_buffer() += self.grad;
    if (pr.requires_grad) pr.grad_buffer() += self.grad.colwise().sum();
  });
}

Var hadamard(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shapes differ");
  return Var::make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) pa.grad_buffer() += self.grad.cwiseProduct(pb.value);
    if (pb.requires_grad) pb.grad_buffer() += self.grad.cwiseProduct(pa.value);
  });
}

Var hadamard_const(const Var& a, const Matrix& mask) {
  require(a.rows() == mask.rows() && a.cols() == mask.cols(), "hadamard_const: shapes differ");
  return Var::make(a.value().cwiseProduct(mask), {a}, [mask](Node& self) {
    parent(self, 0).grad_buffer() += self.grad.cwiseProduct(mask);
  });
}

Var scale(const Var& a, double s) {
  return Var::make(a.value() * s, {a}, [s](Node& self) {
    parent(self, 0).grad_buffer() += self.grad * s;
  });
}

Var relu(const Var& a) {
  return Var::make(a.value().cwiseMax(0.0), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    p.grad_buffer() += (p.value.array() > 0.0).select(self.grad, 0.0);
  });
}

Var causal_softmax(const Var& scores) {
  require(scores.rows() == scores.cols(), "causal_softmax: scores must be square");
  const Eigen::Index n = scores.rows();
  const Matrix& s = scores.value();
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = s.row(i).head(i + 1).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      p(i, j) = std::exp(s(i, j) - m);
      total += p(i, j);
    }
    p.row(i).head(i + 1) /= total;
  }
  return Var::make(std::move(p), {scores}, [](Node& self) {
    const Matrix& prob = self.value;
    Matrix& g = parent(self, 0).grad_buffer();
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
      const auto pr = prob.row(i).head(i + 1);
      const auto gr = self.grad.row(i).head(i + 1);
      const double dot = pr.dot(gr);
      g.row(i).head(i + 1).array() += pr.array() * (gr.array() - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index c = x.cols();
  require(gain.rows() == 1 && gain.cols() == c && bias.rows() == 1 && bias.cols() == c,
          "layer_norm: gain/bias shape mismatch");
  const Matrix& v = x.value();
  Matrix xhat(v.rows(), c);
  Eigen::VectorXd inv_std(v.rows());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (v.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return Var::make(std::move(out), {x, gain, bias}, [xhat, inv_std](Node& self) {
    Node& px = parent(self, 0);
    Node& pg = parent(self, 1);
    Node& pb = parent(self, 2);
    if (pg.requires_grad) pg.grad_buffer() += self.grad.cwiseProduct(xhat).colwise().sum();
    if (pb.requires_grad) pb.grad_buffer() += self.grad.colwise().sum();
    if (px.requires_grad) {
      const double c = static_cast<double>(xhat.cols());
      Matrix dxhat = self.grad.array().rowwise() * pg.value.row(0).array();
      Matrix& gx = px.grad_buffer();
      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
        const double mean_d = dxhat.row(r).sum() / c;
        const double mean_dx = dxhat.row(r).dot(xhat.row(r)) / c;
        gx.row(r).array() +=
            inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
      }
    }
  });
}

Var columns(const Var& a, Eigen::Index start, Eigen::Index width) {
  require(start >= 0 && width >= 0 && start + width <= a.cols(), "columns: range out of bounds");
  Matrix out = a.value().middleCols(start, width);
  return Var::make(std::move(out), {a}, [start, width](Node& self) {
    parent(self, 0).grad_buffer().middleCols(start, width) += self.grad;
  });
}

Var hconcat(const std::vector<Var>& parts) {
  require(!parts.empty(), "hconcat: nothing to concatenate");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    require(p.rows() == parts.front().rows(), "hconcat: row counts differ");
    total += p.cols();
  }
  Matrix out(parts.front().rows(), total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return Var::make(std::move(out), parts, [](Node& self) {
    Eigen::Index at = 0;
    for (auto& p : self.parents) {
      const Eigen::Index w = p->value.cols();
      if (p->requires_grad) p->grad_buffer() += self.grad.middleCols(at, w);
      at += w;
    }
  });
}

Var tile_columns(const Var& a, Eigen::Index reps) {
  require(reps >= 1, "tile_columns: reps must be positive");
  const Eigen::Index w = a.cols();
  Matrix out(a.rows(), w * reps);
  for (Eigen::Index r = 0; r < reps; ++r) out.middleCols(r * w, w) = a.value();
  return Var::make(std::move(out), {a}, [w, reps](Node& self) {
    Matrix& g = parent(self, 0).grad_buffer();
    for (Eigen::Index r = 0; r < reps; ++r) g += self.grad.middleCols(r * w, w);
  });
}

Var mse(const Var& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shapes differ");
  Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return Var::make(std::move(out), {pred}, [diff, n](Node& self) {
    parent(self, 0).grad_buffer() += diff * (2.0 * self.grad(0, 0) / n);
  });
}

}  // namespace volsynth::ad
