#include "volsynth/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "volsynth/error.hpp"

namespace volsynth::model {

namespace {

struct NamedVariant {
  Variant variant;
  std::string_view name;
};

constexpr NamedVariant kVariantNames[] = {
    {Variant::kVanilla, "vanilla"},
    {Variant::kDense, "dense"},
    {Variant::kRandom, "random"},
    {Variant::kFactorizedDense, "factorized_dense"},
    {Variant::kFactorizedRandom, "factorized_random"},
    {Variant::kMixDense, "mix_dense"},
    {Variant::kMixRandom, "mix_random"},
};

bool uses_dense(Variant v) { return v == Variant::kDense || v == Variant::kMixDense; }
bool uses_random(Variant v) { return v == Variant::kRandom || v == Variant::kMixRandom; }

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Var normal(Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
    return Var::parameter(std::move(m));
  }
  // Scaled by fan-in.
  Var weight(Eigen::Index fan_in, Eigen::Index fan_out) {
    return normal(fan_in, fan_out, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  }
  static Var zeros(Eigen::Index rows, Eigen::Index cols) {
    return Var::parameter(Matrix::Zero(rows, cols));
  }
  static Var ones(Eigen::Index rows, Eigen::Index cols) {
    return Var::parameter(Matrix::Ones(rows, cols));
  }

 private:
  std::mt19937_64 rng_;
};

template <typename HeadT, typename Fn>
void visit_head(HeadT& h, const std::string& prefix, Fn&& fn) {
  auto go = [&](const char* name, auto& v) {
    if (v.defined()) fn(prefix + name, v);
  };
  go("wv", h.wv);
  go("wq", h.wq);
  go("wk", h.wk);
  go("w1", h.w1);
  go("b1", h.b1);
  go("w2", h.w2);
  go("b2", h.b2);
  go("r", h.r);
  go("wa", h.wa);
  go("ba", h.ba);
  go("wb", h.wb);
  go("bb", h.bb);
  go("r1", h.r1);
  go("r2", h.r2);
}

template <typename WeightsT, typename Fn>
void visit_all(WeightsT& w, Fn&& fn) {
  auto go = [&](const std::string& name, auto& v) {
    if (v.defined()) fn(name, v);
  };
  go("input.w", w.w_in);
  go("input.b", w.b_in);
  go("positional", w.positional);
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    auto& layer = w.layers[l];
    const std::string lp = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      visit_head(layer.heads[h], lp + "head" + std::to_string(h) + ".", fn);
    }
    go(lp + "wo", layer.wo);
    go(lp + "bo", layer.bo);
    go(lp + "ln1_gain", layer.ln1_gain);
    go(lp + "ln1_bias", layer.ln1_bias);
    go(lp + "ff_w1", layer.ff_w1);
    go(lp + "ff_b1", layer.ff_b1);
    go(lp + "ff_w2", layer.ff_w2);
    go(lp + "ff_b2", layer.ff_b2);
    go(lp + "ln2_gain", layer.ln2_gain);
    go(lp + "ln2_bias", layer.ln2_bias);
  }
  go("output.w", w.w_out);
  go("output.b", w.b_out);
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
  return m;
}

Var maybe_dropout(const Var& x, const ModelConfig& config, const ForwardOptions& options) {
  if (!options.training || config.dropout <= 0.0) return x;
  if (options.rng == nullptr) {
    throw Error(ErrorCode::kConfig, "training forward with dropout needs a random source");
  }
  return ad::hadamard_const(x, dropout_mask(x.rows(), x.cols(), config.dropout, *options.rng));
}

void check_finite(const Var& v, const std::string& where) {
  if (!v.value().allFinite()) {
    throw Error(ErrorCode::kNonFinite, "non-finite activations in " + where);
  }
}

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& nv : kVariantNames) {
    if (nv.variant == v) return nv.name;
  }
  return "?";
}

std::optional<Variant> variant_from_string(std::string_view s) {
  for (const auto& nv : kVariantNames) {
    if (nv.name == s) return nv.variant;
  }
  return std::nullopt;
}

bool uses_dot_product(Variant v) {
  return v == Variant::kVanilla || v == Variant::kMixDense || v == Variant::kMixRandom;
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (layers < 0) problems.push_back("layers must be >= 0");
  if (heads < 1) problems.push_back("heads must be >= 1");
  if (model_dim < 1) problems.push_back("model_dim must be >= 1");
  if (heads >= 1 && model_dim % heads != 0) problems.push_back("model_dim must be divisible by heads");
  if (seq_len < 1) problems.push_back("seq_len must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) problems.push_back("dropout must be in [0, 1)");
  if (input_dim < 1) problems.push_back("input_dim must be >= 1");
  if (ff_dim < 0) problems.push_back("ff_dim must be >= 0");
  if (variant == Variant::kFactorizedDense &&
      (factor_k1 < 1 || factor_k2 < 1 || factor_k1 * factor_k2 != seq_len)) {
    problems.push_back("factorized dense needs factor_k1 * factor_k2 == seq_len");
  }
  if (variant == Variant::kFactorizedRandom && factor_rank < 1) {
    problems.push_back("factor_rank must be >= 1");
  }
  if (problems.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw Error(ErrorCode::kConfig, msg);
}

ModelWeights::ModelWeights(const ModelWeights& other) { *this = other; }

ModelWeights& ModelWeights::operator=(const ModelWeights& other) {
  if (this == &other) return *this;
  w_in = other.w_in;
  b_in = other.b_in;
  positional = other.positional;
  layers = other.layers;
  w_out = other.w_out;
  b_out = other.b_out;
  // Rebind every tensor to a fresh node holding a copy of the value.
  visit([](const std::string&, Var& v) { v = Var::parameter(v.value()); });
  return *this;
}

ModelWeights ModelWeights::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Initializer init(seed);
  const int d = config.model_dim;
  const int dk = config.head_dim();
  const int n = config.seq_len;
  const int f = config.feed_forward_dim();

  ModelWeights w;
  w.w_in = init.weight(config.input_dim, d);
  w.b_in = Initializer::zeros(1, d);
  w.positional = init.normal(n, d, 0.1);
  for (int l = 0; l < config.layers; ++l) {
    LayerParams layer;
    for (int h = 0; h < config.heads; ++h) {
      HeadParams hp;
      hp.wv = init.weight(dk, dk);
      if (uses_dot_product(config.variant)) {
        hp.wq = init.weight(dk, dk);
        hp.wk = init.weight(dk, dk);
      }
      if (uses_dense(config.variant)) {
        hp.w1 = init.weight(dk, dk);
        hp.b1 = Initializer::zeros(1, dk);
        hp.w2 = init.weight(dk, n);
        hp.b2 = Initializer::zeros(1, n);
      }
      if (uses_random(config.variant)) hp.r = init.normal(n, n, 1.0 / std::sqrt(static_cast<double>(n)));
      if (config.variant == Variant::kFactorizedDense) {
        hp.wa = init.weight(dk, config.factor_k1);
        hp.ba = Initializer::zeros(1, config.factor_k1);
        hp.wb = init.weight(dk, config.factor_k2);
        hp.bb = Initializer::zeros(1, config.factor_k2);
      }
      if (config.variant == Variant::kFactorizedRandom) {
        const double s = std::pow(static_cast<double>(config.factor_rank), -0.5);
        hp.r1 = init.normal(n, config.factor_rank, s);
        hp.r2 = init.normal(n, config.factor_rank, s);
      }
      layer.heads.push_back(std::move(hp));
    }
    layer.wo = init.weight(d, d);
    layer.bo = Initializer::zeros(1, d);
    layer.ln1_gain = Initializer::ones(1, d);
    layer.ln1_bias = Initializer::zeros(1, d);
    layer.ff_w1 = init.weight(d, f);
    layer.ff_b1 = Initializer::zeros(1, f);
    layer.ff_w2 = init.weight(f, d);
    layer.ff_b2 = Initializer::zeros(1, d);
    layer.ln2_gain = Initializer::ones(1, d);
    layer.ln2_bias = Initializer::zeros(1, d);
    w.layers.push_back(std::move(layer));
  }
  w.w_out = init.weight(d, 1);
  w.b_out = Initializer::zeros(1, 1);
  return w;
}

void ModelWeights::visit(const std::function<void(const std::string&, Var&)>& fn) {
  visit_all(*this, fn);
}

void ModelWeights::visit(const std::function<void(const std::string&, const Var&)>& fn) const {
  visit_all(*this, fn);
}

Var* ModelWeights::find(const std::string& name) {
  Var* out = nullptr;
  visit([&](const std::string& n, Var& v) {
    if (n == name) out = &v;
  });
  return out;
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t total = 0;
  visit([&](const std::string&, const Var& v) { total += static_cast<std::size_t>(v.value().size()); });
  return total;
}

void ModelWeights::zero_grad() {
  visit([](const std::string&, Var& v) { v.zero_grad(); });
}

ParameterCensus parameter_census(const ModelConfig& config, const ModelWeights& weights) {
  ParameterCensus census;
  census.total = weights.parameter_count();
  if (weights.layers.empty() || weights.layers.front().heads.empty()) return census;
  const HeadParams& h = weights.layers.front().heads.front();
  auto size = [](const Var& v) { return v.defined() ? static_cast<std::size_t>(v.value().size()) : 0u; };
  switch (config.variant) {
    case Variant::kVanilla: break;
    case Variant::kDense:
    case Variant::kMixDense:
      census.synthetic_per_head = size(h.w1) + size(h.b1) + size(h.w2) + size(h.b2);
      break;
    case Variant::kRandom:
    case Variant::kMixRandom: census.synthetic_per_head = size(h.r); break;
    case Variant::kFactorizedDense:
      census.synthetic_per_head = size(h.wa) + size(h.ba) + size(h.wb) + size(h.bb);
      break;
    case Variant::kFactorizedRandom: census.synthetic_per_head = size(h.r1) + size(h.r2); break;
  }
  return census;
}

Var dot_product_scores(const Var& q, const Var& k) {
  return ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
}

Var synthesize_scores(Variant variant, const Var& x, const HeadParams& p) {
  const Eigen::Index n = x.rows();
  auto dot = [&] { return dot_product_scores(ad::matmul(x, p.wq), ad::matmul(x, p.wk)); };
  auto dense = [&] {
    auto hidden = ad::relu(ad::add_row(ad::matmul(x, p.w1), p.b1));
    auto out = ad::add_row(ad::matmul(hidden, p.w2), p.b2);
    if (out.cols() != n) throw Error(ErrorCode::kShape, "dense synthesizer width != sequence length");
    return out;
  };
  auto random = [&] {
    if (p.r.rows() != n || p.r.cols() != n) {
      throw Error(ErrorCode::kShape, "random synthesizer matrix is not N x N");
    }
    return p.r;
  };

  switch (variant) {
    case Variant::kVanilla: return dot();
    case Variant::kDense: return dense();
    case Variant::kRandom: return random();
    case Variant::kFactorizedDense: {
      auto a = ad::add_row(ad::matmul(x, p.wa), p.ba);
      auto b = ad::add_row(ad::matmul(x, p.wb), p.bb);
      if (n % a.cols() != 0 || n % b.cols() != 0) {
        throw Error(ErrorCode::kShape, "factorized dense widths must divide the sequence length");
      }
      return ad::hadamard(ad::tile_columns(a, n / a.cols()), ad::tile_columns(b, n / b.cols()));
    }
    case Variant::kFactorizedRandom: {
      if (p.r1.rows() != n || p.r2.rows() != n) {
        throw Error(ErrorCode::kShape, "factorized random factors must have N rows");
      }
      return ad::matmul_nt(p.r1, p.r2);
    }
    case Variant::kMixDense: return ad::add(dot(), dense());
    case Variant::kMixRandom: return ad::add(dot(), random());
  }
  throw Error(ErrorCode::kConfig, "unknown attention variant");
}

Matrix synthesize_scores(Variant variant, const Matrix& x, const HeadParams& params) {
  return synthesize_scores(variant, Var::constant(x), params).value();
}

Var attend(const Var& scores, const Var& v) {
  if (scores.rows() != v.rows()) throw Error(ErrorCode::kShape, "attend: scores and V rows differ");
  return ad::matmul(ad::causal_softmax(scores), v);
}

Matrix attend(const Matrix& scores, const Matrix& v) {
  return attend(Var::constant(scores), Var::constant(v)).value();
}

Var forward(const ModelConfig& config, const ModelWeights& w, const Matrix& window,
            const ForwardOptions& options) {
  if (window.rows() != config.seq_len || window.cols() != config.input_dim) {
    std::ostringstream msg;
    msg << "window is " << window.rows() << "x" << window.cols() << ", expected " << config.seq_len
        << "x" << config.input_dim;
    throw Error(ErrorCode::kShape, msg.str());
  }
  if (!window.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite values in input window");

  const Eigen::Index dk = config.head_dim();
  Var h = ad::add(ad::add_row(ad::matmul(Var::constant(window), w.w_in), w.b_in), w.positional);
  check_finite(h, "input embedding");

  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const LayerParams& layer = w.layers[l];
    std::vector<Var> head_out;
    head_out.reserve(layer.heads.size());
    for (std::size_t hi = 0; hi < layer.heads.size(); ++hi) {
      const HeadParams& hp = layer.heads[hi];
      Var xh = ad::columns(h, static_cast<Eigen::Index>(hi) * dk, dk);
      Var probs = ad::causal_softmax(synthesize_scores(config.variant, xh, hp));
      if (options.attention_out) options.attention_out->push_back(probs.value());
      head_out.push_back(ad::matmul(probs, ad::matmul(xh, hp.wv)));
    }
    Var attn = ad::add_row(ad::matmul(ad::hconcat(head_out), layer.wo), layer.bo);
    attn = maybe_dropout(attn, config, options);
    h = ad::layer_norm(ad::add(h, attn), layer.ln1_gain, layer.ln1_bias);

    Var ff = ad::relu(ad::add_row(ad::matmul(h, layer.ff_w1), layer.ff_b1));
    ff = ad::add_row(ad::matmul(ff, layer.ff_w2), layer.ff_b2);
    ff = maybe_dropout(ff, config, options);
    h = ad::layer_norm(ad::add(h, ff), layer.ln2_gain, layer.ln2_bias);
    check_finite(h, "layer " + std::to_string(l));
  }

  Var out = ad::add_row(ad::matmul(h, w.w_out), w.b_out);
  check_finite(out, "output head");
  return out;
}

std::vector<double> predict(const ModelConfig& config, const ModelWeights& weights,
                            const Matrix& window) {
  Var out = forward(config, weights, window);
  return std::vector<double>(out.value().data(), out.value().data() + out.value().size());
}

double batch_loss(const ModelConfig& config, const ModelWeights& weights,
                  const std::vector<Sample>& batch, bool accumulate, const ForwardOptions& options) {
  if (batch.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& s : batch) {
    Var loss = ad::mse(forward(config, weights, s.window, options), s.target);
    total += loss.value()(0, 0);
    if (accumulate) loss.backward(inv);
  }
  return total * inv;
}

GradCheckReport grad_check(const ModelConfig& config, const ModelWeights& weights,
                           const std::vector<Sample>& batch, double eps,
                           std::size_t samples_per_tensor, std::uint64_t seed, double floor) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kDomain, "grad_check eps must be positive");
  ModelWeights w = weights;
  w.zero_grad();
  const double base = batch_loss(config, w, batch, /*accumulate=*/true);

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  w.visit([&](const std::string& name, Var& v) {
    const Matrix analytic = v.grad();
    const auto size = static_cast<std::size_t>(v.value().size());
    std::vector<std::size_t> coords(size);
    std::iota(coords.begin(), coords.end(), 0);
    if (size > samples_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(samples_per_tensor);
    }
    TensorCheck check{name, coords.size(), 0.0};
    for (std::size_t c : coords) {
      double& x = v.mutable_value().data()[c];
      const double orig = x;
      x = orig + eps;
      const double up = batch_loss(config, w, batch, false);
      x = orig - eps;
      const double down = batch_loss(config, w, batch, false);
      x = orig;
      const double a = analytic.data()[c];
      // A ReLU kink inside the stencil spoils the central difference but leaves
      // the one-sided difference on the smooth side valid.
      double err = std::numeric_limits<double>::infinity();
      for (double numeric : {(up - down) / (2.0 * eps), (up - base) / eps, (base - down) / eps}) {
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        err = std::min(err, std::abs(a - numeric) / denom);
      }
      check.max_rel_error = std::max(check.max_rel_error, err);
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  });
  return report;
}

}  // namespace volsynth::model
