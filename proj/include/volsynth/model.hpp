#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "volsynth/autodiff.hpp"

namespace volsynth::model {

using ad::Matrix;
using ad::Var;

enum class Variant {
  kVanilla,
  kDense,
  kRandom,
  kFactorizedDense,
  kFactorizedRandom,
  kMixDense,
  kMixRandom,
};

inline constexpr Variant kAllVariants[] = {
    Variant::kVanilla,          Variant::kDense,    Variant::kRandom,   Variant::kFactorizedDense,
    Variant::kFactorizedRandom, Variant::kMixDense, Variant::kMixRandom};

std::string_view to_string(Variant v);
std::optional<Variant> variant_from_string(std::string_view s);

bool uses_dot_product(Variant v);

struct ModelConfig {
  Variant variant = Variant::kVanilla;
  int layers = 2;        // 0 leaves only the input projection and the output head
  int heads = 4;
  int model_dim = 64;
  int seq_len = 64;
  double dropout = 0.1;
  int input_dim = 1;
  int ff_dim = 0;        // 0 means 4 * model_dim
  int factor_k1 = 8;     // factorized dense: k1 * k2 == seq_len
  int factor_k2 = 8;
  int factor_rank = 8;   // factorized random: R1, R2 are seq_len x rank

  int head_dim() const { return model_dim / heads; }
  int feed_forward_dim() const { return ff_dim > 0 ? ff_dim : 4 * model_dim; }
  // Throws ErrorCode::kConfig listing every violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Per-head attention tensors. Only the members the variant needs are defined.
struct HeadParams {
  Var wv;            // d_k x d_k value projection, all variants
  Var wq, wk;        // d_k x d_k, dot-product and mix variants
  Var w1, b1;        // dense: d_k -> d_k
  Var w2, b2;        // dense: d_k -> N
  Var r;             // random: N x N
  Var wa, ba;        // factorized dense: d_k -> k1
  Var wb, bb;        // factorized dense: d_k -> k2
  Var r1, r2;        // factorized random: N x k
};

struct LayerParams {
  std::vector<HeadParams> heads;
  Var wo, bo;
  Var ln1_gain, ln1_bias;
  Var ff_w1, ff_b1, ff_w2, ff_b2;
  Var ln2_gain, ln2_bias;
};

// All learnable tensors of one model. Copies are deep: copying yields
// independent tensors with equal values.
class ModelWeights {
 public:
  ModelWeights() = default;
  ModelWeights(const ModelWeights& other);
  ModelWeights& operator=(const ModelWeights& other);
  ModelWeights(ModelWeights&&) noexcept = default;
  ModelWeights& operator=(ModelWeights&&) noexcept = default;

  static ModelWeights initialize(const ModelConfig& config, std::uint64_t seed);

  Var w_in, b_in;
  Var positional;    // seq_len x d learned embeddings
  std::vector<LayerParams> layers;
  Var w_out, b_out;

  // Visits every defined tensor in a fixed order with a stable name.
  void visit(const std::function<void(const std::string&, Var&)>& fn);
  void visit(const std::function<void(const std::string&, const Var&)>& fn) const;

  Var* find(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();
};

struct ParameterCensus {
  std::size_t total = 0;
  // Synthetic attention tensors (R, R1/R2, W1/W2, A/B maps), per head per layer.
  std::size_t synthetic_per_head = 0;
};
ParameterCensus parameter_census(const ModelConfig& config, const ModelWeights& weights);

// QK^T / sqrt(d_k).
Var dot_product_scores(const Var& q, const Var& k);

// Pre-softmax logits for one head. X is the head's N x d_k input slice.
Var synthesize_scores(Variant variant, const Var& x, const HeadParams& params);
Matrix synthesize_scores(Variant variant, const Matrix& x, const HeadParams& params);

// softmax over visible positions (j <= i) times V.
Var attend(const Var& scores, const Var& v);
Matrix attend(const Matrix& scores, const Matrix& v);

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;   // dropout source, needed when training with dropout > 0
  // When set, receives the softmaxed attention matrix of every (layer, head).
  std::vector<Matrix>* attention_out = nullptr;
};

// window: seq_len x input_dim. Returns seq_len x 1; row t is the prediction for
// the day after row t.
Var forward(const ModelConfig& config, const ModelWeights& weights, const Matrix& window,
            const ForwardOptions& options = {});
std::vector<double> predict(const ModelConfig& config, const ModelWeights& weights,
                            const Matrix& window);

struct Sample {
  Matrix window;   // seq_len x input_dim
  Matrix target;   // seq_len x 1
};

// Mean over samples of the per-window mean squared error. With `accumulate`,
// parameter gradients of that loss are added to the weights.
double batch_loss(const ModelConfig& config, const ModelWeights& weights,
                  const std::vector<Sample>& batch, bool accumulate,
                  const ForwardOptions& options = {});

struct TensorCheck {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
};

// Compares analytic gradients with finite differences on up to
// `samples_per_tensor` coordinates per tensor. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor), taking the best of
// the central, forward and backward differences so that a ReLU kink inside the
// stencil does not register as an error.
GradCheckReport grad_check(const ModelConfig& config, const ModelWeights& weights,
                           const std::vector<Sample>& batch, double eps,
                           std::size_t samples_per_tensor = 16, std::uint64_t seed = 7,
                           double floor = 1e-6);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelWeights& weights);
struct Checkpoint {
  ModelConfig config;
  ModelWeights weights;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace volsynth::model
