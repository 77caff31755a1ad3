#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srlp/events.hpp"
#include "srlp/features.hpp"
#include "srlp/rng.hpp"

namespace srlp {

struct ModelConfig {
  std::size_t d_tok = 0;  // taken from the embeddings
  std::size_t d_factors = kFactorCount;
  std::size_t d_model = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ffn_ratio = 4;
  std::size_t max_frames = kDefaultMaxFrames;
  double dropout = 0.1;
  double layer_norm_eps = 1e-5;

  void validate() const;
  std::size_t input_dim() const noexcept { return 3 * d_tok + d_factors; }
  std::size_t head_dim() const noexcept { return d_model / n_heads; }
  std::size_t ffn_dim() const noexcept { return d_model * ffn_ratio; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One pre-norm transformer block. Linear maps are stored (out x in).
struct LayerParams {
  Eigen::VectorXd norm1_gain, norm1_bias;
  Eigen::MatrixXd wq, wk, wv, wo;
  Eigen::VectorXd bq, bk, bv, bo;
  Eigen::VectorXd norm2_gain, norm2_bias;
  Eigen::MatrixXd ffn_in_weight;
  Eigen::VectorXd ffn_in_bias;
  Eigen::MatrixXd ffn_out_weight;
  Eigen::VectorXd ffn_out_bias;
};

struct ModelParams {
  ModelConfig config;
  Eigen::MatrixXd input_weight;  // d_model x input_dim
  Eigen::VectorXd input_bias;
  Eigen::MatrixXd positional;  // max_frames x d_model
  std::vector<LayerParams> layers;
  Eigen::VectorXd final_norm_gain, final_norm_bias;
  Eigen::MatrixXd classifier_weight;  // 3 x d_model
  Eigen::VectorXd classifier_bias;
  /// Role encoders f_V, f_A0, f_A1 (d_model x d_tok), indexed by Role.
  std::array<Eigen::MatrixXd, kRoleCount> role_weight;
  std::array<Eigen::VectorXd, kRoleCount> role_bias;

  /// Every tensor zero, layer-norm gains included.
  static ModelParams zeros(const ModelConfig& config);
  /// N(0, 0.02) weights, unit norm gains, zero biases; role encoders start
  /// near zero so the matching scores begin close to uniform.
  static ModelParams initialize(const ModelConfig& config, Rng& rng);

  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Calls f(name, tensor_0, tensor_1, ...) for every tensor, visiting the same
/// slot of each argument. All arguments must share a config.
template <class F, class... P>
void for_each_tensor(F&& f, P&... p) {
  const auto& first = std::get<0>(std::forward_as_tuple(p...));
  f(std::string("input.weight"), p.input_weight...);
  f(std::string("input.bias"), p.input_bias...);
  f(std::string("positional"), p.positional...);
  for (std::size_t l = 0; l < first.layers.size(); ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    f(pre + "norm1.gain", p.layers[l].norm1_gain...);
    f(pre + "norm1.bias", p.layers[l].norm1_bias...);
    f(pre + "attn.wq", p.layers[l].wq...);
    f(pre + "attn.bq", p.layers[l].bq...);
    f(pre + "attn.wk", p.layers[l].wk...);
    f(pre + "attn.bk", p.layers[l].bk...);
    f(pre + "attn.wv", p.layers[l].wv...);
    f(pre + "attn.bv", p.layers[l].bv...);
    f(pre + "attn.wo", p.layers[l].wo...);
    f(pre + "attn.bo", p.layers[l].bo...);
    f(pre + "norm2.gain", p.layers[l].norm2_gain...);
    f(pre + "norm2.bias", p.layers[l].norm2_bias...);
    f(pre + "ffn.in.weight", p.layers[l].ffn_in_weight...);
    f(pre + "ffn.in.bias", p.layers[l].ffn_in_bias...);
    f(pre + "ffn.out.weight", p.layers[l].ffn_out_weight...);
    f(pre + "ffn.out.bias", p.layers[l].ffn_out_bias...);
  }
  f(std::string("final_norm.gain"), p.final_norm_gain...);
  f(std::string("final_norm.bias"), p.final_norm_bias...);
  f(std::string("classifier.weight"), p.classifier_weight...);
  f(std::string("classifier.bias"), p.classifier_bias...);
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    const std::string pre = std::string("role.") + std::string(to_string(static_cast<Role>(r))) + ".";
    f(pre + "weight", p.role_weight[r]...);
    f(pre + "bias", p.role_bias[r]...);
  }
}

// --- forward ---------------------------------------------------------------------

struct LayerNormCache {
  Eigen::MatrixXd normalized;  // x_hat
  Eigen::VectorXd inv_std;     // per row
};

struct LayerCache {
  Eigen::MatrixXd input;
  LayerNormCache norm1;
  Eigen::MatrixXd h1, q, k, v;
  std::vector<Eigen::MatrixXd> attention;  // per head, N x N
  Eigen::MatrixXd context;
  Eigen::MatrixXd attn_dropout;  // scaled keep mask, empty when disabled
  LayerNormCache norm2;
  Eigen::MatrixXd h2, ffn_pre, ffn_act;
  Eigen::MatrixXd ffn_dropout;
};

/// Projection, positional rows, transformer blocks and final norm over the
/// columns of an SRLP matrix. Rows of `output` are frame positions.
struct EncoderPass {
  Eigen::MatrixXd input;   // N x input_dim
  Eigen::MatrixXd output;  // N x d_model
  Eigen::MatrixXd input_dropout;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd pre_final;
  LayerNormCache final_norm;
  bool has_cache = false;
};

/// With dropout_rng null, dropout is off.
EncoderPass encode(const ModelParams& params, const SrlpMatrix& matrix, Rng* dropout_rng = nullptr,
                   bool keep_cache = true);

struct ClassifyPass {
  EncoderPass encoder;
  Eigen::VectorXd pooled;
  Eigen::Vector3d logits;
};

/// Mean-pools the encoder output and applies the classifier.
ClassifyPass forward_classify(const SrlpMatrix& matrix, const ModelParams& params, Rng* dropout_rng = nullptr,
                              bool keep_cache = true);

struct SslPass {
  EncoderPass encoder;
  MaskSpec mask;
  Eigen::MatrixXd candidates;  // d_tok x N, unmasked features of the masked role
  Eigen::MatrixXd keys;        // d_model x N
  Eigen::VectorXd query;       // d_model
  Eigen::VectorXd log_p;       // log softmax of q^T K
  Eigen::VectorXd p_ssl;
};

/// Query from the masked position of E', keys from the role encoder of the
/// masked role applied to every candidate, p = softmax(q^T K).
SslPass forward_ssl(const SrlpMatrix& masked, std::span<const Eigen::VectorXd> candidates,
                    const ModelParams& params, Rng* dropout_rng = nullptr, bool keep_cache = true);

// --- loss ------------------------------------------------------------------------

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double ssl = 0.0;
};

/// alpha * CE(softmax(logits), label) + (1 - alpha) * CE(p_ssl, t), natural log.
LossBreakdown loss_total(const Eigen::Vector3d& logits, Label label, const Eigen::VectorXd& p_ssl,
                         std::size_t target, double alpha);

/// Same quantity computed from the passes' log-probabilities.
LossBreakdown loss_total(const ClassifyPass& cls, const SslPass& ssl, Label label, double alpha);

Eigen::VectorXd softmax(const Eigen::VectorXd& scores);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& scores);

// --- backward --------------------------------------------------------------------

/// Adds scale * d(loss)/d(params) into grads, where loss is the total loss of
/// the two passes. Throws MissingCache for passes run without a cache.
void accumulate_gradients(const ClassifyPass& cls, const SslPass& ssl, Label label, double alpha,
                          const ModelParams& params, ModelParams& grads, double scale = 1.0);

/// Fresh gradients of loss_total w.r.t. every parameter.
ModelParams backward(const ClassifyPass& cls, const SslPass& ssl, Label label, double alpha,
                     const ModelParams& params);

struct ExampleResult {
  LossBreakdown loss;
  Eigen::Vector3d logits;
  Eigen::VectorXd p_ssl;
};

/// Builds E' and the candidate pool from `matrix`, runs both passes, and adds
/// scale * gradient into grads.
ExampleResult loss_and_gradients(const ModelParams& params, const SrlpMatrix& matrix, MaskSpec mask, Label label,
                                 double alpha, ModelParams& grads, double scale = 1.0,
                                 Rng* dropout_rng = nullptr);

/// Loss only, dropout off. Used by gradient checks.
LossBreakdown evaluate_loss(const ModelParams& params, const SrlpMatrix& matrix, MaskSpec mask, Label label,
                            double alpha);

}  // namespace srlp
