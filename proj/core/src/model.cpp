#include "srlp/model.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// tanh approximation of GELU
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluScale * (x + kGeluCubic * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluScale * (x + kGeluCubic * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluScale * (1.0 + 3.0 * kGeluCubic * x * x);
}

MatrixXd linear(const MatrixXd& x, const MatrixXd& w, const VectorXd& b) {
  MatrixXd y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

// y = x W^T + b. Accumulates into dw/db and returns dx.
MatrixXd linear_backward(const MatrixXd& x, const MatrixXd& w, const MatrixXd& dy, MatrixXd& dw, VectorXd& db) {
  dw.noalias() += dy.transpose() * x;
  db += dy.colwise().sum().transpose();
  return dy * w;
}

MatrixXd layer_norm(const MatrixXd& x, const VectorXd& gain, const VectorXd& bias, double eps,
                    LayerNormCache& cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  cache.normalized.resize(n, d);
  cache.inv_std.resize(n);
  MatrixXd y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean).matrix();
    const double var = centered.squaredNorm() / static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.inv_std[i] = inv_std;
    cache.normalized.row(i) = centered * inv_std;
    y.row(i) = (cache.normalized.row(i).array() * gain.transpose().array() + bias.transpose().array()).matrix();
  }
  return y;
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const VectorXd& gain, const LayerNormCache& cache,
                             VectorXd& dgain, VectorXd& dbias) {
  const auto& xhat = cache.normalized;
  dgain += (dy.array() * xhat.array()).colwise().sum().transpose().matrix();
  dbias += dy.colwise().sum().transpose();
  MatrixXd dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Eigen::RowVectorXd dxhat = (dy.row(i).array() * gain.transpose().array()).matrix();
    const double m1 = dxhat.mean();
    const double m2 = dxhat.dot(xhat.row(i)) / static_cast<double>(dy.cols());
    dx.row(i) = ((dxhat.array() - m1 - xhat.row(i).array() * m2) * cache.inv_std[i]).matrix();
  }
  return dx;
}

void softmax_rows_inplace(MatrixXd& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

// Inverted dropout keep-mask, drawn in row-major order.
MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  MatrixXd mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = rng.uniform01() < rate ? 0.0 : keep_scale;
  }
  return mask;
}

bool dropout_active(const ModelParams& params, const Rng* rng) {
  return rng != nullptr && params.config.dropout > 0.0;
}

void check_matrix(const ModelParams& params, const SrlpMatrix& matrix) {
  const auto& cfg = params.config;
  if (matrix.column_size() != cfg.input_dim() || matrix.d_tok() != cfg.d_tok) {
    fail(ErrorCode::ShapeMismatch,
         fmt::format("SRLP columns have {} entries (d_tok {}), model expects {} (d_tok {})", matrix.column_size(),
                     matrix.d_tok(), cfg.input_dim(), cfg.d_tok));
  }
  if (matrix.frames() == 0 || matrix.frames() > cfg.max_frames) {
    fail(ErrorCode::ShapeMismatch,
         fmt::format("SRLP matrix has {} frames, model accepts 1..{}", matrix.frames(), cfg.max_frames));
  }
}

// Backprop from d(output) to every encoder parameter.
void encode_backward(const ModelParams& params, const EncoderPass& pass, const MatrixXd& d_output,
                     ModelParams& grads) {
  const auto& cfg = params.config;
  const Eigen::Index n = pass.input.rows();
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MatrixXd dx = layer_norm_backward(d_output, params.final_norm_gain, pass.final_norm, grads.final_norm_gain,
                                    grads.final_norm_bias);

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const LayerParams& lp = params.layers[li];
    LayerParams& lg = grads.layers[li];
    const LayerCache& c = pass.layers[li];

    // Feed-forward branch.
    MatrixXd d_ffn_out = dx;
    if (c.ffn_dropout.size() > 0) d_ffn_out.array() *= c.ffn_dropout.array();
    MatrixXd d_act = linear_backward(c.ffn_act, lp.ffn_out_weight, d_ffn_out, lg.ffn_out_weight, lg.ffn_out_bias);
    MatrixXd d_pre = d_act.array() * c.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    MatrixXd d_h2 = linear_backward(c.h2, lp.ffn_in_weight, d_pre, lg.ffn_in_weight, lg.ffn_in_bias);
    dx += layer_norm_backward(d_h2, lp.norm2_gain, c.norm2, lg.norm2_gain, lg.norm2_bias);

    // Attention branch.
    MatrixXd d_attn_out = dx;
    if (c.attn_dropout.size() > 0) d_attn_out.array() *= c.attn_dropout.array();
    MatrixXd d_context = linear_backward(c.context, lp.wo, d_attn_out, lg.wo, lg.bo);

    MatrixXd dq = MatrixXd::Zero(n, c.q.cols());
    MatrixXd dk = MatrixXd::Zero(n, c.k.cols());
    MatrixXd dv = MatrixXd::Zero(n, c.v.cols());
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      const MatrixXd& a = c.attention[h];
      const MatrixXd d_ctx_h = d_context.middleCols(off, dh);
      const MatrixXd d_a = d_ctx_h * c.v.middleCols(off, dh).transpose();
      dv.middleCols(off, dh).noalias() += a.transpose() * d_ctx_h;
      MatrixXd d_s(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double inner = d_a.row(i).dot(a.row(i));
        d_s.row(i) = (a.row(i).array() * (d_a.row(i).array() - inner)).matrix();
      }
      dq.middleCols(off, dh).noalias() += scale * (d_s * c.k.middleCols(off, dh));
      dk.middleCols(off, dh).noalias() += scale * (d_s.transpose() * c.q.middleCols(off, dh));
    }
    MatrixXd d_h1 = linear_backward(c.h1, lp.wq, dq, lg.wq, lg.bq);
    d_h1 += linear_backward(c.h1, lp.wk, dk, lg.wk, lg.bk);
    d_h1 += linear_backward(c.h1, lp.wv, dv, lg.wv, lg.bv);
    dx += layer_norm_backward(d_h1, lp.norm1_gain, c.norm1, lg.norm1_gain, lg.norm1_bias);
  }

  if (pass.input_dropout.size() > 0) dx.array() *= pass.input_dropout.array();
  grads.positional.topRows(n) += dx;
  grads.input_weight.noalias() += dx.transpose() * pass.input;
  grads.input_bias += dx.colwise().sum().transpose();
}

void require_cache(const EncoderPass& pass, std::string_view which) {
  if (!pass.has_cache) fail(ErrorCode::MissingCache, fmt::format("backward: {} pass ran without a cache", which));
}

}  // namespace

void ModelConfig::validate() const {
  if (d_tok == 0) fail(ErrorCode::InvalidArgument, "model config: d_tok must be positive");
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || ffn_ratio == 0 || max_frames == 0) {
    fail(ErrorCode::InvalidArgument, "model config: sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("model config: d_model {} is not divisible by {} heads", d_model, n_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::InvalidArgument, "model config: dropout must be in [0, 1)");
  if (!(layer_norm_eps > 0.0)) fail(ErrorCode::InvalidArgument, "model config: layer_norm_eps must be positive");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto in = static_cast<Eigen::Index>(config.input_dim());
  const auto ff = static_cast<Eigen::Index>(config.ffn_dim());
  const auto tok = static_cast<Eigen::Index>(config.d_tok);
  ModelParams p;
  p.config = config;
  p.input_weight = MatrixXd::Zero(d, in);
  p.input_bias = VectorXd::Zero(d);
  p.positional = MatrixXd::Zero(static_cast<Eigen::Index>(config.max_frames), d);
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    l.norm1_gain = VectorXd::Zero(d);
    l.norm1_bias = VectorXd::Zero(d);
    l.wq = l.wk = l.wv = l.wo = MatrixXd::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = VectorXd::Zero(d);
    l.norm2_gain = VectorXd::Zero(d);
    l.norm2_bias = VectorXd::Zero(d);
    l.ffn_in_weight = MatrixXd::Zero(ff, d);
    l.ffn_in_bias = VectorXd::Zero(ff);
    l.ffn_out_weight = MatrixXd::Zero(d, ff);
    l.ffn_out_bias = VectorXd::Zero(d);
  }
  p.final_norm_gain = VectorXd::Zero(d);
  p.final_norm_bias = VectorXd::Zero(d);
  p.classifier_weight = MatrixXd::Zero(static_cast<Eigen::Index>(kLabelCount), d);
  p.classifier_bias = VectorXd::Zero(static_cast<Eigen::Index>(kLabelCount));
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    p.role_weight[r] = MatrixXd::Zero(d, tok);
    p.role_bias[r] = VectorXd::Zero(d);
  }
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& config, Rng& rng) {
  ModelParams p = zeros(config);
  constexpr double kStd = 0.02;
  const double role_std = kStd / std::sqrt(static_cast<double>(config.d_model));
  for_each_tensor(
      [&](const std::string& name, auto& t) {
        if (name.ends_with("gain")) {
          t.setOnes();
        } else if (name.ends_with("bias") || name.ends_with(".bq") || name.ends_with(".bk") ||
                   name.ends_with(".bv") || name.ends_with(".bo")) {
          t.setZero();
        } else {
          const double std = name.starts_with("role.") ? role_std : kStd;
          for (Eigen::Index i = 0; i < t.rows(); ++i) {
            for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = std * rng.normal();
          }
        }
      },
      p);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, *this);
  return n;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); }, *this);
  return ok;
}

EncoderPass encode(const ModelParams& params, const SrlpMatrix& matrix, Rng* dropout_rng, bool keep_cache) {
  check_matrix(params, matrix);
  const auto& cfg = params.config;
  const bool drop = dropout_active(params, dropout_rng);
  const Eigen::Index n = static_cast<Eigen::Index>(matrix.frames());
  const Eigen::Index d = static_cast<Eigen::Index>(cfg.d_model);
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  EncoderPass pass;
  pass.has_cache = keep_cache;
  pass.input = matrix.columns().transpose();
  MatrixXd x = linear(pass.input, params.input_weight, params.input_bias) + params.positional.topRows(n);
  if (drop) {
    pass.input_dropout = dropout_mask(n, d, cfg.dropout, *dropout_rng);
    x.array() *= pass.input_dropout.array();
  }

  pass.layers.resize(cfg.n_layers);
  for (std::size_t li = 0; li < cfg.n_layers; ++li) {
    const LayerParams& lp = params.layers[li];
    LayerCache& c = pass.layers[li];
    c.input = x;
    c.h1 = layer_norm(x, lp.norm1_gain, lp.norm1_bias, cfg.layer_norm_eps, c.norm1);
    c.q = linear(c.h1, lp.wq, lp.bq);
    c.k = linear(c.h1, lp.wk, lp.bk);
    c.v = linear(c.h1, lp.wv, lp.bv);
    c.context.resize(n, d);
    c.attention.resize(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      MatrixXd s = scale * (c.q.middleCols(off, dh) * c.k.middleCols(off, dh).transpose());
      softmax_rows_inplace(s);
      c.context.middleCols(off, dh).noalias() = s * c.v.middleCols(off, dh);
      c.attention[h] = std::move(s);
    }
    MatrixXd attn_out = linear(c.context, lp.wo, lp.bo);
    if (drop) {
      c.attn_dropout = dropout_mask(n, d, cfg.dropout, *dropout_rng);
      attn_out.array() *= c.attn_dropout.array();
    }
    x += attn_out;

    c.h2 = layer_norm(x, lp.norm2_gain, lp.norm2_bias, cfg.layer_norm_eps, c.norm2);
    c.ffn_pre = linear(c.h2, lp.ffn_in_weight, lp.ffn_in_bias);
    c.ffn_act = c.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    MatrixXd ffn_out = linear(c.ffn_act, lp.ffn_out_weight, lp.ffn_out_bias);
    if (drop) {
      c.ffn_dropout = dropout_mask(n, d, cfg.dropout, *dropout_rng);
      ffn_out.array() *= c.ffn_dropout.array();
    }
    x += ffn_out;
  }
  pass.pre_final = x;
  pass.output = layer_norm(x, params.final_norm_gain, params.final_norm_bias, cfg.layer_norm_eps, pass.final_norm);
  if (!keep_cache) {
    pass.layers.clear();
    pass.input_dropout.resize(0, 0);
    pass.final_norm = {};
  }
  return pass;
}

ClassifyPass forward_classify(const SrlpMatrix& matrix, const ModelParams& params, Rng* dropout_rng,
                              bool keep_cache) {
  if (matrix.mask()) fail(ErrorCode::InvalidArgument, "forward_classify: expects an unmasked matrix");
  ClassifyPass out;
  out.encoder = encode(params, matrix, dropout_rng, keep_cache);
  out.pooled = out.encoder.output.colwise().mean().transpose();
  out.logits = params.classifier_weight * out.pooled + params.classifier_bias;
  return out;
}

SslPass forward_ssl(const SrlpMatrix& masked, std::span<const Eigen::VectorXd> candidates,
                    const ModelParams& params, Rng* dropout_rng, bool keep_cache) {
  if (!masked.mask()) fail(ErrorCode::InvalidArgument, "forward_ssl: matrix has no mask");
  if (candidates.size() != masked.frames()) {
    fail(ErrorCode::InvalidArgument,
         fmt::format("forward_ssl: {} candidates for {} frames", candidates.size(), masked.frames()));
  }
  SslPass out;
  out.mask = *masked.mask();
  out.encoder = encode(params, masked, dropout_rng, keep_cache);
  const auto n = static_cast<Eigen::Index>(candidates.size());
  out.candidates.resize(static_cast<Eigen::Index>(params.config.d_tok), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& cand = candidates[static_cast<std::size_t>(j)];
    if (static_cast<std::size_t>(cand.size()) != params.config.d_tok) {
      fail(ErrorCode::ShapeMismatch, fmt::format("forward_ssl: candidate {} has {} entries, expected {}", j,
                                                 cand.size(), params.config.d_tok));
    }
    out.candidates.col(j) = cand;
  }
  const auto r = static_cast<std::size_t>(out.mask.role);
  out.keys = params.role_weight[r] * out.candidates;
  out.keys.colwise() += params.role_bias[r];
  out.query = out.encoder.output.row(static_cast<Eigen::Index>(out.mask.frame)).transpose();
  const VectorXd scores = out.keys.transpose() * out.query;
  out.log_p = log_softmax(scores);
  out.p_ssl = out.log_p.array().exp().matrix();
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  VectorXd e = (scores.array() - scores.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& scores) {
  const double mx = scores.maxCoeff();
  const double lse = mx + std::log((scores.array() - mx).exp().sum());
  return (scores.array() - lse).matrix();
}

LossBreakdown loss_total(const Eigen::Vector3d& logits, Label label, const Eigen::VectorXd& p_ssl,
                         std::size_t target, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, fmt::format("alpha {} outside [0, 1]", alpha));
  LossBreakdown loss;
  loss.cls = -log_softmax(logits)[static_cast<Eigen::Index>(label)];
  const bool target_valid = target < static_cast<std::size_t>(p_ssl.size());
  if (alpha == 1.0) {
    // p_ssl is ignored; report its loss when it is available.
    if (target_valid) loss.ssl = -std::log(p_ssl[static_cast<Eigen::Index>(target)]);
    loss.total = loss.cls;
    return loss;
  }
  if (!target_valid) {
    fail(ErrorCode::InvalidArgument, fmt::format("SSL target {} outside {} candidates", target, p_ssl.size()));
  }
  loss.ssl = -std::log(p_ssl[static_cast<Eigen::Index>(target)]);
  loss.total = alpha * loss.cls + (1.0 - alpha) * loss.ssl;
  return loss;
}

LossBreakdown loss_total(const ClassifyPass& cls, const SslPass& ssl, Label label, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, fmt::format("alpha {} outside [0, 1]", alpha));
  LossBreakdown loss;
  loss.cls = -log_softmax(cls.logits)[static_cast<Eigen::Index>(label)];
  loss.ssl = -ssl.log_p[static_cast<Eigen::Index>(ssl.mask.frame)];
  loss.total = alpha * loss.cls + (1.0 - alpha) * loss.ssl;
  return loss;
}

void accumulate_gradients(const ClassifyPass& cls, const SslPass& ssl, Label label, double alpha,
                          const ModelParams& params, ModelParams& grads, double scale) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, fmt::format("alpha {} outside [0, 1]", alpha));
  require_cache(cls.encoder, "classification");
  require_cache(ssl.encoder, "self-supervised");

  const double w_cls = alpha * scale;
  if (w_cls != 0.0) {
    Eigen::Vector3d d_logits = softmax(cls.logits);
    d_logits[static_cast<Eigen::Index>(label)] -= 1.0;
    d_logits *= w_cls;
    grads.classifier_weight.noalias() += d_logits * cls.pooled.transpose();
    grads.classifier_bias += d_logits;
    const VectorXd d_pooled = params.classifier_weight.transpose() * d_logits;
    const auto n = cls.encoder.output.rows();
    MatrixXd d_out = d_pooled.transpose().replicate(n, 1) / static_cast<double>(n);
    encode_backward(params, cls.encoder, d_out, grads);
  }

  const double w_ssl = (1.0 - alpha) * scale;
  if (w_ssl != 0.0) {
    VectorXd d_scores = ssl.p_ssl;
    d_scores[static_cast<Eigen::Index>(ssl.mask.frame)] -= 1.0;
    d_scores *= w_ssl;
    const VectorXd d_query = ssl.keys * d_scores;
    const MatrixXd d_keys = ssl.query * d_scores.transpose();
    const auto r = static_cast<std::size_t>(ssl.mask.role);
    grads.role_weight[r].noalias() += d_keys * ssl.candidates.transpose();
    grads.role_bias[r] += d_keys.rowwise().sum();
    MatrixXd d_out = MatrixXd::Zero(ssl.encoder.output.rows(), ssl.encoder.output.cols());
    d_out.row(static_cast<Eigen::Index>(ssl.mask.frame)) = d_query.transpose();
    encode_backward(params, ssl.encoder, d_out, grads);
  }
}

ModelParams backward(const ClassifyPass& cls, const SslPass& ssl, Label label, double alpha,
                     const ModelParams& params) {
  ModelParams grads = ModelParams::zeros(params.config);
  accumulate_gradients(cls, ssl, label, alpha, params, grads, 1.0);
  return grads;
}

ExampleResult loss_and_gradients(const ModelParams& params, const SrlpMatrix& matrix, MaskSpec mask, Label label,
                                 double alpha, ModelParams& grads, double scale, Rng* dropout_rng) {
  const SrlpMatrix masked = mask_matrix(matrix, mask);
  const auto candidates = role_candidates(matrix, mask.role);
  const ClassifyPass cls = forward_classify(matrix, params, dropout_rng);
  const SslPass ssl = forward_ssl(masked, candidates, params, dropout_rng);
  ExampleResult result;
  result.loss = loss_total(cls, ssl, label, alpha);
  result.logits = cls.logits;
  result.p_ssl = ssl.p_ssl;
  accumulate_gradients(cls, ssl, label, alpha, params, grads, scale);
  return result;
}

LossBreakdown evaluate_loss(const ModelParams& params, const SrlpMatrix& matrix, MaskSpec mask, Label label,
                            double alpha) {
  const SrlpMatrix masked = mask_matrix(matrix, mask);
  const auto candidates = role_candidates(matrix, mask.role);
  const ClassifyPass cls = forward_classify(matrix, params, nullptr, false);
  const SslPass ssl = forward_ssl(masked, candidates, params, nullptr, false);
  return loss_total(cls, ssl, label, alpha);
}

}  // namespace srlp
