#include "srlp/optimizer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "srlp/error.hpp"

namespace srlp {

AdamOptimizer::AdamOptimizer(const ModelConfig& config, AdamConfig adam)
    : adam_(adam), first_moment_(ModelParams::zeros(config)), second_moment_(ModelParams::zeros(config)) {}

void AdamOptimizer::step(ModelParams& params, const ModelParams& grads, double learning_rate) {
  for_each_tensor(
      [](const std::string& name, const auto& g) {
        if (!g.allFinite()) fail(ErrorCode::NonFinite, fmt::format("non-finite gradient in tensor '{}'", name));
      },
      grads);

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(adam_.beta1, t);
  const double correction2 = 1.0 - std::pow(adam_.beta2, t);
  const AdamConfig& c = adam_;
  for_each_tensor(
      [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
        if (c.weight_decay != 0.0) p -= (learning_rate * c.weight_decay) * p;
        const auto m_hat = m.array() / correction1;
        const auto v_hat = v.array() / correction2;
        p.array() -= learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
      },
      params, grads, first_moment_, second_moment_);
}

}  // namespace srlp
