#include <cmath>

#include <benchmark/benchmark.h>

#include <srlp/dataset.hpp>
#include <srlp/model.hpp>
#include <srlp/performance.hpp>

namespace {

using namespace srlp;

// Default-sized model on a 768-wide token embedding, N frames.
struct Setup {
  ModelParams params;
  SrlpMatrix matrix;

  explicit Setup(std::size_t frames)
      : params(make_params()), matrix(random_matrix(frames)) {}

  static ModelConfig config() {
    ModelConfig c;
    c.d_tok = 768;
    c.dropout = 0.0;
    return c;
  }
  static ModelParams make_params() {
    Rng rng(1);
    return ModelParams::initialize(config(), rng);
  }
  static SrlpMatrix random_matrix(std::size_t frames) {
    const auto c = config();
    Rng rng(2);
    Eigen::MatrixXd cols(static_cast<Eigen::Index>(c.input_dim()), static_cast<Eigen::Index>(frames));
    for (Eigen::Index j = 0; j < cols.cols(); ++j) {
      for (Eigen::Index i = 0; i < cols.rows(); ++i) cols(i, j) = rng.normal();
    }
    return SrlpMatrix(cols, c.d_tok, c.d_factors);
  }
};

void BM_Forward(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_classify(s.matrix, s.params).logits);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(4)->Arg(16);

// Full step for one example: both heads plus backward, with the mask on V
// or on an argument role.
void BM_ForwardBackward(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)));
  const Role role = state.range(1) == 0 ? Role::V : Role::A0;
  ModelParams grads = ModelParams::zeros(s.params.config);
  for (auto _ : state) {
    auto r = loss_and_gradients(s.params, s.matrix, MaskSpec{0, role}, Label::Neutral, 0.7, grads);
    benchmark::DoNotOptimize(r.loss.total);
  }
  state.SetLabel(role == Role::V ? "mask=v" : "mask=a0a1");
}
BENCHMARK(BM_ForwardBackward)->Args({4, 0})->Args({4, 1})->Args({16, 0})->Args({16, 1});

void BM_MaxDrawdown(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> curve(static_cast<std::size_t>(state.range(0)));
  double v = 1.0;
  for (auto& x : curve) x = (v *= std::exp(0.01 * rng.normal()));
  for (auto _ : state) benchmark::DoNotOptimize(max_drawdown(curve));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MaxDrawdown)->Range(1 << 8, 1 << 16)->Complexity(benchmark::oN);

void BM_DeriveLabels(benchmark::State& state) {
  Rng rng(4);
  Corpus corpus(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    corpus[i].event_id = "E" + std::to_string(i);
    corpus[i].return_rate = 0.02 * rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(derive_labels(corpus, LabelThresholds{}).events.size());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DeriveLabels)->Range(1 << 8, 1 << 15)->Complexity(benchmark::oNLogN);

}  // namespace

BENCHMARK_MAIN();
