// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "distilkit/augment.hpp"
#include "distilkit/corpus.hpp"
#include "distilkit/encoder.hpp"
#include "distilkit/losses.hpp"
#include "distilkit/ops.hpp"
#include "distilkit/rng.hpp"
#include "distilkit/tokenizer.hpp"

namespace {

using namespace distilkit;

Tensor random_tensor(Shape shape, SeededRng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SeededRng rng(1);
  const Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(ops::matmul(tape.constant(a), tape.constant(b)).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

struct EncoderSetup {
  Vocab vocab;
  ModelParams params;
  TokenBatch batch;

  EncoderSetup(std::size_t layers, std::size_t rows) {
    const TaskSpec spec = TaskSpec::defaults(TaskId::offense);
    SyntheticSpec s = SyntheticSpec::defaults_for(spec);
    s.examples_per_task = rows;
    const auto examples = generate_synthetic(s, spec, 1);
    vocab = build_vocab(examples, 1);
    ModelConfig mc = layers == 4 ? ModelConfig::teacher(vocab.size()) : ModelConfig::student(vocab.size());
    SeededRng rng(2);
    params = init_params(mc, {{TaskId::offense, spec.num_classes()}}, vocab.hash(), rng);
    batch = make_batch(examples, vocab, spec, mc.max_len);
  }
};

void BM_EncoderForward(benchmark::State& state) {
  const EncoderSetup setup(static_cast<std::size_t>(state.range(0)), 16);
  for (auto _ : state) benchmark::DoNotOptimize(forward_logits(setup.params, setup.batch).data().data());
}
BENCHMARK(BM_EncoderForward)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_EncoderTrainStep(benchmark::State& state) {
  const EncoderSetup setup(static_cast<std::size_t>(state.range(0)), 16);
  std::uint64_t step = 0;
  for (auto _ : state) {
    Tape tape;
    ModelGraph graph(tape, setup.params, true);
    SeededRng rng(step++);
    Var logits = graph.logits(graph.encode(setup.batch, true, rng), TaskId::offense);
    tape.backward(supervised_loss(logits, setup.batch.targets, LossKind::categorical_ce));
    benchmark::DoNotOptimize(graph.gradients().size());
  }
}
BENCHMARK(BM_EncoderTrainStep)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_KlKdLoss(benchmark::State& state) {
  SeededRng rng(3);
  const Tensor t = random_tensor({64, 7}, rng), s = random_tensor({64, 7}, rng);
  for (auto _ : state) {
    Tape tape;
    Var student = tape.leaf(s);
    tape.backward(kl_kd_loss(tape.constant(t), student, 4.0));
    benchmark::DoNotOptimize(tape.grad(student).numel());
  }
}
BENCHMARK(BM_KlKdLoss);

void BM_WordDrop(benchmark::State& state) {
  std::vector<std::string> tokens;
  for (int i = 0; i < 40; ++i) tokens.push_back("w" + std::to_string(i));
  SeededRng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(word_drop(tokens, 1.0, rng).size());
}
BENCHMARK(BM_WordDrop);

}  // namespace
BENCHMARK_MAIN();
