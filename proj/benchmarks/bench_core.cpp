#include <benchmark/benchmark.h>

#include "plastar/elimination.hpp"

using namespace plastar;

namespace {

void BM_GaifmanDistance(benchmark::State& state) {
  Structure b = BaseSequence::path().generate(static_cast<int>(state.range(0)));
  Element a = 0, c = b.domain_size() - 1;
  for (auto _ : state) benchmark::DoNotOptimize(b.dist(a, c));
}
BENCHMARK(BM_GaifmanDistance)->Arg(64)->Arg(512);

void BM_ClosureCertificate(benchmark::State& state) {
  BaseSequence seq = BaseSequence::path();
  Config cfg;
  cfg.probes = {32, 64};
  TypeContext ctx(seq, cfg);
  const int n = 256;
  auto b = ctx.base(n);
  const int lambda = static_cast<int>(state.range(0));
  ctx.rare_elements(n, lambda);  // warm the cache
  Element a = n / 2;
  for (auto _ : state)
    benchmark::DoNotOptimize(ctx.closure_type(*b, n, {a}, lambda, 1));
}
BENCHMARK(BM_ClosureCertificate)->Arg(1)->Arg(3);

void BM_GridCertificate(benchmark::State& state) {
  BaseSequence seq = BaseSequence::grid(2);
  Config cfg;
  cfg.probes = {8, 12};
  TypeContext ctx(seq, cfg);
  const int n = 12;
  auto b = ctx.base(n);
  ctx.rare_elements(n, 2);
  Element mid = 6 * 13 + 6;
  for (auto _ : state)
    benchmark::DoNotOptimize(ctx.closure_type(*b, n, {mid}, 2, 1));
}
BENCHMARK(BM_GridCertificate);

void BM_AggregationEvaluate(benchmark::State& state) {
  Structure b = BaseSequence::path().generate(static_cast<int>(state.range(0)));
  auto f = parse_formula(
      "am[dist(x, y) <= 2 : y : and(not(x = y), and(not(E(x, y)), not(E(y, x))))]",
      b.signature());
  EvalEnv env;
  env.structure = &b;
  Assignment asg{{"x", b.domain_size() / 2}};
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_with(env, *f, asg));
}
BENCHMARK(BM_AggregationEvaluate)->Arg(64)->Arg(256);

void BM_SampleWorld(benchmark::State& state) {
  PlaNetwork net = parse_network("sigma E/2 R/1 | tau=1\nprob R(x): 0.3\n");
  Structure base = BaseSequence::path().generate(static_cast<int>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_world(net, base, ++seed).structure.domain_size());
}
BENCHMARK(BM_SampleWorld)->Arg(64)->Arg(512);

void BM_CtLimit(benchmark::State& state) {
  const auto& am = *AggregationRegistry::builtins().lookup("am");
  CtParameters params{{{{0.2, 0.25}, {0.5, 0.5}, {0.8, 0.25}}}};
  for (auto _ : state)
    benchmark::DoNotOptimize(ct_limit(am, params, 1e-6).value);
}
BENCHMARK(BM_CtLimit);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
