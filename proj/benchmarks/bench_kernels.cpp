// Serial-vs-OpenMP comparison for the data-parallel kernels. Both paths are
// bit-identical by construction; this target measures what the second core
// buys on the hot loops.

#include <benchmark/benchmark.h>

#include "probf/filter.hpp"
#include "probf/gp.hpp"
#include "probf/validation.hpp"

using namespace probf;
namespace val = probf::validation;

namespace {

struct Fixture {
  ResidualDataset data;
  KernelHyperparams hp;
  PosteriorBlocks blocks;
  ConstraintConstants cc;
  ControlVec u;

  explicit Fixture(int n) {
    Rng rng(99);
    data = val::random_dataset(rng, 4, 1, n);
    hp = initial_hyperparams(data);
    const auto inst = val::random_socp_instance(rng, 2);
    blocks = inst.blocks;
    cc = inst.cc;
    u = inst.u_d;
  }
};

void bm_gram(benchmark::State& state, Exec mode) {
  Fixture f(static_cast<int>(state.range(0)));
  GramBuilder builder(f.data.X, f.data.U, mode);
  for (auto _ : state) {
    benchmark::DoNotOptimize(builder.gram(f.hp));
  }
}

void bm_gram_pieces(benchmark::State& state, Exec mode) {
  Fixture f(static_cast<int>(state.range(0)));
  GramBuilder builder(f.data.X, f.data.U, mode);
  for (auto _ : state) {
    benchmark::DoNotOptimize(builder.gram_with_pieces(f.hp));
  }
}

void bm_chance_validate(benchmark::State& state, Exec mode) {
  Fixture f(64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(chance_validate(f.blocks, f.cc, f.u, state.range(0), 7, mode));
  }
}

void bm_mll(benchmark::State& state, Exec mode) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_marginal_likelihood(f.data, f.hp, mode));
  }
}

}  // namespace

BENCHMARK_CAPTURE(bm_gram, serial, Exec::Serial)->Arg(300)->Arg(600);
BENCHMARK_CAPTURE(bm_gram, omp, Exec::Parallel)->Arg(300)->Arg(600);
BENCHMARK_CAPTURE(bm_gram_pieces, serial, Exec::Serial)->Arg(600);
BENCHMARK_CAPTURE(bm_gram_pieces, omp, Exec::Parallel)->Arg(600);
BENCHMARK_CAPTURE(bm_chance_validate, serial, Exec::Serial)->Arg(100000);
BENCHMARK_CAPTURE(bm_chance_validate, omp, Exec::Parallel)->Arg(100000);
BENCHMARK_CAPTURE(bm_mll, serial, Exec::Serial)->Arg(600);
BENCHMARK_CAPTURE(bm_mll, omp, Exec::Parallel)->Arg(600);

BENCHMARK_MAIN();
