#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "prpm/ensemble.hpp"
#include "prpm/future_state.hpp"
#include "prpm/replay.hpp"
#include "prpm/uncertainty.hpp"

namespace {

using namespace prpm;

void BM_Decompose(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> probs(static_cast<std::size_t>(state.range(0)));
  for (double& p : probs) p = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(decompose(probs));
}
BENCHMARK(BM_Decompose)->Arg(10)->Arg(50);

LabeledMatrix random_matrix(std::size_t rows, std::size_t cols) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledMatrix m;
  m.cols = cols;
  std::vector<double> row(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (double& x : row) x = u(rng);
    m.add_row(row, u(rng) < 0.3 + 0.4 * row[0]);
  }
  return m;
}

void BM_EnsembleTrain(benchmark::State& state) {
  const auto data = random_matrix(static_cast<std::size_t>(state.range(0)), 12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Ensemble::train(data, 10, TreeParams{}, 7));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnsembleTrain)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_KnnQuery(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto data = random_matrix(n, 12);
  HistoryIndex index(MinMaxScaler::fit(data));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    index.add(2, data.row(i), ScoreTriple{u(rng), u(rng), u(rng)});
  }
  const std::vector<double> query(12, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.future_scores(query, 1, ScoreTriple{}, 10));
  }
}
BENCHMARK(BM_KnnQuery)->Arg(1000)->Arg(20000);

void BM_ReplayRun(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredCase> cases(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < cases.size(); ++i) {
    ScoredCase& c = cases[i];
    c.case_id = "c" + std::to_string(i);
    c.arrival = static_cast<Timestamp>(i) * 12000;
    Timestamp t = c.arrival;
    for (int j = 0; j < 8; ++j) {
      c.event_times.push_back(t);
      t += 1000 + static_cast<Timestamp>(u(rng) * 90000);
      if (j < 7) {
        c.prefixes.push_back(ScoredPrefix{0, ScoreTriple{u(rng), u(rng), u(rng) - 0.2},
                                          ScoreTriple{u(rng), u(rng), u(rng) - 0.2}});
      }
    }
    c.label = Outcome::negative;
  }
  const PolicyConfig policy = named_policy("avgProba_CATE_oppCost");
  for (auto _ : state) {
    benchmark::DoNotOptimize(run(cases, policy, PoolConfig{5, {}}, CostParams{}, 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ReplayRun)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
