#include <benchmark/benchmark.h>

#include <random>

#include "sqlagents/metrics.hpp"

using namespace sqlagents;

namespace {

ResultTable random_table(std::size_t rows, std::size_t cols, unsigned seed) {
    std::mt19937 rng(seed);
    ResultTable t;
    for (std::size_t c = 0; c < cols; ++c) t.columns.push_back("c" + std::to_string(c));
    for (std::size_t r = 0; r < rows; ++r) {
        Row row;
        for (std::size_t c = 0; c < cols; ++c) {
            switch (rng() % 3) {
                case 0: row.emplace_back(static_cast<std::int64_t>(rng() % 1000)); break;
                case 1: row.emplace_back(static_cast<double>(rng() % 1000) / 7.0); break;
                default: row.emplace_back("s" + std::to_string(rng() % 100)); break;
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void BM_ExecMatch(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto gold = random_table(rows, 4, 1);
    auto pred = gold;
    std::shuffle(pred.rows.begin(), pred.rows.end(), std::mt19937(2));
    for (auto _ : state) benchmark::DoNotOptimize(exec_match(gold, pred));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_ExecMatch)->Arg(10)->Arg(1000)->Arg(100000);

void BM_SoftF1(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const auto gold = random_table(rows, 4, 1);
    const auto pred = random_table(rows, 4, 3);
    for (auto _ : state) benchmark::DoNotOptimize(soft_f1(gold, pred));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_SoftF1)->Arg(10)->Arg(1000)->Arg(100000);

void BM_Aggregate(benchmark::State& state) {
    std::vector<MetricScores> scores(static_cast<std::size_t>(state.range(0)));
    std::mt19937 rng(5);
    for (auto& s : scores) {
        s.ex = static_cast<int>(rng() % 2);
        s.soft.f1 = s.ex;
        s.r_ves = s.ex;
        s.difficulty = static_cast<Difficulty>(rng() % 4);
    }
    for (auto _ : state) benchmark::DoNotOptimize(aggregate(scores, true));
}
BENCHMARK(BM_Aggregate)->Arg(500)->Arg(100000);

}  // namespace
