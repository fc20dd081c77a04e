#include <benchmark/benchmark.h>

#include "sqlagents/backend.hpp"
#include "sqlagents/pipelines.hpp"
#include "sqlagents/prompts.hpp"

using namespace sqlagents;

namespace {

std::string long_completion(std::size_t paragraphs) {
    std::string s = "<think>\n";
    for (std::size_t i = 0; i < paragraphs; ++i) {
        s += "We could select from table t" + std::to_string(i) + " but the join on id looks wrong.\n\n";
    }
    s += "</think>\n\nThe final query:\n```sql\nSELECT a, COUNT(*) FROM t GROUP BY a ORDER BY 2 DESC LIMIT 1;\n```\n";
    return s;
}

void BM_ExtractFenced(benchmark::State& state) {
    const auto text = long_completion(static_cast<std::size_t>(state.range(0)));
    // flat in the think length: only the text after </think> is searched
    for (auto _ : state) benchmark::DoNotOptimize(extract_sql(text));
}
BENCHMARK(BM_ExtractFenced)->Arg(1)->Arg(100)->Arg(2000);

void BM_ExtractProse(benchmark::State& state) {
    std::string text;
    for (int i = 0; i < state.range(0); ++i) text += "Maybe SELECT x FROM t" + std::to_string(i) + ";\n";
    for (auto _ : state) benchmark::DoNotOptimize(extract_sql(text));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ExtractProse)->Arg(10)->Arg(1000);

void BM_RenderJudge(benchmark::State& state) {
    const auto lib = PromptLibrary::defaults();
    const auto model = ModelProfile::make("m", false);
    std::string schema;
    for (int i = 0; i < state.range(0); ++i) schema += "CREATE TABLE t" + std::to_string(i) + " (id INTEGER, v TEXT);\n";
    std::vector<std::pair<int, std::string>> agents{{1, long_completion(20)}, {2, long_completion(20)}, {3, long_completion(20)}};
    const auto responses = format_agent_responses(agents);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lib.render(
            TemplateId::mad_judge, {{"schema", schema}, {"question", "q"}, {"agent_responses", responses}}, model));
    }
}
BENCHMARK(BM_RenderJudge)->Arg(5)->Arg(100);

void BM_RequestHash(benchmark::State& state) {
    const auto model = ModelProfile::make("m", false);
    const auto req = make_request(long_completion(static_cast<std::size_t>(state.range(0))), model, AgentRole::baseline, "t");
    for (auto _ : state) benchmark::DoNotOptimize(request_hash(req, model));
}
BENCHMARK(BM_RequestHash)->Arg(10)->Arg(1000);

}  // namespace
