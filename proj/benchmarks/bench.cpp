#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "batchline/planner.hpp"
#include "batchline/reasoner.hpp"
#include "batchline/ruledsl.hpp"
#include "batchline/synthetic.hpp"

namespace {

using namespace batchline;

const std::filesystem::path kRoot = BATCHLINE_SOURCE_DIR;

const Schema& schema() {
    static const Schema s = load_schema_file(kRoot / "schema" / "drug-domain.json");
    return s;
}

const RuleSet& rules() {
    static const RuleSet r = load_ruleset_file(kRoot / "rules" / "matching.dsl");
    return r;
}

LoadedDataset dataset(std::size_t samples) {
    return populate_synthetic(generate_synthetic({.seed = 7, .samples = samples}), schema());
}

void BM_GraphMatchBySubject(benchmark::State& state) {
    LoadedDataset d = dataset(static_cast<std::size_t>(state.range(0)));
    std::vector<TermId> subjects;
    d.graph.for_each([&](IdTriple t, Provenance) {
        if (subjects.empty() || subjects.back() != t.s) subjects.push_back(t.s);
    });
    std::mt19937_64 rng(1);
    std::size_t hits = 0;
    for (auto _ : state) {
        TermId s = subjects[rng() % subjects.size()];
        d.graph.for_each_match(IdPattern{s, std::nullopt, std::nullopt}, [&](IdTriple) { ++hits; });
    }
    benchmark::DoNotOptimize(hits);
}
BENCHMARK(BM_GraphMatchBySubject)->Arg(1000)->Arg(10000);

void BM_GraphMatchByPredicate(benchmark::State& state) {
    LoadedDataset d = dataset(2000);
    const auto p = *d.graph.lookup(entity("stups:height"));
    for (auto _ : state) benchmark::DoNotOptimize(d.graph.count(IdPattern{std::nullopt, p, std::nullopt}));
}
BENCHMARK(BM_GraphMatchByPredicate);

void BM_Materialize(benchmark::State& state) {
    LoadedDataset base = dataset(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        state.PauseTiming();
        Graph g = base.graph;
        state.ResumeTiming();
        benchmark::DoNotOptimize(materialize(g, schema()).added);
    }
    state.counters["triples"] = static_cast<double>(base.graph.size());
}
BENCHMARK(BM_Materialize)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_EvaluateBlocked(benchmark::State& state) {
    LoadedDataset d = dataset(static_cast<std::size_t>(state.range(0)));
    materialize(d.graph, schema());
    std::size_t pairs = 0;
    for (auto _ : state) pairs = evaluate_ruleset(rules(), d.graph, schema(), {.block = true}, PairSink{}).pairs;
    state.counters["pairs"] = static_cast<double>(pairs);
    state.counters["pairs/s"] = benchmark::Counter(static_cast<double>(pairs), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_EvaluateBlocked)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_ParseRules(benchmark::State& state) {
    const std::string text = print_ruleset(rules());
    for (auto _ : state) benchmark::DoNotOptimize(parse_ruleset(text).size());
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseRules);

void BM_Compile(benchmark::State& state) {
    LoadedDataset d = dataset(1000);
    for (auto _ : state)
        for (const auto& r : rules()) benchmark::DoNotOptimize(compile(r, schema(), &d.graph).steps.size());
}
BENCHMARK(BM_Compile);

} // namespace
BENCHMARK_MAIN();
