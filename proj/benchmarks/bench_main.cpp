#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "lawsim/game_master.hpp"
#include "lawsim/harness.hpp"
#include "lawsim/micro_world.hpp"
#include "lawsim/population.hpp"
#include "lawsim/scenario.hpp"

namespace {

const std::string kDataDir = LAWSIM_DATA_DIR;

lawsim::CountryStats country() {
    static lawsim::CountryStats c =
        lawsim::load_country_stats_file(kDataDir + "/countries/country_a.json");
    return c;
}

lawsim::Scene scene() {
    static lawsim::Scene s = lawsim::load_scene_file(kDataDir + "/scenes/theft.json");
    return s;
}

void BM_GeneratePopulation(benchmark::State& state) {
    lawsim::CountryStats c = country();
    lawsim::SamplingConfig cfg;
    cfg.seed = 7;
    cfg.population_size = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto pop = lawsim::generate_population(c, cfg);
        benchmark::DoNotOptimize(pop);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GeneratePopulation)->Arg(1000)->Arg(10000);

void BM_ComputeWelfare(benchmark::State& state) {
    double cash = 2000.0;
    for (auto _ : state) {
        double w = lawsim::compute_welfare(cash, 40.0, 30.0, 500.0);
        benchmark::DoNotOptimize(w);
        cash += 1.0; // defeat caching of a constant result
        if (cash > 18000.0) cash = 0.0;
    }
}
BENCHMARK(BM_ComputeWelfare);

void BM_RenderDecisionPrompt(benchmark::State& state) {
    lawsim::CountryStats c = country();
    lawsim::Scene s = scene();
    lawsim::SamplingConfig sampling;
    sampling.seed = 11;
    sampling.population_size = 1;
    auto pop = lawsim::generate_population(c, sampling);
    lawsim::PromptRenderConfig prompt;
    prompt.include_punishment_impression = true;
    prompt.punishment_level = 3;
    for (auto _ : state) {
        std::string text =
            lawsim::render_decision_prompt(pop[0], sampling, s, prompt, &c);
        benchmark::DoNotOptimize(text);
    }
}
BENCHMARK(BM_RenderDecisionPrompt);

void BM_ParseChoice(benchmark::State& state) {
    const std::vector<std::string> replies = {
        "Answer: B",
        "After weighing the risk of being caught I would pick option A.",
        "Reasoning: the punishment is severe, the payoff small.\nAnswer: c",
        "I choose D because nobody would ever find out.",
    };
    std::size_t i = 0;
    for (auto _ : state) {
        std::size_t choice = lawsim::parse_choice(replies[i % replies.size()], 4);
        benchmark::DoNotOptimize(choice);
        ++i;
    }
}
BENCHMARK(BM_ParseChoice);

void BM_ClassifyIntent(benchmark::State& state) {
    const std::vector<std::string> lines = {
        "Continue normal work.",
        "We are going on strike to protest the wage cut.",
        "I will strike next month if the wage is not restored.",
        "I am filing a lawsuit against the company over unpaid overtime.",
    };
    std::size_t i = 0;
    for (auto _ : state) {
        auto c = lawsim::classify_intent(lines[i % lines.size()]);
        benchmark::DoNotOptimize(c);
        ++i;
    }
}
BENCHMARK(BM_ClassifyIntent);

void BM_ScriptedMicroRun(benchmark::State& state) {
    lawsim::MicroConfig cfg; // 8 turns, 3 laborers
    lawsim::WorldInit init = lawsim::world_init_for_preset(
        lawsim::resolve_preset(lawsim::PresetId::initialized), 21, kDataDir);
    for (auto _ : state) {
        lawsim::MicroWorldState world = lawsim::init_world(cfg, init);
        lawsim::ScriptedMicroBackend backend("exploit");
        while (!world.finished) lawsim::step_turn(world, backend);
        benchmark::DoNotOptimize(world.log.events().size());
    }
}
BENCHMARK(BM_ScriptedMicroRun)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
