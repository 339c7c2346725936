#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lawsim/decision.hpp"
#include "lawsim/population.hpp"
#include "lawsim/scenario.hpp"

namespace lawsim {

// One macro experiment cell: a seeded population asked about one scene at one
// punishment-impression level.
struct MacroRunSpec {
    CountryStats country;
    Scene scene;
    std::optional<int> punishment_level; // absent = baseline, no impression block
    std::size_t population_size = 1;
    std::uint64_t seed = 0;
    SamplingConfig sampling;  // flag fields; seed and size above take precedence
    BackendConfig backend;
    PromptRenderConfig prompt; // impression fields are derived from punishment_level
    std::string output_dir;    // empty: keep everything in memory
    nlohmann::json extra_metadata; // merged into the report metadata
};

struct SubgroupCell {
    std::size_t n = 0;
    std::size_t n_crime = 0;
    double rate = 0.0;
};

struct CrimeRateReport {
    std::string scene_id;
    std::size_t n_total = 0;
    std::size_t n_decided = 0;
    std::size_t n_crime = 0;
    double crime_rate = 0.0; // n_crime / n_decided, 0 when nothing decided
    std::map<std::string, std::map<std::string, SubgroupCell>> subgroup_rates;
    std::size_t unparsed_count = 0;
    nlohmann::json metadata;
};

inline constexpr const char* kSubgroupAttributes[] = {
    "gender", "education", "employed", "drug_use", "gang_exposed", "religion", "immigrant",
};

std::string punishment_level_label(std::optional<int> level);

// Per-value decision counts and crime rates for one profile attribute,
// computed over parsed records only.
std::map<std::string, SubgroupCell> subgroup_rates(const std::vector<DecisionRecord>& records,
                                                   const std::vector<AgentProfile>& population,
                                                   const std::string& attribute);

CrimeRateReport compute_report(const Scene& scene, const std::vector<AgentProfile>& population,
                               const std::vector<DecisionRecord>& records,
                               nlohmann::json metadata);

struct MacroRunResult {
    CrimeRateReport report;
    std::vector<AgentProfile> population;
    std::vector<DecisionRecord> records;
};

// Full pipeline: sample population, render prompts, dispatch, parse,
// aggregate. Writes decisions.jsonl and report.json when output_dir is set.
// Scripted backends make the whole run a pure function of the spec.
MacroRunResult run_macro(const MacroRunSpec& spec);

// One report per requested level over the identical population (same seed),
// so the level is the only varied factor. Writes sweep.csv when the base
// output_dir is set, with per-level runs in level_<label>/ subdirectories.
std::vector<CrimeRateReport> punishment_sweep(const MacroRunSpec& base,
                                              const std::vector<std::optional<int>>& levels);

std::string sweep_csv(const std::vector<CrimeRateReport>& reports);

nlohmann::json report_to_json(const CrimeRateReport& report);
CrimeRateReport report_from_json(const nlohmann::json& j);

void write_decisions_jsonl(const std::string& path, const std::vector<DecisionRecord>& records);
std::vector<DecisionRecord> read_decisions_jsonl(const std::string& path);

} // namespace lawsim
