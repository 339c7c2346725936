#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lawsim/rng.hpp"

namespace lawsim {

enum class Gender { male, female };

enum class Education {
    below_upper_secondary,
    upper_secondary,
    tertiary_bachelor,
    tertiary_master_or_above,
    tertiary_other,
};

inline constexpr Education kAllEducationLevels[] = {
    Education::below_upper_secondary,  Education::upper_secondary,
    Education::tertiary_bachelor,      Education::tertiary_master_or_above,
    Education::tertiary_other,
};

std::string to_string(Gender g);
std::string to_string(Education e);
Gender gender_from_string(const std::string& s);
Education education_from_string(const std::string& s); // throws UnknownEducationLabel

// Per-country distribution tables loaded from a statistics file.
struct CountryStats {
    std::string country_id;
    std::map<Education, double> education_dist;
    double gini = 0.0;
    double median_income_ppp = 0.0;
    std::map<Education, double> income_by_education;
    double unemployment_benefit_monthly = 0.0;
    double employment_rate = 0.0;
    double drug_use_rate = 0.0;       // base rate r0
    double gang_influence_rate = 0.0; // base rate
    double community_safety_index = 0.0;
    std::string firearm_policy;
    std::map<std::string, double> religion_dist;
    std::optional<double> immigrant_rate; // nullopt = "Low" sentinel
    std::string society_background;
};

// Parses and validates the country-statistics JSON document. Distributions off
// by less than 1e-6 are renormalized; larger drift raises DistributionError.
CountryStats load_country_stats(std::istream& source);
CountryStats load_country_stats(const std::string& json_text);
CountryStats load_country_stats_file(const std::string& path);

struct SamplingConfig {
    std::uint64_t seed = 0;
    bool include_religion = true;
    bool include_immigrant = true;
    bool country_visible = false;
    bool include_society_context = false;
    std::size_t population_size = 1;
};

struct AgentProfile {
    std::string agent_id;
    int age = 0;
    Gender gender = Gender::male;
    Education education = Education::below_upper_secondary;
    std::string religion; // empty when religion sampling is off
    bool employed = false;
    double income_ppp = 0.0;
    bool drug_use = false;
    bool gang_exposed = false;
    bool immigrant = false;
    std::string country_id;
};

// Annual income draw for an employed agent: log-normal around the
// gender-adjusted education median (male premium 1.2, shared divisor 1.102,
// underlying normal variance 0.25).
double sample_income(const CountryStats& country, Education education, Gender gender, Rng& rng);

// Formula rates exposed alongside the Bernoulli samplers so callers can build
// analytic mixtures without re-deriving the multipliers.
double drug_use_rate(const CountryStats& country, Gender gender, int age);
bool sample_drug_use(const CountryStats& country, Gender gender, int age, Rng& rng);
double gang_influence_rate(const CountryStats& country, Gender gender);
bool sample_gang_influence(const CountryStats& country, Gender gender, Rng& rng);

AgentProfile generate_profile(const CountryStats& country, const SamplingConfig& cfg, Rng& rng,
                              std::string agent_id = {});

// Seeded population generation: deterministic under (seed, cfg, country) with
// unique sequential agent ids.
std::vector<AgentProfile> generate_population(const CountryStats& country, const SamplingConfig& cfg);

nlohmann::json profile_to_json(const AgentProfile& profile);
AgentProfile profile_from_json(const nlohmann::json& j);
void write_population_jsonl(std::ostream& out, const std::vector<AgentProfile>& population);
std::vector<AgentProfile> read_population_jsonl(std::istream& in);

} // namespace lawsim
