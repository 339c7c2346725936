#include "lawsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lawsim/errors.hpp"

namespace lawsim {

namespace {

constexpr double kDistributionSumTolerance = 1e-6;
constexpr double kMalePremium = 1.2;
constexpr double kIncomeDivisor = 1.102;
constexpr double kIncomeLogVariance = 0.25; // variance of the underlying normal
constexpr double kDrugNormalizer = 1.3225;
constexpr double kGangDivisor = 1.25;
constexpr int kMinAge = 18;
constexpr int kMaxAge = 65;
constexpr double kMaleProbability = 0.51;

const std::map<std::string, Education>& education_labels() {
    static const std::map<std::string, Education> labels = {
        {"below_upper_secondary", Education::below_upper_secondary},
        {"upper_secondary", Education::upper_secondary},
        {"tertiary_bachelor", Education::tertiary_bachelor},
        {"tertiary_master_or_above", Education::tertiary_master_or_above},
        {"tertiary_other", Education::tertiary_other},
    };
    return labels;
}

double require_probability(const nlohmann::json& j, const std::string& context) {
    if (!j.is_number()) {
        throw SchemaError("expected a number for " + context);
    }
    const double v = j.get<double>();
    if (v < 0.0 || v > 1.0) {
        throw ValueError(fmt::format("probability out of [0,1] for {}: {}", context, v));
    }
    return v;
}

double require_positive(const nlohmann::json& j, const std::string& context) {
    if (!j.is_number()) {
        throw SchemaError("expected a number for " + context);
    }
    const double v = j.get<double>();
    if (v <= 0.0) {
        throw ValueError(fmt::format("expected a positive value for {}: {}", context, v));
    }
    return v;
}

const nlohmann::json& require_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw SchemaError(std::string("missing field: ") + key);
    }
    return *it;
}

// Validates that the distribution sums to 1 within tolerance, then snaps it to
// an exact unit sum.
template <typename Map>
void normalize_distribution(Map& dist, const std::string& context) {
    double sum = 0.0;
    for (const auto& [key, p] : dist) sum += p;
    if (std::abs(sum - 1.0) > kDistributionSumTolerance) {
        throw DistributionError(fmt::format("{} sums to {:.9f}, expected 1", context, sum));
    }
    for (auto& [key, p] : dist) p /= sum;
}

} // namespace

std::string to_string(Gender g) {
    return g == Gender::male ? "male" : "female";
}

std::string to_string(Education e) {
    switch (e) {
        case Education::below_upper_secondary: return "below_upper_secondary";
        case Education::upper_secondary: return "upper_secondary";
        case Education::tertiary_bachelor: return "tertiary_bachelor";
        case Education::tertiary_master_or_above: return "tertiary_master_or_above";
        case Education::tertiary_other: return "tertiary_other";
    }
    return "below_upper_secondary";
}

Gender gender_from_string(const std::string& s) {
    if (s == "male") return Gender::male;
    if (s == "female") return Gender::female;
    throw ValueError("unknown gender label: " + s);
}

Education education_from_string(const std::string& s) {
    const auto& labels = education_labels();
    auto it = labels.find(s);
    if (it == labels.end()) {
        throw UnknownEducationLabel("unknown education label: " + s);
    }
    return it->second;
}

CountryStats load_country_stats(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("country statistics file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw SchemaError("country statistics document must be a JSON object");
    }

    CountryStats stats;
    stats.country_id = require_field(j, "country_id").get<std::string>();

    const auto& edu = require_field(j, "education_dist");
    if (!edu.is_object()) throw SchemaError("education_dist must be an object");
    for (const auto& [label, value] : edu.items()) {
        stats.education_dist[education_from_string(label)] =
            require_probability(value, "education_dist." + label);
    }
    if (stats.education_dist.size() != std::size(kAllEducationLevels)) {
        throw SchemaError("education_dist must cover all five education levels");
    }
    normalize_distribution(stats.education_dist, "education_dist");

    stats.gini = require_probability(require_field(j, "gini"), "gini");
    stats.median_income_ppp = require_positive(require_field(j, "median_income_ppp"), "median_income_ppp");

    const auto& incomes = require_field(j, "income_by_education");
    if (!incomes.is_object()) throw SchemaError("income_by_education must be an object");
    for (const auto& [label, value] : incomes.items()) {
        stats.income_by_education[education_from_string(label)] =
            require_positive(value, "income_by_education." + label);
    }

    stats.unemployment_benefit_monthly =
        require_positive(require_field(j, "unemployment_benefit_monthly"), "unemployment_benefit_monthly");
    stats.employment_rate = require_probability(require_field(j, "employment_rate"), "employment_rate");
    stats.drug_use_rate = require_probability(require_field(j, "drug_use_rate"), "drug_use_rate");
    stats.gang_influence_rate =
        require_probability(require_field(j, "gang_influence_rate"), "gang_influence_rate");
    stats.community_safety_index = require_field(j, "community_safety_index").get<double>();
    stats.firearm_policy = require_field(j, "firearm_policy").get<std::string>();

    const auto& rel = require_field(j, "religion_dist");
    if (!rel.is_object()) throw SchemaError("religion_dist must be an object");
    for (const auto& [label, value] : rel.items()) {
        stats.religion_dist[label] = require_probability(value, "religion_dist." + label);
    }
    if (stats.religion_dist.empty()) throw SchemaError("religion_dist must not be empty");
    normalize_distribution(stats.religion_dist, "religion_dist");

    const auto& imm = require_field(j, "immigrant_rate");
    if (imm.is_number()) {
        stats.immigrant_rate = require_probability(imm, "immigrant_rate");
    } else if (imm.is_string()) {
        std::string s = imm.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        if (s != "low") {
            throw ValueError("immigrant_rate must be a probability or the sentinel \"low\"");
        }
        stats.immigrant_rate = std::nullopt;
    } else {
        throw SchemaError("immigrant_rate must be a number or string");
    }

    stats.society_background = require_field(j, "society_background").get<std::string>();
    return stats;
}

CountryStats load_country_stats(std::istream& source) {
    std::ostringstream buf;
    buf << source.rdbuf();
    return load_country_stats(buf.str());
}

CountryStats load_country_stats_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open country statistics file: " + path);
    }
    return load_country_stats(in);
}

double sample_income(const CountryStats& country, Education education, Gender gender, Rng& rng) {
    auto it = country.income_by_education.find(education);
    if (it == country.income_by_education.end()) {
        throw MissingEducationIncome(fmt::format("no income entry for education level {} in country {}",
                                                 to_string(education), country.country_id));
    }
    const double mu_base = it->second;
    const double mu_adj =
        (gender == Gender::male ? kMalePremium * mu_base : mu_base) / kIncomeDivisor;
    return rng.log_normal(std::log(mu_adj), std::sqrt(kIncomeLogVariance));
}

double drug_use_rate(const CountryStats& country, Gender gender, int age) {
    const double r0 = country.drug_use_rate;
    double multiplier;
    if (gender == Gender::female) {
        multiplier = age <= 25 ? 1.75 : 1.0;
    } else {
        multiplier = age <= 25 ? 2.275 : 1.3;
    }
    return std::clamp(multiplier * r0 / kDrugNormalizer, 0.0, 1.0);
}

bool sample_drug_use(const CountryStats& country, Gender gender, int age, Rng& rng) {
    return rng.bernoulli(drug_use_rate(country, gender, age));
}

double gang_influence_rate(const CountryStats& country, Gender gender) {
    const double r_female = country.gang_influence_rate / kGangDivisor;
    const double rate = gender == Gender::male ? 1.5 * r_female : r_female;
    return std::clamp(rate, 0.0, 1.0);
}

bool sample_gang_influence(const CountryStats& country, Gender gender, Rng& rng) {
    return rng.bernoulli(gang_influence_rate(country, gender));
}

AgentProfile generate_profile(const CountryStats& country, const SamplingConfig& cfg, Rng& rng,
                              std::string agent_id) {
    AgentProfile p;
    p.agent_id = std::move(agent_id);
    p.country_id = country.country_id;

    p.age = rng.uniform_int(kMinAge, kMaxAge);
    p.gender = rng.bernoulli(kMaleProbability) ? Gender::male : Gender::female;

    {
        std::vector<double> weights;
        weights.reserve(country.education_dist.size());
        for (const auto& [level, prob] : country.education_dist) weights.push_back(prob);
        auto it = country.education_dist.begin();
        std::advance(it, static_cast<long>(rng.categorical(weights)));
        p.education = it->first;
    }

    if (cfg.include_religion) {
        std::vector<double> weights;
        weights.reserve(country.religion_dist.size());
        for (const auto& [label, prob] : country.religion_dist) weights.push_back(prob);
        auto it = country.religion_dist.begin();
        std::advance(it, static_cast<long>(rng.categorical(weights)));
        p.religion = it->first;
    }

    p.employed = rng.bernoulli(country.employment_rate);
    if (p.employed) {
        p.income_ppp = sample_income(country, p.education, p.gender, rng);
    } else {
        // Fixed benefit, no sampling noise.
        p.income_ppp = 12.0 * country.unemployment_benefit_monthly;
    }

    p.drug_use = sample_drug_use(country, p.gender, p.age, rng);
    p.gang_exposed = sample_gang_influence(country, p.gender, rng);

    if (cfg.include_immigrant && country.immigrant_rate.has_value()) {
        p.immigrant = rng.bernoulli(*country.immigrant_rate);
    }
    return p;
}

std::vector<AgentProfile> generate_population(const CountryStats& country, const SamplingConfig& cfg) {
    if (cfg.population_size < 1) {
        throw ConfigError("population_size must be >= 1");
    }
    Rng rng(cfg.seed);
    std::vector<AgentProfile> population;
    population.reserve(cfg.population_size);
    for (std::size_t i = 0; i < cfg.population_size; ++i) {
        population.push_back(generate_profile(
            country, cfg, rng, fmt::format("{}-{:06d}", country.country_id, i + 1)));
    }
    return population;
}

nlohmann::json profile_to_json(const AgentProfile& p) {
    return nlohmann::json{
        {"agent_id", p.agent_id},
        {"age", p.age},
        {"gender", to_string(p.gender)},
        {"education", to_string(p.education)},
        {"religion", p.religion},
        {"employed", p.employed},
        {"income_ppp", p.income_ppp},
        {"drug_use", p.drug_use},
        {"gang_exposed", p.gang_exposed},
        {"immigrant", p.immigrant},
        {"country_id", p.country_id},
    };
}

AgentProfile profile_from_json(const nlohmann::json& j) {
    AgentProfile p;
    p.agent_id = j.at("agent_id").get<std::string>();
    p.age = j.at("age").get<int>();
    p.gender = gender_from_string(j.at("gender").get<std::string>());
    p.education = education_from_string(j.at("education").get<std::string>());
    p.religion = j.at("religion").get<std::string>();
    p.employed = j.at("employed").get<bool>();
    p.income_ppp = j.at("income_ppp").get<double>();
    p.drug_use = j.at("drug_use").get<bool>();
    p.gang_exposed = j.at("gang_exposed").get<bool>();
    p.immigrant = j.at("immigrant").get<bool>();
    p.country_id = j.at("country_id").get<std::string>();
    return p;
}

void write_population_jsonl(std::ostream& out, const std::vector<AgentProfile>& population) {
    for (const auto& profile : population) {
        out << profile_to_json(profile).dump() << '\n';
    }
}

std::vector<AgentProfile> read_population_jsonl(std::istream& in) {
    std::vector<AgentProfile> population;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        population.push_back(profile_from_json(nlohmann::json::parse(line)));
    }
    return population;
}

} // namespace lawsim
