#include "lawsim/macro_sim.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "lawsim/errors.hpp"
#include "lawsim/json_util.hpp"

namespace lawsim {

namespace {

std::string attribute_value(const AgentProfile& profile, const std::string& attribute) {
    if (attribute == "gender") return to_string(profile.gender);
    if (attribute == "education") return to_string(profile.education);
    if (attribute == "employed") return profile.employed ? "true" : "false";
    if (attribute == "drug_use") return profile.drug_use ? "true" : "false";
    if (attribute == "gang_exposed") return profile.gang_exposed ? "true" : "false";
    if (attribute == "religion") return profile.religion.empty() ? "none" : profile.religion;
    if (attribute == "immigrant") return profile.immigrant ? "true" : "false";
    throw ValueError("unknown subgroup attribute: " + attribute);
}

} // namespace

std::string punishment_level_label(std::optional<int> level) {
    return level ? std::to_string(*level) : "baseline";
}

std::map<std::string, SubgroupCell> subgroup_rates(const std::vector<DecisionRecord>& records,
                                                   const std::vector<AgentProfile>& population,
                                                   const std::string& attribute) {
    std::map<std::string, const AgentProfile*> by_id;
    for (const auto& profile : population) by_id[profile.agent_id] = &profile;

    std::map<std::string, SubgroupCell> table;
    for (const auto& record : records) {
        if (!record.chosen_option) continue;
        auto it = by_id.find(record.agent_id);
        if (it == by_id.end()) {
            throw ValueError("decision record references unknown agent " + record.agent_id);
        }
        auto& cell = table[attribute_value(*it->second, attribute)];
        ++cell.n;
        if (record.is_crime) ++cell.n_crime;
    }
    for (auto& [value, cell] : table) {
        cell.rate = cell.n == 0 ? 0.0
                                : static_cast<double>(cell.n_crime) / static_cast<double>(cell.n);
    }
    return table;
}

CrimeRateReport compute_report(const Scene& scene, const std::vector<AgentProfile>& population,
                               const std::vector<DecisionRecord>& records,
                               nlohmann::json metadata) {
    CrimeRateReport report;
    report.scene_id = scene.scene_id;
    report.n_total = records.size();
    for (const auto& record : records) {
        if (record.chosen_option) {
            ++report.n_decided;
            if (record.is_crime) ++report.n_crime;
        } else {
            ++report.unparsed_count;
        }
    }
    report.crime_rate = report.n_decided == 0 ? 0.0
                                              : static_cast<double>(report.n_crime) /
                                                    static_cast<double>(report.n_decided);
    for (const char* attribute : kSubgroupAttributes) {
        report.subgroup_rates[attribute] = subgroup_rates(records, population, attribute);
    }
    report.metadata = std::move(metadata);
    return report;
}

MacroRunResult run_macro(const MacroRunSpec& spec) {
    if (spec.population_size < 1) {
        throw ConfigError("macro run needs population_size >= 1");
    }
    validate_scene(spec.scene);

    SamplingConfig sampling = spec.sampling;
    sampling.seed = spec.seed;
    sampling.population_size = spec.population_size;

    MacroRunResult result;
    result.population = generate_population(spec.country, sampling);

    const auto backend = make_backend(spec.backend);
    const std::string level = punishment_level_label(spec.punishment_level);

    PromptRenderConfig prompt_cfg = spec.prompt;
    prompt_cfg.include_punishment_impression = spec.punishment_level.has_value();
    prompt_cfg.punishment_level = spec.punishment_level;

    const nlohmann::json scene_json = scene_to_json(spec.scene);
    std::vector<DecisionRequest> requests;
    requests.reserve(result.population.size());
    for (const auto& profile : result.population) {
        DecisionRequest request;
        request.request_id = fmt::format("{}-{}-{}", spec.scene.scene_id, level, profile.agent_id);
        request.prompt = render_decision_prompt(describe_self(profile, sampling, &spec.country),
                                                spec.scene, prompt_cfg);
        request.num_options = spec.scene.options.size();
        request.metadata = {
            {"profile", profile_to_json(profile)},
            {"scene", scene_json},
            {"punishment_level",
             spec.punishment_level ? nlohmann::json(*spec.punishment_level) : nlohmann::json()},
        };
        requests.push_back(std::move(request));
    }

    const auto responses = decide_batch(requests, *backend, spec.backend.max_concurrency);

    result.records.reserve(responses.size());
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const auto& response = responses[i];
        DecisionRecord record;
        record.request_id = requests[i].request_id;
        record.agent_id = result.population[i].agent_id;
        record.scene_id = spec.scene.scene_id;
        record.backend_id = backend->backend_id();
        if (response.ok) {
            record.raw_text = response.text;
            try {
                record.chosen_option = parse_choice(response.text, spec.scene.options.size());
                record.is_crime = spec.scene.is_illegal(*record.chosen_option);
            } catch (const Error&) {
                record.chosen_option.reset();
            }
        } else {
            record.raw_text = "[backend error] " + response.error;
        }
        result.records.push_back(std::move(record));
    }

    nlohmann::json metadata = {
        {"country_id", spec.country.country_id},
        {"scene_id", spec.scene.scene_id},
        {"punishment_level", level},
        {"seed", spec.seed},
        {"population_size", spec.population_size},
        {"backend_id", backend->backend_id()},
        {"rate_basis",
         "per-decision fraction of parsed responses; not a per-capita-per-year figure"},
    };
    if (spec.extra_metadata.is_object()) {
        for (const auto& [key, value] : spec.extra_metadata.items()) metadata[key] = value;
    }
    result.report = compute_report(spec.scene, result.population, result.records, metadata);

    if (!spec.output_dir.empty()) {
        const std::filesystem::path dir = spec.output_dir;
        write_decisions_jsonl((dir / "decisions.jsonl").string(), result.records);
        write_text_file(dir / "report.json", report_to_json(result.report).dump(2) + "\n");
    }
    return result;
}

std::vector<CrimeRateReport> punishment_sweep(const MacroRunSpec& base,
                                              const std::vector<std::optional<int>>& levels) {
    if (levels.empty()) {
        throw ConfigError("punishment sweep needs at least one level");
    }
    std::vector<CrimeRateReport> reports;
    reports.reserve(levels.size());
    for (const auto& level : levels) {
        MacroRunSpec spec = base;
        spec.punishment_level = level;
        if (!base.output_dir.empty()) {
            spec.output_dir =
                (std::filesystem::path(base.output_dir) / ("level_" + punishment_level_label(level)))
                    .string();
        }
        reports.push_back(run_macro(spec).report);
    }
    if (!base.output_dir.empty()) {
        write_text_file(std::filesystem::path(base.output_dir) / "sweep.csv", sweep_csv(reports));
    }
    return reports;
}

std::string sweep_csv(const std::vector<CrimeRateReport>& reports) {
    std::string csv = "level,crime_rate,n\n";
    for (const auto& report : reports) {
        const std::string level = report.metadata.contains("punishment_level")
                                      ? report.metadata.at("punishment_level").get<std::string>()
                                      : "baseline";
        csv += fmt::format("{},{:.6f},{}\n", level, report.crime_rate, report.n_decided);
    }
    return csv;
}

nlohmann::json report_to_json(const CrimeRateReport& report) {
    nlohmann::json subgroups = nlohmann::json::object();
    for (const auto& [attribute, table] : report.subgroup_rates) {
        nlohmann::json rows = nlohmann::json::object();
        for (const auto& [value, cell] : table) {
            rows[value] = {
                {"n", cell.n},
                {"n_crime", cell.n_crime},
                {"rate", cell.rate},
            };
        }
        subgroups[attribute] = std::move(rows);
    }
    return nlohmann::json{
        {"scene_id", report.scene_id},
        {"n_total", report.n_total},
        {"n_decided", report.n_decided},
        {"n_crime", report.n_crime},
        {"crime_rate", report.crime_rate},
        {"unparsed_count", report.unparsed_count},
        {"subgroup_rates", std::move(subgroups)},
        {"metadata", report.metadata},
    };
}

CrimeRateReport report_from_json(const nlohmann::json& j) {
    CrimeRateReport report;
    report.scene_id = j.at("scene_id").get<std::string>();
    report.n_total = j.at("n_total").get<std::size_t>();
    report.n_decided = j.at("n_decided").get<std::size_t>();
    report.n_crime = j.at("n_crime").get<std::size_t>();
    report.crime_rate = j.at("crime_rate").get<double>();
    report.unparsed_count = j.at("unparsed_count").get<std::size_t>();
    for (const auto& [attribute, rows] : j.at("subgroup_rates").items()) {
        for (const auto& [value, cell] : rows.items()) {
            SubgroupCell parsed;
            parsed.n = cell.at("n").get<std::size_t>();
            parsed.n_crime = cell.at("n_crime").get<std::size_t>();
            parsed.rate = cell.at("rate").get<double>();
            report.subgroup_rates[attribute][value] = parsed;
        }
    }
    report.metadata = j.value("metadata", nlohmann::json::object());
    return report;
}

void write_decisions_jsonl(const std::string& path, const std::vector<DecisionRecord>& records) {
    std::string out;
    for (const auto& record : records) {
        out += decision_record_to_json(record).dump();
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<DecisionRecord> read_decisions_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open decision log: " + path);
    }
    std::vector<DecisionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(decision_record_from_json(nlohmann::json::parse(line)));
    }
    return records;
}

} // namespace lawsim
