// Command line front end for the simulation library. Three subcommands:
//   macro   seeded population crime-decision experiments, single level or sweep
//   micro   repeated company-and-laborers trials under a named preset
//   report  re-aggregate the statistics of an existing micro run directory
// Exit status is nonzero only for configuration problems; backend failures
// during a run degrade to logged fallbacks instead of aborting.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"

#include "lawsim/decision.hpp"
#include "lawsim/errors.hpp"
#include "lawsim/harness.hpp"
#include "lawsim/json_util.hpp"
#include "lawsim/macro_sim.hpp"
#include "lawsim/micro_world.hpp"
#include "lawsim/population.hpp"
#include "lawsim/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RemoteFlags {
    std::string endpoint;
    std::string model;
    std::string api_key_env; // name of the env var holding the key, never the key
    int max_concurrency = 4;
    int retry_limit = 3;
    int timeout_ms = 30000;
};

lawsim::BackendConfig remote_config(const RemoteFlags& flags) {
    lawsim::BackendConfig cfg;
    cfg.kind = lawsim::BackendKind::remote_chat;
    cfg.endpoint_url = flags.endpoint;
    cfg.model_name = flags.model;
    cfg.api_key_env_var = flags.api_key_env;
    cfg.max_concurrency = flags.max_concurrency;
    cfg.retry_limit = flags.retry_limit;
    cfg.timeout = std::chrono::milliseconds(flags.timeout_ms);
    return cfg;
}

// "scripted:<policy>" runs the named policy table (or a rules file path);
// "remote" talks to the configured chat-completion endpoint.
lawsim::BackendConfig macro_backend_config(const std::string& spec,
                                           const RemoteFlags& flags) {
    if (spec.rfind("scripted:", 0) == 0) {
        lawsim::BackendConfig cfg;
        cfg.kind = lawsim::BackendKind::scripted;
        cfg.scripted_policy = spec.substr(std::string("scripted:").size());
        if (cfg.scripted_policy.empty())
            throw lawsim::ValueError("scripted backend needs a policy name");
        return cfg;
    }
    if (spec == "remote") {
        if (flags.endpoint.empty())
            throw lawsim::ValueError("remote backend needs --endpoint");
        return remote_config(flags);
    }
    throw lawsim::ValueError(fmt::format(
        "unknown backend '{}'; expected scripted:<policy> or remote", spec));
}

// Accepts a literal file path or a short name resolved under the data dir.
std::string resolve_input_file(const std::string& value, const std::string& data_dir,
                               const char* subdir) {
    if (fs::exists(value) && fs::is_regular_file(value)) return value;
    fs::path candidate = fs::path(data_dir) / subdir / (value + ".json");
    if (fs::exists(candidate)) return candidate.string();
    throw lawsim::ValueError(fmt::format("cannot find '{}' as a file or as {}/{}/{}.json",
                                         value, data_dir, subdir, value));
}

std::string file_hash_hex(const std::string& path) {
    return fmt::format("{:016x}", lawsim::fnv1a_file(path));
}

std::optional<int> parse_level_flag(const std::string& level, bool& sweep) {
    sweep = false;
    if (level.empty()) return std::nullopt; // baseline: no impression block
    if (level == "sweep") {
        sweep = true;
        return std::nullopt;
    }
    try {
        std::size_t pos = 0;
        int v = std::stoi(level, &pos);
        if (pos == level.size() && v >= 0 && v <= 5) return v;
    } catch (const std::exception&) {
    }
    throw lawsim::ValueError(
        fmt::format("--level must be 0..5 or 'sweep', got '{}'", level));
}

void print_report_line(const lawsim::CrimeRateReport& report, const std::string& label) {
    std::cout << fmt::format(
        "level {:>8}  crime rate {:.4f}  ({} offenders / {} decided, {} unparsed)\n",
        label, report.crime_rate, report.n_crime, report.n_decided,
        report.unparsed_count);
}

struct MacroArgs {
    std::string country;
    std::string scene;
    std::string level;
    std::size_t population = 100;
    std::uint64_t seed = 0;
    std::string backend = "scripted:level_deterrent";
    std::string out;
    std::string data_dir = LAWSIM_DEFAULT_DATA_DIR;
    RemoteFlags remote;
};

int run_macro_command(const MacroArgs& args) {
    bool sweep = false;
    std::optional<int> level = parse_level_flag(args.level, sweep);

    std::string country_path = resolve_input_file(args.country, args.data_dir, "countries");
    std::string scene_path = resolve_input_file(args.scene, args.data_dir, "scenes");

    lawsim::MacroRunSpec spec;
    spec.country = lawsim::load_country_stats_file(country_path);
    spec.scene = lawsim::load_scene_file(scene_path);
    spec.punishment_level = level;
    spec.population_size = args.population;
    spec.seed = args.seed;
    spec.backend = macro_backend_config(args.backend, args.remote);
    spec.output_dir = args.out;

    std::vector<std::optional<int>> sweep_levels;
    if (sweep) {
        sweep_levels.push_back(std::nullopt);
        for (int l = 0; l <= 5; ++l) sweep_levels.push_back(l);
    }

    if (!args.out.empty()) {
        fs::create_directories(args.out);
        // reproducibility record goes to disk before the first decision request
        std::string backend_id = lawsim::make_backend(spec.backend)->backend_id();
        json levels = json::array();
        if (sweep)
            for (const auto& l : sweep_levels)
                levels.push_back(lawsim::punishment_level_label(l));
        json manifest = {
            {"kind", sweep ? "macro_sweep" : "macro"},
            {"country", spec.country.country_id},
            {"scene", spec.scene.scene_id},
            {"level",
             sweep ? json(levels) : json(lawsim::punishment_level_label(level))},
            {"population_size", args.population},
            {"seed", args.seed},
            {"backend", backend_id},
            {"backend_spec", args.backend},
            {"data_files",
             {{country_path, file_hash_hex(country_path)},
              {scene_path, file_hash_hex(scene_path)}}},
        };
        manifest["config_hash"] = fmt::format("{:016x}", lawsim::fnv1a(manifest.dump()));
        lawsim::write_text_file(args.out + "/manifest.json", manifest.dump(2) + "\n");
    }

    std::cout << fmt::format("country {}  scene {}  n {}  seed {}\n",
                             spec.country.country_id, spec.scene.scene_id,
                             args.population, args.seed);
    if (sweep) {
        std::vector<lawsim::CrimeRateReport> reports =
            lawsim::punishment_sweep(spec, sweep_levels);
        for (std::size_t i = 0; i < reports.size(); ++i)
            print_report_line(reports[i],
                              lawsim::punishment_level_label(sweep_levels[i]));
        if (!args.out.empty())
            std::cout << "wrote " << args.out << "/sweep.csv\n";
    } else {
        lawsim::MacroRunResult result = lawsim::run_macro(spec);
        print_report_line(result.report, lawsim::punishment_level_label(level));
        if (!args.out.empty())
            std::cout << "wrote " << args.out << "/decisions.jsonl and report.json\n";
    }
    return 0;
}

void print_trial_stats(const lawsim::TrialStats& stats) {
    if (!stats.welfare_by_turn.empty()) {
        const lawsim::MeanSd& last = stats.welfare_by_turn.back();
        std::cout << fmt::format("final turn welfare {:.4f} +/- {:.4f} over {} trials\n",
                                 last.mean, last.sd, stats.trials);
    }
    for (const auto& [name, ms] : stats.event_counts)
        std::cout << fmt::format("{:<20} {:.2f} +/- {:.2f} per trial\n", name, ms.mean,
                                 ms.sd);
}

struct MicroArgs {
    std::string preset;
    int trials = 1;
    std::uint64_t seed = 0;
    std::string backend = "scripted:baseline";
    std::string out;
    std::string config_path;
    std::string data_dir = LAWSIM_DEFAULT_DATA_DIR;
    RemoteFlags remote;
};

int run_micro_command(const MicroArgs& args) {
    lawsim::MicroRunSpec spec;
    spec.preset = lawsim::preset_from_string(args.preset);
    if (!args.config_path.empty())
        spec.config = lawsim::MicroConfig::from_json(lawsim::read_json_file(args.config_path));
    spec.trials = args.trials;
    spec.seed = args.seed;
    spec.backend_spec = args.backend;
    if (args.backend == "remote") {
        if (args.remote.endpoint.empty())
            throw lawsim::ValueError("remote backend needs --endpoint");
        spec.remote = remote_config(args.remote);
    }
    spec.output_dir = args.out;
    spec.data_dir = args.data_dir;

    std::vector<std::string> dirs = lawsim::run_micro_trials(spec);
    std::cout << fmt::format("preset {}  trials {}  seed {}  turns {}\n", args.preset,
                             args.trials, args.seed, spec.config.total_turns());
    std::cout << "run dir " << args.out << "\n";
    print_trial_stats(lawsim::aggregate_trials(dirs));
    return 0;
}

int run_report_command(const std::string& run_dir) {
    fs::path manifest_path = fs::path(run_dir) / "manifest.json";
    if (!fs::exists(manifest_path))
        throw lawsim::ValueError(fmt::format("{} has no manifest.json", run_dir));
    json manifest = lawsim::read_json_file(manifest_path);
    if (manifest.value("kind", "") != "micro_trials")
        throw lawsim::ValueError(
            "report works on micro run directories (manifest kind micro_trials)");

    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        std::string name = entry.path().filename().string();
        if (entry.is_directory() && name.rfind("trial_", 0) == 0)
            dirs.push_back(entry.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty())
        throw lawsim::ValueError(fmt::format("{} has no trial_* directories", run_dir));

    lawsim::TrialStats stats = lawsim::aggregate_trials(dirs);
    lawsim::write_text_file(run_dir + std::string("/stats.json"),
                            lawsim::trial_stats_to_json(stats).dump(2) + "\n");
    lawsim::write_text_file(run_dir + std::string("/mean_sd.csv"),
                            lawsim::mean_sd_csv(stats));

    std::cout << fmt::format("preset {}  trials found {}\n",
                             manifest.value("preset", std::string("?")), dirs.size());
    print_trial_stats(stats);
    std::cout << "rewrote stats.json and mean_sd.csv\n";
    return 0;
}

void add_remote_flags(CLI::App* cmd, RemoteFlags& flags) {
    cmd->add_option("--endpoint", flags.endpoint,
                    "chat-completion endpoint URL for --backend remote");
    cmd->add_option("--model", flags.model, "model name sent to the endpoint");
    cmd->add_option("--api-key-env", flags.api_key_env,
                    "environment variable that holds the API key");
    cmd->add_option("--max-concurrency", flags.max_concurrency,
                    "parallel requests in flight");
    cmd->add_option("--retry-limit", flags.retry_limit, "retries per request");
    cmd->add_option("--timeout-ms", flags.timeout_ms, "per-request timeout");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"legal society simulation toolkit"};
    app.require_subcommand(1);

    MacroArgs macro_args;
    CLI::App* macro = app.add_subcommand(
        "macro", "population crime-decision experiment at punishment levels");
    macro->add_option("--country", macro_args.country,
                      "country statistics file or short name")
        ->required();
    macro->add_option("--scene", macro_args.scene, "scene file or short name")->required();
    macro->add_option("--level", macro_args.level,
                      "punishment level 0..5, 'sweep', or omit for baseline");
    macro->add_option("--n", macro_args.population, "population size");
    macro->add_option("--seed", macro_args.seed, "population seed");
    macro->add_option("--backend", macro_args.backend,
                      "scripted:<policy> or remote");
    macro->add_option("--out", macro_args.out, "output directory");
    macro->add_option("--data-dir", macro_args.data_dir, "data directory");
    add_remote_flags(macro, macro_args.remote);

    MicroArgs micro_args;
    CLI::App* micro = app.add_subcommand(
        "micro", "company-and-laborers trials under a named preset");
    micro->add_option("--preset", micro_args.preset,
                      "pre_legal, evolving, corruption, initialized, high_litigation, "
                      "pro_company, pro_laborer, perception_positive, perception_negative")
        ->required();
    micro->add_option("--trials", micro_args.trials, "independent trials");
    micro->add_option("--seed", micro_args.seed, "base seed; trial i uses seed+i");
    micro->add_option("--backend", micro_args.backend,
                      "scripted:baseline, scripted:exploit, or remote");
    micro->add_option("--out", micro_args.out, "run directory")->required();
    micro->add_option("--config", micro_args.config_path,
                      "JSON config overriding the simulation constants");
    micro->add_option("--data-dir", micro_args.data_dir, "data directory");
    add_remote_flags(micro, micro_args.remote);

    std::string report_dir;
    CLI::App* report = app.add_subcommand(
        "report", "re-aggregate statistics for an existing micro run directory");
    report->add_option("--run", report_dir, "micro run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (macro->parsed()) return run_macro_command(macro_args);
        if (micro->parsed()) return run_micro_command(micro_args);
        if (report->parsed()) return run_report_command(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
