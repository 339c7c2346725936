#include "lawsim/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <utility>

#include <fmt/format.h>

#include "lawsim/errors.hpp"
#include "lawsim/game_master.hpp"
#include "lawsim/json_util.hpp"
#include "lawsim/legal_system.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lawsim {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool contains_ci(const std::string& text, const std::string& needle) {
    return lower(text).find(needle) != std::string::npos;
}

// Fallback perception sentences when no data directory is supplied.
const char* kPositivePerception =
    "You believe the law in this town works. Courts hear cases quickly, judges "
    "apply the written rules evenly to the company and to laborers alike, and "
    "past rulings have actually been paid out. When something unfair happens to "
    "you, filing a lawsuit is a realistic and effective way to get it corrected.";
const char* kNegativePerception =
    "You believe the law in this town is incapable of protecting the weak. Court "
    "procedures drag on for months, the fees pile up, and in the end the company "
    "always seems to win. Whatever the written rules say, filing a lawsuit feels "
    "like an expensive way to change nothing.";

std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

// Relative paths under the data dir a preset consults, in load order.
std::vector<std::string> consulted_data_files(const ExperimentPreset& preset,
                                              const std::string& data_dir) {
    std::vector<std::string> out;
    if (data_dir.empty()) return out;
    auto add = [&](const std::string& rel) {
        if (fs::exists(fs::path(data_dir) / rel)) out.push_back(rel);
    };
    if (preset.start_with_stock_laws) add("laws/initialized.json");
    if (preset.perception == Perception::positive) add("perception/positive.txt");
    if (preset.perception == Perception::negative) add("perception/negative.txt");
    add("gm_impact_map.json");
    return out;
}

} // namespace

std::string to_string(PresetId id) {
    switch (id) {
    case PresetId::pre_legal: return "pre_legal";
    case PresetId::evolving: return "evolving";
    case PresetId::corruption: return "corruption";
    case PresetId::initialized: return "initialized";
    case PresetId::high_litigation: return "high_litigation";
    case PresetId::pro_company: return "pro_company";
    case PresetId::pro_laborer: return "pro_laborer";
    case PresetId::perception_positive: return "perception_positive";
    case PresetId::perception_negative: return "perception_negative";
    }
    return "initialized";
}

PresetId preset_from_string(const std::string& s) {
    for (PresetId id : all_presets())
        if (to_string(id) == s) return id;
    throw ValueError(fmt::format("unknown preset '{}'", s));
}

const std::vector<PresetId>& all_presets() {
    static const std::vector<PresetId> ids = {
        PresetId::pre_legal,           PresetId::evolving,
        PresetId::corruption,          PresetId::initialized,
        PresetId::high_litigation,     PresetId::pro_company,
        PresetId::pro_laborer,         PresetId::perception_positive,
        PresetId::perception_negative,
    };
    return ids;
}

ExperimentPreset resolve_preset(PresetId id) {
    ExperimentPreset p;
    p.id = id;
    switch (id) {
    case PresetId::pre_legal:
        p.legal.enabled = false;
        break;
    case PresetId::evolving:
        break;
    case PresetId::corruption:
        p.legal.corruption_probability = 0.7;
        break;
    case PresetId::initialized:
        p.start_with_stock_laws = true;
        break;
    case PresetId::high_litigation:
        p.start_with_stock_laws = true;
        p.legal.litigation_fee = 200.0;
        p.legal.litigation_counts_as_absence = true;
        break;
    case PresetId::pro_company:
        p.start_with_stock_laws = true;
        p.legal.bias = CourtBias::pro_company;
        break;
    case PresetId::pro_laborer:
        p.start_with_stock_laws = true;
        p.legal.bias = CourtBias::pro_laborer;
        break;
    case PresetId::perception_positive:
        p.start_with_stock_laws = true;
        p.perception = Perception::positive;
        break;
    case PresetId::perception_negative:
        p.start_with_stock_laws = true;
        p.perception = Perception::negative;
        break;
    }
    return p;
}

WorldInit world_init_for_preset(const ExperimentPreset& preset, std::uint64_t seed,
                                const std::string& data_dir) {
    WorldInit init;
    init.seed = seed;
    init.perception = preset.perception;
    init.legal = preset.legal;
    init.positive_perception_text = kPositivePerception;
    init.negative_perception_text = kNegativePerception;

    auto path_of = [&](const char* rel) { return fs::path(data_dir) / rel; };
    if (preset.start_with_stock_laws) {
        auto laws_path = data_dir.empty() ? fs::path() : path_of("laws/initialized.json");
        init.initial_laws = (!laws_path.empty() && fs::exists(laws_path))
                                ? load_law_registry_file(laws_path.string())
                                : builtin_initialized_laws();
    }
    if (!data_dir.empty()) {
        if (auto p = path_of("perception/positive.txt"); fs::exists(p))
            init.positive_perception_text = trim(read_text_file(p));
        if (auto p = path_of("perception/negative.txt"); fs::exists(p))
            init.negative_perception_text = trim(read_text_file(p));
        if (auto p = path_of("gm_impact_map.json"); fs::exists(p))
            init.impact_table = read_json_file(p);
    }
    return init;
}

namespace {

std::string wrap_action(const std::string& think, const std::string& action) {
    return "<response><think>" + think + "</think><action>" + action +
           "</action></response>";
}

std::string neutral_fact() {
    json j = {{"narrative", "Routine operations continue."},
              {"economic_impact", {{"company", "No Impact"}, {"laborers", "No Impact"}}},
              {"welfare_impact", "Unchanged."},
              {"legal_risk", {{"level", "No Risk"}, {"reason", "Nothing unusual."}}}};
    return j.dump();
}

std::string strike_fact() {
    json j = {{"narrative", "A work stoppage interrupts part of the production line."},
              {"economic_impact",
               {{"company", "Moderate Loss"}, {"laborers", "Minor Loss"}}},
              {"welfare_impact", "Striking laborers forfeit pay for the turn."},
              {"legal_risk",
               {{"level", "High Risk"},
                {"reason", "Open labor conflict invites litigation."}}}};
    return j.dump();
}

// Mirror of the deterministic work-status rulebook.
std::string echo_work_status(const json& md) {
    json reasoning = json::array();
    json not_working = json::array();
    for (const auto& a : md.value("actions", json::array())) {
        std::string id = a.value("laborer_id", "");
        std::string action = a.value("action", "");
        IntentClassification c = classify_intent(action);
        reasoning.push_back({{"laborer_id", id},
                             {"action", action},
                             {"analysis", "Matched against the declared-action rulebook."},
                             {"status", c.working ? "WORKING" : "NOT WORKING"}});
        if (!c.working) not_working.push_back(id);
    }
    return json{{"reasoning", reasoning}, {"not_working", not_working}}.dump();
}

std::string acquittal(const std::string& why) {
    json j = {{"reasoning_steps", why},
              {"verdict", "not_guilty"},
              {"justification", why},
              {"applicable_law", nullptr},
              {"calculation_steps", ""},
              {"penalty", 0},
              {"compensation", 0}};
    return j.dump();
}

enum class LawTopic { wage, overtime, safety, unknown };

LawTopic topic_of(const std::string& law_id, const json& entry) {
    std::string id = lower(law_id);
    if (id.find("wage") != std::string::npos) return LawTopic::wage;
    if (id.find("work") != std::string::npos) return LawTopic::overtime;
    if (id.find("safe") != std::string::npos) return LawTopic::safety;
    std::string desc = lower(entry.value("description", std::string()));
    if (desc.find("overtime") != std::string::npos || desc.find("hour") != std::string::npos)
        return LawTopic::overtime;
    if (desc.find("wage") != std::string::npos) return LawTopic::wage;
    if (desc.find("safety") != std::string::npos) return LawTopic::safety;
    return LawTopic::unknown;
}

// Statute-book arithmetic against the stock labor floors: wage 30 per hour,
// overtime at 150% past 40 weekly hours, 500 per month on safety.
std::string mechanical_verdict(const json& md) {
    const json laws = md.value("laws", json::object());
    const json contract = md.value("contract", json());
    const json suit = md.value("suit", json::object());
    const bool has_contract = contract.is_object() && !contract.empty();
    const double wage = has_contract ? contract.value("wage", 0.0) : 0.0;
    const double weekly_hours = has_contract ? contract.value("weekly_hours", 0.0) : 0.0;
    const double ot_multiplier = has_contract ? contract.value("overtime_multiplier", 1.5) : 1.5;
    const double safety = md.value("safety", 0.0);
    const double weeks = md.value("weeks_per_turn", 2.0);
    const std::string reason = lower(suit.value("reason", std::string()));

    const bool reason_wage = reason.find("wage") != std::string::npos ||
                             reason.find("pay") != std::string::npos;
    const bool reason_overtime = reason.find("overtime") != std::string::npos ||
                                 reason.find("hour") != std::string::npos;
    const bool reason_safety = reason.find("safety") != std::string::npos ||
                               reason.find("unsafe") != std::string::npos;
    const bool reason_names_topic = reason_wage || reason_overtime || reason_safety;

    for (const auto& [law_id, entry] : laws.items()) {
        LawTopic topic = topic_of(law_id, entry);
        double shortfall = 0.0;
        bool violated = false;
        switch (topic) {
        case LawTopic::wage:
            if (has_contract && wage < 30.0) {
                violated = true;
                shortfall = (30.0 - wage) * weekly_hours * weeks;
            }
            break;
        case LawTopic::overtime:
            if (has_contract && weekly_hours > 40.0 && ot_multiplier < 1.5) {
                violated = true;
                shortfall = (1.5 - ot_multiplier) * wage * (weekly_hours - 40.0) * weeks;
            }
            break;
        case LawTopic::safety:
            if (safety < 500.0) {
                violated = true;
                shortfall = 500.0 - safety;
            }
            break;
        default: break;
        }
        if (!violated) continue;
        if (reason_names_topic &&
            !((topic == LawTopic::wage && reason_wage) ||
              (topic == LawTopic::overtime && reason_overtime) ||
              (topic == LawTopic::safety && reason_safety)))
            continue;

        std::map<std::string, double> bases = {
            {"shortfall", shortfall},          {"wage", wage},
            {"hours", weekly_hours},           {"safety_investment", safety},
            {"violation_turns", 1.0},
        };
        LawPeriod period = entry.value("period", std::string("per_violation")) ==
                                   "per_action_turn"
                               ? LawPeriod::per_action_turn
                               : LawPeriod::per_violation;
        auto amount_of = [&](const char* field) {
            try {
                return evaluate_money_expr(parse_money_expr(entry.value(field, json())),
                                           period, bases);
            } catch (const std::exception&) {
                return 0.0;
            }
        };
        double penalty = amount_of("penalty");
        double compensation = amount_of("compensation");
        json v = {{"reasoning_steps",
                   fmt::format("Checked {} against the contract on record; the standard "
                               "is not met.",
                               law_id)},
                  {"verdict", "guilty"},
                  {"justification",
                   fmt::format("The facts violate {} with a shortfall of {:.2f}.", law_id,
                               shortfall)},
                  {"applicable_law", law_id},
                  {"calculation_steps",
                   fmt::format("shortfall = {:.2f}; clauses of {} applied to it.",
                               shortfall, law_id)},
                  {"penalty", penalty},
                  {"compensation", compensation}};
        return v.dump();
    }
    return acquittal("No statute on the books covers a proven violation here.");
}

std::string empty_legislation() {
    json j = {{"analysis_summary",
               {{"most_frequent_violations", json::array()},
                {"identified_problems", json::array()}}},
              {"changes", json::array()}};
    return j.dump();
}

// Turns a structured clause back into text the statute parser accepts.
std::string base_phrase(const std::string& base) {
    if (base == "shortfall") return "shortfall";
    if (base == "safety_investment") return "safety investment";
    if (base == "company_profit") return "company profit";
    if (base == "wage") return "wage";
    if (base == "hours") return "work hours";
    if (base == "violation_turns") return "violation turns";
    return base;
}

// Reactive lawmaking: create a minimum wage statute once complaints hit an
// empty book, and double the penalty of any law convicted twice in a month.
std::string reactive_legislation(const json& md) {
    const json summary = md.value("summary", json::object());
    const json laws = md.value("laws", json::object());
    const json guilty_counts = summary.value("guilty_counts", json::object());
    const int total = summary.value("total_lawsuits", 0);

    std::string worst_law;
    int worst_count = 0;
    for (const auto& [law_id, count] : guilty_counts.items()) {
        int n = count.is_number() ? count.get<int>() : 0;
        if (n > worst_count && laws.contains(law_id)) {
            worst_count = n;
            worst_law = law_id;
        }
    }

    json changes = json::array();
    json problems = json::array();
    if (worst_count >= 2) {
        const json& entry = laws[worst_law];
        MoneyExpr penalty = parse_money_expr(entry.value("penalty", json()));
        json new_penalty;
        if (penalty.kind == MoneyExprKind::fixed) {
            new_penalty = penalty.amount * 2.0;
        } else if (penalty.kind == MoneyExprKind::percent_of_base) {
            new_penalty = fmt::format("Pay a penalty of {:g}% of the {}.",
                                      penalty.percent * 2.0, base_phrase(penalty.base));
        }
        if (!new_penalty.is_null()) {
            problems.push_back({{"problem_type", "Deterrence Failure"},
                                {"details", fmt::format("{} drew {} convictions in one "
                                                        "month.",
                                                        worst_law, worst_count)}});
            changes.push_back(
                {{"action", "AMEND"},
                 {"law_code", worst_law},
                 {"justification",
                  "The current sanction has not deterred repeat violations."},
                 {"content",
                  {{"penalty", new_penalty},
                   {"compensation", entry.value("compensation", json())},
                   {"period", entry.value("period", "per_violation")}}}});
        }
    } else if (total > 0 && laws.empty()) {
        problems.push_back({{"problem_type", "Enforcement Gap"},
                            {"details", "Complaints were filed but no statute exists to "
                                        "adjudicate them."}});
        changes.push_back(
            {{"action", "CREATE"},
             {"law_code", "LAW_WAGE_01"},
             {"justification", "Wage complaints keep arriving with no law to apply."},
             {"content",
              {{"description",
                "The hourly wage paid by the company to a laborer must not be less "
                "than the established minimum wage standard (30)."},
               {"penalty", "Pay a penalty of 200% of the wage shortfall."},
               {"compensation", "Pay the laborer the full amount of the wage shortfall."},
               {"period", "per_violation"}}}});
    }

    json violations = json::array();
    if (!worst_law.empty())
        violations.push_back(
            {{"law_code", worst_law}, {"violation_count", worst_count}});
    json j = {{"analysis_summary",
               {{"most_frequent_violations", violations},
                {"identified_problems", problems}}},
              {"changes", changes}};
    return j.dump();
}

} // namespace

ScriptedMicroBackend::ScriptedMicroBackend(std::string persona)
    : persona_(std::move(persona)) {
    if (persona_ != "baseline" && persona_ != "exploit")
        throw ValueError(fmt::format("unknown scripted persona '{}'", persona_));
}

std::string ScriptedMicroBackend::backend_id() const {
    return "scripted-micro:" + persona_;
}

BackendResponse ScriptedMicroBackend::complete(const DecisionRequest& request) {
    BackendResponse resp;
    resp.request_id = request.request_id;
    resp.ok = true;
    resp.attempts = 1;
    const json& md = request.metadata;
    const std::string role = md.value("role", std::string());
    const bool exploit = persona_ == "exploit";

    if (role == "company_action") {
        if (exploit && md.value("turn", 0) == 1) {
            resp.text = wrap_action(
                "Labor is the largest line item and no one is watching.",
                "Cut the hourly wage to $24 and reduce the safety investment to 300.");
        } else {
            resp.text = wrap_action("Hold steady.", "Continue normal operations.");
        }
        return resp;
    }
    if (role == "laborer_action") {
        const std::string actor = md.value("actor", std::string());
        const double wage = md.value("wage", 0.0);
        const double cash = md.value("cash", 0.0);
        const double fee = md.value("litigation_fee", 0.0);
        if (exploit && wage < 30.0) {
            if (actor == "Laborer-1" && cash >= fee) {
                resp.text = wrap_action(
                    "The pay stub is below the legal floor; the court should fix this.",
                    "I am filing a lawsuit against the company for paying below the "
                    "minimum wage standard.");
            } else if (actor == "Laborer-2") {
                resp.text = wrap_action(
                    "Pressure is the only language the company understands.",
                    "We are going on strike to protest the wage cut.");
            } else {
                resp.text = wrap_action("Cannot afford to lose this job.",
                                        "Continue normal work despite the wage cut.");
            }
        } else {
            resp.text = wrap_action("Steady work keeps the bills paid.",
                                    "Continue normal work.");
        }
        return resp;
    }
    if (role == "gm_fact") {
        const std::string action = md.value("action", std::string());
        if (exploit && (contains_ci(action, "strike") || contains_ci(action, "striking")))
            resp.text = strike_fact();
        else
            resp.text = neutral_fact();
        return resp;
    }
    if (role == "gm_work_status") {
        resp.text = echo_work_status(md);
        return resp;
    }
    if (role == "judge") {
        resp.text = exploit ? mechanical_verdict(md)
                            : acquittal("The complaint does not establish a violation.");
        return resp;
    }
    if (role == "legislator") {
        resp.text = exploit ? reactive_legislation(md) : empty_legislation();
        return resp;
    }
    resp.ok = false;
    resp.error = fmt::format("no scripted handler for role '{}'", role);
    return resp;
}

std::unique_ptr<DecisionBackend> make_micro_backend(const std::string& spec,
                                                    const BackendConfig& remote_template) {
    if (spec == "scripted:baseline")
        return std::make_unique<ScriptedMicroBackend>("baseline");
    if (spec == "scripted:exploit")
        return std::make_unique<ScriptedMicroBackend>("exploit");
    if (spec == "remote") {
        BackendConfig cfg = remote_template;
        cfg.kind = BackendKind::remote_chat;
        return make_backend(cfg);
    }
    throw ValueError(fmt::format(
        "unknown backend spec '{}'; expected scripted:baseline, scripted:exploit, or "
        "remote",
        spec));
}

namespace {

json legal_config_json(const LegalConfig& legal) {
    return {{"enabled", legal.enabled},
            {"corruption_probability", legal.corruption_probability},
            {"bias", to_string(legal.bias)},
            {"litigation_fee", legal.litigation_fee},
            {"litigation_counts_as_absence", legal.litigation_counts_as_absence},
            {"legislation_interval", legal.legislation_interval}};
}

} // namespace

json build_micro_manifest(const MicroRunSpec& spec, const std::string& backend_id) {
    ExperimentPreset preset = resolve_preset(spec.preset);
    json seeds = json::array();
    for (int i = 0; i < spec.trials; ++i) seeds.push_back(spec.seed + i);
    json data_files = json::object();
    for (const auto& rel : consulted_data_files(preset, spec.data_dir))
        data_files[rel] =
            fmt::format("{:016x}", fnv1a_file(fs::path(spec.data_dir) / rel));
    json config = spec.config.to_json();
    return {{"kind", "micro_trials"},
            {"preset", to_string(spec.preset)},
            {"trials", spec.trials},
            {"base_seed", spec.seed},
            {"seeds", seeds},
            {"config", config},
            {"config_hash", fmt::format("{:016x}", fnv1a(config.dump()))},
            {"backend", backend_id},
            {"backend_spec", spec.backend_spec},
            {"legal", legal_config_json(preset.legal)},
            {"perception", to_string(preset.perception)},
            {"data_files", data_files}};
}

namespace {

void run_one_trial(const MicroRunSpec& spec, const ExperimentPreset& preset, int index,
                   const std::string& trial_dir, DecisionBackend& backend) {
    WorldInit init = world_init_for_preset(preset, spec.seed + index, spec.data_dir);
    MicroWorldState world = init_world(spec.config, init);
    while (!world.finished) step_turn(world, backend);

    {
        std::ofstream out(trial_dir + "/events.jsonl", std::ios::binary);
        if (!out) throw ValueError(fmt::format("cannot write {}/events.jsonl", trial_dir));
        world.log.write_jsonl(out);
    }
    {
        std::ofstream out(trial_dir + "/welfare.csv", std::ios::binary);
        if (!out) throw ValueError(fmt::format("cannot write {}/welfare.csv", trial_dir));
        write_welfare_csv(world.log, out);
    }
    write_text_file(trial_dir + "/laws_final.json", world.registry.to_json().dump(2) + "\n");
}

} // namespace

std::vector<std::string> run_micro_trials(const MicroRunSpec& spec) {
    if (spec.trials < 1) throw ValueError("trial count must be at least 1");
    if (spec.output_dir.empty()) throw ValueError("output_dir must be set");
    fs::create_directories(spec.output_dir);

    ExperimentPreset preset = resolve_preset(spec.preset);
    std::unique_ptr<DecisionBackend> backend =
        make_micro_backend(spec.backend_spec, spec.remote);

    // The audit trail goes to disk before the first decision is requested.
    write_text_file(spec.output_dir + "/manifest.json",
                    build_micro_manifest(spec, backend->backend_id()).dump(2) + "\n");

    std::vector<std::string> trial_dirs;
    for (int i = 0; i < spec.trials; ++i) {
        std::string dir = fmt::format("{}/trial_{:03d}", spec.output_dir, i);
        fs::create_directories(dir);
        trial_dirs.push_back(std::move(dir));
    }

    // Trials are independent worlds; run them through a bounded thread window.
    unsigned window = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::exception_ptr> failures(spec.trials);
    for (int begin = 0; begin < spec.trials; begin += static_cast<int>(window)) {
        int end = std::min(spec.trials, begin + static_cast<int>(window));
        std::vector<std::thread> threads;
        for (int i = begin; i < end; ++i) {
            threads.emplace_back([&, i] {
                try {
                    run_one_trial(spec, preset, i, trial_dirs[i], *backend);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);

    TrialStats stats = aggregate_trials(trial_dirs);
    write_text_file(spec.output_dir + "/stats.json", trial_stats_to_json(stats).dump(2) + "\n");
    write_text_file(spec.output_dir + "/mean_sd.csv", mean_sd_csv(stats));
    return trial_dirs;
}

std::string to_string(EventClass c) {
    switch (c) {
    case EventClass::protest_sabotage: return "protest_sabotage";
    case EventClass::normal_work: return "normal_work";
    case EventClass::laborer_litigation: return "laborer_litigation";
    case EventClass::company_litigation: return "company_litigation";
    case EventClass::other: return "other";
    }
    return "other";
}

EventClass classify_event(const Event& event) {
    if (event.kind == "lawsuit_filed") {
        std::string plaintiff = event.payload.value("plaintiff_id", std::string());
        return plaintiff.rfind("Laborer", 0) == 0 ? EventClass::laborer_litigation
                                                  : EventClass::company_litigation;
    }
    if (event.kind == "work_status") {
        return event.payload.value("status", std::string()) == "NOT WORKING"
                   ? EventClass::protest_sabotage
                   : EventClass::normal_work;
    }
    return EventClass::other;
}

namespace {

MeanSd summarize(const std::vector<double>& values) {
    MeanSd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(var / static_cast<double>(values.size()));
    return out;
}

const std::vector<EventClass>& counted_classes() {
    static const std::vector<EventClass> classes = {
        EventClass::protest_sabotage,   EventClass::normal_work,
        EventClass::laborer_litigation, EventClass::company_litigation,
        EventClass::other,
    };
    return classes;
}

} // namespace

TrialStats aggregate_trials(const std::vector<std::string>& trial_dirs) {
    TrialStats stats;
    stats.trials = static_cast<int>(trial_dirs.size());

    // [trial] -> per-turn mean welfare over that trial's laborers
    std::vector<std::vector<double>> welfare;
    std::vector<std::map<std::string, double>> counts;
    std::size_t max_turns = 0;

    for (const auto& dir : trial_dirs) {
        std::ifstream in(dir + "/events.jsonl", std::ios::binary);
        if (!in) throw ValueError(fmt::format("cannot read {}/events.jsonl", dir));
        std::vector<Event> events = EventLog::read_jsonl(in);

        std::map<int, std::pair<double, int>> by_turn; // welfare sum, laborer count
        std::map<std::string, double> trial_counts;
        for (EventClass c : counted_classes()) trial_counts[to_string(c)] = 0.0;
        for (const auto& e : events) {
            if (e.kind == "welfare") {
                auto& [sum, n] = by_turn[e.turn];
                sum += e.payload.value("welfare", 0.0);
                ++n;
            }
            trial_counts[to_string(classify_event(e))] += 1.0;
        }
        trial_counts.erase(to_string(EventClass::other)); // bookkeeping noise
        counts.push_back(std::move(trial_counts));

        std::vector<double> means;
        for (const auto& [turn, acc] : by_turn) {
            (void)turn;
            means.push_back(acc.second > 0 ? acc.first / acc.second : 0.0);
        }
        max_turns = std::max(max_turns, means.size());
        welfare.push_back(std::move(means));
    }

    for (std::size_t t = 0; t < max_turns; ++t) {
        std::vector<double> vals;
        for (const auto& trial : welfare)
            if (t < trial.size()) vals.push_back(trial[t]);
        stats.welfare_by_turn.push_back(summarize(vals));
    }
    for (EventClass c : counted_classes()) {
        if (c == EventClass::other) continue;
        std::vector<double> vals;
        for (const auto& trial : counts) vals.push_back(trial.at(to_string(c)));
        stats.event_counts[to_string(c)] = summarize(vals);
    }
    return stats;
}

json trial_stats_to_json(const TrialStats& stats) {
    json turns = json::array();
    for (std::size_t i = 0; i < stats.welfare_by_turn.size(); ++i)
        turns.push_back({{"turn", i + 1},
                         {"mean", stats.welfare_by_turn[i].mean},
                         {"sd", stats.welfare_by_turn[i].sd}});
    json events = json::object();
    for (const auto& [name, ms] : stats.event_counts)
        events[name] = {{"mean", ms.mean}, {"sd", ms.sd}};
    return {{"trials", stats.trials},
            {"welfare_by_turn", turns},
            {"event_counts", events},
            {"notes",
             "events outside the four reported classes (negotiations, payroll, clock "
             "ticks) are classified as other and not counted"}};
}

std::string mean_sd_csv(const TrialStats& stats) {
    std::string out = "turn,welfare_mean,welfare_sd\n";
    for (std::size_t i = 0; i < stats.welfare_by_turn.size(); ++i)
        out += fmt::format("{},{:.4f},{:.4f}\n", i + 1, stats.welfare_by_turn[i].mean,
                           stats.welfare_by_turn[i].sd);
    return out;
}

} // namespace lawsim
