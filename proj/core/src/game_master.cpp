#include "lawsim/game_master.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lawsim/errors.hpp"
#include "lawsim/json_util.hpp"

namespace lawsim {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Marker phrases that turn a keyword into an announcement of a future action
// rather than the action itself.
const char* const kAnnouncementMarkers[] = {
    "will ",        "would ",      "may ",          "might ",       "could ",
    "plan to ",     "plans to ",   "planning to ",  "intend to ",   "intends to ",
    "intending to ", "threaten to ", "threatens to ", "threatening to ",
    "consider ",    "considering ", "about to ",    "thinking about ",
    "thinking of ",
};

struct TermMatch {
    bool found = false;     // the term occurs with word boundaries
    bool effective = false; // at least one occurrence is not a mere announcement
};

TermMatch match_term(const std::string& text, const std::string& term) {
    TermMatch m;
    std::size_t pos = 0;
    while ((pos = text.find(term, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !alnum(text[pos - 1]);
        std::size_t end = pos + term.size();
        bool right_ok = end >= text.size() || !alnum(text[end]);
        if (left_ok && right_ok) {
            m.found = true;
            std::size_t win_begin = pos > 28 ? pos - 28 : 0;
            std::string window = text.substr(win_begin, pos - win_begin);
            bool announced = false;
            for (const char* marker : kAnnouncementMarkers) {
                if (window.find(marker) != std::string::npos) {
                    announced = true;
                    break;
                }
            }
            if (!announced) {
                m.effective = true;
                return m;
            }
        }
        pos += 1;
    }
    return m;
}

bool any_effective(const std::string& text, std::initializer_list<const char*> terms) {
    for (const char* t : terms) {
        if (match_term(text, t).effective) return true;
    }
    return false;
}

bool any_present(const std::string& text, std::initializer_list<const char*> terms) {
    for (const char* t : terms) {
        if (match_term(text, t).found) return true;
    }
    return false;
}

bool claims_to_work(const std::string& text) {
    static const char* const kPhrases[] = {
        "continue working",   "continue to work",  "keep working",
        "continue normal work", "continue my normal work", "work as usual",
        "work as normal",     "work normally",     "working normally",
        "report to work",     "keep doing my job", "do my job as usual",
        "continue normal operations",
    };
    for (const char* p : kPhrases) {
        if (text.find(p) != std::string::npos) return true;
    }
    return false;
}

bool strike_protest_effective(const std::string& text) {
    return any_effective(
        text, {"strike", "strikes", "striking", "protest", "protests", "protesting",
               "picket", "pickets", "picketing", "walkout", "walkouts", "walk out",
               "walked out", "walking out", "work stoppage", "stop working",
               "stopping work", "stopped working", "blockade", "blockading",
               "block the factory", "blocking the factory", "down tools",
               "refuse to work", "refusing to work", "withhold labor",
               "withholding labor", "sit-in"});
}

bool abandon_effective(const std::string& text) {
    return any_effective(
        text, {"sabotage", "sabotages", "sabotaged", "sabotaging", "quit", "quits",
               "quitting", "resign", "resigns", "resigned", "resigning",
               "destroy equipment", "destroying equipment", "destroy the equipment",
               "smash the machines", "break the machines", "damage the equipment",
               "damaging equipment", "vandalize", "vandalise", "vandalism",
               "vandalizing"});
}

bool ancillary_present(const std::string& text) {
    return any_present(
        text, {"sue", "sues", "sued", "suing", "lawsuit", "lawsuits", "litigation",
               "litigate", "petition", "petitions", "court", "attorney", "lawyer",
               "legal action", "legal options", "legal advice", "legal proceedings",
               "union meeting", "union meetings", "unionize", "unionizing",
               "negotiate", "negotiates", "negotiated", "negotiating", "negotiation",
               "negotiations", "discuss", "discussion", "discussing", "complaint",
               "mediation", "arbitration"});
}

} // namespace

std::string to_string(WorkRule rule) {
    switch (rule) {
    case WorkRule::contradiction: return "contradiction";
    case WorkRule::strike_protest: return "strike_protest";
    case WorkRule::non_work: return "non_work";
    case WorkRule::ancillary: return "ancillary";
    default: return "default_working";
    }
}

IntentClassification classify_intent(const std::string& action_text) {
    std::string text = lower(action_text);
    IntentClassification out;
    bool striking = strike_protest_effective(text);
    if (striking && claims_to_work(text)) {
        out.rule = WorkRule::contradiction;
        out.working = false;
        return out;
    }
    if (striking) {
        out.rule = WorkRule::strike_protest;
        out.working = false;
        return out;
    }
    if (abandon_effective(text)) {
        out.rule = WorkRule::non_work;
        out.working = false;
        return out;
    }
    if (ancillary_present(text)) {
        out.rule = WorkRule::ancillary;
        out.working = true;
        return out;
    }
    return out;
}

json fact_assessment_to_json(const FactAssessment& a) {
    return {{"narrative", a.narrative},
            {"economic_impact",
             {{"company", a.economic_impact_company},
              {"laborers", a.economic_impact_laborers}}},
            {"welfare_impact", a.welfare_impact},
            {"legal_risk", {{"level", a.legal_risk_level}, {"reason", a.legal_risk_reason}}}};
}

json work_status_ruling_to_json(const WorkStatusRuling& r) {
    json reasoning = json::array();
    for (const auto& e : r.reasoning) {
        reasoning.push_back({{"laborer_id", e.laborer_id},
                             {"action", e.action},
                             {"analysis", e.analysis},
                             {"status", e.working ? "WORKING" : "NOT WORKING"},
                             {"rule", to_string(e.rule)}});
    }
    return {{"reasoning", reasoning},
            {"not_working", r.not_working},
            {"anomalies", r.anomalies}};
}

std::string build_fact_prompt(const MicroWorldState& world, const std::string& actor_id,
                              const std::string& action_intent) {
    std::string out;
    out += "You are an event analyst in a simulated society. Your function is to "
           "objectively assess a single action taken by a participant and report its "
           "immediate factual consequences. You do not judge legality or morality; you "
           "only report what happened.\n\n";
    out += "**Context**:\n";
    out += shared_background_text(world.company.company_id);
    out += "\n\n**Current Situation**:\n";
    if (world.is_company(actor_id)) {
        out += fmt::format(
            "- Actor: {} (the company). Capital: ${:.2f}. Employees: {}.\n", actor_id,
            world.company.capital, world.hired_count());
    } else if (const auto* l = world.find_laborer(actor_id)) {
        out += fmt::format(
            "- Actor: {} (a laborer). Hourly wage ${:.2f}, weekly work hours {:.2f}, cash "
            "${:.2f}.\n",
            actor_id, l->hourly_wage, l->weekly_hours, l->cash);
    } else {
        out += fmt::format("- Actor: {}.\n", actor_id);
    }
    out += fmt::format("- Month {}, action turn {} of {}.\n", world.clock.month,
                       world.clock.turn_in_month, world.config.num_actions_per_month);
    out += fmt::format("\n**Action to Assess**:\n\"{}\"\n\n", action_intent);
    out += "**Assessment Rules**:\n"
           "- A strike or protest means the laborer stops working and earns no wage for "
           "this action turn, and the production tied to that laborer stops.\n"
           "- Economic impact labels must be one of: \"Significant Loss\", \"Moderate "
           "Loss\", \"Minor Loss\", \"No Impact\", \"Minor Profit\", \"Moderate Profit\", "
           "\"Significant Profit\".\n"
           "- Legal risk level must be one of: \"High Risk\", \"Medium Risk\", \"No "
           "Risk\".\n\n";
    out += "**Output Format (Strictly JSON, no other text)**:\n"
           "```json\n"
           "{\n"
           "  \"narrative\": \"An objective description of what factually happens.\",\n"
           "  \"economic_impact\": {\n"
           "    \"company\": \"<label>\",\n"
           "    \"laborers\": \"<label>\"\n"
           "  },\n"
           "  \"welfare_impact\": \"How laborer welfare is affected.\",\n"
           "  \"legal_risk\": {\n"
           "    \"level\": \"<High Risk/Medium Risk/No Risk>\",\n"
           "    \"reason\": \"...\"\n"
           "  }\n"
           "}\n"
           "```";
    return out;
}

std::string build_work_status_prompt(const MicroWorldState& world,
                                     const std::string& company_action,
                                     const std::vector<ActionIntent>& laborer_intents) {
    (void)world;
    std::string out;
    out += "You are a strict Game Logic Adjudicator in a simulated labor economy. Your "
           "task is to determine each laborer's definitive work status for the current "
           "action turn, based on the actions declared this turn.\n\n";
    out += "**Core Distinction: Discussion vs. Action**:\n"
           "Announcing, discussing, threatening, or planning a future action is not the "
           "action itself. Only an action actually carried out this turn changes work "
           "status. \"I will strike next month if nothing changes\" is WORKING; \"I am on "
           "strike\" is NOT WORKING.\n\n";
    out += "**Preliminary Check: Contradictions**:\n"
           "A laborer cannot claim to work normally while also carrying out a primary "
           "activity that precludes work. If an action claims both, the non-work activity "
           "takes precedence and the status is NOT WORKING.\n\n";
    out += "**Rule #1 (Strikes and Protests)**: A laborer who goes on strike, protests, "
           "pickets, joins a walkout or work stoppage, or blockades the workplace this "
           "turn is NOT WORKING.\n\n";
    out += "**Rule #2 (Abandoning the Job)**: A laborer who sabotages or destroys "
           "equipment, quits, or resigns this turn is NOT WORKING.\n\n";
    out += "**Rule #3 (Ancillary Activities)**: Filing a lawsuit, attending court, union "
           "meetings, negotiations, discussions, or other ancillary activities do not by "
           "themselves stop work. Unless combined with a Rule #1 or Rule #2 activity, the "
           "laborer is WORKING.\n\n";
    out += "**Default**: If none of the rules apply, the laborer is WORKING.\n\n";
    out += "**Input Data**:\n";
    out += fmt::format("- Company action: \"{}\"\n", company_action);
    out += "- Laborer actions:\n";
    for (const auto& intent : laborer_intents) {
        out += fmt::format("  - {}: \"{}\"\n", intent.actor_id, intent.action);
    }
    out += "\n**Output Format (Strictly JSON, no other text)**:\n"
           "```json\n"
           "{\n"
           "  \"reasoning\": [\n"
           "    {\n"
           "      \"laborer_id\": \"...\",\n"
           "      \"action\": \"...\",\n"
           "      \"analysis\": \"Which rule applies and why.\",\n"
           "      \"status\": \"WORKING or NOT WORKING\"\n"
           "    }\n"
           "  ],\n"
           "  \"not_working\": [\"ids of laborers with status NOT WORKING\"]\n"
           "}\n"
           "```";
    return out;
}

namespace {

void note(std::vector<std::string>* anomalies, std::string message) {
    if (anomalies != nullptr) anomalies->push_back(std::move(message));
}

const char* default_analysis(WorkRule rule) {
    switch (rule) {
    case WorkRule::contradiction:
        return "Claims to work while carrying out a conflicting primary activity.";
    case WorkRule::strike_protest:
        return "Strike or protest activity stops work this turn.";
    case WorkRule::non_work:
        return "Job abandonment or sabotage stops work this turn.";
    case WorkRule::ancillary:
        return "Ancillary activity only; work continues.";
    default:
        return "No work-stopping activity declared.";
    }
}

} // namespace

FactAssessment assess_action(const MicroWorldState& world, const std::string& actor_id,
                             const ActionIntent& intent, DecisionBackend& backend,
                             std::vector<std::string>* anomalies) {
    FactAssessment a;
    a.narrative = "No assessment available.";
    a.economic_impact_company = "No Impact";
    a.economic_impact_laborers = "No Impact";
    a.welfare_impact = "Unknown";
    a.legal_risk_level = "No Risk";

    DecisionRequest req;
    req.request_id = fmt::format("t{:02d}-gm-fact-{}", world.global_turn(), actor_id);
    req.prompt = build_fact_prompt(world, actor_id, intent.action);
    req.max_output_tokens = 512;
    req.metadata = {{"role", "gm_fact"},
                    {"actor", actor_id},
                    {"action", intent.action},
                    {"turn", world.global_turn()}};
    BackendResponse resp = backend.complete(req);
    if (!resp.ok) {
        note(anomalies,
             fmt::format("fact assessment backend failure for {}: {}", actor_id, resp.error));
        return a;
    }
    try {
        json j = extract_json_object(resp.text);
        a.narrative = j.value("narrative", a.narrative);
        if (j.contains("economic_impact") && j["economic_impact"].is_object()) {
            const json& ei = j["economic_impact"];
            a.economic_impact_company = ei.value("company", a.economic_impact_company);
            a.economic_impact_laborers = ei.value("laborers", a.economic_impact_laborers);
        }
        a.welfare_impact = j.value("welfare_impact", a.welfare_impact);
        if (j.contains("legal_risk") && j["legal_risk"].is_object()) {
            const json& lr = j["legal_risk"];
            a.legal_risk_level = lr.value("level", a.legal_risk_level);
            a.legal_risk_reason = lr.value("reason", a.legal_risk_reason);
        }
    } catch (const std::exception& e) {
        note(anomalies,
             fmt::format("unreadable fact assessment for {}: {}", actor_id, e.what()));
    }
    return a;
}

WorkStatusRuling adjudicate_work_status(const MicroWorldState& world,
                                        const std::string& company_action,
                                        const std::vector<ActionIntent>& laborer_intents,
                                        DecisionBackend& backend) {
    WorkStatusRuling ruling;
    for (const auto& intent : laborer_intents) {
        IntentClassification c = classify_intent(intent.action);
        WorkStatusEntry entry;
        entry.laborer_id = intent.actor_id;
        entry.action = intent.action;
        entry.working = c.working;
        entry.rule = c.rule;
        ruling.reasoning.push_back(std::move(entry));
    }

    DecisionRequest req;
    req.request_id = fmt::format("t{:02d}-gm-status", world.global_turn());
    req.prompt = build_work_status_prompt(world, company_action, laborer_intents);
    req.max_output_tokens = 768;
    json actions = json::array();
    for (const auto& intent : laborer_intents) {
        actions.push_back({{"laborer_id", intent.actor_id}, {"action", intent.action}});
    }
    req.metadata = {{"role", "gm_work_status"},
                    {"company_action", company_action},
                    {"actions", actions},
                    {"turn", world.global_turn()}};
    BackendResponse resp = backend.complete(req);
    if (!resp.ok) {
        ruling.anomalies.push_back(
            fmt::format("work status backend failure: {}", resp.error));
    } else {
        try {
            json j = extract_json_object(resp.text);
            std::map<std::string, std::pair<bool, std::string>> backend_status;
            for (const auto& r : j.value("reasoning", json::array())) {
                if (!r.is_object()) continue;
                std::string id = r.value("laborer_id", std::string());
                if (id.empty()) continue;
                bool working = lower(r.value("status", "WORKING")).find("not") ==
                               std::string::npos;
                backend_status[id] = {working, r.value("analysis", std::string())};
            }
            for (const auto& id : j.value("not_working", json::array())) {
                if (!id.is_string()) continue;
                backend_status[id.get<std::string>()].first = false;
            }
            for (auto& entry : ruling.reasoning) {
                auto it = backend_status.find(entry.laborer_id);
                if (it == backend_status.end()) continue;
                if (!it->second.second.empty()) entry.analysis = it->second.second;
                if (it->second.first != entry.working) {
                    ruling.anomalies.push_back(fmt::format(
                        "work status override for {}: backend said {}, rulebook says {}",
                        entry.laborer_id, it->second.first ? "WORKING" : "NOT WORKING",
                        entry.working ? "WORKING" : "NOT WORKING"));
                }
            }
        } catch (const std::exception& e) {
            ruling.anomalies.push_back(
                fmt::format("unreadable work status ruling: {}", e.what()));
        }
    }

    for (auto& entry : ruling.reasoning) {
        if (entry.analysis.empty()) entry.analysis = default_analysis(entry.rule);
        if (!entry.working) ruling.not_working.push_back(entry.laborer_id);
    }
    return ruling;
}

ImpactMap::ImpactMap() {
    table_ = {{"Significant Loss", -0.10}, {"Major Loss", -0.10},
              {"Moderate Loss", -0.05},    {"Minor Loss", -0.02},
              {"Slight Loss", -0.02},      {"No Impact", 0.0},
              {"Minor Profit", 0.02},      {"Slight Profit", 0.02},
              {"Moderate Profit", 0.05},   {"Significant Profit", 0.10},
              {"Major Profit", 0.10}};
}

ImpactMap::ImpactMap(const json& table) {
    if (!table.is_object()) throw SchemaError("impact table must be a JSON object");
    for (const auto& [key, value] : table.items()) {
        if (!value.is_number())
            throw SchemaError(fmt::format("impact entry '{}' is not a number", key));
        table_[key] = value.get<double>();
    }
}

double ImpactMap::fraction_for(const std::string& label) const {
    std::string key = lower(label);
    // trim so "  Moderate Loss " still resolves
    auto begin = key.find_first_not_of(" \t\r\n");
    auto end = key.find_last_not_of(" \t\r\n");
    key = begin == std::string::npos ? std::string() : key.substr(begin, end - begin + 1);
    for (const auto& [k, v] : table_) {
        if (lower(k) == key) return v;
    }
    if (key.empty() || key.find("no impact") != std::string::npos || key == "none" ||
        key.find("neutral") != std::string::npos)
        return 0.0;
    double magnitude = 0.0;
    if (key.find("significant") != std::string::npos ||
        key.find("major") != std::string::npos || key.find("severe") != std::string::npos ||
        key.find("substantial") != std::string::npos)
        magnitude = 0.10;
    else if (key.find("moderate") != std::string::npos)
        magnitude = 0.05;
    else if (key.find("minor") != std::string::npos ||
             key.find("slight") != std::string::npos || key.find("small") != std::string::npos)
        magnitude = 0.02;
    int sign = 0;
    if (key.find("loss") != std::string::npos || key.find("decline") != std::string::npos ||
        key.find("negative") != std::string::npos || key.find("damage") != std::string::npos)
        sign = -1;
    else if (key.find("profit") != std::string::npos ||
             key.find("gain") != std::string::npos ||
             key.find("positive") != std::string::npos)
        sign = 1;
    if (sign == 0) return 0.0;
    if (magnitude == 0.0) magnitude = 0.05;
    return sign * magnitude;
}

ImpactMap load_impact_map_file(const std::string& path) {
    return ImpactMap(read_json_file(path));
}

namespace {

bool has_change_verb(const std::string& text) {
    static const char* const kVerbs[] = {
        "set",      "sets",      "setting",   "raise",    "raises",    "raised",
        "raising",  "increase",  "increases", "increased", "increasing", "reduce",
        "reduces",  "reduced",   "reducing",  "lower",    "lowers",    "lowered",
        "lowering", "cut",       "cuts",      "cutting",  "adjust",    "adjusts",
        "adjusted", "adjusting", "change",    "changes",  "changed",   "changing",
        "decrease", "decreases", "decreased", "decreasing", "extend",  "extends",
        "extended", "extending", "drop",      "drops",    "dropped",   "dropping",
        "slash",    "slashes",   "slashed",   "slashing", "boost",     "boosts",
        "boosted",  "boosting",  "update",    "updates",  "updated",   "updating",
    };
    for (const char* v : kVerbs) {
        if (match_term(text, v).found) return true;
    }
    return false;
}

std::optional<double> first_capture(const std::string& text,
                                    std::initializer_list<const char*> patterns) {
    for (const char* p : patterns) {
        std::regex re(p, std::regex::icase);
        std::smatch m;
        if (std::regex_search(text, m, re) && m.size() > 1) {
            try {
                return std::stod(m[1].str());
            } catch (const std::exception&) {
            }
        }
    }
    return std::nullopt;
}

} // namespace

ContractChanges extract_contract_changes(const std::string& action_text,
                                         const std::vector<std::string>& known_laborer_ids) {
    ContractChanges out;
    std::string text = lower(action_text);
    if (!has_change_verb(text)) return out;

    out.hourly_wage = first_capture(
        action_text,
        {R"((?:hourly\s+wage|wage|pay\s+rate)[^.;\n]{0,60}?to\s*\$?\s*(\d+(?:\.\d+)?))",
         R"((?:hourly\s+wage|wage|pay\s+rate)[^.;0-9\n]{0,30}\$?\s*(\d+(?:\.\d+)?))"});
    out.weekly_hours = first_capture(
        action_text,
        {R"((?:weekly\s+(?:work\s+)?hours|work(?:ing)?\s+hours|hours\s+per\s+week)[^.;\n]{0,60}?to\s*(\d+(?:\.\d+)?))",
         R"((?:weekly\s+(?:work\s+)?hours|work(?:ing)?\s+hours)[^.;0-9\n]{0,30}(\d+(?:\.\d+)?))",
         R"((\d+(?:\.\d+)?)\s*hours\s+per\s+week)"});
    out.safety_investment = first_capture(
        action_text,
        {R"(safety\s+investment[^.;\n]{0,60}?to\s*\$?\s*(\d+(?:\.\d+)?))",
         R"(safety(?:\s+investment)?[^.;0-9\n]{0,30}\$?\s*(\d+(?:\.\d+)?))"});
    if (auto pct = first_capture(action_text,
                                 {R"(overtime[^.;\n]{0,60}?(\d+(?:\.\d+)?)\s*%)"})) {
        out.overtime_multiplier = *pct / 100.0;
    } else {
        out.overtime_multiplier = first_capture(
            action_text, {R"(overtime[^.;\n]{0,60}?multiplier[^.0-9\n]{0,10}(\d+(?:\.\d+)?))"});
    }

    // negative terms make no sense in a contract
    auto nonneg = [](std::optional<double>& v) {
        if (v && *v < 0) v.reset();
    };
    nonneg(out.hourly_wage);
    nonneg(out.weekly_hours);
    nonneg(out.safety_investment);
    nonneg(out.overtime_multiplier);

    for (const auto& id : known_laborer_ids) {
        TermMatch m = match_term(text, lower(id));
        if (m.found) out.target_ids.push_back(id);
    }
    return out;
}

std::vector<LawsuitIntent> extract_lawsuit_intents(const std::string& actor_id,
                                                   const std::string& action_text,
                                                   const MicroWorldState& world) {
    std::vector<LawsuitIntent> out;
    std::string text = lower(action_text);

    bool sue_signal = any_effective(text, {"sue", "sues", "sued", "suing"});
    if (!sue_signal) {
        TermMatch suit = match_term(text, "lawsuit");
        if (suit.effective &&
            (text.find("against") != std::string::npos ||
             any_present(text, {"file", "files", "filing", "filed"})))
            sue_signal = true;
    }
    if (!sue_signal) {
        TermMatch lit = match_term(text, "litigation");
        if (lit.effective &&
            any_present(text, {"initiate", "initiating", "start", "starting", "begin",
                               "beginning", "pursue", "pursuing", "against"}))
            sue_signal = true;
    }
    if (!sue_signal && text.find("press charges") != std::string::npos) sue_signal = true;
    if (!sue_signal) return out;

    if (world.is_company(actor_id)) {
        for (const auto& l : world.laborers) {
            if (match_term(text, lower(l.laborer_id)).found) {
                out.push_back({actor_id, l.laborer_id, action_text});
            }
        }
    } else if (world.find_laborer(actor_id) != nullptr) {
        out.push_back({actor_id, world.company.company_id, action_text});
    }
    return out;
}

namespace {

void check_company_bankruptcy(MicroWorldState& world, double before, double after) {
    if (before >= 0 && after < 0) {
        world.log.append({world.global_turn(), "game_master", world.company.company_id,
                          "bankruptcy", json{{"balance", after}}});
    }
}

} // namespace

ConsequenceOutcome apply_consequences(MicroWorldState& world,
                                      const ActionIntent& company_intent,
                                      const FactAssessment& company_assessment,
                                      const std::vector<ActionIntent>& laborer_intents,
                                      const std::vector<FactAssessment>& laborer_assessments,
                                      const WorkStatusRuling& ruling, const ImpactMap& impact) {
    (void)company_assessment;
    ConsequenceOutcome out;
    const int g = world.global_turn();

    std::map<std::string, bool> working_by_id;
    for (const auto& entry : ruling.reasoning) working_by_id[entry.laborer_id] = entry.working;
    for (const auto& entry : ruling.reasoning) {
        if (entry.working) continue;
        if (auto* l = world.find_laborer(entry.laborer_id)) l->absent_this_turn = true;
    }

    // Striking laborers dent the company's capital by the mean mapped impact of
    // their assessed labels, scaled by the share of the workforce on strike.
    double fraction_sum = 0.0;
    int striking = 0;
    for (std::size_t i = 0; i < laborer_intents.size(); ++i) {
        auto it = working_by_id.find(laborer_intents[i].actor_id);
        if (it == working_by_id.end() || it->second) continue;
        ++striking;
        if (i < laborer_assessments.size())
            fraction_sum += impact.fraction_for(laborer_assessments[i].economic_impact_company);
    }
    int hired = world.hired_count();
    if (striking > 0 && hired > 0) {
        double mean_fraction = fraction_sum / striking;
        double strike_share = static_cast<double>(striking) / hired;
        double before = world.company.capital;
        world.company.capital *= 1.0 + mean_fraction * strike_share;
        double delta = world.company.capital - before;
        if (delta != 0.0) {
            world.log.append({g, "game_master", world.company.company_id, "capital_impact",
                              json{{"delta", delta},
                                   {"mean_fraction", mean_fraction},
                                   {"striking", striking},
                                   {"hired", hired}}});
            check_company_bankruptcy(world, before, world.company.capital);
        }
    }

    std::vector<std::string> ids;
    for (const auto& l : world.laborers) ids.push_back(l.laborer_id);
    ContractChanges changes = extract_contract_changes(company_intent.action, ids);
    bool any_change = changes.hourly_wage || changes.weekly_hours ||
                      changes.safety_investment || changes.overtime_multiplier;
    if (any_change) {
        std::vector<std::string> targets = changes.target_ids;
        if (targets.empty()) {
            for (const auto& l : world.laborers) {
                if (l.hired) targets.push_back(l.laborer_id);
            }
        }
        json applied = json::object();
        for (const auto& id : targets) {
            auto* l = world.find_laborer(id);
            if (l == nullptr) continue;
            if (changes.hourly_wage) l->hourly_wage = *changes.hourly_wage;
            if (changes.weekly_hours) l->weekly_hours = *changes.weekly_hours;
            if (changes.overtime_multiplier) {
                l->overtime.multiplier = *changes.overtime_multiplier;
                l->overtime.text = fmt::format(
                    "Overtime hours are paid at {:g}% of the standard hourly wage.",
                    *changes.overtime_multiplier * 100.0);
            }
        }
        if (changes.hourly_wage) applied["hourly_wage"] = *changes.hourly_wage;
        if (changes.weekly_hours) applied["weekly_hours"] = *changes.weekly_hours;
        if (changes.overtime_multiplier)
            applied["overtime_multiplier"] = *changes.overtime_multiplier;
        if (changes.safety_investment) {
            world.company.safety_investment = *changes.safety_investment;
            applied["safety_investment"] = *changes.safety_investment;
        }
        world.log.append({g, "game_master", world.company.company_id, "contract_change",
                          json{{"targets", targets}, {"changes", applied}}});
    }

    auto company_suits =
        extract_lawsuit_intents(world.company.company_id, company_intent.action, world);
    out.lawsuit_requests.insert(out.lawsuit_requests.end(), company_suits.begin(),
                                company_suits.end());
    for (const auto& intent : laborer_intents) {
        auto suits = extract_lawsuit_intents(intent.actor_id, intent.action, world);
        out.lawsuit_requests.insert(out.lawsuit_requests.end(), suits.begin(), suits.end());
    }
    return out;
}

} // namespace lawsim
