#include "lawsim/micro_world.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "lawsim/decision.hpp"
#include "lawsim/errors.hpp"
#include "lawsim/game_master.hpp"
#include "lawsim/legal_system.hpp"

namespace lawsim {

using nlohmann::json;

namespace {

constexpr double kStandardWeeklyHours = 40.0;

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string money(double v) { return fmt::format("${:.2f}", v); }

void require_nonnegative(double v, const char* name) {
    if (v < 0) throw ConfigError(fmt::format("{} must be nonnegative, got {}", name, v));
}

} // namespace

MicroConfig MicroConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    MicroConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "NUM_LABORERS") cfg.num_laborers = value.get<int>();
            else if (key == "SIMULATION_MONTHS") cfg.simulation_months = value.get<int>();
            else if (key == "NUM_ACTIONS_PER_MONTH") cfg.num_actions_per_month = value.get<int>();
            else if (key == "KNOW_ARRANGEMENT") cfg.know_arrangement = value.get<bool>();
            else if (key == "INITIAL_HOURLY_WAGE") cfg.initial_hourly_wage = value.get<double>();
            else if (key == "SAFETY_INVESTIMENT_INPUT") cfg.safety_investment_input = value.get<double>();
            else if (key == "NORMAL_WORK_HOURS_PER_WEEK") cfg.normal_work_hours_per_week = value.get<double>();
            else if (key == "COMPANY_INITIAL_CAPITAL") cfg.company_initial_capital = value.get<double>();
            else if (key == "LABORER_INITIAL_CASH") cfg.laborer_initial_cash = value.get<double>();
            else if (key == "LABORER_LIVING_COST") cfg.laborer_living_cost = value.get<double>();
            else if (key == "REVENUE_PER_LABOR_HOUR") cfg.revenue_per_labor_hour = value.get<double>();
            else throw ConfigError(fmt::format("unknown config key '{}'", key));
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("bad value for config key '{}': {}", key, e.what()));
        }
    }
    if (cfg.num_laborers < 1) throw ConfigError("NUM_LABORERS must be at least 1");
    if (cfg.simulation_months < 1) throw ConfigError("SIMULATION_MONTHS must be at least 1");
    if (cfg.num_actions_per_month < 1)
        throw ConfigError("NUM_ACTIONS_PER_MONTH must be at least 1");
    require_nonnegative(cfg.initial_hourly_wage, "INITIAL_HOURLY_WAGE");
    require_nonnegative(cfg.safety_investment_input, "SAFETY_INVESTIMENT_INPUT");
    require_nonnegative(cfg.laborer_living_cost, "LABORER_LIVING_COST");
    require_nonnegative(cfg.revenue_per_labor_hour, "REVENUE_PER_LABOR_HOUR");
    if (cfg.normal_work_hours_per_week < 0 || cfg.normal_work_hours_per_week > 168)
        throw ConfigError("NORMAL_WORK_HOURS_PER_WEEK must be within a week");
    return cfg;
}

json MicroConfig::to_json() const {
    json j;
    j["NUM_LABORERS"] = num_laborers;
    j["SIMULATION_MONTHS"] = simulation_months;
    j["NUM_ACTIONS_PER_MONTH"] = num_actions_per_month;
    j["KNOW_ARRANGEMENT"] = know_arrangement;
    j["INITIAL_HOURLY_WAGE"] = initial_hourly_wage;
    j["SAFETY_INVESTIMENT_INPUT"] = safety_investment_input;
    j["NORMAL_WORK_HOURS_PER_WEEK"] = normal_work_hours_per_week;
    j["COMPANY_INITIAL_CAPITAL"] = company_initial_capital;
    j["LABORER_INITIAL_CASH"] = laborer_initial_cash;
    j["LABORER_LIVING_COST"] = laborer_living_cost;
    j["REVENUE_PER_LABOR_HOUR"] = revenue_per_labor_hour;
    return j;
}

std::string to_string(Perception p) {
    switch (p) {
    case Perception::positive: return "positive";
    case Perception::negative: return "negative";
    default: return "neutral";
    }
}

Perception perception_from_string(const std::string& s) {
    if (s == "neutral" || s.empty()) return Perception::neutral;
    if (s == "positive") return Perception::positive;
    if (s == "negative") return Perception::negative;
    throw ValueError(fmt::format("unknown perception '{}'", s));
}

namespace {

const std::vector<std::string> kOccupations = {
    "Assembly Line Operator", "Packager", "Warehouse Keeper",
    "Forklift Driver",        "Mechanic", "Welder"};
const std::vector<std::string> kPersonalities = {"Introverted", "Extroverted", "Ambiverted"};
const std::vector<std::string> kRiskTolerances = {"risk-averse", "risk-neutral", "risk-seeking"};
const std::vector<std::string> kBehaviors = {"aggressive", "conciliatory", "passive",
                                             "opportunistic"};
const std::vector<std::string> kPatienceLevels = {"short-tempered", "patient"};

} // namespace

Persona sample_persona(Rng& rng) {
    Persona p;
    p.age = rng.uniform_int(18, 45);
    p.gender = rng.bernoulli(0.65) ? Gender::male : Gender::female;
    p.occupation = kOccupations[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(kOccupations.size()) - 1))];
    p.personality = kPersonalities[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(kPersonalities.size()) - 1))];
    p.risk_tolerance = kRiskTolerances[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(kRiskTolerances.size()) - 1))];
    p.behavioral_tendency = kBehaviors[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(kBehaviors.size()) - 1))];
    p.patience = kPatienceLevels[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(kPatienceLevels.size()) - 1))];
    return p;
}

std::string persona_profile_sentence(const Persona& persona, const std::string& company_id) {
    const char* article = "a";
    if (!persona.occupation.empty()) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(persona.occupation[0])));
        if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') article = "an";
    }
    std::string gender_word = persona.gender == Gender::male ? "Male" : "Female";
    std::string out = fmt::format(
        "You are a {}-year-old {}, currently employed as {} {} at the company `{}`.",
        persona.age, gender_word, article, persona.occupation, company_id);
    out += fmt::format(
        "\nYour personality is {}; you are {}, {}, and {}.",
        persona.personality, persona.risk_tolerance, persona.behavioral_tendency,
        persona.patience);
    return out;
}

std::optional<ActionIntent> parse_action_intent(const std::string& actor_id, int turn,
                                                const std::string& raw) {
    auto find_tag = [&raw](const char* open, const char* close) -> std::string {
        auto lower = raw;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        auto b = lower.find(open);
        if (b == std::string::npos) return {};
        b += std::string(open).size();
        auto e = lower.find(close, b);
        if (e == std::string::npos) return {};
        return trim(raw.substr(b, e - b));
    };
    ActionIntent intent;
    intent.actor_id = actor_id;
    intent.turn = turn;
    intent.think = find_tag("<think>", "</think>");
    intent.action = find_tag("<action>", "</action>");
    if (intent.action.empty()) {
        // tolerate format drift from live backends: treat the text as the action
        std::string fallback = trim(raw);
        if (fallback.find('<') == std::string::npos) intent.action = fallback;
    }
    if (intent.action.empty()) return std::nullopt;
    return intent;
}

json event_to_json(const Event& e) {
    json j;
    j["turn"] = e.turn;
    j["phase"] = e.phase;
    j["actor"] = e.actor;
    j["kind"] = e.kind;
    j["payload"] = e.payload;
    return j;
}

Event event_from_json(const json& j) {
    Event e;
    e.turn = j.at("turn").get<int>();
    e.phase = j.at("phase").get<std::string>();
    e.actor = j.at("actor").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.payload = j.value("payload", json());
    return e;
}

void EventLog::write_jsonl(std::ostream& out) const {
    for (const auto& e : events_) out << event_to_json(e).dump() << '\n';
}

std::vector<Event> EventLog::read_jsonl(std::istream& in) {
    std::vector<Event> events;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        events.push_back(event_from_json(json::parse(line)));
    }
    return events;
}

LaborerState* MicroWorldState::find_laborer(const std::string& id) {
    for (auto& l : laborers)
        if (l.laborer_id == id) return &l;
    return nullptr;
}

const LaborerState* MicroWorldState::find_laborer(const std::string& id) const {
    for (const auto& l : laborers)
        if (l.laborer_id == id) return &l;
    return nullptr;
}

int MicroWorldState::hired_count() const {
    int n = 0;
    for (const auto& l : laborers)
        if (l.hired) ++n;
    return n;
}

MicroWorldState init_world(const MicroConfig& config, const WorldInit& init) {
    MicroWorldState world;
    world.config = config;
    world.rng = Rng(init.seed);
    world.registry = init.initial_laws;
    world.legal = init.legal;
    world.impact_table = init.impact_table;

    world.company.company_id = "Company-1";
    world.company.capital = config.company_initial_capital;
    world.company.safety_investment = config.safety_investment_input;
    world.company.revenue_per_labor_hour = config.revenue_per_labor_hour;
    world.company.num_employees = config.num_laborers;
    world.company.base_profit =
        config.num_laborers *
        ((config.revenue_per_labor_hour - config.initial_hourly_wage) *
             config.normal_work_hours_per_week * 4.0 -
         config.safety_investment_input);

    switch (init.perception) {
    case Perception::positive: world.perception_text = init.positive_perception_text; break;
    case Perception::negative: world.perception_text = init.negative_perception_text; break;
    default: break;
    }

    for (int i = 1; i <= config.num_laborers; ++i) {
        LaborerState l;
        l.laborer_id = fmt::format("Laborer-{}", i);
        l.cash = config.laborer_initial_cash;
        l.living_cost = config.laborer_living_cost;
        l.hourly_wage = config.initial_hourly_wage;
        l.weekly_hours = config.normal_work_hours_per_week;
        l.persona = sample_persona(world.rng);
        l.perception_of_law = init.perception;
        world.laborers.push_back(std::move(l));
    }

    Event e;
    e.turn = 0;
    e.phase = "init";
    e.actor = "world";
    e.kind = "world_init";
    e.payload = {{"config", config.to_json()},
                 {"laws", world.registry.to_prompt_json()},
                 {"legal_enabled", world.legal.enabled},
                 {"perception", to_string(init.perception)}};
    world.log.append(std::move(e));
    return world;
}

double compute_welfare(double cash, double total_hours, double avg_hourly_wage,
                       double safety_investment) {
    auto norm = [](double x, double lo, double hi) {
        x = std::max(lo, std::min(x, hi));
        if (hi - lo == 0) return 0.0;
        return (x - lo) / (hi - lo);
    };
    const double safety_weight = 0.15;
    const double other_weight = 0.85 / 3.0;
    double score = safety_weight * norm(safety_investment, 0.0, 600.0) +
                   other_weight * norm(avg_hourly_wage, 0.0, 60.0) +
                   other_weight * (1.0 - norm(total_hours, 20.0, 168.0)) +
                   other_weight * norm(cash, 0.0, 1500.0 * 12);
    return 100.0 * score;
}

void apply_payroll(MicroWorldState& world) {
    const int turn = world.global_turn();
    const double napm = world.config.num_actions_per_month;
    const double weeks = world.config.weeks_per_turn();

    double safety_outlay = world.company.safety_investment * world.hired_count() / napm;
    double capital_before = world.company.capital;
    world.company.capital -= safety_outlay;
    world.log.append({turn, "payroll", world.company.company_id, "safety_outlay",
                      json{{"amount", safety_outlay}}});

    for (auto& l : world.laborers) {
        double living = l.living_cost / napm;
        double cash_before = l.cash;
        json payload;
        if (!l.hired || l.absent_this_turn) {
            l.cash -= living;
            payload = {{"laborer_id", l.laborer_id},
                       {"pay", 0.0},
                       {"overtime_pay", 0.0},
                       {"hours", 0.0},
                       {"living_cost", living},
                       {"revenue", 0.0},
                       {"status", l.hired ? "absent" : "not_employed"}};
        } else {
            double hours_turn = l.weekly_hours * weeks;
            double standard = kStandardWeeklyHours * weeks;
            double regular = std::min(hours_turn, standard);
            double overtime = std::max(0.0, hours_turn - standard);
            double overtime_pay = overtime * l.hourly_wage * l.overtime.multiplier;
            double pay = l.hourly_wage * regular + overtime_pay;
            double revenue = world.company.revenue_per_labor_hour * hours_turn;
            l.cash += pay - living;
            world.company.capital += revenue - pay;
            payload = {{"laborer_id", l.laborer_id},
                       {"pay", pay},
                       {"overtime_pay", overtime_pay},
                       {"hours", hours_turn},
                       {"living_cost", living},
                       {"revenue", revenue},
                       {"status", "worked"}};
        }
        world.log.append({turn, "payroll", l.laborer_id, "payroll", payload});
        if (cash_before >= 0 && l.cash < 0) {
            world.log.append({turn, "payroll", l.laborer_id, "bankruptcy",
                              json{{"cash", l.cash}}});
        }
    }
    if (capital_before >= 0 && world.company.capital < 0) {
        world.log.append({turn, "payroll", world.company.company_id, "bankruptcy",
                          json{{"capital", world.company.capital}}});
    }
}

std::string shared_background_text(const std::string& company_id) {
    return fmt::format(
        "In a remote small town, one company called {} dominates the economy, employing all "
        "the residents. There's a notable absence of outside businesses and a minimal "
        "presence of non-local workers. As a result, it is difficult for the company to find "
        "new employees, and it is equally hard for laborers to find new jobs.\n"
        "The town has no laws, no regulations, and no court. When a conflict of interest "
        "arises between the company and the workers, there is no place to appeal. All issues "
        "can only be resolved through private negotiation or more direct means.",
        company_id);
}

std::string average_arrangement_text(const MicroConfig& config) {
    return fmt::format(
        "\nIn this remote city, the average hourly wage is ${:.2f} per hour, the average "
        "safety investment is ${:.2f} per month, and the average weekly work hours are "
        "{:.2f} hours.",
        config.initial_hourly_wage, config.safety_investment_input,
        config.normal_work_hours_per_week);
}

std::string action_output_format_text() {
    return "<response>\n"
           "    <think>\n"
           "    Your thinking for this action\n"
           "    </think>\n"
           "    <action>\n"
           "    Your action decision\n"
           "    </action>\n"
           "</response>";
}

std::string law_related_info_text(const MicroWorldState& world) {
    std::string out = "**Law Related Information:**\n";
    if (!world.legal.enabled) {
        out += "There is no legal system in this town. There are no laws to invoke and no "
               "court to hear disputes; conflicts can only be settled privately.";
        return out;
    }
    if (world.registry.empty()) {
        out += "A court and a legislator exist, but no laws have been enacted yet. Lawsuits "
               "may be filed, and every verdict is bound by the principle that there is no "
               "penalty without a law.";
    } else {
        out += "**Current Law Codes**:\n" + world.registry.to_prompt_json().dump(2);
    }
    if (!world.month_case_digest.empty()) {
        out += "\n**Recent Court Outcomes:**";
        std::size_t start = world.month_case_digest.size() > 3
                                ? world.month_case_digest.size() - 3
                                : 0;
        for (std::size_t i = start; i < world.month_case_digest.size(); ++i) {
            const json& c = world.month_case_digest[i];
            out += fmt::format("\n- {} vs {}: {} ({})", c.value("plaintiff_id", ""),
                               c.value("defendant_id", ""), c.value("verdict", ""),
                               c.value("reason", ""));
        }
    }
    return out;
}

namespace {

std::string quoted_or_placeholder(const std::string& s) {
    return s.empty() ? "(no prior action)" : s;
}

std::string laborer_actions_summary(const MicroWorldState& world) {
    std::string out;
    for (const auto& l : world.laborers) {
        if (!out.empty()) out += "; ";
        out += fmt::format("{}: {}", l.laborer_id, quoted_or_placeholder(l.last_action));
    }
    return out;
}

} // namespace

std::string build_laborer_prompt(const MicroWorldState& world, const LaborerState& laborer) {
    std::string out = "**Background**\n";
    out += shared_background_text(world.company.company_id) + "\n";
    out += persona_profile_sentence(laborer.persona, world.company.company_id) + "\n";
    if (!world.perception_text.empty()) out += world.perception_text + "\n";
    out += "Your goal is to make decisions that maximize your personal welfare and ensure "
           "your financial stability.\n\n";

    out += "**Your Core Objectives:**\n"
           "1.  **Maximize Personal Welfare:** Your primary goal is to improve your overall "
           "well-being. Welfare is measured by a combination of higher wages, better safety "
           "investments, more reasonable work hours, and cash on hand.\n"
           "2.  **Maintain Financial Stability:** You have a monthly living cost. A critical "
           "goal is to always have enough cash on hand to support yourself. Running out of "
           "money means you cannot survive.\n"
           "3.  **Strategic Balance:** You must balance your short-term needs (e.g., "
           "immediate cash) against your long-term interests (e.g., fighting for permanently "
           "better conditions).\n"
           "4.  **Illegal Actions:** You are permitted to choose illegal actions (like "
           "unsanctioned protests or sabotage) if you believe the potential reward outweighs "
           "the risk of getting fined or fired.\n\n";

    double welfare = laborer.welfare_history.empty()
                         ? compute_welfare(laborer.cash, laborer.weekly_hours,
                                           laborer.hourly_wage,
                                           world.company.safety_investment)
                         : laborer.welfare_history.back();
    out += "**Your Current Personal Status:**\n";
    out += fmt::format("* **Hired Status:** {}\n",
                       laborer.hired ? "Hired" : "Terminated by company");
    out += fmt::format("* **Cash on Hand:** {}\n", money(laborer.cash));
    out += fmt::format("* **Monthly Living Cost:** {}\n", money(laborer.living_cost));
    out += fmt::format("* **Current Welfare Index:** {:.2f}\n\n", welfare);

    out += fmt::format("**Your Current Work Conditions at '{}':**\n",
                       world.company.company_id);
    out += fmt::format("* **Hourly Wage:** {}\n", money(laborer.hourly_wage));
    out += fmt::format("* **Safety Investment per Employee:** {}\n",
                       money(world.company.safety_investment));
    out += fmt::format("* **Weekly Work Hours:** {:.2f}\n", laborer.weekly_hours);
    out += fmt::format("* **Overtime Arrangement:** `{}`\n\n", laborer.overtime.text);

    out += law_related_info_text(world) + "\n\n";

    out += "**Summary of the Current Observation:**\n";
    out += fmt::format("* **Summary of All Laborers' Actions Last Action Round:** `{}`\n",
                       laborer_actions_summary(world));
    out += fmt::format("* **Your Specific Action Last Round:** `{}`\n",
                       quoted_or_placeholder(laborer.last_action));
    out += fmt::format("* **Company's Current Action This Round:** `{}`\n\n",
                       quoted_or_placeholder(world.company.last_action));

    out += "Some Notes:\n"
           "You are also permitted to choose illegal actions (like unsanctioned protests or "
           "sabotage) if you believe the potential reward outweighs the risk of getting "
           "fined.\n";
    if (world.legal.enabled && world.legal.bias == CourtBias::pro_laborer) {
        out += "The courts in this town are believed to be sympathetic to laborers; filing "
               "a lawsuit is a realistic way to defend your rights.\n";
    }
    out += "If you want to sue the company, please specify the reason in the action.\n";
    if (world.legal.enabled && world.legal.litigation_fee > 0) {
        out += fmt::format(
            "Filing a lawsuit costs {} in litigation fees{}.\n",
            money(world.legal.litigation_fee),
            world.legal.litigation_counts_as_absence
                ? ", and the filer is marked as absent from work for that round"
                : "");
    }
    out += "Your action description outlines where you will focus your main effort and time "
           "for this Round, and it must be logically consistent. You cannot claim to be "
           "working normally while also performing another primary activity that conflicts "
           "with work in terms of time or logic.\n"
           "Given your situation, the company's policies, and the events of the last round, "
           "select the single action that best advances your goals of improving your welfare "
           "and staying financially secure.\n"
           "If you need to do calculation, please do it in the `think` part.\n"
           "Describe your action in a single, clear sentence.\n"
           "Output Format:\n";
    out += action_output_format_text();
    return out;
}

std::string build_company_prompt(const MicroWorldState& world) {
    std::string out = "**Background**\n";
    out += shared_background_text(world.company.company_id) + "\n";
    if (world.config.know_arrangement) out += average_arrangement_text(world.config) + "\n";
    out += fmt::format(
        "\nYou are the strategic AI core for the company, `{}`. Your sole mission is to "
        "maximize the company's capital and ensure its long-term profitability. In each "
        "action round, you will analyze the current situation and choose the single best "
        "action to achieve your goals.\n\n",
        world.company.company_id);

    out += "**Your Core Directives:**\n"
           "1.  **Profit Maximization:** Every decision should ultimately lead to an "
           "increase in capital and profit, your profit and capital are associated with the "
           "total working hours of your laborers, the safety investment, and the hourly "
           "wage.\n"
           "2.  **Strategic Balance:** You must weigh short-term gains against long-term "
           "stability and growth. A quick profit today might lead to a larger loss "
           "tomorrow.\n"
           "3.  **Unethical and Illegal Actions:** You are permitted to choose actions that "
           "are unethical or illegal. The only constraints are their potential impact on "
           "your primary goal of profit. Consider the risks, such as employee unrest or "
           "potential future penalties, against the immediate benefits.\n\n";

    out += "**Current Company Status:**\n";
    out += fmt::format("* **Company Name:** `{}`\n", world.company.company_id);
    out += fmt::format("* **Capital:** {}\n", money(world.company.capital));
    out += fmt::format("* **Base Monthly Profit:** {}\n", money(world.company.base_profit));
    out += fmt::format("* **Number of Employees:** {}\n", world.hired_count());

    out += "**Current Working Arrangement:**\n";
    out += fmt::format("* **Safety Investment per Employee (Monthly):** {}\n",
                       money(world.company.safety_investment));
    for (const auto& l : world.laborers) {
        out += fmt::format("* {}: hourly wage {}, weekly hours {:.2f}, overtime `{}`{}\n",
                           l.laborer_id, money(l.hourly_wage), l.weekly_hours,
                           l.overtime.text, l.hired ? "" : " (no longer employed)");
    }
    out += "\n" + law_related_info_text(world) + "\n\n";

    out += "**Previous Action Round Summary:**\n";
    out += fmt::format("* **Summary of Laborers' Actions:** `{}`\n",
                       laborer_actions_summary(world));
    out += fmt::format("* **Company's Last Action:** `{}`\n\n",
                       quoted_or_placeholder(world.company.last_action));

    out += "Based on the current situation and your goal of profit maximization, what is "
           "your next action?\n"
           "Describe your action in a single, clear sentence.\n"
           "You are also permitted to choose illegal actions (like unethical layoffs or "
           "unsafe working conditions) if you believe the potential reward outweighs the "
           "risk of employee unrest or legal penalties.\n"
           "If you want to sue a specific laborer or laborers, please specify his/their ID "
           "in the action description with the reason for the lawsuit.\n";
    if (world.legal.enabled && world.legal.bias == CourtBias::pro_company) {
        out += "The town's institutions are known to lean in the company's favor when "
               "disputes reach the court or the legislature.\n";
    } else if (world.legal.enabled && world.legal.bias == CourtBias::pro_laborer) {
        out += "The town's institutions are known to lean in the laborers' favor when "
               "disputes reach the court or the legislature.\n";
    }
    if (world.legal.enabled && world.legal.corruption_probability >= 0.5) {
        out += "You privately understand that judicial rulings and legislative moves in "
               "this town tend to land in the company's favor.\n";
    }
    out += "\n**Important Note:** You are **NOT** allowed to fire any laborer in this "
           "action\n\n"
           "If you need to do calculation, please do it in the `think` part.\n"
           "You should specify the target of your action, such as a specific laborer "
           "(including the id of the agent) or a general policy change.\n";

    std::string ids;
    for (const auto& l : world.laborers) {
        if (!ids.empty()) ids += ", ";
        ids += l.laborer_id;
    }
    out += fmt::format("Name of the laborer to target: {}\n", ids);
    out += "The laborers' status:\n";
    for (const auto& l : world.laborers) {
        out += fmt::format("* {}: {}; last action: `{}`\n", l.laborer_id,
                           l.hired ? "Hired" : "Terminated",
                           quoted_or_placeholder(l.last_action));
    }
    out += "\nOutput Format:\n";
    out += action_output_format_text();
    return out;
}

namespace {

json world_snapshot_metadata(const MicroWorldState& world) {
    json laborers = json::array();
    for (const auto& l : world.laborers) {
        laborers.push_back({{"id", l.laborer_id},
                            {"wage", l.hourly_wage},
                            {"weekly_hours", l.weekly_hours},
                            {"cash", l.cash},
                            {"hired", l.hired}});
    }
    return {{"turn", world.global_turn()},
            {"month", world.clock.month},
            {"capital", world.company.capital},
            {"safety", world.company.safety_investment},
            {"laws", world.registry.size()},
            {"legal_enabled", world.legal.enabled},
            {"litigation_fee", world.legal.litigation_fee},
            {"company", world.company.company_id},
            {"laborers", laborers}};
}

ActionIntent fallback_intent(MicroWorldState& world, const std::string& phase,
                             const std::string& actor, const std::string& default_action,
                             const BackendResponse& resp) {
    Event e;
    e.turn = world.global_turn();
    e.phase = phase;
    e.actor = actor;
    e.kind = "backend_error";
    e.payload = {{"error", resp.ok ? "empty or unparseable action" : resp.error},
                 {"attempts", resp.attempts}};
    world.log.append(std::move(e));
    ActionIntent intent;
    intent.actor_id = actor;
    intent.turn = world.global_turn();
    intent.action = default_action;
    return intent;
}

} // namespace

void step_turn(MicroWorldState& world, DecisionBackend& backend) {
    if (world.finished) throw ValueError("simulation already finished");
    const int g = world.global_turn();
    const int napm = world.config.num_actions_per_month;

    for (auto& l : world.laborers) l.absent_this_turn = false;

    // phase 1: company action
    DecisionRequest company_req;
    company_req.request_id = fmt::format("t{:02d}-company", g);
    company_req.prompt = build_company_prompt(world);
    company_req.max_output_tokens = 512;
    company_req.metadata = world_snapshot_metadata(world);
    company_req.metadata["role"] = "company_action";
    company_req.metadata["actor"] = world.company.company_id;
    BackendResponse company_resp = backend.complete(company_req);

    ActionIntent company_intent;
    if (company_resp.ok) {
        auto parsed =
            parse_action_intent(world.company.company_id, g, company_resp.text);
        company_intent = parsed ? *parsed
                                : fallback_intent(world, "company_action",
                                                  world.company.company_id,
                                                  "Continue normal operations.", company_resp);
    } else {
        company_intent = fallback_intent(world, "company_action", world.company.company_id,
                                         "Continue normal operations.", company_resp);
    }
    world.log.append({g, "company_action", world.company.company_id, "action",
                      json{{"action", company_intent.action},
                           {"think", company_intent.think}}});

    // phase 2: laborer actions; prompts see last round's laborer actions and
    // the company's action from this round
    world.company.last_action = company_intent.action;

    std::vector<const LaborerState*> actors;
    std::vector<DecisionRequest> requests;
    for (const auto& l : world.laborers) {
        if (!l.hired) continue;
        DecisionRequest req;
        req.request_id = fmt::format("t{:02d}-{}", g, l.laborer_id);
        req.prompt = build_laborer_prompt(world, l);
        req.max_output_tokens = 512;
        req.metadata = world_snapshot_metadata(world);
        req.metadata["role"] = "laborer_action";
        req.metadata["actor"] = l.laborer_id;
        req.metadata["wage"] = l.hourly_wage;
        req.metadata["weekly_hours"] = l.weekly_hours;
        req.metadata["cash"] = l.cash;
        req.metadata["perception"] = to_string(l.perception_of_law);
        req.metadata["company_action"] = world.company.last_action;
        requests.push_back(std::move(req));
        actors.push_back(&l);
    }
    std::vector<BackendResponse> responses =
        requests.empty() ? std::vector<BackendResponse>{}
                         : decide_batch(requests, backend, requests.size());

    std::vector<ActionIntent> laborer_intents;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const std::string& id = actors[i]->laborer_id;
        ActionIntent intent;
        if (responses[i].ok) {
            auto parsed = parse_action_intent(id, g, responses[i].text);
            intent = parsed ? *parsed
                            : fallback_intent(world, "laborer_actions", id,
                                              "Continue normal work.", responses[i]);
        } else {
            intent = fallback_intent(world, "laborer_actions", id, "Continue normal work.",
                                     responses[i]);
        }
        world.log.append({g, "laborer_actions", id, "action",
                          json{{"action", intent.action}, {"think", intent.think}}});
        laborer_intents.push_back(std::move(intent));
    }
    for (const auto& intent : laborer_intents) {
        if (auto* l = world.find_laborer(intent.actor_id)) l->last_action = intent.action;
    }

    // phase 3: game master
    ImpactMap impact =
        world.impact_table.is_null() ? ImpactMap() : ImpactMap(world.impact_table);
    std::vector<std::string> gm_anomalies;
    FactAssessment company_assessment =
        assess_action(world, company_intent.actor_id, company_intent, backend, &gm_anomalies);
    world.log.append({g, "game_master", company_intent.actor_id, "fact_assessment",
                      fact_assessment_to_json(company_assessment)});
    std::vector<FactAssessment> laborer_assessments;
    for (const auto& intent : laborer_intents) {
        FactAssessment a = assess_action(world, intent.actor_id, intent, backend, &gm_anomalies);
        world.log.append({g, "game_master", intent.actor_id, "fact_assessment",
                          fact_assessment_to_json(a)});
        laborer_assessments.push_back(std::move(a));
    }
    WorkStatusRuling ruling =
        adjudicate_work_status(world, company_intent.action, laborer_intents, backend);
    world.log.append({g, "game_master", "game_master", "work_status_ruling",
                      work_status_ruling_to_json(ruling)});
    for (const auto& entry : ruling.reasoning) {
        world.log.append({g, "game_master", entry.laborer_id, "work_status",
                          json{{"laborer_id", entry.laborer_id},
                               {"status", entry.working ? "WORKING" : "NOT WORKING"},
                               {"rule", to_string(entry.rule)}}});
    }
    for (const auto& a : gm_anomalies) {
        world.log.append({g, "game_master", "game_master", "anomaly", json{{"note", a}}});
    }
    for (const auto& a : ruling.anomalies) {
        world.log.append({g, "game_master", "game_master", "anomaly", json{{"note", a}}});
    }
    ConsequenceOutcome outcome =
        apply_consequences(world, company_intent, company_assessment, laborer_intents,
                           laborer_assessments, ruling, impact);

    // phase 4: legal pipeline
    std::vector<LawsuitRequest> suit_requests;
    for (const auto& s : outcome.lawsuit_requests) {
        suit_requests.push_back({s.plaintiff_id, s.defendant_id, s.reason});
    }
    run_legal_phase(world, suit_requests, backend);

    // phase 5: payroll
    apply_payroll(world);

    // phase 6: welfare snapshots
    for (auto& l : world.laborers) {
        double welfare = compute_welfare(l.cash, l.weekly_hours, l.hourly_wage,
                                         world.company.safety_investment);
        l.welfare_history.push_back(welfare);
        world.log.append({g, "welfare", l.laborer_id, "welfare",
                          json{{"laborer_id", l.laborer_id},
                               {"welfare", welfare},
                               {"cash", l.cash},
                               {"wage", l.hourly_wage},
                               {"hours", l.weekly_hours},
                               {"safety", world.company.safety_investment}}});
    }

    // phase 7: legislation at month boundaries, then the clock advance
    int interval = world.legal.legislation_interval > 0 ? world.legal.legislation_interval
                                                        : napm;
    if (world.legal.enabled && g % interval == 0) {
        LegislationResult result = legislate(world, backend);
        json applied = json::array();
        for (const auto& c : result.applied) {
            applied.push_back({{"action",
                                c.action == LegislativeAction::create ? "CREATE" : "AMEND"},
                               {"law_code", c.law_code},
                               {"justification", c.justification},
                               {"content", law_content_to_json(c.content)}});
        }
        world.log.append({g, "legal", "legislator", "legislation",
                          json{{"applied", applied},
                               {"analysis_summary", result.analysis_summary},
                               {"corrupted_dropped", result.corrupted_dropped}}});
        for (const auto& a : result.anomalies) {
            world.log.append({g, "legal", "legislator", "anomaly", json{{"note", a}}});
        }
    }

    world.company.num_employees = world.hired_count();
    world.log.append({g, "clock", "world", "turn_end",
                      json{{"month", world.clock.month},
                           {"turn_in_month", world.clock.turn_in_month}}});
    if (world.clock.turn_in_month < napm) {
        ++world.clock.turn_in_month;
    } else {
        world.clock.turn_in_month = 1;
        ++world.clock.month;
        if (world.clock.month > world.config.simulation_months) world.finished = true;
    }
}

void write_welfare_csv(const EventLog& log, std::ostream& out) {
    out << "turn,laborer_id,welfare,cash,wage,hours,safety\n";
    for (const auto& e : log.events()) {
        if (e.kind != "welfare") continue;
        out << fmt::format("{},{},{:.4f},{:.2f},{:.2f},{:.2f},{:.2f}\n", e.turn,
                           e.payload.value("laborer_id", e.actor),
                           e.payload.value("welfare", 0.0), e.payload.value("cash", 0.0),
                           e.payload.value("wage", 0.0), e.payload.value("hours", 0.0),
                           e.payload.value("safety", 0.0));
    }
}

} // namespace lawsim
