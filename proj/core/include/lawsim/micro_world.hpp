#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lawsim/laws.hpp"
#include "lawsim/population.hpp"
#include "lawsim/rng.hpp"

namespace lawsim {

class DecisionBackend;

// Keys in the JSON form use the historical config-constant names, including
// the misspelled SAFETY_INVESTIMENT_INPUT, so existing experiment configs load
// unchanged.
struct MicroConfig {
    int num_laborers = 3;
    int simulation_months = 4;
    int num_actions_per_month = 2;
    bool know_arrangement = true;
    double initial_hourly_wage = 30.0;
    double safety_investment_input = 500.0;
    double normal_work_hours_per_week = 40.0;
    double company_initial_capital = 100000.0;
    double laborer_initial_cash = 2000.0;
    double laborer_living_cost = 1500.0;
    double revenue_per_labor_hour = 60.0;

    int total_turns() const { return simulation_months * num_actions_per_month; }
    double weeks_per_turn() const { return 4.0 / num_actions_per_month; }

    static MicroConfig from_json(const nlohmann::json& j); // throws ConfigError
    nlohmann::json to_json() const;
};

struct SimClock {
    int month = 1;         // 1..simulation_months
    int turn_in_month = 1; // 1..num_actions_per_month

    int global_turn(int num_actions_per_month) const {
        return (month - 1) * num_actions_per_month + turn_in_month;
    }
};

enum class Perception { neutral, positive, negative };
std::string to_string(Perception p);
Perception perception_from_string(const std::string& s);

struct Persona {
    int age = 30;
    Gender gender = Gender::male;
    std::string occupation;
    std::string personality;
    std::string risk_tolerance;
    std::string behavioral_tendency;
    std::string patience;
};

Persona sample_persona(Rng& rng);
// "You are a {age}-year-old {gender}, currently employed as a {occupation} ..."
std::string persona_profile_sentence(const Persona& persona, const std::string& company_id);

struct OvertimeArrangement {
    double multiplier = 1.5;
    std::string text = "Overtime hours are paid at 150% of the standard hourly wage.";
};

struct LaborerState {
    std::string laborer_id;
    double cash = 0.0;
    double living_cost = 0.0;       // per month
    double hourly_wage = 0.0;
    double weekly_hours = 0.0;
    OvertimeArrangement overtime;
    bool hired = true;
    Persona persona;
    Perception perception_of_law = Perception::neutral;
    std::vector<double> welfare_history;
    bool absent_this_turn = false;
    std::string last_action;
};

struct CompanyState {
    std::string company_id;
    double capital = 0.0;
    double base_profit = 0.0; // per month, informational
    int num_employees = 0;
    double safety_investment = 0.0; // per month
    double revenue_per_labor_hour = 0.0;
    std::string last_action;
};

struct ActionIntent {
    std::string actor_id;
    int turn = 0;
    std::string think;
    std::string action;
};

// Splits "<response><think>..</think><action>..</action></response>" output.
// Falls back to treating the whole text as the action when the tags are
// missing; an empty action yields nullopt.
std::optional<ActionIntent> parse_action_intent(const std::string& actor_id, int turn,
                                                const std::string& raw);

struct Event {
    int turn = 0;
    std::string phase;
    std::string actor;
    std::string kind;
    nlohmann::json payload;
};

nlohmann::json event_to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

class EventLog {
public:
    void append(Event e) { events_.push_back(std::move(e)); }
    const std::vector<Event>& events() const { return events_; }
    void write_jsonl(std::ostream& out) const;
    static std::vector<Event> read_jsonl(std::istream& in);

private:
    std::vector<Event> events_;
};

struct MicroWorldState {
    MicroConfig config;
    SimClock clock;
    CompanyState company;
    std::vector<LaborerState> laborers;
    LawRegistry registry;
    LegalConfig legal;
    EventLog log;
    Rng rng{0};
    std::vector<Lawsuit> pending_suits;
    std::vector<nlohmann::json> month_case_digest; // adjudications since last legislation
    std::uint64_t next_suit_number = 1;
    bool finished = false;
    std::string perception_text;        // opinion sentence injected into laborer prompts
    nlohmann::json impact_table;        // qualitative label -> capital fraction

    LaborerState* find_laborer(const std::string& id);
    const LaborerState* find_laborer(const std::string& id) const;
    bool is_company(const std::string& id) const { return id == company.company_id; }
    int hired_count() const;
    int global_turn() const { return clock.global_turn(config.num_actions_per_month); }
};

struct WorldInit {
    std::uint64_t seed = 0;
    Perception perception = Perception::neutral;
    LawRegistry initial_laws; // empty for a legal vacuum
    LegalConfig legal;
    std::string positive_perception_text;
    std::string negative_perception_text;
    nlohmann::json impact_table; // null uses the built-in defaults
};

MicroWorldState init_world(const MicroConfig& config, const WorldInit& init);

// Weighted 0..100 score of safety investment, wage, inverted hours, and cash.
double compute_welfare(double cash, double total_hours, double avg_hourly_wage,
                       double safety_investment);

// End-of-turn pay, living costs, revenue, and the safety outlay. Appends
// payroll and bankruptcy events to the log.
void apply_payroll(MicroWorldState& world);

// Runs one full action turn through every phase: company action, laborer
// actions, adjudication of facts and work status, the legal pipeline, payroll,
// welfare snapshots, and the clock advance (with legislation at month
// boundaries). A single backend serves every role; requests carry structured
// metadata so scripted backends can answer deterministically.
void step_turn(MicroWorldState& world, DecisionBackend& backend);

// welfare.csv rows: turn,laborer_id,welfare,cash,wage,hours,safety
void write_welfare_csv(const EventLog& log, std::ostream& out);

std::string shared_background_text(const std::string& company_id);
std::string average_arrangement_text(const MicroConfig& config);
std::string action_output_format_text();
std::string law_related_info_text(const MicroWorldState& world);

std::string build_laborer_prompt(const MicroWorldState& world, const LaborerState& laborer);
std::string build_company_prompt(const MicroWorldState& world);

} // namespace lawsim
