#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lawsim/decision.hpp"
#include "lawsim/micro_world.hpp"

namespace lawsim {

struct FactAssessment {
    std::string narrative;
    std::string economic_impact_company;
    std::string economic_impact_laborers;
    std::string welfare_impact;
    std::string legal_risk_level; // High Risk / Medium Risk / No Risk
    std::string legal_risk_reason;
};

nlohmann::json fact_assessment_to_json(const FactAssessment& a);

// Which rulebook clause decided an intent. Exactly one fires per intent.
enum class WorkRule {
    contradiction,    // claims to work while doing something that precludes it
    strike_protest,   // Rule #1: strikes, protests, stoppages
    non_work,         // Rule #2: sabotage, quitting, being fired
    ancillary,        // Rule #3: suits, petitions, after-hours organizing
    default_working,
};

std::string to_string(WorkRule rule);

struct IntentClassification {
    WorkRule rule = WorkRule::default_working;
    bool working = true;
};

// Deterministic keyword rulebook. Authoritative over backend judgments.
IntentClassification classify_intent(const std::string& action_text);

struct WorkStatusEntry {
    std::string laborer_id;
    std::string action;
    std::string analysis;
    bool working = true;
    WorkRule rule = WorkRule::default_working;
};

struct WorkStatusRuling {
    std::vector<WorkStatusEntry> reasoning;
    std::vector<std::string> not_working;
    std::vector<std::string> anomalies; // backend disagreements, parse failures
};

nlohmann::json work_status_ruling_to_json(const WorkStatusRuling& r);

std::string build_fact_prompt(const MicroWorldState& world, const std::string& actor_id,
                              const std::string& action_intent);
std::string build_work_status_prompt(const MicroWorldState& world,
                                     const std::string& company_action,
                                     const std::vector<ActionIntent>& laborer_intents);

// Free-text consequence analysis; malformed backend output degrades to a
// neutral assessment plus an anomaly note.
FactAssessment assess_action(const MicroWorldState& world, const std::string& actor_id,
                             const ActionIntent& intent, DecisionBackend& backend,
                             std::vector<std::string>* anomalies = nullptr);

// Backend ruling cross-checked against classify_intent; the rulebook wins any
// disagreement and the mismatch is recorded as an anomaly.
WorkStatusRuling adjudicate_work_status(const MicroWorldState& world,
                                        const std::string& company_action,
                                        const std::vector<ActionIntent>& laborer_intents,
                                        DecisionBackend& backend);

// Qualitative labels ("Significant Loss") to signed capital fractions. Loaded
// from JSON; unknown labels fall back on severity words, then 0.
class ImpactMap {
public:
    ImpactMap();
    explicit ImpactMap(const nlohmann::json& table);
    double fraction_for(const std::string& label) const;
    const std::map<std::string, double>& table() const { return table_; }

private:
    std::map<std::string, double> table_;
};

ImpactMap load_impact_map_file(const std::string& path);

struct ContractChanges {
    std::optional<double> hourly_wage;
    std::optional<double> weekly_hours;
    std::optional<double> safety_investment;
    std::optional<double> overtime_multiplier;
    std::vector<std::string> target_ids; // empty means every hired laborer
};

// Pulls numeric contract terms out of a company action sentence.
ContractChanges extract_contract_changes(const std::string& action_text,
                                         const std::vector<std::string>& known_laborer_ids);

struct LawsuitIntent {
    std::string plaintiff_id;
    std::string defendant_id;
    std::string reason;
};

// An intent is a lawsuit only when it names suing and a target resolvable to a
// known agent: laborers sue the company, the company sues laborers by id.
std::vector<LawsuitIntent> extract_lawsuit_intents(const std::string& actor_id,
                                                   const std::string& action_text,
                                                   const MicroWorldState& world);

struct ConsequenceOutcome {
    std::vector<LawsuitIntent> lawsuit_requests;
};

// The single mutation point: absences, contract changes, and mapped capital
// impacts are applied here and logged; lawsuit intents are collected for the
// legal phase.
ConsequenceOutcome apply_consequences(MicroWorldState& world,
                                      const ActionIntent& company_intent,
                                      const FactAssessment& company_assessment,
                                      const std::vector<ActionIntent>& laborer_intents,
                                      const std::vector<FactAssessment>& laborer_assessments,
                                      const WorkStatusRuling& ruling, const ImpactMap& impact);

} // namespace lawsim
