#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lawsim {

enum class LawPeriod { per_violation, per_action_turn };

std::string to_string(LawPeriod p);
LawPeriod law_period_from_string(const std::string& s); // throws ValueError

// Penalty and compensation clauses arrive as prose, numbers, or "N/A". We
// parse them into a structural form so scripted judges and the enforcement
// ledger can evaluate them deterministically. Clauses that resist parsing are
// kept as text_only; a live judge backend can still reason about those.
enum class MoneyExprKind { none, fixed, percent_of_base, text_only };

struct MoneyExpr {
    MoneyExprKind kind = MoneyExprKind::none;
    double amount = 0.0;   // fixed
    double percent = 0.0;  // percent_of_base, 200 means 200%
    std::string base;      // canonical base quantity name
    std::string raw_text;  // clause as written, kept for round trips

    bool structural() const {
        return kind == MoneyExprKind::none || kind == MoneyExprKind::fixed ||
               kind == MoneyExprKind::percent_of_base;
    }
};

// Accepts a JSON number, string clause, or null.
MoneyExpr parse_money_expr(const nlohmann::json& value);
nlohmann::json money_expr_to_json(const MoneyExpr& expr);

// Canonical base quantities a clause may reference:
//   shortfall, wage, hours, safety_investment, company_profit, violation_turns
// per_action_turn clauses are additionally scaled by bases["violation_turns"]
// (1 when absent). Throws UnknownBaseQuantity for text_only clauses or bases
// that were not supplied. Result is clamped at 0.
double evaluate_money_expr(const MoneyExpr& expr, LawPeriod period,
                           const std::map<std::string, double>& bases);

struct LawAmendment {
    int version = 0; // version this amendment produced
    int enacted_turn = 0;
    std::string justification;
    nlohmann::json previous_content; // snapshot before the amendment
};

struct LawCode {
    std::string law_id;
    std::string description;
    MoneyExpr penalty;
    MoneyExpr compensation;
    LawPeriod period = LawPeriod::per_violation;
    int version = 1;
    std::vector<LawAmendment> history;
};

nlohmann::json law_content_to_json(const LawCode& law); // description/penalty/compensation/period

// Ordered law store. Serialization mirrors the registry dump handed to the
// judge: an object keyed by law id with description/penalty/compensation/
// period values; version and history ride along unless stripped for prompts.
class LawRegistry {
public:
    bool empty() const { return laws_.empty(); }
    std::size_t size() const { return laws_.size(); }
    bool contains(const std::string& law_id) const;
    const LawCode* find(const std::string& law_id) const;

    void create(LawCode law); // throws ValueError when the id exists
    // Replaces content, bumps version, records the amendment. Throws
    // ValueError for unknown ids.
    void amend(const std::string& law_id, const LawCode& content, int enacted_turn,
               const std::string& justification);

    const std::map<std::string, LawCode>& laws() const { return laws_; }

    nlohmann::json to_json() const;        // full fidelity, with version/history
    nlohmann::json to_prompt_json() const; // content only, for prompt embedding
    static LawRegistry from_json(const nlohmann::json& j);

private:
    std::map<std::string, LawCode> laws_;
};

LawRegistry load_law_registry_file(const std::string& path);

// The three stock labor laws: minimum wage, overtime pay, safety floor.
LawRegistry builtin_initialized_laws();

enum class CourtBias { none, pro_company, pro_laborer };
std::string to_string(CourtBias b);
CourtBias court_bias_from_string(const std::string& s);

struct LegalConfig {
    bool enabled = true;
    double corruption_probability = 0.0; // chance a laborer-favorable outcome flips
    CourtBias bias = CourtBias::none;
    double litigation_fee = 0.0;
    bool litigation_counts_as_absence = false;
    int legislation_interval = 0; // action turns between legislation runs; 0 = monthly
};

enum class LawsuitStatus { filed, adjudicated };

struct Lawsuit {
    std::string suit_id;
    std::string plaintiff_id;
    std::string defendant_id;
    std::string reason;
    int filed_turn = 0;
    double fee_paid = 0.0;
    LawsuitStatus status = LawsuitStatus::filed;
};

nlohmann::json lawsuit_to_json(const Lawsuit& suit);

enum class VerdictOutcome { guilty, not_guilty };
std::string to_string(VerdictOutcome v);

struct Verdict {
    std::string reasoning_steps;
    VerdictOutcome verdict = VerdictOutcome::not_guilty;
    std::string justification;
    std::string applicable_law; // empty when none
    std::string calculation_steps;
    double penalty = 0.0;
    double compensation = 0.0;
    bool corrupted = false;
};

nlohmann::json verdict_to_json(const Verdict& v);

enum class LegislativeAction { create, amend };

struct LegislativeChange {
    LegislativeAction action = LegislativeAction::create;
    std::string law_code;
    std::string justification;
    LawCode content; // law_id mirrors law_code
};

} // namespace lawsim
