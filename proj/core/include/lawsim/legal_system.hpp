#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lawsim/decision.hpp"
#include "lawsim/laws.hpp"
#include "lawsim/micro_world.hpp"

namespace lawsim {

// Deducts the litigation fee, marks the plaintiff absent when configured, and
// queues the suit. Throws LegalSystemDisabled / InsufficientFunds / ValueError
// (self-suit); the caller turns those into log events.
Lawsuit& file_lawsuit(MicroWorldState& world, const std::string& plaintiff_id,
                      const std::string& defendant_id, const std::string& reason);

struct AdjudicationResult {
    Verdict verdict;
    std::vector<std::string> anomalies;
    int attempts = 0;
};

std::string build_judge_prompt(const MicroWorldState& world, const Lawsuit& suit,
                               const std::string& case_context);

// Asks the backend for a strict-JSON verdict, retrying a malformed reply once.
// Structural guarantees applied afterwards: a guilty verdict that cites no law
// currently on the books is coerced to not_guilty, and not_guilty always
// carries zero amounts.
AdjudicationResult adjudicate(const MicroWorldState& world, const Lawsuit& suit,
                              DecisionBackend& backend);

enum class VerdictBeneficiary { laborer, company, neutral };

// A guilty verdict favors the plaintiff, not_guilty favors the defendant.
VerdictBeneficiary classify_beneficiary(const Verdict& verdict, const Lawsuit& suit,
                                        const MicroWorldState& world);

// Flips laborer-favorable verdicts toward the company with the configured
// probability. Company-favorable and neutral verdicts pass through untouched.
// Flipping not_guilty to guilty requires a law on the books to cite; without
// one the verdict stands.
Verdict apply_corruption(const Verdict& verdict, VerdictBeneficiary beneficiary,
                         const LegalConfig& cfg, const LawRegistry& registry, Rng& rng);

// Moves compensation defendant -> plaintiff and removes the penalty from the
// defendant (a state fine leaves the closed economy). Logs every transfer and
// any bankruptcy crossings.
void enforce(const Verdict& verdict, Lawsuit& suit, MicroWorldState& world);

struct LegislationResult {
    std::vector<LegislativeChange> applied;
    std::vector<std::string> anomalies;
    int corrupted_dropped = 0;
    nlohmann::json analysis_summary;
};

nlohmann::json build_month_summary(const std::vector<nlohmann::json>& case_digest,
                                   const LawRegistry& registry);

std::string build_legislator_prompt(const MicroWorldState& world,
                                    const nlohmann::json& month_summary);

// Parses {analysis_summary, changes}, validates each change, converts monthly
// or weekly amounts to per-action-turn ones, applies survivors to the
// registry, and drops laborer-favorable changes with the corruption
// probability.
LegislationResult legislate(MicroWorldState& world, DecisionBackend& backend);

// Listing of amount conversions used during validation: monthly amounts divide
// by the turns per month, weekly ones multiply by the rounded weeks per turn.
double convert_time_based_amount(double amount, const std::string& from_period,
                                 int num_actions_per_month);

// Runs the full pipeline for one turn: files requested suits, adjudicates each
// pending suit, applies corruption, enforces, and records a case digest for
// the monthly legislation summary.
struct LawsuitRequest {
    std::string plaintiff_id;
    std::string defendant_id;
    std::string reason;
};

void run_legal_phase(MicroWorldState& world, const std::vector<LawsuitRequest>& requests,
                     DecisionBackend& backend);

} // namespace lawsim
