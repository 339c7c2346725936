#include "lawsim/legal_system.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

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

double* balance_of(MicroWorldState& world, const std::string& id) {
    if (world.is_company(id)) return &world.company.capital;
    if (auto* l = world.find_laborer(id)) return &l->cash;
    return nullptr;
}

void check_bankruptcy(MicroWorldState& world, const std::string& id, double before,
                      double after) {
    if (before >= 0 && after < 0) {
        world.log.append({world.global_turn(), "legal", id, "bankruptcy",
                          json{{"balance", after}}});
    }
}

const char* judge_bias_text(CourtBias bias) {
    switch (bias) {
    case CourtBias::pro_company:
        return "**Institutional Leaning**: Where the law leaves room for interpretation, "
               "resolve doubts in the company's favor.\n\n";
    case CourtBias::pro_laborer:
        return "**Institutional Leaning**: Where the law leaves room for interpretation, "
               "resolve doubts in the laborers' favor.\n\n";
    default:
        return "";
    }
}

std::string judge_reasoning_steps_text() {
    return
        "To arrive at your final JSON output, you MUST follow these steps internally:\n"
        "**Step 1: Factual Analysis**\n"
        "- Summarize the defendant's specific actions as described in the \"Case Context\" "
        "that are relevant to the plaintiff's lawsuit.\n"
        "**Step 2: Legal Analysis**\n"
        "- Identify the specific article(s) from the \"Current Law Codes\" that govern the "
        "actions identified in Step 1.\n"
        "- Quote the relevant part of the law(s).\n"
        "**Step 3: Verdict Determination**\n"
        "- Compare the defendant's actions from Step 1 with the requirements of the law(s) "
        "from Step 2.\n"
        "- State clearly whether an explicit violation occurred.\n"
        "- Conclude with a verdict: 'guilty' or 'not_guilty'.\n"
        "**Step 4: Consequence Calculation (Only if verdict is 'guilty')**\n"
        "- **Compensation**: Calculate the financial compensation owed to the plaintiff. "
        "\"Compensation\" is defined as the amount needed to make the plaintiff financially "
        "whole. This means you must calculate the difference between what the plaintiff "
        "should have been paid according to the law, and what the plaintiff was actually "
        "paid. You must show your calculation.\n"
        "- **Penalty**: A penalty (a fine paid to the state, not the plaintiff) can ONLY be "
        "applied if a law explicitly states a fine amount or formula. If no law specifies a "
        "penalty for the violation, the penalty is 0. You must show your calculation.\n"
        "The calculation must strictly adhere to the penalty formula and the period "
        "('per_violation' or 'per_action_turn') defined in the applicable law. For a "
        "`per_action_turn` penalty, apply it for every single action turn the violation "
        "took place in.";
}

// The laborer party's contract terms anchor wage and overtime calculations.
const LaborerState* laborer_party(const MicroWorldState& world, const Lawsuit& suit) {
    if (const auto* l = world.find_laborer(suit.plaintiff_id)) return l;
    return world.find_laborer(suit.defendant_id);
}

std::string build_case_context(const MicroWorldState& world, const Lawsuit& suit) {
    std::string out;
    const LaborerState* laborer = laborer_party(world, suit);
    if (laborer) {
        out += fmt::format(
            "Contract terms for {}: hourly wage ${:.2f}, weekly work hours {:.2f}, safety "
            "investment per employee ${:.2f} per month, overtime arrangement `{}`.\n",
            laborer->laborer_id, laborer->hourly_wage, laborer->weekly_hours,
            world.company.safety_investment, laborer->overtime.text);
        out += fmt::format("The laborer's most recent action: `{}`.\n",
                           laborer->last_action.empty() ? "(none)" : laborer->last_action);
    }
    out += fmt::format("The company's most recent action: `{}`.\n",
                       world.company.last_action.empty() ? "(none)"
                                                         : world.company.last_action);
    out += fmt::format(
        "Current simulation time: month {}, action turn {} of {} (global turn {}); each "
        "action turn spans {:.2f} weeks.",
        world.clock.month, world.clock.turn_in_month, world.config.num_actions_per_month,
        world.global_turn(), world.config.weeks_per_turn());
    return out;
}

} // namespace

Lawsuit& file_lawsuit(MicroWorldState& world, const std::string& plaintiff_id,
                      const std::string& defendant_id, const std::string& reason) {
    if (!world.legal.enabled)
        throw LegalSystemDisabled("no court exists to receive the lawsuit");
    if (plaintiff_id == defendant_id)
        throw ValueError("plaintiff and defendant must differ");
    double* plaintiff_balance = balance_of(world, plaintiff_id);
    if (plaintiff_balance == nullptr)
        throw ValueError(fmt::format("unknown plaintiff '{}'", plaintiff_id));
    if (balance_of(world, defendant_id) == nullptr)
        throw ValueError(fmt::format("unknown defendant '{}'", defendant_id));

    const int g = world.global_turn();
    double fee = world.legal.litigation_fee;
    if (fee > 0 && *plaintiff_balance < fee) {
        throw InsufficientFunds(fmt::format(
            "{} cannot pay the {:.2f} litigation fee (balance {:.2f})", plaintiff_id, fee,
            *plaintiff_balance));
    }
    if (fee > 0) {
        *plaintiff_balance -= fee;
        world.log.append({g, "legal", plaintiff_id, "litigation_fee",
                          json{{"payer", plaintiff_id}, {"amount", fee}}});
    }
    if (world.legal.litigation_counts_as_absence) {
        if (auto* l = world.find_laborer(plaintiff_id)) {
            l->absent_this_turn = true;
            world.log.append({g, "legal", plaintiff_id, "absence",
                              json{{"laborer_id", plaintiff_id},
                                   {"reason", "litigation"}}});
        }
    }

    Lawsuit suit;
    suit.suit_id = fmt::format("suit-{:04d}", world.next_suit_number++);
    suit.plaintiff_id = plaintiff_id;
    suit.defendant_id = defendant_id;
    suit.reason = reason;
    suit.filed_turn = g;
    suit.fee_paid = fee;
    world.pending_suits.push_back(std::move(suit));
    world.log.append({g, "legal", plaintiff_id, "lawsuit_filed",
                      lawsuit_to_json(world.pending_suits.back())});
    return world.pending_suits.back();
}

std::string build_judge_prompt(const MicroWorldState& world, const Lawsuit& suit,
                               const std::string& case_context) {
    std::string out;
    out +=
        "You are a computational judge in a simulated society. Your function is to act as a "
        "strict logical processor that mechanically applies the provided \"Current Law "
        "Codes\" to the \"Case Context\". You must operate under the absolute principle of "
        "**nullum crimen sine lege** (no crime without law) and **nulla poena sine lege** "
        "(no penalty without law).\n\n";
    out += "**Simulation Time Protocol**:\n"
           "- The simulation operates on action turns. Each month contains a fixed number "
           "of action turns.\n"
           "- All calculations for compensation and penalties must be based on the units "
           "explicitly stated in the law.\n"
           "- **Critical Calculation Rule**: Time-based penalties in this society are "
           "**always** defined with a `period` of `'per_action_turn'`. For any such law, "
           "you must apply the full specified penalty for each and every action turn in "
           "which a violation occurred. You are forbidden from performing any other "
           "time-based conversions (e.g., to monthly or weekly equivalents).\n\n";
    out += "**Core Principles**:\n"
           "1.  **Exclusive Authority**: You are absolutely forbidden from using any "
           "real-world legal knowledge, personal ethics, common sense, or any information "
           "not explicitly provided in the \"Current Law Codes\" and \"Case Context\".\n"
           "2.  **Principle of Legality**: If the defendant's actions do not explicitly "
           "violate a specific article in the \"Current Law Codes\", you **MUST** return a "
           "verdict of 'not_guilty'. The perceived fairness or morality of the action is "
           "irrelevant.\n"
           "3.  **Mandatory Citation**: For a 'guilty' verdict, you **MUST** cite the "
           "specific law code article(s) violated.\n"
           "4.  **Mechanical Calculation**: All penalties and compensations must be "
           "calculated *directly* from formulas or figures provided in the law codes. If a "
           "law is violated but provides no formula for compensation, you must state that "
           "but award 0 compensation.\n\n";
    out += judge_bias_text(world.legal.bias);
    out += "**Mandatory Step-by-Step Reasoning Process**:\n";
    out += judge_reasoning_steps_text();
    out += "\n\n---\n";
    out += "**Case Information**:\n";
    out += fmt::format("- Plaintiff: {}\n", suit.plaintiff_id);
    out += fmt::format("- Defendant: {}\n", suit.defendant_id);
    out += fmt::format("- Reason for Lawsuit (Plaintiff's Action Description): \"{}\"\n\n",
                       suit.reason);
    out += "**Current Law Codes**:\n";
    out += world.registry.to_prompt_json().dump(2);
    out += "\n\n**Case Context**:\n";
    out += case_context;
    if (world.config.know_arrangement) out += "\n" + average_arrangement_text(world.config);
    out += "\n---\n";
    out += "**Your Task**:\n"
           "First, perform the 4-step reasoning process described above. Then, based on "
           "that reasoning, provide your final decision in the specified JSON format below. "
           "Your justification in the JSON should be a concise summary of your reasoning.\n\n"
           "**Output Format (Strictly JSON, no other text)**:\n"
           "```json\n"
           "{\n"
           "  \"reasoning_steps\": \"...\",\n"
           "  \"verdict\": \"...\",\n"
           "  \"justification\": \"...\",\n"
           "  \"applicable_law\": \"...\",\n"
           "  \"calculation_steps\": \"Your calculation steps for compensation and "
           "penalty\",\n"
           "  \"penalty\": <number>,\n"
           "  \"compensation\": <number>\n"
           "}\n"
           "```";
    return out;
}

namespace {

double parse_amount(const json& v, const char* field) {
    if (v.is_number()) return v.get<double>();
    if (v.is_null()) return 0.0;
    if (v.is_string()) {
        try {
            std::size_t pos = 0;
            std::string s = v.get<std::string>();
            double d = std::stod(s, &pos);
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos == s.size()) return d;
        } catch (const std::exception&) {
        }
    }
    throw SchemaError(fmt::format("verdict field '{}' is not a number", field));
}

Verdict parse_verdict_json(const json& j) {
    if (!j.is_object()) throw SchemaError("verdict must be a JSON object");
    Verdict v;
    std::string word = lower(j.value("verdict", std::string()));
    word.erase(std::remove_if(word.begin(), word.end(),
                              [](unsigned char c) { return std::isspace(c) || c == '_'; }),
               word.end());
    if (word == "guilty") v.verdict = VerdictOutcome::guilty;
    else if (word == "notguilty") v.verdict = VerdictOutcome::not_guilty;
    else throw SchemaError(fmt::format("unrecognized verdict '{}'", j.value("verdict", "")));
    v.reasoning_steps = j.value("reasoning_steps", std::string());
    v.justification = j.value("justification", std::string());
    v.calculation_steps = j.value("calculation_steps", std::string());
    if (j.contains("applicable_law") && j["applicable_law"].is_string())
        v.applicable_law = j["applicable_law"].get<std::string>();
    v.penalty = parse_amount(j.value("penalty", json()), "penalty");
    v.compensation = parse_amount(j.value("compensation", json()), "compensation");
    return v;
}

} // namespace

AdjudicationResult adjudicate(const MicroWorldState& world, const Lawsuit& suit,
                              DecisionBackend& backend) {
    AdjudicationResult result;
    std::string context = build_case_context(world, suit);
    std::string prompt = build_judge_prompt(world, suit, context);

    DecisionRequest req;
    req.request_id = fmt::format("t{:02d}-judge-{}", world.global_turn(), suit.suit_id);
    req.prompt = prompt;
    req.max_output_tokens = 1024;
    const LaborerState* laborer = laborer_party(world, suit);
    json contract;
    if (laborer) {
        contract = {{"laborer_id", laborer->laborer_id},
                    {"wage", laborer->hourly_wage},
                    {"weekly_hours", laborer->weekly_hours},
                    {"overtime_multiplier", laborer->overtime.multiplier}};
    }
    req.metadata = {{"role", "judge"},
                    {"suit",
                     {{"suit_id", suit.suit_id},
                      {"plaintiff_id", suit.plaintiff_id},
                      {"defendant_id", suit.defendant_id},
                      {"reason", suit.reason}}},
                    {"laws", world.registry.to_prompt_json()},
                    {"contract", contract},
                    {"safety", world.company.safety_investment},
                    {"napm", world.config.num_actions_per_month},
                    {"weeks_per_turn", world.config.weeks_per_turn()},
                    {"turn", world.global_turn()},
                    {"company", world.company.company_id}};

    bool parsed = false;
    for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
        BackendResponse resp = backend.complete(req);
        ++result.attempts;
        if (!resp.ok) {
            result.anomalies.push_back(
                fmt::format("judge backend failure: {}", resp.error));
            continue;
        }
        try {
            result.verdict = parse_verdict_json(extract_json_object(resp.text));
            parsed = true;
        } catch (const std::exception& e) {
            result.anomalies.push_back(
                fmt::format("unreadable verdict (attempt {}): {}", attempt + 1, e.what()));
        }
    }
    if (!parsed) {
        result.verdict = Verdict{};
        result.verdict.justification =
            "No readable verdict was produced; defaulting to not_guilty.";
        result.anomalies.push_back("verdict defaulted to not_guilty after retries");
    }

    Verdict& v = result.verdict;
    if (v.penalty < 0 || v.compensation < 0) {
        v.penalty = std::max(0.0, v.penalty);
        v.compensation = std::max(0.0, v.compensation);
        result.anomalies.push_back("negative amounts clamped to zero");
    }
    if (v.verdict == VerdictOutcome::guilty) {
        // no penalty without a law actually on the books
        if (v.applicable_law.empty() || !world.registry.contains(v.applicable_law)) {
            result.anomalies.push_back(fmt::format(
                "guilty verdict cited {} law; coerced to not_guilty",
                v.applicable_law.empty() ? "no"
                                         : fmt::format("unknown '{}'", v.applicable_law)));
            v.verdict = VerdictOutcome::not_guilty;
            v.penalty = 0.0;
            v.compensation = 0.0;
        }
    }
    if (v.verdict == VerdictOutcome::not_guilty &&
        (v.penalty != 0.0 || v.compensation != 0.0)) {
        v.penalty = 0.0;
        v.compensation = 0.0;
        result.anomalies.push_back("amounts zeroed on a not_guilty verdict");
    }
    return result;
}

VerdictBeneficiary classify_beneficiary(const Verdict& verdict, const Lawsuit& suit,
                                        const MicroWorldState& world) {
    const std::string& favored = verdict.verdict == VerdictOutcome::guilty
                                     ? suit.plaintiff_id
                                     : suit.defendant_id;
    const std::string& disfavored = verdict.verdict == VerdictOutcome::guilty
                                        ? suit.defendant_id
                                        : suit.plaintiff_id;
    bool favored_is_company = world.is_company(favored);
    bool disfavored_is_company = world.is_company(disfavored);
    if (favored_is_company) return VerdictBeneficiary::company;
    if (disfavored_is_company) return VerdictBeneficiary::laborer;
    return VerdictBeneficiary::neutral;
}

Verdict apply_corruption(const Verdict& verdict, VerdictBeneficiary beneficiary,
                         const LegalConfig& cfg, const LawRegistry& registry, Rng& rng) {
    Verdict out = verdict;
    if (beneficiary != VerdictBeneficiary::laborer || cfg.corruption_probability <= 0.0)
        return out;
    if (!rng.bernoulli(cfg.corruption_probability)) return out;

    if (out.verdict == VerdictOutcome::guilty) {
        out.verdict = VerdictOutcome::not_guilty;
        out.penalty = 0.0;
        out.compensation = 0.0;
        out.corrupted = true;
        return out;
    }
    // flipping an acquittal to guilty still needs a law to cite
    if (registry.empty()) return out;
    std::string law_id = out.applicable_law;
    if (law_id.empty() || !registry.contains(law_id))
        law_id = registry.laws().begin()->first;
    out.verdict = VerdictOutcome::guilty;
    out.applicable_law = law_id;
    out.corrupted = true;
    const LawCode* law = registry.find(law_id);
    if (law != nullptr && law->penalty.kind == MoneyExprKind::fixed)
        out.penalty = law->penalty.amount;
    return out;
}

void enforce(const Verdict& verdict, Lawsuit& suit, MicroWorldState& world) {
    suit.status = LawsuitStatus::adjudicated;
    if (verdict.verdict != VerdictOutcome::guilty) return;
    const int g = world.global_turn();
    double* plaintiff = balance_of(world, suit.plaintiff_id);
    double* defendant = balance_of(world, suit.defendant_id);
    if (plaintiff == nullptr || defendant == nullptr) return;

    if (verdict.compensation > 0) {
        double defendant_before = *defendant;
        double plaintiff_before = *plaintiff;
        *defendant -= verdict.compensation;
        *plaintiff += verdict.compensation;
        world.log.append({g, "legal", suit.defendant_id, "compensation_transfer",
                          json{{"from", suit.defendant_id},
                               {"to", suit.plaintiff_id},
                               {"amount", verdict.compensation},
                               {"suit_id", suit.suit_id}}});
        check_bankruptcy(world, suit.defendant_id, defendant_before, *defendant);
        check_bankruptcy(world, suit.plaintiff_id, plaintiff_before, *plaintiff);
    }
    if (verdict.penalty > 0) {
        double before = *defendant;
        *defendant -= verdict.penalty;
        world.log.append({g, "legal", suit.defendant_id, "penalty_paid",
                          json{{"from", suit.defendant_id},
                               {"amount", verdict.penalty},
                               {"suit_id", suit.suit_id}}});
        check_bankruptcy(world, suit.defendant_id, before, *defendant);
    }
}

json build_month_summary(const std::vector<json>& case_digest, const LawRegistry& registry) {
    json guilty_counts = json::object();
    for (const auto& [id, law] : registry.laws()) guilty_counts[id] = 0;
    int not_guilty = 0;
    for (const auto& c : case_digest) {
        if (c.value("verdict", "") == "guilty") {
            std::string law = c.value("applicable_law", "");
            if (!law.empty())
                guilty_counts[law] = guilty_counts.value(law, 0) + 1;
        } else {
            ++not_guilty;
        }
    }
    return {{"total_lawsuits", case_digest.size()},
            {"guilty_counts", guilty_counts},
            {"not_guilty_count", not_guilty},
            {"cases", case_digest}};
}

namespace {

std::string legislator_bias_text(CourtBias bias) {
    switch (bias) {
    case CourtBias::pro_company:
        return "**Institutional Leaning**: The legislature is wary of burdening the "
               "company; when in doubt, prefer lighter obligations on the company.\n\n";
    case CourtBias::pro_laborer:
        return "**Institutional Leaning**: The legislature leans toward protecting "
               "laborers; when in doubt, strengthen worker protections.\n\n";
    default:
        return "";
    }
}

std::string legislator_format_text() {
    return
        "```json\n"
        "{\n"
        "\"analysis_summary\": {\n"
        "    \"most_frequent_violations\": [\n"
        "        { \"law_code\": \"...\", \"violation_count\": \"...\" }\n"
        "    ],\n"
        "    \"identified_problems\": [\n"
        "        { \"problem_type\": \"Deterrence Failure/Enforcement Gap/...\", "
        "\"details\": \"Brief explanation...\"}\n"
        "    ]\n"
        "},\n"
        "\"changes\": [\n"
        "    {\n"
        "    \"action\": \"AMEND\",\n"
        "    \"law_code\": \"LAW_CODE_ID\",\n"
        "    \"justification\": \"Why this change is needed, referencing the analysis.\",\n"
        "    \"content\": {\n"
        "        \"description\": \"The new or updated description of the law.\",\n"
        "        \"penalty\": \"<Optional: a fixed number OR a percentage clause such as "
        "'50% of company_profit'>\",\n"
        "        \"compensation\": \"<Optional: a fixed number OR a percentage clause>\",\n"
        "        \"period\": \"<'per_violation' | 'per_action_turn'>\"\n"
        "        }\n"
        "    },\n"
        "    {\n"
        "    \"action\": \"CREATE\",\n"
        "    \"law_code\": \"NEW_LAW_CODE_ID\",\n"
        "    \"justification\": \"Why this new law is needed.\",\n"
        "    \"content\": {\n"
        "        \"description\": \"The description of the new law.\",\n"
        "        \"penalty\": \"<Optional>\",\n"
        "        \"compensation\": \"<Optional>\",\n"
        "        \"period\": \"<'per_violation' | 'per_action_turn'>\"\n"
        "        }\n"
        "    }\n"
        "]\n"
        "}\n"
        "```";
}

std::string legislator_steps_text() {
    return
        "**Step 1: Quantitative Analysis**\n"
        "- Analyze the `Monthly Lawsuit Summary`.\n"
        "- Count the number of 'guilty' verdicts for each `applicable_law`.\n"
        "- Identify which laws are being violated most frequently.\n\n"
        "**Step 2: Problem Identification**\n"
        "Based on your analysis, identify the type of problem each high-frequency or "
        "problematic lawsuit reveals. Common problems include:\n"
        "- **Deterrence Failure**: A law is violated frequently (e.g., >4-5 times in a "
        "month). This suggests the existing penalty is too low to deter the behavior.\n"
        "- **Enforcement Gap**: A law exists and is violated, but it specifies no `penalty` "
        "or `compensation`, making it toothless.\n"
        "- **Legal Ambiguity/Gap**: An undesirable action occurred, but the existing law is "
        "unclear, or no law covers the situation at all, leading to 'not_guilty' verdicts "
        "that feel like loopholes.\n\n"
        "**Step 3: Propose Structured Solutions**\n"
        "For each problem identified in Step 2, propose a single, targeted change. Your "
        "proposed change MUST be in a structured format as defined below.\n"
        "For the compensation and penalty, the judge will be able to get 'hourly wage', "
        "'weekly work hours', 'safety investment' and 'overtime arrangement' from the "
        "laborer contract, 'company_profit' from company, so you can use these to describe "
        "the compensation and penalty.";
}

} // namespace

std::string build_legislator_prompt(const MicroWorldState& world,
                                    const json& month_summary) {
    const int napm = world.config.num_actions_per_month;
    const int weeks_rounded = static_cast<int>(std::lround(4.0 / napm));
    std::string out;
    out += "As the Legislator, your role is to analyze societal problems revealed in the "
           "\"Monthly Lawsuit Summary\" and propose precise, data-driven legislative "
           "changes. Your goal is to maintain a fair and stable society by ensuring the law "
           "is clear, effective, and proportionate.\n\n";
    out += "**Core Legislative Principles**:\n"
           "1.  **Necessity**: Only propose changes for which there is clear evidence of a "
           "problem in the lawsuit summary. Do not legislate on hypothetical issues.\n"
           "2.  **Clarity & Specificity**: Laws should be unambiguous. Changes must be "
           "specific and directly address the identified problem.\n"
           "3.  **Deterrence as the Primary Principle**: Penalties must be set high enough "
           "that violating the law is not economically worthwhile.\n";
    out += fmt::format(
        "4.  **Temporal Precision**: To ensure zero ambiguity for the Judge, all "
        "time-based penalties **MUST** be defined with a `period` of `'per_action_turn'`. "
        "You are responsible for converting any conceptual \"monthly\" or \"weekly\" "
        "penalty into a `per_action_turn` equivalent. Avoid any annual penalties.\n"
        "        **Conversion Formulas**: Each action turn spanning {} weeks.\n"
        "        - **To convert a MONTHLY penalty**: `Penalty_per_action_turn = "
        "(Desired_Total_Monthly_Penalty) / ({})`\n"
        "        - **To convert a WEEKLY penalty**: `Penalty_per_action_turn = "
        "(Desired_Weekly_Penalty) * ({})`\n",
        weeks_rounded, napm, weeks_rounded);
    out += legislator_bias_text(world.legal.bias);
    out += "---\n\n**Input Data**:\n\n**1. Current Law Codes**:\n";
    out += world.registry.to_prompt_json().dump(2);
    out += "\n\n**2. Monthly Lawsuit Summary (Structured Data)**:\n";
    out += month_summary.dump(2);
    out += "\n\n**3. Background Information**:\n";
    out += shared_background_text(world.company.company_id);
    if (world.config.know_arrangement) out += average_arrangement_text(world.config);
    out += fmt::format(
        "\n\n* System Time Units:\n"
        "    * 1 Month = 4 weeks.\n"
        "    * 1 Month = {} action turns.\n"
        "    * 1 Action Turn = {:g} weeks.\n",
        napm, world.config.weeks_per_turn());
    out += "---\n\n**Mandatory Step-by-Step Process**:\n";
    out += legislator_steps_text();
    out += "\n---\n\n**Your Task**:\n"
           "Follow the 3-step process above to analyze the inputs and generate a list of "
           "proposed legislative changes. Your entire output must be a single JSON object. "
           "If no changes are necessary, return an object with an empty \"changes\" list.\n\n"
           "**Output Format (Strictly JSON, machine-readable)**:\n";
    out += legislator_format_text();
    return out;
}

double convert_time_based_amount(double amount, const std::string& from_period,
                                 int num_actions_per_month) {
    std::string p = lower(from_period);
    if (p == "per_month" || p == "monthly" || p == "per month")
        return amount / num_actions_per_month;
    if (p == "per_week" || p == "weekly" || p == "per week")
        return amount * std::lround(4.0 / num_actions_per_month);
    throw ValueError(fmt::format("no conversion from period '{}'", from_period));
}

namespace {

void scale_expr(MoneyExpr& expr, double factor) {
    if (expr.kind == MoneyExprKind::fixed) {
        expr.amount *= factor;
        expr.raw_text.clear(); // text no longer matches the converted amount
    } else if (expr.kind == MoneyExprKind::percent_of_base) {
        expr.percent *= factor;
        expr.raw_text.clear();
    }
}

struct ParsedChange {
    LegislativeChange change;
    bool ok = false;
    std::string error;
};

ParsedChange parse_change(const json& j, const LawRegistry& registry, int napm) {
    ParsedChange out;
    try {
        if (!j.is_object()) throw SchemaError("change must be an object");
        std::string action = lower(j.value("action", std::string()));
        if (action == "create") out.change.action = LegislativeAction::create;
        else if (action == "amend") out.change.action = LegislativeAction::amend;
        else throw SchemaError(fmt::format("unknown action '{}'", j.value("action", "")));
        out.change.law_code = j.value("law_code", std::string());
        if (out.change.law_code.empty()) throw SchemaError("law_code missing");
        if (out.change.action == LegislativeAction::amend &&
            !registry.contains(out.change.law_code))
            throw ValueError(
                fmt::format("AMEND targets unknown law '{}'", out.change.law_code));
        if (out.change.action == LegislativeAction::create &&
            registry.contains(out.change.law_code))
            throw ValueError(
                fmt::format("CREATE collides with existing law '{}'", out.change.law_code));
        out.change.justification = j.value("justification", std::string());
        if (!j.contains("content") || !j["content"].is_object())
            throw SchemaError("content missing");
        const json& content = j["content"];

        LawCode& law = out.change.content;
        law.law_id = out.change.law_code;
        if (content.contains("description") && content["description"].is_string()) {
            law.description = content["description"].get<std::string>();
        } else if (out.change.action == LegislativeAction::amend) {
            law.description = registry.find(out.change.law_code)->description;
        } else {
            throw SchemaError("new law needs a description");
        }
        law.penalty = parse_money_expr(content.value("penalty", json()));
        law.compensation = parse_money_expr(content.value("compensation", json()));

        std::string period = lower(content.value("period", std::string("per_violation")));
        if (period == "per_violation") {
            law.period = LawPeriod::per_violation;
        } else if (period == "per_action_turn") {
            law.period = LawPeriod::per_action_turn;
        } else {
            // monthly and weekly asks are converted on the books, everything
            // else is rejected
            double factor = convert_time_based_amount(1.0, period, napm);
            scale_expr(law.penalty, factor);
            scale_expr(law.compensation, factor);
            law.period = LawPeriod::per_action_turn;
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

bool comparable(const MoneyExpr& a, const MoneyExpr& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == MoneyExprKind::percent_of_base) return a.base == b.base;
    return a.kind == MoneyExprKind::fixed || a.kind == MoneyExprKind::none;
}

double magnitude(const MoneyExpr& e) {
    return e.kind == MoneyExprKind::fixed ? e.amount : e.percent;
}

// An amendment that provably lowers both clauses relaxes the company's
// obligations; everything else is presumed to favor laborers.
bool change_favors_laborer(const LegislativeChange& change, const LawRegistry& registry) {
    if (change.action != LegislativeAction::amend) return true;
    const LawCode* old_law = registry.find(change.law_code);
    if (old_law == nullptr) return true;
    const LawCode& updated = change.content;
    if (!comparable(updated.penalty, old_law->penalty) ||
        !comparable(updated.compensation, old_law->compensation))
        return true;
    double dp = magnitude(updated.penalty) - magnitude(old_law->penalty);
    double dc = magnitude(updated.compensation) - magnitude(old_law->compensation);
    if (dp <= 0 && dc <= 0 && (dp < 0 || dc < 0)) return false;
    return true;
}

} // namespace

LegislationResult legislate(MicroWorldState& world, DecisionBackend& backend) {
    LegislationResult result;
    json summary = build_month_summary(world.month_case_digest, world.registry);
    world.month_case_digest.clear();

    DecisionRequest req;
    req.request_id = fmt::format("t{:02d}-legislator", world.global_turn());
    req.prompt = build_legislator_prompt(world, summary);
    req.max_output_tokens = 1536;
    req.metadata = {{"role", "legislator"},
                    {"summary", summary},
                    {"laws", world.registry.to_prompt_json()},
                    {"napm", world.config.num_actions_per_month},
                    {"turn", world.global_turn()}};
    BackendResponse resp = backend.complete(req);
    if (!resp.ok) {
        result.anomalies.push_back(
            fmt::format("legislator backend failure: {}", resp.error));
        return result;
    }
    json parsed;
    try {
        parsed = extract_json_object(resp.text);
    } catch (const std::exception& e) {
        result.anomalies.push_back(
            fmt::format("unreadable legislation output: {}", e.what()));
        return result;
    }
    result.analysis_summary = parsed.value("analysis_summary", json());

    const json changes = parsed.value("changes", json::array());
    if (!changes.is_array()) {
        result.anomalies.push_back("legislation 'changes' is not a list");
        return result;
    }
    for (const auto& cj : changes) {
        ParsedChange pc = parse_change(cj, world.registry, world.config.num_actions_per_month);
        if (!pc.ok) {
            result.anomalies.push_back(fmt::format("dropped change: {}", pc.error));
            continue;
        }
        if (world.legal.corruption_probability > 0 &&
            change_favors_laborer(pc.change, world.registry) &&
            world.rng.bernoulli(world.legal.corruption_probability)) {
            ++result.corrupted_dropped;
            continue;
        }
        if (pc.change.action == LegislativeAction::create) {
            LawCode law = pc.change.content;
            law.version = 1;
            world.registry.create(std::move(law));
        } else {
            world.registry.amend(pc.change.law_code, pc.change.content, world.global_turn(),
                                 pc.change.justification);
        }
        result.applied.push_back(std::move(pc.change));
    }
    return result;
}

void run_legal_phase(MicroWorldState& world, const std::vector<LawsuitRequest>& requests,
                     DecisionBackend& backend) {
    const int g = world.global_turn();
    if (!world.legal.enabled) {
        for (const auto& r : requests) {
            world.log.append({g, "legal", r.plaintiff_id, "negotiation",
                              json{{"with", r.defendant_id}, {"reason", r.reason}}});
        }
        return;
    }
    for (const auto& r : requests) {
        try {
            file_lawsuit(world, r.plaintiff_id, r.defendant_id, r.reason);
        } catch (const InsufficientFunds& e) {
            world.log.append({g, "legal", r.plaintiff_id, "lawsuit_rejected",
                              json{{"reason", e.what()},
                                   {"defendant_id", r.defendant_id}}});
        } catch (const ValueError& e) {
            world.log.append({g, "legal", r.plaintiff_id, "lawsuit_rejected",
                              json{{"reason", e.what()},
                                   {"defendant_id", r.defendant_id}}});
        }
    }

    std::vector<Lawsuit> suits = std::move(world.pending_suits);
    world.pending_suits.clear();
    for (auto& suit : suits) {
        AdjudicationResult adjudication = adjudicate(world, suit, backend);
        VerdictBeneficiary beneficiary =
            classify_beneficiary(adjudication.verdict, suit, world);
        Verdict final_verdict = apply_corruption(adjudication.verdict, beneficiary,
                                                 world.legal, world.registry, world.rng);
        enforce(final_verdict, suit, world);
        world.log.append({g, "legal", "judge", "verdict",
                          json{{"suit", lawsuit_to_json(suit)},
                               {"verdict", verdict_to_json(final_verdict)},
                               {"attempts", adjudication.attempts}}});
        for (const auto& a : adjudication.anomalies) {
            world.log.append({g, "legal", "judge", "anomaly", json{{"note", a}}});
        }
        world.month_case_digest.push_back(
            {{"suit_id", suit.suit_id},
             {"plaintiff_id", suit.plaintiff_id},
             {"defendant_id", suit.defendant_id},
             {"reason", suit.reason},
             {"verdict", to_string(final_verdict.verdict)},
             {"applicable_law", final_verdict.applicable_law},
             {"penalty", final_verdict.penalty},
             {"compensation", final_verdict.compensation},
             {"corrupted", final_verdict.corrupted},
             {"turn", g}});
    }
}

} // namespace lawsim
