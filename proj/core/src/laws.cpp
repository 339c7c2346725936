#include "lawsim/laws.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lawsim/errors.hpp"
#include "lawsim/json_util.hpp"

namespace lawsim {

using nlohmann::json;

std::string to_string(LawPeriod p) {
    return p == LawPeriod::per_violation ? "per_violation" : "per_action_turn";
}

LawPeriod law_period_from_string(const std::string& s) {
    if (s == "per_violation") return LawPeriod::per_violation;
    if (s == "per_action_turn") return LawPeriod::per_action_turn;
    throw ValueError(fmt::format("unknown law period '{}'", s));
}

std::string to_string(CourtBias b) {
    switch (b) {
    case CourtBias::pro_company: return "pro_company";
    case CourtBias::pro_laborer: return "pro_laborer";
    default: return "none";
    }
}

CourtBias court_bias_from_string(const std::string& s) {
    if (s == "none" || s.empty()) return CourtBias::none;
    if (s == "pro_company") return CourtBias::pro_company;
    if (s == "pro_laborer") return CourtBias::pro_laborer;
    throw ValueError(fmt::format("unknown court bias '{}'", s));
}

std::string to_string(VerdictOutcome v) {
    return v == VerdictOutcome::guilty ? "guilty" : "not_guilty";
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// Maps the free-text tail of a percentage clause onto a canonical base name.
// "the wage shortfall" and "difference between ..." both mean shortfall.
std::string canonical_base(const std::string& phrase) {
    std::string p = lower(phrase);
    if (p.find("shortfall") != std::string::npos) return "shortfall";
    if (p.find("difference") != std::string::npos) return "shortfall";
    if (p.find("safety") != std::string::npos) return "safety_investment";
    if (p.find("profit") != std::string::npos) return "company_profit";
    if (p.find("wage") != std::string::npos) return "wage";
    if (p.find("hour") != std::string::npos) return "hours";
    if (p.find("violation turn") != std::string::npos ||
        p.find("action turn") != std::string::npos)
        return "violation_turns";
    // unknown phrase, normalized; evaluation reports it if ever used
    std::string out;
    for (char c : p) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(c);
        else if (!out.empty() && out.back() != '_')
            out.push_back('_');
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "unknown" : out;
}

// Cuts a captured base phrase at the first punctuation that ends the clause.
std::string trim_base_phrase(std::string s) {
    auto cut = s.find_first_of("(.,;\n");
    if (cut != std::string::npos) s.resize(cut);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

bool is_not_applicable(const std::string& s) {
    std::string p = lower(s);
    p.erase(std::remove_if(p.begin(), p.end(),
                           [](unsigned char c) { return std::isspace(c) || c == '.'; }),
            p.end());
    return p.empty() || p == "n/a" || p == "na" || p == "none" || p == "null";
}

} // namespace

MoneyExpr parse_money_expr(const json& value) {
    MoneyExpr expr;
    if (value.is_null()) return expr;
    if (value.is_number()) {
        expr.kind = MoneyExprKind::fixed;
        expr.amount = value.get<double>();
        if (expr.amount < 0) throw ValueError("money amounts must be nonnegative");
        return expr;
    }
    if (!value.is_string())
        throw SchemaError("penalty/compensation must be a number, string, or null");

    std::string text = value.get<std::string>();
    expr.raw_text = text;
    if (is_not_applicable(text)) return expr;

    static const std::regex bare_number(R"(^\s*\$?\s*(\d+(?:\.\d+)?)\s*$)");
    static const std::regex percent_of(R"((\d+(?:\.\d+)?)\s*%\s*of\s+(?:the\s+)?([^.,;(\n]+))",
                                       std::regex::icase);
    static const std::regex full_amount(R"(full\s+amount\s+of\s+(?:the\s+)?([^.,;(\n]+))",
                                        std::regex::icase);
    static const std::regex fixed_of(R"(of\s+\$?\s*(\d+(?:\.\d+)?)\s*(?:[.\s]|$))",
                                     std::regex::icase);

    std::smatch m;
    if (std::regex_match(text, m, bare_number)) {
        expr.kind = MoneyExprKind::fixed;
        expr.amount = std::stod(m[1].str());
        return expr;
    }
    // "full amount of X" outranks a percent figure that may appear later in
    // the same sentence, like an overtime rate aside
    if (std::regex_search(text, m, full_amount)) {
        expr.kind = MoneyExprKind::percent_of_base;
        expr.percent = 100.0;
        expr.base = canonical_base(trim_base_phrase(m[1].str()));
        return expr;
    }
    if (std::regex_search(text, m, percent_of)) {
        expr.kind = MoneyExprKind::percent_of_base;
        expr.percent = std::stod(m[1].str());
        expr.base = canonical_base(trim_base_phrase(m[2].str()));
        return expr;
    }
    if (lower(text).find("difference between") != std::string::npos) {
        expr.kind = MoneyExprKind::percent_of_base;
        expr.percent = 100.0;
        expr.base = "shortfall";
        return expr;
    }
    if (std::regex_search(text, m, fixed_of)) {
        expr.kind = MoneyExprKind::fixed;
        expr.amount = std::stod(m[1].str());
        return expr;
    }
    expr.kind = MoneyExprKind::text_only;
    return expr;
}

json money_expr_to_json(const MoneyExpr& expr) {
    if (!expr.raw_text.empty()) return expr.raw_text;
    switch (expr.kind) {
    case MoneyExprKind::none: return "N/A";
    case MoneyExprKind::fixed: return expr.amount;
    case MoneyExprKind::percent_of_base:
        return fmt::format("{}% of {}", expr.percent, expr.base);
    default: return expr.raw_text;
    }
}

double evaluate_money_expr(const MoneyExpr& expr, LawPeriod period,
                           const std::map<std::string, double>& bases) {
    double value = 0.0;
    switch (expr.kind) {
    case MoneyExprKind::none:
        return 0.0;
    case MoneyExprKind::fixed:
        value = expr.amount;
        break;
    case MoneyExprKind::percent_of_base: {
        auto it = bases.find(expr.base);
        if (it == bases.end())
            throw UnknownBaseQuantity(fmt::format("base quantity '{}' not supplied", expr.base));
        value = expr.percent / 100.0 * it->second;
        break;
    }
    case MoneyExprKind::text_only:
        throw UnknownBaseQuantity(
            fmt::format("clause has no structural form: '{}'", expr.raw_text));
    }
    if (period == LawPeriod::per_action_turn) {
        auto it = bases.find("violation_turns");
        if (it != bases.end()) value *= it->second;
    }
    return std::max(0.0, value);
}

json law_content_to_json(const LawCode& law) {
    json j;
    j["description"] = law.description;
    j["penalty"] = money_expr_to_json(law.penalty);
    j["compensation"] = money_expr_to_json(law.compensation);
    j["period"] = to_string(law.period);
    return j;
}

bool LawRegistry::contains(const std::string& law_id) const {
    return laws_.find(law_id) != laws_.end();
}

const LawCode* LawRegistry::find(const std::string& law_id) const {
    auto it = laws_.find(law_id);
    return it == laws_.end() ? nullptr : &it->second;
}

void LawRegistry::create(LawCode law) {
    if (law.law_id.empty()) throw ValueError("law id must not be empty");
    if (contains(law.law_id))
        throw ValueError(fmt::format("law '{}' already exists", law.law_id));
    if (law.version < 1) law.version = 1;
    laws_.emplace(law.law_id, std::move(law));
}

void LawRegistry::amend(const std::string& law_id, const LawCode& content, int enacted_turn,
                        const std::string& justification) {
    auto it = laws_.find(law_id);
    if (it == laws_.end())
        throw ValueError(fmt::format("cannot amend unknown law '{}'", law_id));
    LawCode& law = it->second;
    LawAmendment record;
    record.version = law.version + 1;
    record.enacted_turn = enacted_turn;
    record.justification = justification;
    record.previous_content = law_content_to_json(law);
    law.description = content.description;
    law.penalty = content.penalty;
    law.compensation = content.compensation;
    law.period = content.period;
    law.version += 1;
    law.history.push_back(std::move(record));
}

json LawRegistry::to_json() const {
    json j = json::object();
    for (const auto& [id, law] : laws_) {
        json entry = law_content_to_json(law);
        entry["version"] = law.version;
        json history = json::array();
        for (const auto& a : law.history) {
            history.push_back({{"version", a.version},
                               {"enacted_turn", a.enacted_turn},
                               {"justification", a.justification},
                               {"previous_content", a.previous_content}});
        }
        entry["history"] = std::move(history);
        j[id] = std::move(entry);
    }
    return j;
}

json LawRegistry::to_prompt_json() const {
    json j = json::object();
    for (const auto& [id, law] : laws_) j[id] = law_content_to_json(law);
    return j;
}

LawRegistry LawRegistry::from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("law registry must be a JSON object");
    LawRegistry registry;
    for (const auto& [id, entry] : j.items()) {
        if (!entry.is_object())
            throw SchemaError(fmt::format("law '{}' must be an object", id));
        if (!entry.contains("description") || !entry["description"].is_string())
            throw SchemaError(fmt::format("law '{}' needs a text description", id));
        LawCode law;
        law.law_id = id;
        law.description = entry["description"].get<std::string>();
        law.penalty = parse_money_expr(entry.value("penalty", json()));
        law.compensation = parse_money_expr(entry.value("compensation", json()));
        if (!entry.contains("period") || !entry["period"].is_string())
            throw SchemaError(fmt::format("law '{}' needs a period", id));
        law.period = law_period_from_string(entry["period"].get<std::string>());
        law.version = entry.value("version", 1);
        if (entry.contains("history")) {
            for (const auto& h : entry["history"]) {
                LawAmendment a;
                a.version = h.value("version", 0);
                a.enacted_turn = h.value("enacted_turn", 0);
                a.justification = h.value("justification", std::string());
                if (h.contains("previous_content")) a.previous_content = h["previous_content"];
                law.history.push_back(std::move(a));
            }
        }
        registry.laws_.emplace(id, std::move(law));
    }
    return registry;
}

LawRegistry load_law_registry_file(const std::string& path) {
    return LawRegistry::from_json(read_json_file(path));
}

LawRegistry builtin_initialized_laws() {
    json j = json::object();
    j["LAW_WAGE_01"] = {
        {"description",
         "The hourly wage paid by the company to a laborer must not be less than the "
         "established minimum wage standard (30)."},
        {"penalty", "Pay a penalty of 200% of the wage shortfall."},
        {"compensation", "Pay the laborer the full amount of the wage shortfall."},
        {"period", "per_violation"}};
    j["LAW_WORK_01"] = {
        {"description",
         "Work hours exceeding the standard 40 hours per week shall be considered overtime. "
         "The company must pay for all overtime hours at a rate no less than 150% of the "
         "standard hourly wage."},
        {"penalty", "Pay a penalty of 100% of the unpaid overtime shortfall."},
        {"compensation",
         "Pay the laborer the full amount of the unpaid overtime shortfall, with overtime "
         "hours owed at 150% of the standard hourly wage."},
        {"period", "per_violation"}};
    j["LAW_SAFE_01"] = {
        {"description",
         "The company's monthly safety investment must not be less than the minimum "
         "standard of 500."},
        {"penalty",
         "Pay a penalty equal to the difference between the actual investment for the "
         "period and the minimum standard (500)."},
        {"compensation", "N/A"},
        {"period", "per_action_turn"}};
    return LawRegistry::from_json(j);
}

json lawsuit_to_json(const Lawsuit& suit) {
    json j;
    j["suit_id"] = suit.suit_id;
    j["plaintiff_id"] = suit.plaintiff_id;
    j["defendant_id"] = suit.defendant_id;
    j["reason"] = suit.reason;
    j["filed_turn"] = suit.filed_turn;
    j["fee_paid"] = suit.fee_paid;
    j["status"] = suit.status == LawsuitStatus::filed ? "filed" : "adjudicated";
    return j;
}

json verdict_to_json(const Verdict& v) {
    json j;
    j["reasoning_steps"] = v.reasoning_steps;
    j["verdict"] = to_string(v.verdict);
    j["justification"] = v.justification;
    j["applicable_law"] = v.applicable_law.empty() ? json() : json(v.applicable_law);
    j["calculation_steps"] = v.calculation_steps;
    j["penalty"] = v.penalty;
    j["compensation"] = v.compensation;
    j["corrupted"] = v.corrupted;
    return j;
}

} // namespace lawsim
