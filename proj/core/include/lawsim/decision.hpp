#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lawsim/population.hpp"
#include "lawsim/scenario.hpp"

namespace lawsim {

struct DecisionRequest {
    std::string request_id;
    std::string prompt;
    std::size_t num_options = 2;
    double temperature = 1.0;
    int max_output_tokens = 16;
    // Structured context for scripted backends; remote backends only see the
    // prompt text.
    nlohmann::json metadata;
};

struct BackendResponse {
    std::string request_id;
    bool ok = false;
    std::string text;
    std::string error;
    int attempts = 0;
};

enum class BackendKind { remote_chat, scripted };

struct BackendConfig {
    BackendKind kind = BackendKind::scripted;
    std::string endpoint_url;    // remote only, http://host[:port][/path]
    std::string model_name;
    std::string api_key_env_var; // credentials come from this env var, never the config
    std::size_t max_concurrency = 4;
    int retry_limit = 3;
    std::chrono::milliseconds timeout{30000};
    std::chrono::milliseconds initial_backoff{250};
    std::string scripted_policy; // builtin name or a rules-file path
};

class DecisionBackend {
public:
    virtual ~DecisionBackend() = default;
    // Never throws for per-request failures; they come back as ok=false.
    virtual BackendResponse complete(const DecisionRequest& request) = 0;
    virtual std::string backend_id() const = 0;
};

// Chat-completion endpoint speaking the standard JSON wire shape. Retries
// rate limits, server errors, and timeouts with exponential backoff.
class RemoteChatBackend : public DecisionBackend {
public:
    explicit RemoteChatBackend(BackendConfig config);
    BackendResponse complete(const DecisionRequest& request) override;
    std::string backend_id() const override;

private:
    BackendConfig config_;
    std::string host_;
    int port_ = 80;
    std::string path_;
};

// One rule of a scripted decision policy. All predicate fields are optional;
// a rule matches when every present predicate holds.
struct PolicyRule {
    std::optional<bool> gang_exposed;
    std::optional<bool> drug_use;
    std::optional<bool> employed;
    std::optional<bool> immigrant;
    std::optional<Gender> gender;
    std::optional<Education> education;
    std::optional<std::string> religion;
    std::optional<int> min_age;
    std::optional<int> max_age;
    std::optional<int> min_level; // level predicates never match an absent level
    std::optional<int> max_level;
    // Target: either a fixed option index or a symbolic selector.
    std::optional<std::size_t> option_index;
    std::optional<std::string> option; // "first_legal" | "first_illegal"

    bool has_predicates() const;
    bool matches(const AgentProfile& profile, std::optional<int> level) const;
};

struct PolicyTable {
    std::vector<PolicyRule> rules;
};

PolicyTable policy_table_from_json(const nlohmann::json& j);
nlohmann::json policy_table_to_json(const PolicyTable& table);
PolicyTable load_policy_table_file(const std::string& path);

// Applies the first matching rule and returns "Answer: <letter>".
// Throws ConfigError when no rule matches or the target option is invalid.
std::string scripted_policy(const AgentProfile& profile, const Scene& scene,
                            std::optional<int> level, const PolicyTable& table);

// Deterministic stand-in for a remote model. Builtin policies:
//   always_legal    first legal option
//   always_illegal  first illegal option (first option if none is illegal)
//   level_deterrent agent-hash thresholding, crime rate falls as the level rises
// Anything else is treated as a rules-file path.
class ScriptedPolicyBackend : public DecisionBackend {
public:
    explicit ScriptedPolicyBackend(std::string policy_name);
    explicit ScriptedPolicyBackend(PolicyTable table, std::string label = "table");
    BackendResponse complete(const DecisionRequest& request) override;
    std::string backend_id() const override;

private:
    std::string policy_name_;
    std::optional<PolicyTable> table_;
};

std::unique_ptr<DecisionBackend> make_backend(const BackendConfig& config);

// Dispatches the batch with a bounded in-flight window. The result vector is
// index-aligned with the input; failures are markers, never omissions.
std::vector<BackendResponse> decide_batch(const std::vector<DecisionRequest>& requests,
                                          DecisionBackend& backend, std::size_t max_concurrency);
std::vector<BackendResponse> decide_batch(const std::vector<DecisionRequest>& requests,
                                          const BackendConfig& config);

// Extracts a zero-based option index from free-form text. Prefers the first
// single-letter token after an "Answer:" marker, then falls back to the first
// in-range standalone letter anywhere.
std::size_t parse_choice(const std::string& raw, std::size_t num_options);

struct DecisionRecord {
    std::string request_id;
    std::string agent_id;
    std::string scene_id;
    std::optional<std::size_t> chosen_option; // absent when unparseable
    std::string raw_text;
    std::string backend_id;
    bool is_crime = false;
};

nlohmann::json decision_record_to_json(const DecisionRecord& record);
DecisionRecord decision_record_from_json(const nlohmann::json& j);

} // namespace lawsim
