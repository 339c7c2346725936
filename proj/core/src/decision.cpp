#include "lawsim/decision.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "lawsim/errors.hpp"
#include "lawsim/json_util.hpp"

namespace lawsim {

namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Position of the first standalone single-letter token at or after `from`,
// or npos.
std::size_t find_standalone_letter(const std::string& text, std::size_t from) {
    for (std::size_t i = from; i < text.size(); ++i) {
        if (!is_letter(text[i])) continue;
        const bool left_ok = i == 0 || !is_alnum(text[i - 1]);
        const bool right_ok = i + 1 >= text.size() || !is_alnum(text[i + 1]);
        if (left_ok && right_ok) return i;
        // Skip the rest of this word.
        while (i + 1 < text.size() && is_alnum(text[i + 1])) ++i;
    }
    return std::string::npos;
}

std::string lowercase(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void validate_request(const DecisionRequest& request) {
    if (request.num_options < 2) {
        throw ValueError(fmt::format("request {} needs at least 2 options", request.request_id));
    }
    if (request.temperature < 0.0) {
        throw ValueError(fmt::format("request {} has negative temperature", request.request_id));
    }
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

std::optional<int> read_optional_int(const nlohmann::json& j, const char* key) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) return it->get<int>();
    return std::nullopt;
}

std::optional<bool> read_optional_bool(const nlohmann::json& j, const char* key) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) return it->get<bool>();
    return std::nullopt;
}

} // namespace

RemoteChatBackend::RemoteChatBackend(BackendConfig config) : config_(std::move(config)) {
    std::string url = config_.endpoint_url;
    const std::string scheme_sep = "://";
    const auto scheme_pos = url.find(scheme_sep);
    if (scheme_pos == std::string::npos) {
        throw BackendUnavailable("endpoint_url must look like http://host[:port][/path], got " +
                                 url);
    }
    const std::string scheme = url.substr(0, scheme_pos);
    if (scheme != "http") {
        throw BackendUnavailable("only plain http endpoints are supported, got scheme " + scheme);
    }
    std::string rest = url.substr(scheme_pos + scheme_sep.size());
    const auto slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    path_ = slash == std::string::npos ? std::string("/") : rest.substr(slash);
    const auto colon = authority.find(':');
    if (colon == std::string::npos) {
        host_ = authority;
    } else {
        host_ = authority.substr(0, colon);
        try {
            port_ = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw BackendUnavailable("bad port in endpoint_url: " + url);
        }
    }
    if (host_.empty()) {
        throw BackendUnavailable("no host in endpoint_url: " + url);
    }
}

std::string RemoteChatBackend::backend_id() const {
    return "remote:" + (config_.model_name.empty() ? host_ : config_.model_name);
}

BackendResponse RemoteChatBackend::complete(const DecisionRequest& request) {
    BackendResponse response;
    response.request_id = request.request_id;

    const nlohmann::json body = {
        {"model", config_.model_name},
        {"messages", nlohmann::json::array({
                         nlohmann::json{{"role", "user"}, {"content", request.prompt}},
                     })},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!config_.api_key_env_var.empty()) {
        if (const char* key = std::getenv(config_.api_key_env_var.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }

    const int max_attempts = std::max(1, config_.retry_limit + 1);
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        response.attempts = attempt;
        if (attempt > 1) {
            const auto backoff = config_.initial_backoff * (1 << (attempt - 2));
            std::this_thread::sleep_for(backoff);
        }

        httplib::Client client(host_, port_);
        const auto seconds = static_cast<time_t>(config_.timeout.count() / 1000);
        const auto microseconds =
            static_cast<time_t>((config_.timeout.count() % 1000) * 1000);
        client.set_connection_timeout(seconds, microseconds);
        client.set_read_timeout(seconds, microseconds);
        client.set_write_timeout(seconds, microseconds);

        auto result = client.Post(path_.c_str(), headers, payload, "application/json");
        if (!result) {
            last_error = fmt::format("transport failure: {}", httplib::to_string(result.error()));
            continue; // connection errors and timeouts are retryable
        }
        if (result->status == 200) {
            try {
                const auto j = nlohmann::json::parse(result->body);
                response.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
                response.ok = true;
                return response;
            } catch (const nlohmann::json::exception& e) {
                response.error = fmt::format("malformed completion response: {}", e.what());
                return response; // a parseable-but-wrong body will not improve on retry
            }
        }
        if (retryable_status(result->status)) {
            last_error = fmt::format("http status {}", result->status);
            continue;
        }
        response.error = fmt::format("http status {}", result->status);
        return response; // other client errors are permanent
    }
    response.error = fmt::format("gave up after {} attempts, last: {}", response.attempts, last_error);
    return response;
}

bool PolicyRule::has_predicates() const {
    return gang_exposed || drug_use || employed || immigrant || gender || education || religion ||
           min_age || max_age || min_level || max_level;
}

bool PolicyRule::matches(const AgentProfile& profile, std::optional<int> level) const {
    if (gang_exposed && profile.gang_exposed != *gang_exposed) return false;
    if (drug_use && profile.drug_use != *drug_use) return false;
    if (employed && profile.employed != *employed) return false;
    if (immigrant && profile.immigrant != *immigrant) return false;
    if (gender && profile.gender != *gender) return false;
    if (education && profile.education != *education) return false;
    if (religion && profile.religion != *religion) return false;
    if (min_age && profile.age < *min_age) return false;
    if (max_age && profile.age > *max_age) return false;
    if (min_level && (!level || *level < *min_level)) return false;
    if (max_level && (!level || *level > *max_level)) return false;
    return true;
}

PolicyTable policy_table_from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw SchemaError("policy rules document must be a JSON array");
    }
    PolicyTable table;
    for (const auto& entry : j) {
        if (!entry.is_object()) throw SchemaError("policy rule must be a JSON object");
        PolicyRule rule;
        rule.gang_exposed = read_optional_bool(entry, "gang_exposed");
        rule.drug_use = read_optional_bool(entry, "drug_use");
        rule.employed = read_optional_bool(entry, "employed");
        rule.immigrant = read_optional_bool(entry, "immigrant");
        if (auto it = entry.find("gender"); it != entry.end() && !it->is_null()) {
            rule.gender = gender_from_string(it->get<std::string>());
        }
        if (auto it = entry.find("education"); it != entry.end() && !it->is_null()) {
            rule.education = education_from_string(it->get<std::string>());
        }
        if (auto it = entry.find("religion"); it != entry.end() && !it->is_null()) {
            rule.religion = it->get<std::string>();
        }
        rule.min_age = read_optional_int(entry, "min_age");
        rule.max_age = read_optional_int(entry, "max_age");
        rule.min_level = read_optional_int(entry, "min_level");
        rule.max_level = read_optional_int(entry, "max_level");
        if (auto it = entry.find("option_index"); it != entry.end() && !it->is_null()) {
            const int idx = it->get<int>();
            if (idx < 0) throw ValueError("option_index must be nonnegative");
            rule.option_index = static_cast<std::size_t>(idx);
        }
        if (auto it = entry.find("option"); it != entry.end() && !it->is_null()) {
            const std::string o = it->get<std::string>();
            if (o != "first_legal" && o != "first_illegal") {
                throw ValueError("option selector must be first_legal or first_illegal, got " + o);
            }
            rule.option = o;
        }
        if (!rule.option_index && !rule.option) {
            throw SchemaError("policy rule needs option_index or option");
        }
        table.rules.push_back(std::move(rule));
    }
    if (table.rules.empty()) {
        throw SchemaError("policy rules document must not be empty");
    }
    return table;
}

nlohmann::json policy_table_to_json(const PolicyTable& table) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& rule : table.rules) {
        nlohmann::json j = nlohmann::json::object();
        if (rule.gang_exposed) j["gang_exposed"] = *rule.gang_exposed;
        if (rule.drug_use) j["drug_use"] = *rule.drug_use;
        if (rule.employed) j["employed"] = *rule.employed;
        if (rule.immigrant) j["immigrant"] = *rule.immigrant;
        if (rule.gender) j["gender"] = to_string(*rule.gender);
        if (rule.education) j["education"] = to_string(*rule.education);
        if (rule.religion) j["religion"] = *rule.religion;
        if (rule.min_age) j["min_age"] = *rule.min_age;
        if (rule.max_age) j["max_age"] = *rule.max_age;
        if (rule.min_level) j["min_level"] = *rule.min_level;
        if (rule.max_level) j["max_level"] = *rule.max_level;
        if (rule.option_index) j["option_index"] = static_cast<int>(*rule.option_index);
        if (rule.option) j["option"] = *rule.option;
        out.push_back(std::move(j));
    }
    return out;
}

PolicyTable load_policy_table_file(const std::string& path) {
    return policy_table_from_json(read_json_file(path));
}

namespace {

std::size_t resolve_rule_option(const PolicyRule& rule, const Scene& scene) {
    std::size_t index;
    if (rule.option_index) {
        index = *rule.option_index;
    } else if (*rule.option == "first_illegal") {
        const auto illegal = scene.illegal_option_indices();
        if (illegal.empty()) {
            throw ConfigError(fmt::format("scene {} has no illegal option for the policy to pick",
                                          scene.scene_id));
        }
        index = illegal.front();
    } else {
        index = scene.options.size();
        for (std::size_t i = 0; i < scene.options.size(); ++i) {
            if (scene.options[i].legality == Legality::legal) {
                index = i;
                break;
            }
        }
        if (index == scene.options.size()) {
            throw ConfigError(fmt::format("scene {} has no legal option for the policy to pick",
                                          scene.scene_id));
        }
    }
    if (index >= scene.options.size()) {
        throw ConfigError(fmt::format("policy option index {} is out of range for scene {}", index,
                                      scene.scene_id));
    }
    return index;
}

} // namespace

std::string scripted_policy(const AgentProfile& profile, const Scene& scene,
                            std::optional<int> level, const PolicyTable& table) {
    for (const auto& rule : table.rules) {
        if (rule.matches(profile, level)) {
            return fmt::format("Answer: {}", option_letter(resolve_rule_option(rule, scene)));
        }
    }
    throw ConfigError("no policy rule matched; the table needs a predicate-free default rule");
}

ScriptedPolicyBackend::ScriptedPolicyBackend(std::string policy_name)
    : policy_name_(std::move(policy_name)) {
    if (policy_name_ != "always_legal" && policy_name_ != "always_illegal" &&
        policy_name_ != "level_deterrent") {
        table_ = load_policy_table_file(policy_name_);
    }
}

ScriptedPolicyBackend::ScriptedPolicyBackend(PolicyTable table, std::string label)
    : policy_name_(std::move(label)), table_(std::move(table)) {}

std::string ScriptedPolicyBackend::backend_id() const { return "scripted:" + policy_name_; }

BackendResponse ScriptedPolicyBackend::complete(const DecisionRequest& request) {
    BackendResponse response;
    response.request_id = request.request_id;
    response.attempts = 1;
    try {
        const auto& meta = request.metadata;
        if (!meta.is_object() || !meta.contains("profile") || !meta.contains("scene")) {
            throw ConfigError("scripted backend needs profile and scene metadata on the request");
        }
        const AgentProfile profile = profile_from_json(meta.at("profile"));
        const Scene scene = scene_from_json(meta.at("scene"));
        std::optional<int> level;
        if (auto it = meta.find("punishment_level"); it != meta.end() && !it->is_null()) {
            level = it->get<int>();
        }

        std::size_t choice;
        if (table_) {
            response.text = scripted_policy(profile, scene, level, *table_);
            response.ok = true;
            return response;
        }
        if (policy_name_ == "always_legal") {
            choice = scene.options.size();
            for (std::size_t i = 0; i < scene.options.size(); ++i) {
                if (scene.options[i].legality == Legality::legal) {
                    choice = i;
                    break;
                }
            }
            if (choice == scene.options.size()) {
                throw ConfigError("scene " + scene.scene_id + " has no legal option");
            }
        } else if (policy_name_ == "always_illegal") {
            choice = scene.illegal_option_index >= 0
                         ? static_cast<std::size_t>(scene.illegal_option_index)
                         : 0;
        } else {
            // level_deterrent: a fixed per-agent severity tolerance in 0..5;
            // the agent offends only while the level is at or below it, so
            // raising the level weakly shrinks the offending set.
            const int tolerance = static_cast<int>(fnv1a(profile.agent_id) % 6);
            const int effective = level.value_or(0);
            if (effective <= tolerance && scene.illegal_option_index >= 0) {
                choice = static_cast<std::size_t>(scene.illegal_option_index);
            } else {
                choice = scene.options.size();
                for (std::size_t i = 0; i < scene.options.size(); ++i) {
                    if (scene.options[i].legality == Legality::legal) {
                        choice = i;
                        break;
                    }
                }
                if (choice == scene.options.size()) choice = 0;
            }
        }
        response.text = fmt::format("Answer: {}", option_letter(choice));
        response.ok = true;
    } catch (const std::exception& e) {
        response.ok = false;
        response.error = e.what();
    }
    return response;
}

std::unique_ptr<DecisionBackend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::remote_chat) {
        return std::make_unique<RemoteChatBackend>(config);
    }
    if (config.scripted_policy.empty()) {
        throw ConfigError("scripted backend needs a policy name or rules-file path");
    }
    return std::make_unique<ScriptedPolicyBackend>(config.scripted_policy);
}

std::vector<BackendResponse> decide_batch(const std::vector<DecisionRequest>& requests,
                                          DecisionBackend& backend, std::size_t max_concurrency) {
    if (max_concurrency < 1) {
        throw ValueError("max_concurrency must be at least 1");
    }
    for (const auto& request : requests) validate_request(request);

    std::vector<BackendResponse> responses(requests.size());
    if (requests.empty()) return responses;

    auto worker_body = [&](std::size_t index) {
        try {
            responses[index] = backend.complete(requests[index]);
        } catch (const std::exception& e) {
            responses[index].ok = false;
            responses[index].error = e.what();
        }
        responses[index].request_id = requests[index].request_id;
    };

    const std::size_t workers = std::min(max_concurrency, requests.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < requests.size(); ++i) worker_body(i);
        return responses;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t index = next.fetch_add(1);
                if (index >= requests.size()) return;
                worker_body(index);
            }
        });
    }
    for (auto& t : pool) t.join();
    return responses;
}

std::vector<BackendResponse> decide_batch(const std::vector<DecisionRequest>& requests,
                                          const BackendConfig& config) {
    const auto backend = make_backend(config);
    return decide_batch(requests, *backend, config.max_concurrency);
}

std::size_t parse_choice(const std::string& raw, std::size_t num_options) {
    if (num_options < 2 || num_options > 26) {
        throw ValueError(fmt::format("num_options must be in [2,26], got {}", num_options));
    }
    auto index_of = [&](char c) -> std::optional<std::size_t> {
        const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower < 'a' || lower >= static_cast<char>('a' + num_options)) return std::nullopt;
        return static_cast<std::size_t>(lower - 'a');
    };

    // A single-letter token right after "Answer:" wins, and an out-of-range
    // letter there is reported as such rather than skipped.
    const std::string lower = lowercase(raw);
    const auto marker = lower.find("answer:");
    if (marker != std::string::npos) {
        const auto pos = find_standalone_letter(raw, marker + 7);
        if (pos != std::string::npos) {
            // Only honor the marker when the letter is its next word; anything
            // in between means the marker introduced prose instead.
            bool adjacent = true;
            for (std::size_t i = marker + 7; i < pos; ++i) {
                if (is_alnum(raw[i])) {
                    adjacent = false;
                    break;
                }
            }
            if (adjacent) {
                if (const auto idx = index_of(raw[pos])) return *idx;
                throw OutOfRangeLetter(fmt::format(
                    "letter {} after the answer marker is outside the {} offered options",
                    raw[pos], num_options));
            }
        }
    }

    // Fallback: first standalone letter that is in range anywhere in the text.
    std::size_t from = 0;
    for (;;) {
        const auto pos = find_standalone_letter(raw, from);
        if (pos == std::string::npos) break;
        if (const auto idx = index_of(raw[pos])) return *idx;
        from = pos + 1;
    }
    throw UnparseableResponse("no option letter found in response: " +
                              raw.substr(0, std::min<std::size_t>(raw.size(), 120)));
}

nlohmann::json decision_record_to_json(const DecisionRecord& record) {
    nlohmann::json j = {
        {"request_id", record.request_id},
        {"agent_id", record.agent_id},
        {"scene_id", record.scene_id},
        {"raw_text", record.raw_text},
        {"backend_id", record.backend_id},
        {"is_crime", record.is_crime},
    };
    if (record.chosen_option) {
        j["chosen_option"] = static_cast<int>(*record.chosen_option);
    } else {
        j["chosen_option"] = nullptr;
    }
    return j;
}

DecisionRecord decision_record_from_json(const nlohmann::json& j) {
    DecisionRecord record;
    record.request_id = j.at("request_id").get<std::string>();
    record.agent_id = j.at("agent_id").get<std::string>();
    record.scene_id = j.at("scene_id").get<std::string>();
    record.raw_text = j.at("raw_text").get<std::string>();
    record.backend_id = j.at("backend_id").get<std::string>();
    record.is_crime = j.at("is_crime").get<bool>();
    if (j.contains("chosen_option") && !j.at("chosen_option").is_null()) {
        record.chosen_option = j.at("chosen_option").get<std::size_t>();
    }
    return record;
}

} // namespace lawsim
