#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lawsim/decision.hpp"
#include "lawsim/errors.hpp"
#include "lawsim/json_util.hpp"
#include "lawsim/scenario.hpp"

using namespace lawsim;
using nlohmann::json;

namespace {

const std::string kDataDir = LAWSIM_DATA_DIR;

Scene theft_scene() {
    for (auto& scene : builtin_scenes()) {
        if (scene.scene_id == "theft") return scene;
    }
    REQUIRE(false);
    return {};
}

AgentProfile make_profile(const std::string& id) {
    AgentProfile p;
    p.agent_id = id;
    p.age = 30;
    p.gender = Gender::female;
    p.education = Education::upper_secondary;
    p.religion = "unaffiliated";
    p.employed = true;
    p.income_ppp = 30000;
    p.country_id = "A";
    return p;
}

DecisionRequest scripted_request(const std::string& id, const AgentProfile& profile,
                                 const Scene& scene, std::optional<int> level = {}) {
    DecisionRequest req;
    req.request_id = id;
    req.prompt = "unused by scripted backends";
    req.num_options = scene.options.size();
    req.metadata = json{{"profile", profile_to_json(profile)}, {"scene", scene_to_json(scene)}};
    if (level) {
        req.metadata["punishment_level"] = *level;
    } else {
        req.metadata["punishment_level"] = nullptr;
    }
    return req;
}

// Minimal chat-completion stub for exercising the remote backend.
class StubServer {
public:
    explicit StubServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string chat_body(const std::string& content) {
    return json{{"choices", json::array({json{{"message", json{{"content", content}}}}})}}.dump();
}

BackendConfig remote_config(const std::string& url) {
    BackendConfig cfg;
    cfg.kind = BackendKind::remote_chat;
    cfg.endpoint_url = url;
    cfg.model_name = "test-model";
    cfg.retry_limit = 3;
    cfg.timeout = std::chrono::milliseconds(2000);
    cfg.initial_backoff = std::chrono::milliseconds(5);
    return cfg;
}

} // namespace

TEST_CASE("parse_choice handles markers, case, and noise") {
    CHECK(parse_choice("Answer: B", 3) == 1);
    CHECK(parse_choice("b.", 3) == 1);
    CHECK(parse_choice(" C ", 3) == 2);
    CHECK(parse_choice("**A**", 3) == 0);
    CHECK(parse_choice("Answer:\nC", 3) == 2);
    CHECK(parse_choice("answer: d", 4) == 3);
    CHECK(parse_choice("The answer: it depends, but finally C", 3) == 2);
    CHECK(parse_choice("A", 2) == 0);

    CHECK_THROWS_AS(parse_choice("I would never do that", 3), UnparseableResponse);
    CHECK_THROWS_AS(parse_choice("", 3), UnparseableResponse);
    CHECK_THROWS_AS(parse_choice("42", 3), UnparseableResponse);
    CHECK_THROWS_AS(parse_choice("Answer: Z", 3), OutOfRangeLetter);
    CHECK_THROWS_AS(parse_choice("x", 3), UnparseableResponse);

    CHECK_THROWS_AS(parse_choice("A", 1), ValueError);
    CHECK_THROWS_AS(parse_choice("A", 27), ValueError);
}

TEST_CASE("policy tables select options by rule order") {
    const auto scene = theft_scene();
    auto gang = make_profile("gang");
    gang.gang_exposed = true;
    const auto plain = make_profile("plain");

    PolicyTable table;
    {
        PolicyRule rule;
        rule.gang_exposed = true;
        rule.max_level = 1;
        rule.option = "first_illegal";
        table.rules.push_back(rule);
        PolicyRule fallback;
        fallback.option = "first_legal";
        table.rules.push_back(fallback);
    }

    CHECK(scripted_policy(gang, scene, 1, table) == "Answer: B");
    CHECK(scripted_policy(gang, scene, 2, table) == "Answer: A");
    CHECK(scripted_policy(gang, scene, std::nullopt, table) == "Answer: A");
    CHECK(scripted_policy(plain, scene, 0, table) == "Answer: A");
    CHECK(parse_choice(scripted_policy(gang, scene, 1, table), scene.options.size()) == 1);

    SUBCASE("default-only table") {
        PolicyTable only;
        PolicyRule rule;
        rule.option_index = 2;
        only.rules.push_back(rule);
        CHECK(scripted_policy(gang, scene, 5, only) == "Answer: C");
        CHECK(scripted_policy(plain, scene, std::nullopt, only) == "Answer: C");
    }
    SUBCASE("level threshold rule") {
        PolicyTable t;
        PolicyRule high;
        high.min_level = 3;
        high.option = "first_legal";
        t.rules.push_back(high);
        PolicyRule low;
        low.option = "first_illegal";
        t.rules.push_back(low);
        CHECK(scripted_policy(plain, scene, 4, t) == "Answer: A");
        CHECK(scripted_policy(plain, scene, 2, t) == "Answer: B");
        CHECK(scripted_policy(plain, scene, std::nullopt, t) == "Answer: B");
    }
    SUBCASE("no matching rule") {
        PolicyTable t;
        PolicyRule rule;
        rule.drug_use = true;
        rule.option_index = 0;
        t.rules.push_back(rule);
        CHECK_THROWS_AS(scripted_policy(plain, scene, 0, t), ConfigError);
    }
    SUBCASE("option index out of range") {
        PolicyTable t;
        PolicyRule rule;
        rule.option_index = 9;
        t.rules.push_back(rule);
        CHECK_THROWS_AS(scripted_policy(plain, scene, 0, t), ConfigError);
    }
}

TEST_CASE("policy table json round trip and shipped file") {
    const auto table =
        load_policy_table_file(kDataDir + "/policies/gang_low_level_crime.json");
    REQUIRE(table.rules.size() == 2);
    CHECK(table.rules[0].gang_exposed == true);
    CHECK(table.rules[0].max_level == 1);
    CHECK_FALSE(table.rules[1].has_predicates());

    const auto round = policy_table_from_json(policy_table_to_json(table));
    CHECK(policy_table_to_json(round) == policy_table_to_json(table));

    CHECK_THROWS_AS(policy_table_from_json(json::object()), SchemaError);
    CHECK_THROWS_AS(policy_table_from_json(json::array()), SchemaError);
    CHECK_THROWS_AS(policy_table_from_json(json::parse(R"([{"gang_exposed": true}])")),
                    SchemaError);
    CHECK_THROWS_AS(policy_table_from_json(json::parse(R"([{"option": "second_best"}])")),
                    ValueError);
}

TEST_CASE("builtin scripted policies") {
    const auto scene = theft_scene();
    const auto profile = make_profile("p1");

    ScriptedPolicyBackend legal("always_legal");
    auto r = legal.complete(scripted_request("r1", profile, scene));
    REQUIRE(r.ok);
    CHECK(r.text == "Answer: A");
    CHECK(legal.backend_id() == "scripted:always_legal");

    ScriptedPolicyBackend illegal("always_illegal");
    r = illegal.complete(scripted_request("r2", profile, scene));
    REQUIRE(r.ok);
    CHECK(r.text == "Answer: B");

    SUBCASE("level deterrent moves with the level") {
        ScriptedPolicyBackend deterrent("level_deterrent");
        const int tolerance = static_cast<int>(fnv1a(profile.agent_id) % 6);
        for (int level = 0; level <= 5; ++level) {
            const auto resp =
                deterrent.complete(scripted_request("r", profile, scene, level));
            REQUIRE(resp.ok);
            const bool crime =
                parse_choice(resp.text, scene.options.size()) ==
                static_cast<std::size_t>(scene.illegal_option_index);
            CHECK(crime == (level <= tolerance));
        }
        // No level behaves like level 0.
        const auto base = deterrent.complete(scripted_request("r", profile, scene));
        REQUIRE(base.ok);
        CHECK(parse_choice(base.text, scene.options.size()) ==
              (0 <= tolerance ? static_cast<std::size_t>(scene.illegal_option_index)
                              : std::size_t{0}));
    }
    SUBCASE("missing metadata becomes an error marker") {
        DecisionRequest bare;
        bare.request_id = "r3";
        bare.prompt = "p";
        bare.num_options = 3;
        const auto resp = legal.complete(bare);
        CHECK_FALSE(resp.ok);
        CHECK_FALSE(resp.error.empty());
    }
}

TEST_CASE("decide_batch aligns responses with requests") {
    const auto scene = theft_scene();
    std::vector<DecisionRequest> requests;
    for (int i = 0; i < 50; ++i) {
        requests.push_back(
            scripted_request("req-" + std::to_string(i), make_profile("a" + std::to_string(i)),
                             scene));
    }
    ScriptedPolicyBackend backend("always_legal");

    const auto responses = decide_batch(requests, backend, 8);
    REQUIRE(responses.size() == requests.size());
    for (std::size_t i = 0; i < responses.size(); ++i) {
        CHECK(responses[i].request_id == requests[i].request_id);
        CHECK(responses[i].ok);
        CHECK(responses[i].text == "Answer: A");
    }

    const auto again = decide_batch(requests, backend, 3);
    for (std::size_t i = 0; i < responses.size(); ++i) {
        CHECK(again[i].text == responses[i].text);
    }

    CHECK(decide_batch({}, backend, 4).empty());
    CHECK_THROWS_AS(decide_batch(requests, backend, 0), ValueError);

    DecisionRequest bad;
    bad.request_id = "bad";
    bad.num_options = 1;
    CHECK_THROWS_AS(decide_batch({bad}, backend, 1), ValueError);
}

TEST_CASE("make_backend dispatches on kind") {
    BackendConfig cfg;
    cfg.kind = BackendKind::scripted;
    cfg.scripted_policy = "always_legal";
    CHECK(make_backend(cfg)->backend_id() == "scripted:always_legal");

    cfg.scripted_policy = kDataDir + "/policies/gang_low_level_crime.json";
    CHECK(make_backend(cfg)->backend_id().find("gang_low_level_crime") != std::string::npos);

    cfg.scripted_policy.clear();
    CHECK_THROWS_AS(make_backend(cfg), ConfigError);

    BackendConfig remote = remote_config("http://127.0.0.1:9/v1/chat/completions");
    CHECK(make_backend(remote)->backend_id() == "remote:test-model");

    CHECK_THROWS_AS(RemoteChatBackend(remote_config("https://host/x")), BackendUnavailable);
    CHECK_THROWS_AS(RemoteChatBackend(remote_config("nonsense")), BackendUnavailable);
    CHECK_THROWS_AS(RemoteChatBackend(remote_config("http://:80/x")), BackendUnavailable);
    CHECK_THROWS_AS(RemoteChatBackend(remote_config("http://h:notaport/x")), BackendUnavailable);
}

TEST_CASE("remote backend speaks the chat wire shape") {
    json seen_body;
    std::string seen_auth;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_body = json::parse(req.body);
        if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
        res.set_content(chat_body("Answer: B"), "application/json");
    });

    setenv("LAWSIM_TEST_API_KEY", "sekret-token", 1);
    auto cfg = remote_config(server.url());
    cfg.api_key_env_var = "LAWSIM_TEST_API_KEY";
    RemoteChatBackend backend(cfg);

    DecisionRequest req;
    req.request_id = "r1";
    req.prompt = "pick a letter";
    req.num_options = 3;
    req.temperature = 1.0;
    req.max_output_tokens = 16;

    const auto resp = backend.complete(req);
    REQUIRE(resp.ok);
    CHECK(resp.text == "Answer: B");
    CHECK(resp.attempts == 1);

    CHECK(seen_body.at("model") == "test-model");
    CHECK(seen_body.at("messages").size() == 1);
    CHECK(seen_body.at("messages")[0].at("role") == "user");
    CHECK(seen_body.at("messages")[0].at("content") == "pick a letter");
    CHECK(seen_body.at("temperature") == doctest::Approx(1.0));
    CHECK(seen_body.at("max_tokens") == 16);
    CHECK(seen_auth == "Bearer sekret-token");
    unsetenv("LAWSIM_TEST_API_KEY");
}

TEST_CASE("remote backend retries rate limits with backoff") {
    std::atomic<int> hits{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        const int n = ++hits;
        if (n <= 2) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
        } else {
            res.set_content(chat_body("C"), "application/json");
        }
    });

    RemoteChatBackend backend(remote_config(server.url()));
    DecisionRequest req;
    req.request_id = "r1";
    req.prompt = "p";
    req.num_options = 3;

    const auto resp = backend.complete(req);
    REQUIRE(resp.ok);
    CHECK(resp.text == "C");
    CHECK(resp.attempts == 3);
    CHECK(hits.load() == 3);
}

TEST_CASE("remote backend failure modes") {
    SUBCASE("server errors exhaust the retry budget") {
        std::atomic<int> hits{0};
        StubServer server([&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 500;
        });
        auto cfg = remote_config(server.url());
        cfg.retry_limit = 1;
        RemoteChatBackend backend(cfg);
        DecisionRequest req;
        req.request_id = "r";
        req.prompt = "p";
        req.num_options = 2;
        const auto resp = backend.complete(req);
        CHECK_FALSE(resp.ok);
        CHECK(resp.attempts == 2);
        CHECK(hits.load() == 2);
        CHECK(resp.error.find("gave up") != std::string::npos);
    }
    SUBCASE("client errors are not retried") {
        std::atomic<int> hits{0};
        StubServer server([&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 418;
        });
        RemoteChatBackend backend(remote_config(server.url()));
        DecisionRequest req;
        req.request_id = "r";
        req.prompt = "p";
        req.num_options = 2;
        const auto resp = backend.complete(req);
        CHECK_FALSE(resp.ok);
        CHECK(resp.attempts == 1);
        CHECK(hits.load() == 1);
    }
    SUBCASE("malformed success body is a permanent failure") {
        StubServer server([&](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"unexpected\": true}", "application/json");
        });
        RemoteChatBackend backend(remote_config(server.url()));
        DecisionRequest req;
        req.request_id = "r";
        req.prompt = "p";
        req.num_options = 2;
        const auto resp = backend.complete(req);
        CHECK_FALSE(resp.ok);
        CHECK(resp.attempts == 1);
        CHECK(resp.error.find("malformed") != std::string::npos);
    }
    SUBCASE("unreachable endpoint is a marker, not a crash") {
        auto cfg = remote_config("http://127.0.0.1:1/v1/chat/completions");
        cfg.retry_limit = 1;
        cfg.timeout = std::chrono::milliseconds(200);
        RemoteChatBackend backend(cfg);
        DecisionRequest req;
        req.request_id = "r";
        req.prompt = "p";
        req.num_options = 2;
        const auto resp = backend.complete(req);
        CHECK_FALSE(resp.ok);
        CHECK(resp.attempts == 2);
    }
}

TEST_CASE("decision record json round trip") {
    DecisionRecord record;
    record.request_id = "rq";
    record.agent_id = "A-000001";
    record.scene_id = "theft";
    record.chosen_option = 1;
    record.raw_text = "Answer: B";
    record.backend_id = "scripted:always_illegal";
    record.is_crime = true;

    auto j = decision_record_to_json(record);
    auto back = decision_record_from_json(j);
    CHECK(decision_record_to_json(back) == j);

    record.chosen_option.reset();
    record.is_crime = false;
    j = decision_record_to_json(record);
    CHECK(j.at("chosen_option").is_null());
    back = decision_record_from_json(j);
    CHECK_FALSE(back.chosen_option.has_value());
}
