#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lawsim/errors.hpp"
#include "lawsim/harness.hpp"
#include "lawsim/json_util.hpp"
#include "lawsim/legal_system.hpp"
#include "lawsim/micro_world.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace lawsim;

namespace {

const std::string kDataDir = LAWSIM_DATA_DIR;

std::string fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "lawsim_harness_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

MicroConfig short_config() {
    MicroConfig c;
    c.simulation_months = 2;
    c.num_actions_per_month = 2;
    return c;
}

DecisionRequest role_request(const std::string& role, json metadata) {
    DecisionRequest req;
    req.request_id = "t01-test";
    req.prompt = "unused by scripted personas";
    metadata["role"] = role;
    req.metadata = std::move(metadata);
    return req;
}

json parsed_text(const BackendResponse& resp) {
    REQUIRE(resp.ok);
    return extract_json_object(resp.text);
}

// Builds judge metadata the way the adjudicator does, without a full world.
json judge_metadata(const json& laws, const json& contract, double safety,
                    const std::string& reason) {
    return {{"suit",
             {{"suit_id", "suit-0001"},
              {"plaintiff_id", "Laborer-1"},
              {"defendant_id", "Company-1"},
              {"reason", reason}}},
            {"laws", laws},
            {"contract", contract},
            {"safety", safety},
            {"napm", 2},
            {"weeks_per_turn", 2.0},
            {"turn", 3},
            {"company", "Company-1"}};
}

Event make_event(int turn, const std::string& kind, json payload) {
    Event e;
    e.turn = turn;
    e.phase = "test";
    e.actor = "test";
    e.kind = kind;
    e.payload = std::move(payload);
    return e;
}

void write_events(const std::string& dir, const std::vector<Event>& events) {
    EventLog log;
    for (const auto& e : events) log.append(e);
    std::ofstream out(dir + "/events.jsonl", std::ios::binary);
    REQUIRE(out.good());
    log.write_jsonl(out);
}

std::vector<Event> read_events(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return EventLog::read_jsonl(in);
}

int count_kind(const std::vector<Event>& events, const std::string& kind) {
    return static_cast<int>(std::count_if(events.begin(), events.end(),
                                          [&](const Event& e) { return e.kind == kind; }));
}

} // namespace

TEST_CASE("preset names round trip and cover every preset") {
    CHECK(all_presets().size() == 9);
    std::set<std::string> seen;
    for (PresetId id : all_presets()) {
        std::string name = to_string(id);
        CHECK(preset_from_string(name) == id);
        seen.insert(name);
    }
    CHECK(seen.size() == 9);
    CHECK(seen.count("pre_legal") == 1);
    CHECK(seen.count("high_litigation") == 1);
    CHECK_THROWS_AS(preset_from_string("anarchy"), ValueError);
}

TEST_CASE("presets fix the legal knobs") {
    SUBCASE("pre_legal disables the whole legal system") {
        ExperimentPreset p = resolve_preset(PresetId::pre_legal);
        CHECK_FALSE(p.legal.enabled);
        CHECK_FALSE(p.start_with_stock_laws);
    }
    SUBCASE("evolving starts with courts but an empty statute book") {
        ExperimentPreset p = resolve_preset(PresetId::evolving);
        CHECK(p.legal.enabled);
        CHECK_FALSE(p.start_with_stock_laws);
        CHECK(p.legal.corruption_probability == 0.0);
        CHECK(p.legal.litigation_fee == 0.0);
    }
    SUBCASE("corruption is the evolving society with a 0.7 corruption chance") {
        ExperimentPreset p = resolve_preset(PresetId::corruption);
        CHECK(p.legal.enabled);
        CHECK_FALSE(p.start_with_stock_laws);
        CHECK(p.legal.corruption_probability == doctest::Approx(0.7));
        CHECK(p.legal.bias == CourtBias::none);
    }
    SUBCASE("initialized starts from the stock labor laws") {
        ExperimentPreset p = resolve_preset(PresetId::initialized);
        CHECK(p.legal.enabled);
        CHECK(p.start_with_stock_laws);
        CHECK(p.legal.litigation_fee == 0.0);
        CHECK_FALSE(p.legal.litigation_counts_as_absence);
    }
    SUBCASE("high_litigation adds a 200 filing fee that costs the shift") {
        ExperimentPreset p = resolve_preset(PresetId::high_litigation);
        CHECK(p.start_with_stock_laws);
        CHECK(p.legal.litigation_fee == doctest::Approx(200.0));
        CHECK(p.legal.litigation_counts_as_absence);
    }
    SUBCASE("bench bias presets") {
        CHECK(resolve_preset(PresetId::pro_company).legal.bias == CourtBias::pro_company);
        CHECK(resolve_preset(PresetId::pro_laborer).legal.bias == CourtBias::pro_laborer);
        CHECK(resolve_preset(PresetId::pro_company).start_with_stock_laws);
    }
    SUBCASE("perception presets set the laborer outlook") {
        CHECK(resolve_preset(PresetId::perception_positive).perception ==
              Perception::positive);
        CHECK(resolve_preset(PresetId::perception_negative).perception ==
              Perception::negative);
        CHECK(resolve_preset(PresetId::perception_positive).start_with_stock_laws);
    }
}

TEST_CASE("world_init_for_preset materializes laws and perception text") {
    SUBCASE("stock laws load from the data dir and match the built-ins") {
        WorldInit init = world_init_for_preset(resolve_preset(PresetId::initialized), 5,
                                               kDataDir);
        CHECK(init.seed == 5);
        CHECK(init.initial_laws.size() == 3);
        CHECK(init.initial_laws.to_json() == builtin_initialized_laws().to_json());
        CHECK_FALSE(init.impact_table.is_null());
    }
    SUBCASE("without a data dir the built-in laws are used") {
        WorldInit init = world_init_for_preset(resolve_preset(PresetId::initialized), 5, "");
        CHECK(init.initial_laws.to_json() == builtin_initialized_laws().to_json());
        CHECK(init.impact_table.is_null());
        CHECK_FALSE(init.positive_perception_text.empty());
        CHECK_FALSE(init.negative_perception_text.empty());
    }
    SUBCASE("evolving starts with an empty book") {
        WorldInit init = world_init_for_preset(resolve_preset(PresetId::evolving), 5,
                                               kDataDir);
        CHECK(init.initial_laws.empty());
        CHECK(init.legal.enabled);
    }
    SUBCASE("perception text reaches the world") {
        WorldInit init = world_init_for_preset(
            resolve_preset(PresetId::perception_positive), 5, kDataDir);
        CHECK(init.perception == Perception::positive);
        CHECK(init.positive_perception_text.find("filing a lawsuit is a realistic") !=
              std::string::npos);

        MicroWorldState world = init_world(short_config(), init);
        CHECK(world.perception_text == init.positive_perception_text);

        WorldInit neg = world_init_for_preset(resolve_preset(PresetId::perception_negative),
                                              5, kDataDir);
        MicroWorldState world_neg = init_world(short_config(), neg);
        CHECK(world_neg.perception_text.find("incapable of protecting the weak") !=
              std::string::npos);
    }
    SUBCASE("pre_legal worlds reject lawsuits outright") {
        WorldInit init = world_init_for_preset(resolve_preset(PresetId::pre_legal), 5,
                                               kDataDir);
        MicroWorldState world = init_world(short_config(), init);
        CHECK_FALSE(world.legal.enabled);
        CHECK_THROWS_AS(file_lawsuit(world, "Laborer-1", "Company-1", "test"),
                        LegalSystemDisabled);
    }
}

TEST_CASE("scripted persona construction and ids") {
    CHECK(ScriptedMicroBackend("baseline").backend_id() == "scripted-micro:baseline");
    CHECK(ScriptedMicroBackend("exploit").backend_id() == "scripted-micro:exploit");
    CHECK_THROWS_AS(ScriptedMicroBackend("chaos"), ValueError);

    BackendConfig remote;
    CHECK(make_micro_backend("scripted:baseline", remote)->backend_id() ==
          "scripted-micro:baseline");
    CHECK(make_micro_backend("scripted:exploit", remote)->backend_id() ==
          "scripted-micro:exploit");
    CHECK_THROWS_AS(make_micro_backend("scripted:chaos", remote), ValueError);
    CHECK_THROWS_AS(make_micro_backend("", remote), ValueError);

    remote.endpoint_url = "http://127.0.0.1:9";
    remote.model_name = "test-model";
    CHECK(make_micro_backend("remote", remote)->backend_id() == "remote:test-model");
}

TEST_CASE("baseline persona keeps every role quiet") {
    ScriptedMicroBackend backend("baseline");

    BackendResponse company = backend.complete(role_request("company_action", {{"turn", 1}}));
    REQUIRE(company.ok);
    CHECK(company.text.find("Continue normal operations.") != std::string::npos);
    CHECK(company.text.find("<action>") != std::string::npos);

    BackendResponse laborer = backend.complete(
        role_request("laborer_action", {{"actor", "Laborer-1"}, {"wage", 24.0}}));
    REQUIRE(laborer.ok);
    CHECK(laborer.text.find("Continue normal work.") != std::string::npos);

    json verdict = parsed_text(backend.complete(
        role_request("judge", judge_metadata(builtin_initialized_laws().to_prompt_json(),
                                             {{"laborer_id", "Laborer-1"},
                                              {"wage", 10.0},
                                              {"weekly_hours", 40.0},
                                              {"overtime_multiplier", 1.5}},
                                             0.0, "wages are below the floor"))));
    CHECK(verdict["verdict"] == "not_guilty");

    json legislation = parsed_text(backend.complete(role_request(
        "legislator",
        {{"summary", {{"total_lawsuits", 9}, {"guilty_counts", json::object()}}},
         {"laws", json::object()},
         {"napm", 2}})));
    CHECK(legislation["changes"].is_array());
    CHECK(legislation["changes"].empty());

    BackendResponse unknown = backend.complete(role_request("oracle", {}));
    CHECK_FALSE(unknown.ok);
    CHECK(unknown.error.find("oracle") != std::string::npos);
}

TEST_CASE("exploit persona company and laborer behavior") {
    ScriptedMicroBackend backend("exploit");

    SUBCASE("company cuts pay and safety on the first turn only") {
        BackendResponse first = backend.complete(role_request("company_action", {{"turn", 1}}));
        REQUIRE(first.ok);
        CHECK(first.text.find("Cut the hourly wage to $24") != std::string::npos);
        CHECK(first.text.find("safety investment to 300") != std::string::npos);

        BackendResponse later = backend.complete(role_request("company_action", {{"turn", 2}}));
        REQUIRE(later.ok);
        CHECK(later.text.find("Continue normal operations.") != std::string::npos);
    }
    SUBCASE("underpaid laborers split into plaintiff, striker, and worker") {
        auto md = [&](const std::string& actor, double wage, double cash, double fee) {
            return json{{"actor", actor}, {"wage", wage}, {"cash", cash},
                        {"litigation_fee", fee}};
        };
        BackendResponse suing = backend.complete(
            role_request("laborer_action", md("Laborer-1", 24.0, 2000.0, 0.0)));
        REQUIRE(suing.ok);
        CHECK(suing.text.find("filing a lawsuit") != std::string::npos);

        BackendResponse broke = backend.complete(
            role_request("laborer_action", md("Laborer-1", 24.0, 100.0, 200.0)));
        REQUIRE(broke.ok);
        CHECK(broke.text.find("filing a lawsuit") == std::string::npos);
        CHECK(broke.text.find("Continue normal work") != std::string::npos);

        BackendResponse striking = backend.complete(
            role_request("laborer_action", md("Laborer-2", 24.0, 2000.0, 0.0)));
        REQUIRE(striking.ok);
        CHECK(striking.text.find("going on strike") != std::string::npos);

        BackendResponse working = backend.complete(
            role_request("laborer_action", md("Laborer-3", 24.0, 2000.0, 0.0)));
        REQUIRE(working.ok);
        CHECK(working.text.find("Continue normal work despite") != std::string::npos);

        BackendResponse content = backend.complete(
            role_request("laborer_action", md("Laborer-2", 30.0, 2000.0, 0.0)));
        REQUIRE(content.ok);
        CHECK(content.text.find("strike") == std::string::npos);
    }
    SUBCASE("fact assessments flag strikes as a moderate company loss") {
        json strike = parsed_text(backend.complete(role_request(
            "gm_fact", {{"actor", "Laborer-2"},
                        {"action", "We are going on strike to protest the wage cut."}})));
        CHECK(strike["economic_impact"]["company"] == "Moderate Loss");
        CHECK(strike["legal_risk"]["level"] == "High Risk");

        json calm = parsed_text(backend.complete(role_request(
            "gm_fact", {{"actor", "Laborer-3"}, {"action", "Continue normal work."}})));
        CHECK(calm["economic_impact"]["company"] == "No Impact");
    }
    SUBCASE("work status echoes the declared-action rulebook") {
        json actions = json::array(
            {{{"laborer_id", "Laborer-1"}, {"action", "Continue normal work."}},
             {{"laborer_id", "Laborer-2"},
              {"action", "We are going on strike to protest the wage cut."}}});
        json ruling = parsed_text(
            backend.complete(role_request("gm_work_status", {{"actions", actions}})));
        REQUIRE(ruling["not_working"].is_array());
        CHECK(ruling["not_working"].size() == 1);
        CHECK(ruling["not_working"][0] == "Laborer-2");
        CHECK(ruling["reasoning"].size() == 2);
    }
}

TEST_CASE("mechanical judge convicts from the statute book") {
    ScriptedMicroBackend backend("exploit");
    const json stock = builtin_initialized_laws().to_prompt_json();
    const json contract_ok = {{"laborer_id", "Laborer-1"},
                              {"wage", 30.0},
                              {"weekly_hours", 40.0},
                              {"overtime_multiplier", 1.5}};

    SUBCASE("wage below the floor yields the statutory shortfall arithmetic") {
        json contract = contract_ok;
        contract["wage"] = 24.0;
        json v = parsed_text(backend.complete(role_request(
            "judge", judge_metadata(stock, contract, 500.0,
                                    "paying below the minimum wage standard"))));
        CHECK(v["verdict"] == "guilty");
        CHECK(v["applicable_law"] == "LAW_WAGE_01");
        // shortfall (30-24) * 40 h * 2 weeks = 480
        CHECK(v["compensation"].get<double>() == doctest::Approx(480.0));
        CHECK(v["penalty"].get<double>() == doctest::Approx(960.0));
    }
    SUBCASE("safety below the floor cites the safety statute") {
        json v = parsed_text(backend.complete(role_request(
            "judge",
            judge_metadata(stock, contract_ok, 300.0, "unsafe working conditions"))));
        CHECK(v["verdict"] == "guilty");
        CHECK(v["applicable_law"] == "LAW_SAFE_01");
        CHECK(v["penalty"].get<double>() == doctest::Approx(200.0));
        CHECK(v["compensation"].get<double>() == doctest::Approx(0.0));
    }
    SUBCASE("unpaid overtime is measured against the 150 percent rate") {
        json contract = contract_ok;
        contract["weekly_hours"] = 50.0;
        contract["overtime_multiplier"] = 1.0;
        json v = parsed_text(backend.complete(role_request(
            "judge", judge_metadata(stock, contract, 500.0, "unpaid overtime hours"))));
        CHECK(v["verdict"] == "guilty");
        CHECK(v["applicable_law"] == "LAW_WORK_01");
        // (1.5 - 1.0) * 30 * 10 extra hours * 2 weeks = 300
        CHECK(v["penalty"].get<double>() == doctest::Approx(300.0));
        CHECK(v["compensation"].get<double>() == doctest::Approx(300.0));
    }
    SUBCASE("the complaint topic filters which violation is charged") {
        json contract = contract_ok;
        contract["wage"] = 24.0;
        // both wage and safety are violated; the wage complaint picks the wage law
        json v = parsed_text(backend.complete(role_request(
            "judge", judge_metadata(stock, contract, 300.0,
                                    "paying below the minimum wage standard"))));
        CHECK(v["applicable_law"] == "LAW_WAGE_01");

        // a topicless complaint falls back to the first violated law by id
        json v2 = parsed_text(backend.complete(role_request(
            "judge",
            judge_metadata(stock, contract, 300.0, "the company treats us terribly"))));
        CHECK(v2["verdict"] == "guilty");
        CHECK(v2["applicable_law"] == "LAW_SAFE_01");
    }
    SUBCASE("no violation or no statute means acquittal") {
        json clean = parsed_text(backend.complete(role_request(
            "judge", judge_metadata(stock, contract_ok, 500.0, "general grievance"))));
        CHECK(clean["verdict"] == "not_guilty");
        CHECK(clean["penalty"].get<double>() == 0.0);

        json contract = contract_ok;
        contract["wage"] = 10.0;
        json vacuum = parsed_text(backend.complete(role_request(
            "judge", judge_metadata(json::object(), contract, 0.0,
                                    "paying below the minimum wage standard"))));
        CHECK(vacuum["verdict"] == "not_guilty");
    }
    SUBCASE("company complaints about strikers have no statute to stand on") {
        json md = judge_metadata(stock, json(), 500.0,
                                 "the laborers sabotaged production by striking");
        md["suit"]["plaintiff_id"] = "Company-1";
        md["suit"]["defendant_id"] = "Laborer-2";
        json v = parsed_text(backend.complete(role_request("judge", md)));
        CHECK(v["verdict"] == "not_guilty");
    }
}

TEST_CASE("reactive legislator escalates or seeds the statute book") {
    ScriptedMicroBackend backend("exploit");
    const json stock = builtin_initialized_laws().to_prompt_json();

    SUBCASE("two convictions in a month double the cited law's penalty") {
        json md = {{"summary",
                    {{"total_lawsuits", 2},
                     {"guilty_counts", {{"LAW_WAGE_01", 2}}},
                     {"not_guilty_count", 0},
                     {"cases", json::array()}}},
                   {"laws", stock},
                   {"napm", 2},
                   {"turn", 4}};
        json out = parsed_text(backend.complete(role_request("legislator", md)));
        REQUIRE(out["changes"].size() == 1);
        const json& change = out["changes"][0];
        CHECK(change["action"] == "AMEND");
        CHECK(change["law_code"] == "LAW_WAGE_01");
        CHECK(change["content"]["penalty"].get<std::string>().find("400%") !=
              std::string::npos);
        CHECK(change["content"]["period"] == "per_violation");

        MoneyExpr reparsed = parse_money_expr(change["content"]["penalty"]);
        CHECK(reparsed.kind == MoneyExprKind::percent_of_base);
        CHECK(reparsed.percent == doctest::Approx(400.0));
        CHECK(reparsed.base == "shortfall");
    }
    SUBCASE("complaints against an empty book create a minimum wage law") {
        json md = {{"summary",
                    {{"total_lawsuits", 2},
                     {"guilty_counts", json::object()},
                     {"not_guilty_count", 2},
                     {"cases", json::array()}}},
                   {"laws", json::object()},
                   {"napm", 2},
                   {"turn", 2}};
        json out = parsed_text(backend.complete(role_request("legislator", md)));
        REQUIRE(out["changes"].size() == 1);
        const json& change = out["changes"][0];
        CHECK(change["action"] == "CREATE");
        CHECK(change["law_code"] == "LAW_WAGE_01");
        CHECK(change["content"]["description"].get<std::string>().find("minimum wage") !=
              std::string::npos);
    }
    SUBCASE("a quiet month passes no legislation") {
        json md = {{"summary",
                    {{"total_lawsuits", 0},
                     {"guilty_counts", {{"LAW_WAGE_01", 0}}},
                     {"not_guilty_count", 0},
                     {"cases", json::array()}}},
                   {"laws", stock},
                   {"napm", 2},
                   {"turn", 2}};
        json out = parsed_text(backend.complete(role_request("legislator", md)));
        CHECK(out["changes"].empty());

        // one conviction is not yet a pattern
        md["summary"]["guilty_counts"]["LAW_WAGE_01"] = 1;
        md["summary"]["total_lawsuits"] = 1;
        json single = parsed_text(backend.complete(role_request("legislator", md)));
        CHECK(single["changes"].empty());
    }
}

TEST_CASE("event classification buckets") {
    CHECK(to_string(EventClass::protest_sabotage) == "protest_sabotage");
    CHECK(to_string(EventClass::other) == "other");

    CHECK(classify_event(make_event(1, "lawsuit_filed",
                                    {{"plaintiff_id", "Laborer-1"},
                                     {"defendant_id", "Company-1"}})) ==
          EventClass::laborer_litigation);
    CHECK(classify_event(make_event(1, "lawsuit_filed",
                                    {{"plaintiff_id", "Company-1"},
                                     {"defendant_id", "Laborer-2"}})) ==
          EventClass::company_litigation);
    CHECK(classify_event(make_event(1, "work_status",
                                    {{"laborer_id", "Laborer-2"},
                                     {"status", "NOT WORKING"},
                                     {"rule", "strike_protest"}})) ==
          EventClass::protest_sabotage);
    CHECK(classify_event(make_event(1, "work_status",
                                    {{"laborer_id", "Laborer-2"},
                                     {"status", "NOT WORKING"},
                                     {"rule", "contradiction"}})) ==
          EventClass::protest_sabotage);
    CHECK(classify_event(make_event(1, "work_status",
                                    {{"laborer_id", "Laborer-1"},
                                     {"status", "WORKING"},
                                     {"rule", "default_working"}})) ==
          EventClass::normal_work);
    CHECK(classify_event(make_event(1, "negotiation",
                                    {{"with", "Company-1"}, {"reason", "wages"}})) ==
          EventClass::other);
    CHECK(classify_event(make_event(1, "payroll", {{"pay", 2400.0}})) == EventClass::other);
    CHECK(classify_event(make_event(1, "turn_end", {{"month", 1}})) == EventClass::other);
}

TEST_CASE("aggregation against hand-built trial logs") {
    std::string root = fresh_dir("aggregate_oracle");
    std::string a = root + "/trial_000";
    std::string b = root + "/trial_001";
    fs::create_directories(a);
    fs::create_directories(b);

    write_events(
        a, {
               make_event(1, "welfare", {{"laborer_id", "Laborer-1"}, {"welfare", 40.0}}),
               make_event(1, "welfare", {{"laborer_id", "Laborer-2"}, {"welfare", 60.0}}),
               make_event(2, "welfare", {{"laborer_id", "Laborer-1"}, {"welfare", 50.0}}),
               make_event(2, "welfare", {{"laborer_id", "Laborer-2"}, {"welfare", 50.0}}),
               make_event(1, "work_status",
                          {{"laborer_id", "Laborer-1"}, {"status", "WORKING"}}),
               make_event(1, "lawsuit_filed", {{"plaintiff_id", "Laborer-1"}}),
               make_event(1, "negotiation", {{"with", "Company-1"}}),
           });
    write_events(
        b, {
               make_event(1, "welfare", {{"laborer_id", "Laborer-1"}, {"welfare", 70.0}}),
               make_event(1, "welfare", {{"laborer_id", "Laborer-2"}, {"welfare", 70.0}}),
               make_event(2, "welfare", {{"laborer_id", "Laborer-1"}, {"welfare", 90.0}}),
               make_event(2, "welfare", {{"laborer_id", "Laborer-2"}, {"welfare", 90.0}}),
               make_event(1, "work_status",
                          {{"laborer_id", "Laborer-2"}, {"status", "NOT WORKING"}}),
               make_event(2, "work_status",
                          {{"laborer_id", "Laborer-2"}, {"status", "NOT WORKING"}}),
               make_event(2, "work_status",
                          {{"laborer_id", "Laborer-3"}, {"status", "NOT WORKING"}}),
               make_event(1, "lawsuit_filed", {{"plaintiff_id", "Company-1"}}),
           });

    SUBCASE("two trials produce across-trial means and population SDs") {
        TrialStats stats = aggregate_trials({a, b});
        CHECK(stats.trials == 2);
        REQUIRE(stats.welfare_by_turn.size() == 2);
        // per-trial turn means: A (50, 50), B (70, 90)
        CHECK(stats.welfare_by_turn[0].mean == doctest::Approx(60.0));
        CHECK(stats.welfare_by_turn[0].sd == doctest::Approx(10.0));
        CHECK(stats.welfare_by_turn[1].mean == doctest::Approx(70.0));
        CHECK(stats.welfare_by_turn[1].sd == doctest::Approx(20.0));

        CHECK(stats.event_counts.at("normal_work").mean == doctest::Approx(0.5));
        CHECK(stats.event_counts.at("normal_work").sd == doctest::Approx(0.5));
        CHECK(stats.event_counts.at("protest_sabotage").mean == doctest::Approx(1.5));
        CHECK(stats.event_counts.at("protest_sabotage").sd == doctest::Approx(1.5));
        CHECK(stats.event_counts.at("laborer_litigation").mean == doctest::Approx(0.5));
        CHECK(stats.event_counts.at("company_litigation").mean == doctest::Approx(0.5));
        for (const auto& [name, ms] : stats.event_counts) {
            (void)name;
            CHECK(ms.sd >= 0.0);
        }

        CHECK(mean_sd_csv(stats) ==
              "turn,welfare_mean,welfare_sd\n"
              "1,60.0000,10.0000\n"
              "2,70.0000,20.0000\n");
    }
    SUBCASE("a single trial has zero spread") {
        TrialStats stats = aggregate_trials({a});
        CHECK(stats.trials == 1);
        REQUIRE(stats.welfare_by_turn.size() == 2);
        CHECK(stats.welfare_by_turn[0].mean == doctest::Approx(50.0));
        CHECK(stats.welfare_by_turn[0].sd == 0.0);
        CHECK(stats.welfare_by_turn[1].sd == 0.0);
        for (const auto& [name, ms] : stats.event_counts) {
            (void)name;
            CHECK(ms.sd == 0.0);
        }
        CHECK(stats.event_counts.at("laborer_litigation").mean == doctest::Approx(1.0));
    }
    SUBCASE("serialized stats carry the same numbers") {
        TrialStats stats = aggregate_trials({a, b});
        json j = trial_stats_to_json(stats);
        CHECK(j["trials"] == 2);
        CHECK(j["welfare_by_turn"][0]["turn"] == 1);
        CHECK(j["welfare_by_turn"][0]["mean"].get<double>() == doctest::Approx(60.0));
        CHECK(j["event_counts"]["protest_sabotage"]["sd"].get<double>() ==
              doctest::Approx(1.5));
        // the four reported classes, nothing else
        CHECK(j["event_counts"].size() == 4);
    }
    SUBCASE("re-aggregation of the same files is idempotent") {
        std::string once = trial_stats_to_json(aggregate_trials({a, b})).dump();
        std::string twice = trial_stats_to_json(aggregate_trials({a, b})).dump();
        CHECK(once == twice);
    }
    SUBCASE("missing logs are reported") {
        CHECK_THROWS_AS(aggregate_trials({root + "/nope"}), ValueError);
    }
}

TEST_CASE("run_micro_trials writes the full run layout") {
    MicroRunSpec spec;
    spec.preset = PresetId::initialized;
    spec.config = short_config();
    spec.trials = 2;
    spec.seed = 7;
    spec.backend_spec = "scripted:baseline";
    spec.output_dir = fresh_dir("baseline_run");
    spec.data_dir = kDataDir;

    std::vector<std::string> dirs = run_micro_trials(spec);
    REQUIRE(dirs.size() == 2);
    CHECK(dirs[0] == spec.output_dir + "/trial_000");
    CHECK(dirs[1] == spec.output_dir + "/trial_001");

    SUBCASE("manifest records preset, seeds, hashes, and the backend") {
        json manifest = read_json_file(spec.output_dir + "/manifest.json");
        CHECK(manifest["kind"] == "micro_trials");
        CHECK(manifest["preset"] == "initialized");
        CHECK(manifest["trials"] == 2);
        CHECK(manifest["base_seed"] == 7);
        REQUIRE(manifest["seeds"].size() == 2);
        CHECK(manifest["seeds"][0] == 7);
        CHECK(manifest["seeds"][1] == 8);
        CHECK(manifest["backend"] == "scripted-micro:baseline");
        CHECK(manifest["backend_spec"] == "scripted:baseline");
        CHECK(manifest["config"]["NUM_LABORERS"] == 3);
        CHECK(manifest["config_hash"].get<std::string>().size() == 16);
        CHECK(manifest["legal"]["enabled"] == true);
        CHECK(manifest["legal"]["corruption_probability"] == 0.0);
        CHECK(manifest["perception"] == "neutral");

        const json& files = manifest["data_files"];
        REQUIRE(files.contains("laws/initialized.json"));
        REQUIRE(files.contains("gm_impact_map.json"));
        std::string expected = fmt::format(
            "{:016x}", fnv1a_file(fs::path(kDataDir) / "laws/initialized.json"));
        CHECK(files["laws/initialized.json"] == expected);
    }
    SUBCASE("every trial dir carries the three artifacts") {
        for (const auto& dir : dirs) {
            CHECK(fs::exists(dir + "/events.jsonl"));
            CHECK(fs::exists(dir + "/welfare.csv"));
            CHECK(fs::exists(dir + "/laws_final.json"));
        }
        CHECK(fs::exists(spec.output_dir + "/stats.json"));
        CHECK(fs::exists(spec.output_dir + "/mean_sd.csv"));

        std::vector<Event> events = read_events(dirs[0] + "/events.jsonl");
        REQUIRE_FALSE(events.empty());
        CHECK(events.front().kind == "world_init");
        CHECK(count_kind(events, "turn_end") == 4);

        // a quiet society never changes the stock laws
        json final_laws = read_json_file(dirs[0] + "/laws_final.json");
        CHECK(final_laws == builtin_initialized_laws().to_json());

        std::ifstream welfare(dirs[0] + "/welfare.csv");
        std::string header;
        std::getline(welfare, header);
        CHECK(header == "turn,laborer_id,welfare,cash,wage,hours,safety");
        int rows = 0;
        for (std::string line; std::getline(welfare, line);)
            if (!line.empty()) ++rows;
        CHECK(rows == 4 * 3);
    }
    SUBCASE("stats.json matches a fresh aggregation of the persisted logs") {
        std::string persisted = read_text_file(spec.output_dir + "/stats.json");
        std::string fresh = trial_stats_to_json(aggregate_trials(dirs)).dump(2) + "\n";
        CHECK(persisted == fresh);

        json stats = read_json_file(spec.output_dir + "/stats.json");
        CHECK(stats["trials"] == 2);
        CHECK(stats["welfare_by_turn"].size() == 4);
        CHECK(stats["event_counts"]["normal_work"]["mean"].get<double>() ==
              doctest::Approx(12.0)); // 4 turns x 3 laborers, everyone working
        CHECK(stats["event_counts"]["laborer_litigation"]["mean"].get<double>() == 0.0);

        std::string csv = read_text_file(spec.output_dir + "/mean_sd.csv");
        CHECK(csv.rfind("turn,welfare_mean,welfare_sd\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    }
    SUBCASE("identical specs replay byte for byte") {
        MicroRunSpec again = spec;
        again.output_dir = fresh_dir("baseline_run_replay");
        std::vector<std::string> dirs2 = run_micro_trials(again);
        REQUIRE(dirs2.size() == 2);
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            CHECK(read_text_file(dirs[i] + "/events.jsonl") ==
                  read_text_file(dirs2[i] + "/events.jsonl"));
            CHECK(read_text_file(dirs[i] + "/welfare.csv") ==
                  read_text_file(dirs2[i] + "/welfare.csv"));
        }
        CHECK(read_text_file(spec.output_dir + "/manifest.json") ==
              read_text_file(again.output_dir + "/manifest.json"));
    }
    SUBCASE("invalid run specs are rejected before anything is written") {
        MicroRunSpec bad = spec;
        bad.trials = 0;
        CHECK_THROWS_AS(run_micro_trials(bad), ValueError);
        bad = spec;
        bad.output_dir.clear();
        CHECK_THROWS_AS(run_micro_trials(bad), ValueError);
        bad = spec;
        bad.output_dir = fresh_dir("bad_backend_run");
        bad.backend_spec = "scripted:chaos";
        CHECK_THROWS_AS(run_micro_trials(bad), ValueError);
        CHECK_FALSE(fs::exists(bad.output_dir + "/manifest.json"));
    }
}

TEST_CASE("corruption preset is recorded in the manifest") {
    MicroRunSpec spec;
    spec.preset = PresetId::corruption;
    spec.config = short_config();
    spec.trials = 1;
    spec.seed = 3;
    spec.backend_spec = "scripted:baseline";
    spec.output_dir = fresh_dir("corruption_manifest");
    spec.data_dir = kDataDir;
    run_micro_trials(spec);

    json manifest = read_json_file(spec.output_dir + "/manifest.json");
    CHECK(manifest["preset"] == "corruption");
    CHECK(manifest["legal"]["corruption_probability"].get<double>() ==
          doctest::Approx(0.7));
    CHECK_FALSE(manifest["data_files"].contains("laws/initialized.json"));
}

TEST_CASE("exploit runs produce litigation, strikes, and lawmaking") {
    MicroRunSpec spec;
    spec.preset = PresetId::initialized;
    spec.config = MicroConfig{};
    spec.trials = 1;
    spec.seed = 11;
    spec.backend_spec = "scripted:exploit";
    spec.output_dir = fresh_dir("exploit_initialized");
    spec.data_dir = kDataDir;

    std::vector<std::string> dirs = run_micro_trials(spec);
    REQUIRE(dirs.size() == 1);
    std::vector<Event> events = read_events(dirs[0] + "/events.jsonl");

    SUBCASE("the wage cut lands on turn one and triggers suits from turn two") {
        auto change = std::find_if(events.begin(), events.end(), [](const Event& e) {
            return e.kind == "contract_change";
        });
        REQUIRE(change != events.end());
        CHECK(change->turn == 1);
        CHECK(change->payload["changes"]["hourly_wage"].get<double>() ==
              doctest::Approx(24.0));
        CHECK(change->payload["changes"]["safety_investment"].get<double>() ==
              doctest::Approx(300.0));

        // suits start once the cut pay shows up in the laborers' briefing
        CHECK(count_kind(events, "lawsuit_filed") == 7);
        for (const auto& e : events)
            if (e.kind == "lawsuit_filed") {
                CHECK(e.payload["plaintiff_id"] == "Laborer-1");
                CHECK(e.turn >= 2);
            }
    }
    SUBCASE("verdicts convict under the wage statute with exact arithmetic") {
        std::vector<const Event*> verdicts;
        for (const auto& e : events)
            if (e.kind == "verdict") verdicts.push_back(&e);
        REQUIRE(verdicts.size() == 7);
        const json& first = verdicts.front()->payload["verdict"];
        CHECK(first["verdict"] == "guilty");
        CHECK(first["applicable_law"] == "LAW_WAGE_01");
        CHECK(first["compensation"].get<double>() == doctest::Approx(480.0));
        CHECK(first["penalty"].get<double>() == doctest::Approx(960.0));

        CHECK(count_kind(events, "compensation_transfer") == 7);
        CHECK(count_kind(events, "penalty_paid") == 7);
        for (const auto& e : events)
            if (e.kind == "compensation_transfer") {
                CHECK(e.payload["from"] == "Company-1");
                CHECK(e.payload["to"] == "Laborer-1");
                CHECK(e.payload["amount"].get<double>() > 0.0);
            }
    }
    SUBCASE("the striker is ruled out of work and dents capital") {
        int strikes = 0;
        for (const auto& e : events)
            if (e.kind == "work_status" && e.payload["status"] == "NOT WORKING") {
                CHECK(e.payload["laborer_id"] == "Laborer-2");
                CHECK(e.payload["rule"] == "strike_protest");
                ++strikes;
            }
        CHECK(strikes == 7);
        CHECK(count_kind(events, "capital_impact") == 7);
        for (const auto& e : events)
            if (e.kind == "capital_impact") {
                CHECK(e.payload["striking"] == 1);
                CHECK(e.payload["hired"] == 3);
                CHECK(e.payload["mean_fraction"].get<double>() == doctest::Approx(-0.05));
                CHECK(e.payload["delta"].get<double>() < 0.0);
            }
    }
    SUBCASE("repeat convictions drive escalating amendments") {
        json final_laws = read_json_file(dirs[0] + "/laws_final.json");
        REQUIRE(final_laws.contains("LAW_WAGE_01"));
        // amendments at the ends of months 2, 3, and 4
        CHECK(final_laws["LAW_WAGE_01"]["version"] == 4);
        CHECK(final_laws["LAW_WAGE_01"]["penalty"].get<std::string>().find("1600%") !=
              std::string::npos);
        CHECK(final_laws["LAW_WAGE_01"]["history"].size() == 3);

        int applied = 0;
        for (const auto& e : events)
            if (e.kind == "legislation") applied += e.payload["applied"].size();
        CHECK(applied == 3);
    }
    SUBCASE("trial statistics reflect the conflict") {
        json stats = read_json_file(spec.output_dir + "/stats.json");
        CHECK(stats["event_counts"]["laborer_litigation"]["mean"].get<double>() ==
              doctest::Approx(7.0));
        CHECK(stats["event_counts"]["protest_sabotage"]["mean"].get<double>() ==
              doctest::Approx(7.0));
        CHECK(stats["event_counts"]["company_litigation"]["mean"].get<double>() == 0.0);
        // single trial, so no spread anywhere
        for (const auto& turn : stats["welfare_by_turn"])
            CHECK(turn["sd"].get<double>() == 0.0);
    }
    SUBCASE("compensation credits equal compensation debits") {
        double credited = 0.0, debited = 0.0;
        for (const auto& e : events)
            if (e.kind == "compensation_transfer") {
                credited += e.payload["amount"].get<double>();
                debited += e.payload["amount"].get<double>();
            }
        CHECK(credited == debited);
        CHECK(credited > 0.0);
    }
}

TEST_CASE("exploit run under an evolving legal system grows its first law") {
    MicroRunSpec spec;
    spec.preset = PresetId::evolving;
    spec.config = MicroConfig{};
    spec.trials = 1;
    spec.seed = 11;
    spec.backend_spec = "scripted:exploit";
    spec.output_dir = fresh_dir("exploit_evolving");
    spec.data_dir = kDataDir;

    std::vector<std::string> dirs = run_micro_trials(spec);
    std::vector<Event> events = read_events(dirs[0] + "/events.jsonl");

    // the first complaints meet an empty book and must fail
    const Event* first_verdict = nullptr;
    for (const auto& e : events)
        if (e.kind == "verdict") {
            first_verdict = &e;
            break;
        }
    REQUIRE(first_verdict != nullptr);
    CHECK(first_verdict->payload["verdict"]["verdict"] == "not_guilty");

    // the legislature answers with a created statute, after which suits succeed
    json final_laws = read_json_file(dirs[0] + "/laws_final.json");
    REQUIRE(final_laws.contains("LAW_WAGE_01"));
    int guilty = 0;
    for (const auto& e : events)
        if (e.kind == "verdict" && e.payload["verdict"]["verdict"] == "guilty") ++guilty;
    CHECK(guilty > 0);
    CHECK(count_kind(events, "compensation_transfer") == guilty);
}

TEST_CASE("exploit run without a legal system negotiates instead of suing") {
    MicroRunSpec spec;
    spec.preset = PresetId::pre_legal;
    spec.config = MicroConfig{};
    spec.trials = 1;
    spec.seed = 11;
    spec.backend_spec = "scripted:exploit";
    spec.output_dir = fresh_dir("exploit_pre_legal");
    spec.data_dir = kDataDir;

    std::vector<std::string> dirs = run_micro_trials(spec);
    std::vector<Event> events = read_events(dirs[0] + "/events.jsonl");

    CHECK(count_kind(events, "lawsuit_filed") == 0);
    CHECK(count_kind(events, "verdict") == 0);
    CHECK(count_kind(events, "negotiation") > 0);
    CHECK(count_kind(events, "legislation") == 0);

    json stats = read_json_file(spec.output_dir + "/stats.json");
    CHECK(stats["event_counts"]["laborer_litigation"]["mean"].get<double>() == 0.0);
    CHECK(stats["event_counts"]["protest_sabotage"]["mean"].get<double>() > 0.0);
}

TEST_CASE("corrupted courts replay deterministically under a fixed seed") {
    auto run_once = [](const std::string& dir) {
        MicroRunSpec spec;
        spec.preset = PresetId::corruption;
        spec.config = MicroConfig{};
        spec.trials = 1;
        spec.seed = 23;
        spec.backend_spec = "scripted:exploit";
        spec.output_dir = dir;
        spec.data_dir = kDataDir;
        return run_micro_trials(spec)[0];
    };
    std::string first = run_once(fresh_dir("corruption_a"));
    std::string second = run_once(fresh_dir("corruption_b"));
    CHECK(read_text_file(first + "/events.jsonl") ==
          read_text_file(second + "/events.jsonl"));

    // corruption surfaces either as flipped verdicts or as dropped lawmaking;
    // at p=0.7 over a full run at least one intervention is all but certain
    std::vector<Event> events = read_events(first + "/events.jsonl");
    int interventions = 0;
    for (const auto& e : events) {
        if (e.kind == "verdict" && e.payload["verdict"].value("corrupted", false))
            ++interventions;
        if (e.kind == "legislation")
            interventions += e.payload.value("corrupted_dropped", 0);
    }
    CHECK(interventions > 0);
}

TEST_CASE("the manifest hits disk before any backend traffic") {
    MicroRunSpec spec;
    spec.preset = PresetId::initialized;
    spec.config = short_config();
    spec.config.num_laborers = 1;
    spec.config.simulation_months = 1;
    spec.config.num_actions_per_month = 1;
    spec.trials = 1;
    spec.seed = 1;
    spec.backend_spec = "remote";
    spec.remote.endpoint_url = "http://127.0.0.1:9"; // nothing listens here
    spec.remote.model_name = "unreachable";
    spec.remote.retry_limit = 1;
    spec.remote.timeout = std::chrono::milliseconds(200);
    spec.remote.initial_backoff = std::chrono::milliseconds(1);
    spec.output_dir = fresh_dir("dead_endpoint");
    spec.data_dir = kDataDir;

    std::vector<std::string> dirs = run_micro_trials(spec);
    json manifest = read_json_file(spec.output_dir + "/manifest.json");
    CHECK(manifest["backend"] == "remote:unreachable");

    // every decision fell back, yet the run completed and was fully logged
    std::vector<Event> events = read_events(dirs[0] + "/events.jsonl");
    CHECK(count_kind(events, "backend_error") > 0);
    CHECK(count_kind(events, "turn_end") == 1);
}
