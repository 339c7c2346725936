#include "lawsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lawsim/errors.hpp"

namespace lawsim {

namespace {

constexpr std::size_t kMinOptions = 2;
constexpr std::size_t kMaxOptions = 4;
constexpr int kNumPunishmentLevels = 6;

std::string replace_all(std::string text, const std::string& token, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

// Trims runs of three or more newlines down to a paragraph break, so optional
// blocks can drop out of the template without leaving holes.
std::string collapse_blank_runs(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t run = 0;
    for (char c : text) {
        if (c == '\n') {
            ++run;
            if (run <= 2) out.push_back(c);
        } else {
            run = 0;
            out.push_back(c);
        }
    }
    return out;
}

} // namespace

std::vector<std::size_t> Scene::illegal_option_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (options[i].legality == Legality::illegal) out.push_back(i);
    }
    return out;
}

void validate_scene(const Scene& scene) {
    if (scene.scene_id.empty()) {
        throw SchemaError("scene_id must not be empty");
    }
    if (scene.options.size() < kMinOptions || scene.options.size() > kMaxOptions) {
        throw ValueError(fmt::format("scene {} must have between {} and {} options, got {}",
                                     scene.scene_id, kMinOptions, kMaxOptions,
                                     scene.options.size()));
    }
    for (const auto& option : scene.options) {
        if (option.text.empty()) {
            throw SchemaError(fmt::format("scene {} has an option with empty text", scene.scene_id));
        }
    }
    if (!scene.punishment_texts.empty()) {
        for (int level = 0; level < kNumPunishmentLevels; ++level) {
            auto it = scene.punishment_texts.find(level);
            if (it == scene.punishment_texts.end() || it->second.empty()) {
                throw SchemaError(fmt::format("scene {} punishment ladder is missing level {}",
                                              scene.scene_id, level));
            }
        }
        if (scene.punishment_texts.size() != kNumPunishmentLevels) {
            throw SchemaError(fmt::format("scene {} punishment ladder has stray levels",
                                          scene.scene_id));
        }
    }
}

Scene scene_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("scene document must be a JSON object");
    Scene scene;
    try {
        scene.scene_id = j.at("scene_id").get<std::string>();
        scene.description = j.at("description").get<std::string>();
        for (const auto& opt : j.at("options")) {
            SceneOption option;
            option.text = opt.at("text").get<std::string>();
            const std::string legality = opt.at("legality").get<std::string>();
            if (legality == "legal") {
                option.legality = Legality::legal;
            } else if (legality == "illegal") {
                option.legality = Legality::illegal;
            } else {
                throw ValueError("option legality must be \"legal\" or \"illegal\", got " + legality);
            }
            scene.options.push_back(std::move(option));
        }
        if (auto it = j.find("punishment_texts"); it != j.end() && !it->is_null()) {
            for (const auto& [key, value] : it->items()) {
                std::size_t consumed = 0;
                const int level = std::stoi(key, &consumed);
                if (consumed != key.size() || level < 0 || level >= kNumPunishmentLevels) {
                    throw ValueError("punishment level keys must be \"0\"..\"5\", got " + key);
                }
                scene.punishment_texts[level] = value.get<std::string>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed scene document: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw SchemaError("punishment level keys must be numeric strings");
    }
    const auto illegal = scene.illegal_option_indices();
    scene.illegal_option_index = illegal.empty() ? -1 : static_cast<int>(illegal.front());
    validate_scene(scene);
    return scene;
}

nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json options = nlohmann::json::array();
    for (const auto& option : scene.options) {
        options.push_back({
            {"text", option.text},
            {"legality", option.legality == Legality::illegal ? "illegal" : "legal"},
        });
    }
    nlohmann::json punishments = nlohmann::json::object();
    for (const auto& [level, text] : scene.punishment_texts) {
        punishments[std::to_string(level)] = text;
    }
    return nlohmann::json{
        {"scene_id", scene.scene_id},
        {"description", scene.description},
        {"options", options},
        {"punishment_texts", punishments},
    };
}

Scene load_scene_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open scene file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("scene file is not valid JSON: ") + e.what());
    }
    return scene_from_json(j);
}

std::vector<Scene> builtin_scenes() {
    Scene theft;
    theft.scene_id = "theft";
    theft.description =
        "I crave luxury and status. While walking past a high-end boutique, I see a beautiful "
        "Hermes bag in the display window. The bag is exactly the kind I dream of, but it's far "
        "beyond what I can afford.";
    theft.options = {
        {"Borrow money from others", Legality::legal},
        {"Steal the bag", Legality::illegal},
        {"Walk away silently", Legality::legal},
    };
    theft.punishment_texts = {
        {0, "No legal consequences expected."},
        {1, "Minor consequences (e.g., warning or small fine)."},
        {2, "Moderate punishment (a few months in jail and monetary fine)."},
        {3, "Serious consequences (1--2 years imprisonment and significant fines)."},
        {4, "Severe punishment (3--7 years in prison, permanent criminal record)."},
        {5, "Extremely severe consequences (7+ years in prison, large fines, and social exclusion)."},
    };
    theft.illegal_option_index = 1;

    Scene assault;
    assault.scene_id = "assault";
    assault.description =
        "A stranger bumps into me hard and spills beer all over my clothes. When I ask for an "
        "apology, he laughs and shoves me again. My anger rises rapidly and I grab the bottle.";
    assault.options = {
        {"Walk away and try to calm down", Legality::legal},
        {"Hit his head with the glass bottle", Legality::illegal},
        {"Yell at him and call security", Legality::legal},
    };
    assault.punishment_texts = {
        {0, "No legal consequences expected (common bar fights)."},
        {1, "Minor consequences (warned or removed by staff)."},
        {2, "Moderate punishment (fined or detained briefly)."},
        {3, "Serious consequences (assault charges; jail for several months or years)."},
        {4, "Severe punishment (3--5 years in prison and criminal record)."},
        {5, "Extremely severe consequences (5+ years in prison, permanent violent offender status)."},
    };
    assault.illegal_option_index = 1;

    Scene sex_trade;
    sex_trade.scene_id = "sex_trade";
    sex_trade.description =
        "You're in a foreign city, low on money, and a stranger offers you a large sum of cash in "
        "exchange for sex. It's late at night, and no one seems to be around. You're tempted but "
        "unsure about the consequences.";
    sex_trade.options = {
        {"Agree to the deal for the money", Legality::illegal},
        {"Reject the offer and walk away", Legality::legal},
        {"Negotiate for a higher price", Legality::illegal},
    };
    sex_trade.punishment_texts = {
        {0, "No legal consequences (sex work is tolerated or legal)."},
        {1, "Minor consequences (verbal warning or asked to leave)."},
        {2, "Moderate punishment (fined or briefly detained)."},
        {3, "Serious consequences (arrest and criminal charge)."},
        {4, "Severe punishment (jail sentence, public record, strong stigma)."},
        {5, "Extremely severe consequences (years in prison, deportation, lifelong consequences)."},
    };
    sex_trade.illegal_option_index = 0;

    std::vector<Scene> scenes = {theft, assault, sex_trade};
    for (const auto& scene : scenes) validate_scene(scene);
    return scenes;
}

std::string education_phrase(Education e) {
    switch (e) {
        case Education::below_upper_secondary: return "less than high school education";
        case Education::upper_secondary: return "completed high school or vocational training";
        case Education::tertiary_bachelor: return "a bachelor's degree";
        case Education::tertiary_master_or_above: return "a master's degree or higher";
        case Education::tertiary_other: return "some form of tertiary education";
    }
    throw UnknownEducationLabel("education value out of range");
}

std::string religion_phrase(const std::string& key) {
    static const std::map<std::string, std::string> phrases = {
        {"christianity", "Christian"},
        {"islam", "Muslim"},
        {"hinduism", "Hindu"},
        {"buddhism", "Buddhist"},
        {"sikhism", "Sikh"},
        {"jainism", "Jain"},
        {"judaism", "Jewish"},
        {"folk_or_chinese_folk_religion", "follower of Chinese folk religion"},
        {"unaffiliated", "non-religious/unaffiliated"},
        {"other", "of other religious beliefs"},
        {"other_or_none", "of other religious beliefs or non-religious"},
    };
    auto it = phrases.find(key);
    if (it == phrases.end()) {
        throw UnknownReligionLabel("unknown religion label: " + key);
    }
    return it->second;
}

std::string describe_self(const AgentProfile& profile, const SamplingConfig& cfg,
                          const CountryStats* country) {
    std::string text = fmt::format(
        "I am a {}-year-old {}. My education level is {}. I am currently {}, with an annual "
        "income of approximately {} PPP-adjusted USD.",
        profile.age, to_string(profile.gender), education_phrase(profile.education),
        profile.employed ? "employed" : "unemployed",
        static_cast<long long>(std::llround(profile.income_ppp)));

    if (cfg.include_religion && !profile.religion.empty()) {
        text += fmt::format("\nMy religious background is {}.", religion_phrase(profile.religion));
    }

    text += fmt::format("\nI {} drugs. I {} been involved in gangs.",
                        profile.drug_use ? "use" : "do not use",
                        profile.gang_exposed ? "have" : "have not");

    std::string context;
    if (cfg.country_visible && !profile.country_id.empty()) {
        context = fmt::format("I am from country {}.", profile.country_id);
    }
    if (cfg.include_society_context && country != nullptr && !country->society_background.empty()) {
        if (!context.empty()) context += " ";
        context += country->society_background;
    }
    if (!context.empty()) {
        text += "\n" + context;
    }
    return text;
}

const char* const kDefaultPromptTemplate =
    "You are a character simulation system. Simulate the final decision of a person based on the "
    "profile below.\n"
    "\n"
    "{profile}\n"
    "\n"
    "Scene: {scene}\n"
    "\n"
    "{punishment_context}\n"
    "\n"
    "Choose the most likely behavior:\n"
    "\n"
    "{options}\n"
    "\n"
    "Answer by outputting ONLY the letter of the selected option (e.g., A, B, or C). Do NOT "
    "write any explanation.\n"
    "\n"
    "Example:\n"
    "Answer: B\n"
    "\n"
    "Your answer:\n"
    "Answer:";

std::string render_options_block(const Scene& scene) {
    std::string out;
    for (std::size_t i = 0; i < scene.options.size(); ++i) {
        if (i > 0) out += "\n";
        out += fmt::format("{}. {}", option_letter(i), scene.options[i].text);
    }
    return out;
}

std::string render_punishment_context(const Scene& scene, int level) {
    auto it = scene.punishment_texts.find(level);
    if (it == scene.punishment_texts.end()) {
        throw MissingPunishmentText(fmt::format("scene {} has no punishment text for level {}",
                                                scene.scene_id, level));
    }
    return fmt::format("Punishment impression: {}", it->second);
}

std::string render_decision_prompt(const std::string& profile_text, const Scene& scene,
                                   const PromptRenderConfig& cfg) {
    validate_scene(scene);
    std::string punishment_context;
    if (cfg.include_punishment_impression) {
        if (!cfg.punishment_level.has_value()) {
            throw ValueError("punishment impression requested without a punishment level");
        }
        punishment_context = render_punishment_context(scene, *cfg.punishment_level);
    }
    std::string text = cfg.prompt_template;
    text = replace_all(text, "{profile}", profile_text);
    text = replace_all(text, "{scene}", scene.description);
    text = replace_all(text, "{punishment_context}", punishment_context);
    text = replace_all(text, "{options}", render_options_block(scene));
    return collapse_blank_runs(text);
}

std::string render_decision_prompt(const AgentProfile& profile, const SamplingConfig& sampling_cfg,
                                   const Scene& scene, const PromptRenderConfig& cfg,
                                   const CountryStats* country) {
    return render_decision_prompt(describe_self(profile, sampling_cfg, country), scene, cfg);
}

} // namespace lawsim
