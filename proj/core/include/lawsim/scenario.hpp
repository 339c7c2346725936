#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lawsim/population.hpp"

namespace lawsim {

enum class Legality { legal, illegal };

struct SceneOption {
    std::string text;
    Legality legality = Legality::legal;
};

// A macro decision scene: free-text situation, 2..4 lettered options, and an
// optional six-level ladder of perceived-punishment descriptions.
struct Scene {
    std::string scene_id;
    std::string description;
    std::vector<SceneOption> options;
    std::map<int, std::string> punishment_texts; // empty, or complete over 0..5
    int illegal_option_index = -1;               // first illegal option, -1 when none

    bool is_illegal(std::size_t option) const {
        return option < options.size() && options[option].legality == Legality::illegal;
    }
    std::vector<std::size_t> illegal_option_indices() const;
};

// Throws SchemaError / ValueError when the scene breaks its invariants.
void validate_scene(const Scene& scene);

Scene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const Scene& scene);
Scene load_scene_file(const std::string& path);

// The three stock scenes: luxury theft, bar assault, sex trade.
std::vector<Scene> builtin_scenes();

inline char option_letter(std::size_t index) { return static_cast<char>('A' + index); }

std::string education_phrase(Education e);
std::string religion_phrase(const std::string& key); // throws UnknownReligionLabel

// First-person profile paragraph. Optional sentences follow the sampling
// flags; society background needs the country stats and is skipped when the
// pointer is absent.
std::string describe_self(const AgentProfile& profile, const SamplingConfig& cfg,
                          const CountryStats* country = nullptr);

extern const char* const kDefaultPromptTemplate;

struct PromptRenderConfig {
    bool include_punishment_impression = false;
    std::optional<int> punishment_level;
    std::string prompt_template = kDefaultPromptTemplate;
};

std::string render_options_block(const Scene& scene);
std::string render_punishment_context(const Scene& scene, int level);

// Fills {profile}, {scene}, {punishment_context}, {options} in the template.
// Pure: equal inputs give byte-equal output.
std::string render_decision_prompt(const std::string& profile_text, const Scene& scene,
                                   const PromptRenderConfig& cfg);
std::string render_decision_prompt(const AgentProfile& profile, const SamplingConfig& sampling_cfg,
                                   const Scene& scene, const PromptRenderConfig& cfg,
                                   const CountryStats* country = nullptr);

} // namespace lawsim
