#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lawsim/decision.hpp"
#include "lawsim/micro_world.hpp"

namespace lawsim {

// Comparative experiment settings for the company-and-laborers economy. Each
// preset fixes the legal system knobs and the starting statute book so runs
// under different societies stay comparable.
enum class PresetId {
    pre_legal,           // courts and legislature disabled entirely
    evolving,            // courts on, statute book starts empty
    corruption,          // evolving plus a 0.7 chance of corrupted verdicts
    initialized,         // courts on, stock labor laws already on the books
    high_litigation,     // initialized plus a 200 filing fee that costs a shift
    pro_company,         // initialized with a company-leaning bench
    pro_laborer,         // initialized with a laborer-leaning bench
    perception_positive, // initialized; laborers trust the legal system
    perception_negative, // initialized; laborers distrust the legal system
};

std::string to_string(PresetId id);
PresetId preset_from_string(const std::string& s); // throws ValueError
const std::vector<PresetId>& all_presets();

struct ExperimentPreset {
    PresetId id = PresetId::initialized;
    LegalConfig legal;
    Perception perception = Perception::neutral;
    bool start_with_stock_laws = false;
};

ExperimentPreset resolve_preset(PresetId id);

// Materializes a preset into world-construction inputs. Laws, perception
// texts, and the impact table come from data_dir when the files exist there;
// otherwise the built-in equivalents are used. Pass an empty data_dir to skip
// file lookups entirely.
WorldInit world_init_for_preset(const ExperimentPreset& preset, std::uint64_t seed,
                                const std::string& data_dir);

// Deterministic stand-in for a language model across every micro-world role.
// Two personas:
//   baseline  everyone keeps working, courts acquit, the legislature rests
//   exploit   the company cuts wages and safety on turn one; one laborer sues
//             each turn, one strikes; a mechanical judge convicts on statute
//             violations and a reactive legislature tightens the statute book
// Responses are pure functions of the request, so identical runs replay byte
// for byte.
class ScriptedMicroBackend : public DecisionBackend {
public:
    explicit ScriptedMicroBackend(std::string persona); // "baseline" or "exploit"

    BackendResponse complete(const DecisionRequest& request) override;
    std::string backend_id() const override;

private:
    std::string persona_;
};

// "scripted:baseline" and "scripted:exploit" map to ScriptedMicroBackend;
// "remote" builds a chat-completion client from remote_template. Anything
// else throws ValueError.
std::unique_ptr<DecisionBackend> make_micro_backend(const std::string& spec,
                                                    const BackendConfig& remote_template);

struct MicroRunSpec {
    PresetId preset = PresetId::initialized;
    MicroConfig config;
    int trials = 1;
    std::uint64_t seed = 0;
    std::string backend_spec = "scripted:baseline";
    BackendConfig remote; // used only when backend_spec is "remote"
    std::string output_dir;
    std::string data_dir;
};

// Everything needed to reproduce or audit the run: preset, per-trial seeds,
// the full config plus its hash, the backend id, and content hashes of the
// data files consulted. Written to disk before the first backend call.
nlohmann::json build_micro_manifest(const MicroRunSpec& spec, const std::string& backend_id);

// Runs spec.trials independent worlds seeded seed, seed+1, ... under the
// preset. Each trial writes events.jsonl, welfare.csv, and laws_final.json
// into <output_dir>/trial_NNN; the run root gets manifest.json first, then
// stats.json and mean_sd.csv once all trials finish. Returns the trial
// directories in order.
std::vector<std::string> run_micro_trials(const MicroRunSpec& spec);

// Coarse outcome classes used by the cross-trial reports.
enum class EventClass {
    protest_sabotage,
    normal_work,
    laborer_litigation,
    company_litigation,
    other,
};

std::string to_string(EventClass c);

// Work-status rulings map by the ruled status, lawsuit filings by who filed.
// Anything else (negotiations, payroll, clock ticks) lands in other.
EventClass classify_event(const Event& event);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; // population standard deviation across trials
};

struct TrialStats {
    int trials = 0;
    std::vector<MeanSd> welfare_by_turn; // index 0 is turn 1
    std::map<std::string, MeanSd> event_counts; // keyed by EventClass name
};

// Per turn: mean welfare over a trial's laborers first, then mean and SD of
// those per-trial values across trials. Event counts are whole-trial tallies
// per class, also summarized across trials. Reads only the persisted
// events.jsonl files, so re-aggregating an existing run is idempotent.
TrialStats aggregate_trials(const std::vector<std::string>& trial_dirs);

nlohmann::json trial_stats_to_json(const TrialStats& stats);

// mean_sd.csv rows: turn,welfare_mean,welfare_sd
std::string mean_sd_csv(const TrialStats& stats);

} // namespace lawsim
