#pragma once

#include <cstdint>
#include <string>

#include "vpr/datasets.hpp"
#include "vpr/model/vpr_model.hpp"

namespace vpr {

// Which generator a run draws episodes from, plus that generator's knobs.
// Only the keys of the selected kind are legal in a config file; mixing in
// another generator's keys is a hard error rather than a silent ignore.
struct DatasetSection {
    std::string kind = "synthetic1d";  // synthetic1d | moving_ball | nested_factors
    Synthetic1dConfig synthetic1d;
    MovingBallConfig moving_ball;
    NestedFactorsConfig nested_factors;
};

// Model variant and shape. "full" is the stacked hierarchy; "toy" is the
// single-level scalar probe used for detector experiments. The toy_* knobs
// are ignored in full mode and vice versa, but both sets always carry
// defaults so a resolved snapshot lists every field.
struct ModelSection {
    std::string mode = "full";  // full | toy
    HierarchyConfig hierarchy;
    double toy_noise = 0.0;     // posterior jitter std in toy mode
    double toy_base_var = 0.01; // noise-free posterior variance in toy mode
    int toy_hidden = 32;        // toy transition hidden width
};

struct TrainingSection {
    int iterations = 15000;
    int batch = 32;
    std::uint64_t seed = 1;
    double lr_start = 5e-4;
    double lr_end = 5e-5;
    int lr_decay_iters = 15000;
    int beta_ramp_iters = 3000;
    int log_every = 25;        // metrics CSV cadence (iterations)
    int f1_every = 250;        // boundary-F1 probe cadence (iterations)
    int f1_episodes = 20;      // episodes averaged per F1 probe
    int f1_level = 1;          // hierarchy level whose boundaries are scored
    int f1_factor = 0;         // ground-truth factor they are scored against
    int f1_tol = 1;            // match tolerance (steps)
    int checkpoint_every = 1000;
};

// A complete run description. Parsed from a TOML-style file, overridable
// from the command line, and re-emittable with every default materialized
// so a run can be reproduced from its snapshot alone.
struct RunConfig {
    DatasetSection dataset;
    ModelSection model;
    DetectorConfig detector;
    TrainingSection training;
    std::string out_dir;  // empty -> $VPR_OUT_ROOT, or "runs" if unset
};

// Name of the environment variable that supplies the default output root.
inline constexpr const char* kOutRootEnvVar = "VPR_OUT_ROOT";

// Parse a config file / raw text. Unknown sections or keys, malformed
// values, duplicate keys, and keys from a non-selected dataset kind all
// throw std::invalid_argument with the offending line.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Apply one "section.key=value" override on top of a parsed config.
// Used for CLI flags; the same validation rules apply.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Serialize with every field present, in a fixed order, with doubles
// printed so they parse back to the identical bits. parse(resolved(c))
// reproduces c exactly.
std::string resolved_config_text(const RunConfig& cfg);

// Output directory after applying the env-var / built-in fallbacks.
std::string resolve_out_dir(const RunConfig& cfg);

// Observation width implied by the dataset section.
int dataset_obs_dim(const DatasetSection& ds);

// Draw one episode from the selected generator.
SequenceSample generate_episode(const DatasetSection& ds, Rng& rng);

// Cross-field checks that individual setters cannot see (mode names,
// dataset/model compatibility). Throws std::invalid_argument.
void validate(const RunConfig& cfg);

}  // namespace vpr
