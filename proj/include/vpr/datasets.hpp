#pragma once

#include <array>
#include <string>
#include <vector>

#include "vpr/numerics/rng.hpp"

namespace vpr {

// One generated episode. `obs` is T x obs_dim. `boundaries[f]` lists the
// 0-based steps t (1 <= t < T) whose observation is the first of a new
// segment of factor f; a change landing exactly on the final step is still
// within range, but there is never an entry at T. `factor_values[f][t]` is
// the codebook id of factor f at step t.
struct SequenceSample {
    std::vector<std::vector<double>> obs;
    std::vector<std::vector<int>> boundaries;
    std::vector<std::vector<int>> factor_values;

    int length() const { return static_cast<int>(obs.size()); }
    int obs_dim() const { return obs.empty() ? 0 : static_cast<int>(obs[0].size()); }
};

// Scalar sequence: the value holds for `jump_period` steps, then jumps.
// In "cycle" mode the value walks a fixed ring of `num_levels` evenly spaced
// levels (the jump process is a semi-Markov chain: random start, deterministic
// successor). In "uniform" mode each jump draws uniformly from the range,
// re-drawn until it moves by at least `min_jump`.
struct Synthetic1dConfig {
    int T = 15;
    int jump_period = 10;
    double noise_sigma = 0.0;
    std::string value_mode = "cycle";  // cycle | uniform
    int num_levels = 6;
    double value_range = 5.0;
    double min_jump = 1.0;
    // Visit order of the ring in "cycle" mode, as a permutation of the sorted
    // level indices. Empty means ascending order (wrapping at the top), which
    // gives a mix of small steps and one large wrap-around jump.
    std::vector<int> cycle_order;
};

// A ball moves in straight lines inside the unit box and reflects elastically
// off the walls. Its color changes on every bounce and spontaneously with
// probability `recolor_prob` per step; a change never repeats the current
// color. In "cycle" mode the new color is the next ring entry, in "uniform"
// mode a uniform draw over the other colors. Observation: (x, y, r, g, b).
struct MovingBallConfig {
    int T = 15;
    double speed = 0.15;
    double recolor_prob = 0.1;
    int num_colors = 4;  // 4..8
    std::string recolor_mode = "cycle";  // cycle | uniform
    double color_scale = 1.0;
};

// Three scalar factors with change periods ordered fast < medium < slow.
// "nested" renews each factor on exact multiples of its base period (periods
// must divide each other), so slower changes always co-occur with faster
// ones; "jittered" draws each renewal gap as round(period * (1 +- jitter * u))
// independently per factor. Values walk per-factor rings (or uniform picks).
// Observation: one value per factor.
struct NestedFactorsConfig {
    int T = 50;
    int num_factors = 3;
    std::vector<int> base_periods{2, 6, 18};
    std::vector<int> cardinality{4, 4, 4};
    std::string schedule = "jittered";  // jittered | nested
    double jitter = 0.4;
    std::string value_mode = "cycle";  // cycle | uniform
    double value_range = 2.0;
};

SequenceSample gen_synthetic1d(const Synthetic1dConfig& cfg, Rng& rng);
SequenceSample gen_moving_ball(const MovingBallConfig& cfg, Rng& rng);
SequenceSample gen_nested_factors(const NestedFactorsConfig& cfg, Rng& rng);

// Codebooks used by the generators, exposed for factor decoding.
std::vector<double> synthetic1d_codebook(const Synthetic1dConfig& cfg);
std::vector<std::array<double, 3>> moving_ball_palette(int num_colors);
std::vector<std::vector<double>> nested_factors_codebooks(const NestedFactorsConfig& cfg);

// Newline-delimited JSON; doubles round-trip bit-exactly.
void save_ndjson(const std::string& path, const std::vector<SequenceSample>& samples);
std::vector<SequenceSample> load_ndjson(const std::string& path);

}  // namespace vpr
