#include "vpr/datasets.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vpr {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

std::vector<double> synthetic1d_codebook(const Synthetic1dConfig& cfg) {
    require(cfg.num_levels >= 2, "synthetic1d: num_levels must be >= 2");
    std::vector<double> levels(static_cast<size_t>(cfg.num_levels));
    for (int k = 0; k < cfg.num_levels; ++k)
        levels[static_cast<size_t>(k)] =
            -cfg.value_range + 2.0 * cfg.value_range * k / (cfg.num_levels - 1);
    return levels;
}

SequenceSample gen_synthetic1d(const Synthetic1dConfig& cfg, Rng& rng) {
    require(cfg.T > 0, "synthetic1d: T must be positive");
    require(cfg.jump_period > 0, "synthetic1d: jump_period must be positive");
    require(cfg.value_mode == "cycle" || cfg.value_mode == "uniform",
            "synthetic1d: unknown value_mode");
    const std::vector<double> levels = synthetic1d_codebook(cfg);

    // Successor table of the ring. A custom visit order must be a permutation
    // of all level indices.
    std::vector<int> succ(static_cast<size_t>(cfg.num_levels));
    if (cfg.cycle_order.empty()) {
        for (int k = 0; k < cfg.num_levels; ++k)
            succ[static_cast<size_t>(k)] = (k + 1) % cfg.num_levels;
    } else {
        require(static_cast<int>(cfg.cycle_order.size()) == cfg.num_levels,
                "synthetic1d: cycle_order must list every level once");
        std::vector<char> seen(static_cast<size_t>(cfg.num_levels), 0);
        for (int idx : cfg.cycle_order) {
            require(idx >= 0 && idx < cfg.num_levels, "synthetic1d: cycle_order index out of range");
            require(!seen[static_cast<size_t>(idx)], "synthetic1d: cycle_order repeats a level");
            seen[static_cast<size_t>(idx)] = 1;
        }
        for (size_t i = 0; i < cfg.cycle_order.size(); ++i)
            succ[static_cast<size_t>(cfg.cycle_order[i])] =
                cfg.cycle_order[(i + 1) % cfg.cycle_order.size()];
    }

    SequenceSample s;
    s.obs.resize(static_cast<size_t>(cfg.T));
    s.boundaries.resize(1);
    s.factor_values.assign(1, std::vector<int>(static_cast<size_t>(cfg.T), 0));

    int level = static_cast<int>(rng.below(cfg.num_levels));
    double value = cfg.value_mode == "cycle" ? levels[static_cast<size_t>(level)]
                                             : rng.uniform(-cfg.value_range, cfg.value_range);
    for (int t = 0; t < cfg.T; ++t) {
        if (t > 0 && t % cfg.jump_period == 0) {
            if (cfg.value_mode == "cycle") {
                level = succ[static_cast<size_t>(level)];
                value = levels[static_cast<size_t>(level)];
            } else {
                double next = value;
                do {
                    next = rng.uniform(-cfg.value_range, cfg.value_range);
                } while (std::abs(next - value) < cfg.min_jump);
                value = next;
            }
            s.boundaries[0].push_back(t);
        }
        if (cfg.value_mode == "uniform") {
            // Quantize to the nearest grid level for factor bookkeeping.
            int best = 0;
            for (int k = 1; k < cfg.num_levels; ++k)
                if (std::abs(levels[static_cast<size_t>(k)] - value) <
                    std::abs(levels[static_cast<size_t>(best)] - value))
                    best = k;
            s.factor_values[0][static_cast<size_t>(t)] = best;
        } else {
            s.factor_values[0][static_cast<size_t>(t)] = level;
        }
        double noise = cfg.noise_sigma > 0.0 ? rng.normal(0.0, cfg.noise_sigma) : 0.0;
        s.obs[static_cast<size_t>(t)] = {value + noise};
    }
    return s;
}

std::vector<std::array<double, 3>> moving_ball_palette(int num_colors) {
    static const std::array<double, 3> base[8] = {
        {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0},
        {1, 0, 1}, {0, 1, 1}, {1, 1, 1}, {0.5, 0.5, 0.5}};
    require(num_colors >= 4 && num_colors <= 8, "moving_ball: num_colors must be in [4, 8]");
    return std::vector<std::array<double, 3>>(base, base + num_colors);
}

SequenceSample gen_moving_ball(const MovingBallConfig& cfg, Rng& rng) {
    require(cfg.T > 0, "moving_ball: T must be positive");
    require(cfg.speed >= 0.0, "moving_ball: speed must be >= 0");
    require(cfg.recolor_prob >= 0.0 && cfg.recolor_prob <= 1.0,
            "moving_ball: recolor_prob must be a probability");
    require(cfg.recolor_mode == "cycle" || cfg.recolor_mode == "uniform",
            "moving_ball: unknown recolor_mode");
    const auto palette = moving_ball_palette(cfg.num_colors);

    SequenceSample s;
    s.obs.resize(static_cast<size_t>(cfg.T));
    s.boundaries.resize(1);
    s.factor_values.assign(1, std::vector<int>(static_cast<size_t>(cfg.T), 0));

    double x = rng.uniform(0.1, 0.9);
    double y = rng.uniform(0.1, 0.9);
    double theta = rng.uniform(0.0, 6.283185307179586476925286766559);
    double vx = cfg.speed * std::cos(theta);
    double vy = cfg.speed * std::sin(theta);
    int color = static_cast<int>(rng.below(cfg.num_colors));

    for (int t = 0; t < cfg.T; ++t) {
        if (t > 0) {
            x += vx;
            y += vy;
            bool bounced = false;
            // Elastic reflection; speed is < 2 so one fold per wall suffices.
            if (x < 0.0) { x = -x; vx = -vx; bounced = true; }
            if (x > 1.0) { x = 2.0 - x; vx = -vx; bounced = true; }
            if (y < 0.0) { y = -y; vy = -vy; bounced = true; }
            if (y > 1.0) { y = 2.0 - y; vy = -vy; bounced = true; }
            bool spontaneous = rng.uniform() < cfg.recolor_prob;
            if (bounced || spontaneous) {
                if (cfg.recolor_mode == "cycle") {
                    color = (color + 1) % cfg.num_colors;
                } else {
                    int offset = 1 + static_cast<int>(rng.below(cfg.num_colors - 1));
                    color = (color + offset) % cfg.num_colors;
                }
                s.boundaries[0].push_back(t);
            }
        }
        const auto& rgb = palette[static_cast<size_t>(color)];
        s.factor_values[0][static_cast<size_t>(t)] = color;
        s.obs[static_cast<size_t>(t)] = {x, y, cfg.color_scale * rgb[0],
                                         cfg.color_scale * rgb[1], cfg.color_scale * rgb[2]};
    }
    return s;
}

std::vector<std::vector<double>> nested_factors_codebooks(const NestedFactorsConfig& cfg) {
    require(cfg.num_factors >= 1, "nested_factors: need at least one factor");
    require(static_cast<int>(cfg.base_periods.size()) == cfg.num_factors &&
                static_cast<int>(cfg.cardinality.size()) == cfg.num_factors,
            "nested_factors: per-factor lists must match num_factors");
    std::vector<std::vector<double>> books;
    for (int f = 0; f < cfg.num_factors; ++f) {
        int card = cfg.cardinality[static_cast<size_t>(f)];
        require(card >= 2, "nested_factors: cardinality must be >= 2");
        std::vector<double> book(static_cast<size_t>(card));
        for (int k = 0; k < card; ++k)
            book[static_cast<size_t>(k)] = -cfg.value_range + 2.0 * cfg.value_range * k / (card - 1);
        books.push_back(std::move(book));
    }
    return books;
}

SequenceSample gen_nested_factors(const NestedFactorsConfig& cfg, Rng& rng) {
    require(cfg.T > 0, "nested_factors: T must be positive");
    require(cfg.schedule == "jittered" || cfg.schedule == "nested",
            "nested_factors: unknown schedule");
    require(cfg.value_mode == "cycle" || cfg.value_mode == "uniform",
            "nested_factors: unknown value_mode");
    for (size_t f = 0; f + 1 < cfg.base_periods.size(); ++f)
        require(cfg.base_periods[f] <= cfg.base_periods[f + 1],
                "nested_factors: periods must be ordered fast to slow");
    if (cfg.schedule == "nested")
        for (size_t f = 0; f + 1 < cfg.base_periods.size(); ++f)
            require(cfg.base_periods[f + 1] % cfg.base_periods[f] == 0,
                    "nested_factors: nested schedule needs exact-multiple periods");
    const auto books = nested_factors_codebooks(cfg);

    int F = cfg.num_factors;
    SequenceSample s;
    s.obs.assign(static_cast<size_t>(cfg.T), std::vector<double>(static_cast<size_t>(F), 0.0));
    s.boundaries.resize(static_cast<size_t>(F));
    s.factor_values.assign(static_cast<size_t>(F),
                           std::vector<int>(static_cast<size_t>(cfg.T), 0));

    std::vector<int> id(static_cast<size_t>(F));
    std::vector<int> next_change(static_cast<size_t>(F));
    auto draw_gap = [&](int f) {
        int base = cfg.base_periods[static_cast<size_t>(f)];
        if (cfg.schedule == "nested") return base;
        double u = rng.uniform(-1.0, 1.0);
        int gap = static_cast<int>(std::lround(base * (1.0 + cfg.jitter * u)));
        return gap < 1 ? 1 : gap;
    };
    for (int f = 0; f < F; ++f) {
        id[static_cast<size_t>(f)] =
            static_cast<int>(rng.below(cfg.cardinality[static_cast<size_t>(f)]));
        next_change[static_cast<size_t>(f)] = draw_gap(f);
    }

    for (int t = 0; t < cfg.T; ++t) {
        for (int f = 0; f < F; ++f) {
            if (t > 0 && t == next_change[static_cast<size_t>(f)]) {
                int card = cfg.cardinality[static_cast<size_t>(f)];
                if (cfg.value_mode == "cycle") {
                    id[static_cast<size_t>(f)] = (id[static_cast<size_t>(f)] + 1) % card;
                } else {
                    int offset = 1 + static_cast<int>(rng.below(card - 1));
                    id[static_cast<size_t>(f)] = (id[static_cast<size_t>(f)] + offset) % card;
                }
                s.boundaries[static_cast<size_t>(f)].push_back(t);
                next_change[static_cast<size_t>(f)] = t + draw_gap(f);
            }
            s.factor_values[static_cast<size_t>(f)][static_cast<size_t>(t)] =
                id[static_cast<size_t>(f)];
            s.obs[static_cast<size_t>(t)][static_cast<size_t>(f)] =
                books[static_cast<size_t>(f)][static_cast<size_t>(id[static_cast<size_t>(f)])];
        }
    }
    return s;
}

void save_ndjson(const std::string& path, const std::vector<SequenceSample>& samples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& s : samples) {
        nlohmann::json j;
        j["obs"] = s.obs;
        j["boundaries"] = s.boundaries;
        j["factor_values"] = s.factor_values;
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<SequenceSample> load_ndjson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<SequenceSample> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        SequenceSample s;
        s.obs = j.at("obs").get<std::vector<std::vector<double>>>();
        s.boundaries = j.at("boundaries").get<std::vector<std::vector<int>>>();
        s.factor_values = j.at("factor_values").get<std::vector<std::vector<int>>>();
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace vpr
