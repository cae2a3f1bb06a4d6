#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpr/config.hpp"

namespace vpr {

// Grid study of the change-detection thresholds: every (window, gamma, seed)
// cell trains its own model from the base run description and reports the
// detection F1 of the final probe. A 1x1x1 grid is exactly one ordinary
// train-plus-evaluate run.
struct SweepConfig {
    RunConfig base;
    std::vector<int> windows{25, 50, 100, 200, 400};
    std::vector<double> gammas{1.0, 1.1, 1.2, 1.3};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int workers = 1;  // cells run in parallel; the reduction is serial
};

struct SweepCell {
    int window = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    double f1 = 0.0;
};

// One row per grid value: the mean and standard deviation of F1 over every
// cell sharing that value (all settings of the other axis, all seeds).
struct SweepMarginal {
    std::string axis;  // "gamma" | "window"
    double value = 0.0;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<SweepMarginal> marginals;  // |gammas| + |windows| rows
    std::string cells_path, marginals_path;
};

// Run the grid. With write_files, emits sweep_cells.csv, sweep_marginals.csv
// and the resolved base-config snapshot under out_dir.
SweepResult run_sweep(const SweepConfig& sc, const std::string& out_dir, bool write_files,
                      bool quiet);

// Mean F1 of one marginal row; throws if the value is not on that axis.
double marginal_mean(const SweepResult& r, const std::string& axis, double value);

}  // namespace vpr
