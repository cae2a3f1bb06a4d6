#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vpr/detector.hpp"
#include "vpr/distributions.hpp"
#include "vpr/model/nets.hpp"
#include "vpr/numerics/optim.hpp"
#include "vpr/numerics/rng.hpp"

namespace vpr {

// Single-level variant for scalar streams. The posterior bypasses all
// networks: it is a direct map q = N(o_t + c, sigma2) with per-step jitter
// c ~ N(0, posterior_noise^2), and sigma2 = base_var + posterior_noise^2 so
// the stated spread matches the jitter actually applied to the mean. Only
// the next-value prediction is learned: a two-layer dense net mapping the
// last committed value to (mean, log variance). Its final layer starts as an
// exact zero map with the log-variance bias at -4, i.e. the untrained net
// confidently predicts zero, which keeps the prediction-comparison criterion
// uninformative until real jump examples train it.
struct ToyConfig {
    double posterior_noise = 0.0;
    double base_var = 0.01;
    int hidden = 32;
    DetectorConfig detector;
};

struct ToyOptions {
    bool train = true;
    double lr = 5e-4;
    bool record_trace = false;
    int trace_episode = 0;
};

struct ToyEpisodeResult {
    std::vector<int> boundaries;  // fired steps, t >= 1
    double loss = 0.0;            // mean prediction divergence over trained steps
    int num_trained = 0;
    std::vector<TraceRow> trace;
};

class ToyVpr {
  public:
    ToyVpr(const ToyConfig& cfg, uint64_t init_seed);

    const ToyConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    CuWindow make_window() const { return CuWindow(cfg_.detector.window); }
    double sigma2() const { return cfg_.base_var + cfg_.posterior_noise * cfg_.posterior_noise; }

    // One pass over a scalar sequence: detect events, and when training is on
    // take one optimizer step pulling each fired step's prediction toward the
    // posterior that replaced it. The surprise window persists across calls.
    ToyEpisodeResult run_episode(const std::vector<double>& obs, CuWindow& window, Rng& rng,
                                 const ToyOptions& opts);

    // The learned next-value distribution given the last committed value.
    DiagGaussian predict(double s);

    // Replace the learned prediction with an exact map (disables training).
    void set_oracle(std::function<DiagGaussian(double)> oracle) { oracle_ = std::move(oracle); }

  private:
    ToyConfig cfg_;
    ParamStore store_;
    Dense l1_, l2_;
    std::function<DiagGaussian(double)> oracle_;
};

}  // namespace vpr
