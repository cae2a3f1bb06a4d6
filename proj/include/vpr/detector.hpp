#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace vpr {

// Event-detection settings shared by every level of a model.
struct DetectorConfig {
    double gamma = 1.1;   // threshold weight on the running mean
    int window = 100;     // number of retained surprise values per level
    // Policy while the window is still filling: "mean_available" averages
    // whatever is present (an empty window means the step counts as an
    // event); "skip_until_full" keeps the criterion silent until full.
    std::string warmup = "mean_available";
    bool use_ce = true;
    bool use_cu = true;
    // Clear per-level windows at episode starts during evaluation runs.
    bool reset_each_episode = false;
};

// Fixed-capacity ring of recent bottom-up surprise values, one per level.
class CuWindow {
  public:
    CuWindow() = default;
    explicit CuWindow(int capacity) : capacity_(capacity) {}

    void push(double v) {
        if (capacity_ <= 0) return;
        if (static_cast<int>(values_.size()) == capacity_) values_.pop_front();
        values_.push_back(v);
    }
    void clear() { values_.clear(); }
    bool full() const { return static_cast<int>(values_.size()) == capacity_; }
    int count() const { return static_cast<int>(values_.size()); }
    int capacity() const { return capacity_; }
    double mean() const {
        if (values_.empty()) return 0.0;
        double s = 0.0;
        for (double v : values_) s += v;
        return s / static_cast<double>(values_.size());
    }
    std::vector<double> snapshot() const { return {values_.begin(), values_.end()}; }
    void restore(int capacity, const std::vector<double>& vals) {
        capacity_ = capacity;
        values_.assign(vals.begin(), vals.end());
    }

  private:
    int capacity_ = 100;
    std::deque<double> values_;
};

// Change-evidence criterion: the new observation is better explained under
// the change hypothesis than under the stored static one. Ties do not fire.
inline bool criterion_e(double d_st, double d_ch) { return d_st > d_ch; }

// Context-unpredictability criterion: the static surprise stands out against
// its own recent history. Returns the fired flag and reports the threshold
// it compared against (0 when the window was empty).
struct CuResult {
    bool fired = false;
    double threshold = 0.0;
};

inline CuResult criterion_u(double d_st, const CuWindow& window, const DetectorConfig& cfg) {
    CuResult r;
    if (window.count() == 0) {
        // Nothing to compare against yet: treat the observation as an event
        // under the averaging policy, stay silent under skip_until_full.
        r.fired = cfg.warmup == "mean_available";
        return r;
    }
    if (cfg.warmup == "skip_until_full" && !window.full()) return r;
    r.threshold = cfg.gamma * window.mean();
    r.fired = d_st > r.threshold;
    return r;
}

// One detector evaluation, recorded for telemetry export.
struct TraceRow {
    int episode = 0;
    int t = 0;
    int level = 0;  // 1-based model level
    double d_st = 0.0;
    double d_ch = 0.0;
    double cu_threshold = 0.0;
    bool fired_ce = false;
    bool fired_cu = false;
    bool mask = false;
    // Posterior entropies and cross-entropies under both hypotheses, used by
    // divergence-decomposition telemetry.
    double h_st = 0.0;
    double h_ch = 0.0;
    double ce_st = 0.0;
    double ce_ch = 0.0;
};

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

}  // namespace vpr
