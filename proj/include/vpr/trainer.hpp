#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vpr/config.hpp"
#include "vpr/datasets.hpp"
#include "vpr/model/toy_model.hpp"
#include "vpr/model/vpr_model.hpp"

namespace vpr {

// Endless scalar-episode source cut from one continuous stream: each chunk
// is generated as a single long walk and sliced into consecutive episodes,
// so the phase of the jump clock and the current ring position carry across
// episode seams. Rolling detector statistics then see the same jump cadence
// everywhere instead of a fresh random phase per episode. Chunks are seeded
// from (seed, chunk index) alone, which makes any position reproducible from
// its episode counter.
class ToyStream {
  public:
    ToyStream(const Synthetic1dConfig& cfg, std::uint64_t seed, int chunk_episodes = 50);

    SequenceSample next();
    void seek(std::int64_t episode_index);
    std::int64_t position() const { return next_index_; }

  private:
    void refill();

    Synthetic1dConfig cfg_;
    std::uint64_t seed_;
    int chunk_;
    std::int64_t next_index_ = 0;
    std::int64_t buffer_chunk_ = -1;
    std::vector<SequenceSample> buffer_;
};

struct TrainOptions {
    std::string out_dir;      // created if missing (when write_files)
    std::string resume_path;  // checkpoint to continue from; empty = fresh
    bool write_files = true;  // metrics CSV, checkpoints, config snapshot
    bool quiet = false;       // suppress stdout progress lines
};

struct TrainResult {
    int iterations_run = 0;  // total completed, including resumed ones
    double final_loss = 0.0;
    // Boundary F1 measured at the last iteration (NaN if nothing ran).
    double final_f1 = std::numeric_limits<double>::quiet_NaN();
    std::string metrics_path;
    std::string checkpoint_path;
};

// Model shapes implied by a run description.
HierarchyConfig hierarchy_from(const RunConfig& cfg);
ToyConfig toy_from(const RunConfig& cfg);

// Train an already-constructed model in place. The caller owns the surprise
// windows, which stay warm across iterations and are saved with checkpoints.
// Metrics go to out_dir/metrics.csv (append-only; header written once), a
// detection F1 probe runs every training.f1_every iterations and at the end,
// and checkpoints land in out_dir/checkpoint.json. A non-finite loss aborts
// with a diagnostic dump (offending episodes plus a detector trace) and a
// std::runtime_error naming it.
TrainResult train_full_model(VprModel& model, std::vector<CuWindow>& windows,
                             const RunConfig& cfg, const TrainOptions& opts);
TrainResult train_toy_model(ToyVpr& toy, CuWindow& window, const RunConfig& cfg,
                            const TrainOptions& opts);

// Convenience wrapper: build the configured model variant, write the
// resolved-config snapshot, train, and discard the model. Used by the CLI.
TrainResult train_run(const RunConfig& cfg, const TrainOptions& opts);

}  // namespace vpr
