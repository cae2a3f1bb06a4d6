#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpr/detector.hpp"
#include "vpr/distributions.hpp"
#include "vpr/model/nets.hpp"
#include "vpr/numerics/optim.hpp"
#include "vpr/numerics/rng.hpp"
#include "vpr/numerics/tape.hpp"
#include "vpr/numerics/tensor.hpp"

namespace vpr {

// Architecture of the stacked latent hierarchy. Level 1 sits on the
// observations and refreshes its latent every step; each higher level is
// refreshed only when the event detector below it fires (or, in "fixed"
// mode, on a preset clock).
struct HierarchyConfig {
    int levels = 2;
    int64_t obs_dim = 1;
    int64_t latent_dim = 20;  // width of each stochastic latent
    int64_t det_dim = 200;    // width of deterministic states and hidden layers
    std::string update_mode = "adaptive";  // "adaptive" | "fixed"
    // Per-level update periods for "fixed" mode. The first entry must be 1
    // and each entry must divide the next so refreshes stay nested.
    std::vector<int> fixed_intervals;
    std::string recon_loss = "mse";  // "mse" | "bce"
    // Final-layer weight scale of the Gaussian parameter heads; 0 starts
    // every posterior and prior at N(0, I).
    double head_init_scale = 0.0;
    DetectorConfig detector;
};

// Values of all per-level recurrent quantities at one point in time,
// read out of a finished episode. Index [level - 1].
struct ModelState {
    std::vector<Tensor> s;          // latest latent sample
    std::vector<Tensor> d;          // committed temporal state
    std::vector<Tensor> c;          // top-down context in effect
    std::vector<Tensor> q_mean, q_log_var;  // posterior stored at the last refresh
    std::vector<Tensor> p_mean, p_log_var;  // prediction for the next latent
    std::vector<Tensor> d_cand;     // temporal state the next refresh will commit
    int64_t batch = 0;
};

struct EpisodeOptions {
    bool train = true;   // sample latents and build the loss graph; else use means
    double beta = 1.0;   // KL weight in the loss
    bool record_trace = false;
    int trace_episode_base = 0;  // TraceRow.episode = base + element index
};

struct EpisodeResult {
    int loss = -1;        // tape node: batch mean of (recon + beta * kl)
    double recon = 0.0;   // batch-mean reconstruction total (value)
    double kl = 0.0;      // batch-mean KL total, unweighted (value)
    std::vector<double> kl_per_level;          // [levels]
    // update_mask[t][level - 1][element]: which levels refreshed when.
    std::vector<std::vector<std::vector<char>>> update_mask;
    // boundaries[level - 1][element]: refresh steps with t >= 1 (the forced
    // refresh at t = 0 is not a detection).
    std::vector<std::vector<std::vector<int>>> boundaries;
    std::vector<TraceRow> trace;
    ModelState final_state;
};

struct RolloutOptions {
    int level = 2;      // level whose transition is iterated
    int num_steps = 1;  // number of predicted refreshes
    bool sample_top = false;             // draw the rolled latent vs use the mean
    std::string lower_latents = "prior_mean";  // "prior_mean"|"prior_sample"|"stored"
};

// The stacked event-segmentation model: per level, a Gaussian latent with a
// recurrent temporal state, a posterior over it, a learned prediction of its
// next value, and decoders that pass context down the stack. A dual-criterion
// detector decides when each level refreshes.
class VprModel {
  public:
    VprModel(const HierarchyConfig& cfg, uint64_t init_seed);

    const HierarchyConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // Run one batched episode over obs_steps[t] of shape [batch, obs_dim].
    // `windows` holds the per-level surprise rings (index by level; size
    // levels + 1); they persist across calls unless the detector config asks
    // for per-episode resets.
    EpisodeResult run_episode(Tape& tape, const std::vector<Tensor>& obs_steps,
                              std::vector<CuWindow>& windows, const EpisodeOptions& opts,
                              Rng& rng);

    std::vector<CuWindow> make_windows() const;

    // Single-call inspection helpers (scratch tape per call, value level).
    // `x` is the already-lifted input representation at that level.
    DiagGaussian posterior_at(int level, const Tensor& x, const Tensor& d, const Tensor& c);
    DiagGaussian prior_at(int level, const Tensor& d, const Tensor& c);
    Tensor transition_at(int level, const Tensor& s, const Tensor& d);
    Tensor decode_at(int level, const Tensor& s, const Tensor& c);  // includes the context skip
    Tensor lift_at(int level, const Tensor& x);                     // includes the input skip
    Tensor embed_obs_at(const Tensor& obs);
    Tensor readout_at(const Tensor& c0);  // decoder output -> observation space

    // Decode an override latent at `level` down to observation space. Levels
    // below either keep their stored latents ("stored") or are refreshed from
    // their context-conditioned predictions ("prior_mean"/"prior_sample").
    Tensor decode_down(const ModelState& state, int level, const Tensor& s_at_level,
                       const std::string& lower_latents, Rng* rng);

    // Jumpy prediction: iterate the transition at one level from a finished
    // state and decode each predicted latent to an observation.
    std::vector<Tensor> rollout(const ModelState& state, const RolloutOptions& opts, Rng& rng);

    // Forward invocation counts (one per batched application), for probing
    // that predictions are not recomputed between refreshes.
    long prior_calls(int level) const { return nets(level).prior.calls(); }
    long transition_calls(int level) const { return nets(level).tran.calls(); }
    long decoder_calls(int level) const { return nets(level).dec.calls(); }
    long encoder_calls(int level) const { return nets(level).enc.calls(); }
    long posterior_calls(int level) const { return nets(level).post.calls(); }

  private:
    struct LevelNets {
        DenseStack comp;    // lifted input -> latent-width code
        GaussianHead post;  // (code, d, c) -> q(s)
        Dense bridge;       // d -> latent-width summary feeding the prior head
        GaussianHead prior; // (bridge(d), c) -> p(s)
        GruCell tran;       // (s, d) -> next d
        DenseStack dec;     // (s, c) -> context one level down
        ResidualStack enc;  // lift to the level above (absent at the top)
        bool has_enc = false;
    };

    const LevelNets& nets(int level) const { return lv_[static_cast<size_t>(level - 1)]; }
    LevelNets& nets(int level) { return lv_[static_cast<size_t>(level - 1)]; }

    int decode_node(Tape& t, int level, int s, int c) const;
    int posterior_input(Tape& t, int code, int d, int c) const;
    int prior_input(Tape& t, int level, int d, int c) const;
    void validate() const;

    HierarchyConfig cfg_;
    ParamStore store_;
    std::vector<LevelNets> lv_;
    DenseStack obs_embed_;
    DenseStack obs_rec_;
};

}  // namespace vpr
