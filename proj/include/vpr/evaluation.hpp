#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vpr/datasets.hpp"
#include "vpr/model/vpr_model.hpp"
#include "vpr/numerics/rng.hpp"
#include "vpr/numerics/tensor.hpp"

namespace vpr {

// Detection quality against ground-truth boundaries. Matching is greedy
// earliest-first within +-tolerance steps and one-to-one. The rates restate
// the counts: true_positive_rate = tp / |truth| (equals recall) and
// false_positive_rate = fp / |predicted|; every 0/0 is defined as 0.
struct BoundaryScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double true_positive_rate = 0.0;
    double false_positive_rate = 0.0;
    int tolerance = 1;
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

BoundaryScore boundary_f1(const std::vector<int>& predicted, const std::vector<int>& truth,
                          int tol = 1);
// Micro-average: counts pooled over paired episodes before the rates.
BoundaryScore boundary_f1_many(const std::vector<std::vector<int>>& predicted,
                               const std::vector<std::vector<int>>& truth, int tol = 1);

// Episode-to-tensor glue. `to_obs_steps` yields T tensors of shape
// [1, obs_dim]; `batch_obs_steps` stacks equal-length episodes into
// [batch, obs_dim] per step.
std::vector<Tensor> to_obs_steps(const SequenceSample& s);
std::vector<Tensor> batch_obs_steps(const std::vector<SequenceSample>& batch);

using EpisodeSource = std::function<SequenceSample()>;
// Maps one reconstructed observation row to discrete factor ids.
using FactorExtractor = std::function<std::vector<int>(const std::vector<double>&)>;

// Which generative factor each level carries. H[level - 1][factor] is the
// average entropy (nats) of the factor read off reconstructions in which only
// that level's latent was resampled from its stored prediction, all other
// levels held at their inferred states.
struct DisentanglementReport {
    std::vector<std::vector<double>> H;
    int samples_per_trial = 0;
    int trials = 0;
};

DisentanglementReport disentanglement_entropy(VprModel& model, const EpisodeSource& source,
                                              const FactorExtractor& extract, int num_factors,
                                              int samples_per_trial, int trials, Rng& rng);

// Mean objective-time gap between consecutive refreshes per level, pooled
// over `episodes` runs (surprise windows persist across them). Levels that
// never refresh twice yield NaN.
std::vector<double> update_rate(VprModel& model, const EpisodeSource& source, int episodes,
                                Rng& rng);

// Detection F1 of a model's level-`level` refreshes against the ground-truth
// boundaries of `truth_factor`, micro-averaged over episodes.
BoundaryScore model_boundary_f1(VprModel& model, const EpisodeSource& source, int episodes,
                                int level, int truth_factor, int tol, Rng& rng);

// Primed reconstruction followed by opts.num_steps jumpy predictions, all in
// observation space. opts.num_steps may be 0 (reconstruction only); negative
// counts are an error. The model's parameters and `state` are not mutated.
std::vector<Tensor> rollout_observations(VprModel& model, const ModelState& state,
                                         const RolloutOptions& opts, Rng& rng);

// Fraction of jumpy rollout steps whose decoded factor matches the k-th true
// event value, k = 1..|truth_events|.
double event_prediction_accuracy(VprModel& model, const ModelState& state, int level,
                                 const std::vector<int>& truth_events,
                                 const std::function<int(const std::vector<double>&)>& factor_of,
                                 Rng& rng, const std::string& lower_latents = "stored");

// Factor readers for the bundled datasets.
int nearest_index(double value, const std::vector<double>& codebook);
std::vector<int> nested_factor_ids(const std::vector<double>& obs,
                                   const NestedFactorsConfig& cfg);
int ball_color_id(const std::vector<double>& obs, int num_colors, double color_scale);

// Empirical entropy (nats) of a histogram with `total` draws.
double entropy_nats(const std::vector<int>& counts, int total);

}  // namespace vpr
