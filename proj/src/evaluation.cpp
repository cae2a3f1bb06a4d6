#include "vpr/evaluation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "vpr/numerics/tape.hpp"

namespace vpr {

namespace {

void finish_score(BoundaryScore& s) {
    const long pred = s.tp + s.fp;
    const long truth = s.tp + s.fn;
    s.precision = pred > 0 ? static_cast<double>(s.tp) / static_cast<double>(pred) : 0.0;
    s.recall = truth > 0 ? static_cast<double>(s.tp) / static_cast<double>(truth) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    s.true_positive_rate = s.recall;
    s.false_positive_rate = pred > 0 ? static_cast<double>(s.fp) / static_cast<double>(pred) : 0.0;
}

void match_counts(const std::vector<int>& predicted, const std::vector<int>& truth, int tol,
                  BoundaryScore& s) {
    size_t j = 0;
    std::vector<char> used(truth.size(), 0);
    for (int p : predicted) {
        while (j < truth.size() && (used[j] || truth[j] < p - tol)) ++j;
        if (j < truth.size() && truth[j] <= p + tol) {
            used[j] = 1;
            ++s.tp;
        } else {
            ++s.fp;
        }
    }
    for (char u : used)
        if (!u) ++s.fn;
}

}  // namespace

BoundaryScore boundary_f1(const std::vector<int>& predicted, const std::vector<int>& truth,
                          int tol) {
    if (tol < 0) throw std::invalid_argument("boundary_f1: tolerance must be >= 0");
    BoundaryScore s;
    s.tolerance = tol;
    match_counts(predicted, truth, tol, s);
    finish_score(s);
    return s;
}

BoundaryScore boundary_f1_many(const std::vector<std::vector<int>>& predicted,
                               const std::vector<std::vector<int>>& truth, int tol) {
    if (tol < 0) throw std::invalid_argument("boundary_f1: tolerance must be >= 0");
    if (predicted.size() != truth.size())
        throw std::invalid_argument("boundary_f1: episode count mismatch");
    BoundaryScore s;
    s.tolerance = tol;
    for (size_t e = 0; e < predicted.size(); ++e) match_counts(predicted[e], truth[e], tol, s);
    finish_score(s);
    return s;
}

std::vector<Tensor> to_obs_steps(const SequenceSample& s) {
    std::vector<Tensor> steps;
    steps.reserve(s.obs.size());
    for (const auto& row : s.obs) {
        Tensor t = Tensor::zeros({1, static_cast<int64_t>(row.size())});
        t.data = row;
        steps.push_back(std::move(t));
    }
    return steps;
}

std::vector<Tensor> batch_obs_steps(const std::vector<SequenceSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("batch_obs_steps: empty batch");
    const int T = batch[0].length();
    const int dim = batch[0].obs_dim();
    for (const auto& s : batch)
        if (s.length() != T || s.obs_dim() != dim)
            throw std::invalid_argument("batch_obs_steps: episodes must share length and width");
    std::vector<Tensor> steps;
    steps.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        Tensor m = Tensor::zeros({static_cast<int64_t>(batch.size()), static_cast<int64_t>(dim)});
        for (size_t b = 0; b < batch.size(); ++b)
            for (int k = 0; k < dim; ++k)
                m.data[b * static_cast<size_t>(dim) + static_cast<size_t>(k)] =
                    batch[b].obs[static_cast<size_t>(t)][static_cast<size_t>(k)];
        steps.push_back(std::move(m));
    }
    return steps;
}

double entropy_nats(const std::vector<int>& counts, int total) {
    if (total <= 0) return 0.0;
    double h = 0.0;
    for (int c : counts) {
        if (c <= 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

DisentanglementReport disentanglement_entropy(VprModel& model, const EpisodeSource& source,
                                              const FactorExtractor& extract, int num_factors,
                                              int samples_per_trial, int trials, Rng& rng) {
    if (samples_per_trial < 1 || trials < 1)
        throw std::invalid_argument("disentanglement: counts must be positive");
    const int levels = model.config().levels;
    DisentanglementReport rep;
    rep.samples_per_trial = samples_per_trial;
    rep.trials = trials;
    rep.H.assign(static_cast<size_t>(levels), std::vector<double>(static_cast<size_t>(num_factors), 0.0));

    for (int m = 0; m < trials; ++m) {
        const SequenceSample ep = source();
        const auto steps = to_obs_steps(ep);
        auto windows = model.make_windows();
        Tape tape;
        EpisodeOptions eo;
        eo.train = false;
        const EpisodeResult res = model.run_episode(tape, steps, windows, eo, rng);
        const ModelState& st = res.final_state;

        for (int n = 1; n <= levels; ++n) {
            std::vector<std::vector<int>> counts(static_cast<size_t>(num_factors));
            const Tensor& pmean = st.p_mean[static_cast<size_t>(n - 1)];
            const Tensor& plv = st.p_log_var[static_cast<size_t>(n - 1)];
            for (int i = 0; i < samples_per_trial; ++i) {
                Tensor draw = pmean;
                for (size_t k = 0; k < draw.data.size(); ++k)
                    draw.data[k] += std::exp(0.5 * plv.data[k]) * rng.normal();
                const Tensor rec = model.decode_down(st, n, draw, "stored", nullptr);
                const std::vector<int> ids = extract(rec.data);
                if (static_cast<int>(ids.size()) != num_factors)
                    throw std::invalid_argument("disentanglement: extractor arity mismatch");
                for (int f = 0; f < num_factors; ++f) {
                    auto& cf = counts[static_cast<size_t>(f)];
                    const int id = ids[static_cast<size_t>(f)];
                    if (id < 0) throw std::invalid_argument("disentanglement: negative factor id");
                    if (id >= static_cast<int>(cf.size())) cf.resize(static_cast<size_t>(id) + 1, 0);
                    ++cf[static_cast<size_t>(id)];
                }
            }
            for (int f = 0; f < num_factors; ++f)
                rep.H[static_cast<size_t>(n - 1)][static_cast<size_t>(f)] +=
                    entropy_nats(counts[static_cast<size_t>(f)], samples_per_trial);
        }
    }
    for (auto& row : rep.H)
        for (double& h : row) h /= static_cast<double>(trials);
    return rep;
}

std::vector<double> update_rate(VprModel& model, const EpisodeSource& source, int episodes,
                                Rng& rng) {
    if (episodes < 1) throw std::invalid_argument("update_rate: need at least one episode");
    const int levels = model.config().levels;
    std::vector<double> gap_sum(static_cast<size_t>(levels), 0.0);
    std::vector<long> gap_count(static_cast<size_t>(levels), 0);
    auto windows = model.make_windows();
    for (int e = 0; e < episodes; ++e) {
        const SequenceSample ep = source();
        const auto steps = to_obs_steps(ep);
        Tape tape;
        EpisodeOptions eo;
        eo.train = false;
        const EpisodeResult res = model.run_episode(tape, steps, windows, eo, rng);
        for (int n = 0; n < levels; ++n) {
            int last = -1;
            for (size_t t = 0; t < res.update_mask.size(); ++t) {
                if (!res.update_mask[t][static_cast<size_t>(n)][0]) continue;
                if (last >= 0) {
                    gap_sum[static_cast<size_t>(n)] += static_cast<double>(static_cast<int>(t) - last);
                    ++gap_count[static_cast<size_t>(n)];
                }
                last = static_cast<int>(t);
            }
        }
    }
    std::vector<double> out(static_cast<size_t>(levels),
                            std::numeric_limits<double>::quiet_NaN());
    for (int n = 0; n < levels; ++n)
        if (gap_count[static_cast<size_t>(n)] > 0)
            out[static_cast<size_t>(n)] =
                gap_sum[static_cast<size_t>(n)] / static_cast<double>(gap_count[static_cast<size_t>(n)]);
    return out;
}

BoundaryScore model_boundary_f1(VprModel& model, const EpisodeSource& source, int episodes,
                                int level, int truth_factor, int tol, Rng& rng) {
    if (episodes < 1) throw std::invalid_argument("model_boundary_f1: need episodes");
    if (level < 1 || level > model.config().levels)
        throw std::invalid_argument("model_boundary_f1: level out of range");
    std::vector<std::vector<int>> pred, truth;
    auto windows = model.make_windows();
    for (int e = 0; e < episodes; ++e) {
        const SequenceSample ep = source();
        const auto steps = to_obs_steps(ep);
        Tape tape;
        EpisodeOptions eo;
        eo.train = false;
        const EpisodeResult res = model.run_episode(tape, steps, windows, eo, rng);
        pred.push_back(res.boundaries[static_cast<size_t>(level - 1)][0]);
        truth.push_back(ep.boundaries.at(static_cast<size_t>(truth_factor)));
    }
    return boundary_f1_many(pred, truth, tol);
}

std::vector<Tensor> rollout_observations(VprModel& model, const ModelState& state,
                                         const RolloutOptions& opts, Rng& rng) {
    if (opts.num_steps < 0) throw std::invalid_argument("rollout: negative step count");
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(opts.num_steps) + 1);
    out.push_back(model.decode_down(state, opts.level,
                                    state.s[static_cast<size_t>(opts.level - 1)],
                                    opts.lower_latents, &rng));
    if (opts.num_steps > 0) {
        auto preds = model.rollout(state, opts, rng);
        for (auto& p : preds) out.push_back(std::move(p));
    }
    return out;
}

double event_prediction_accuracy(VprModel& model, const ModelState& state, int level,
                                 const std::vector<int>& truth_events,
                                 const std::function<int(const std::vector<double>&)>& factor_of,
                                 Rng& rng, const std::string& lower_latents) {
    if (truth_events.empty())
        throw std::invalid_argument("event_prediction_accuracy: empty truth");
    RolloutOptions opts;
    opts.level = level;
    opts.num_steps = static_cast<int>(truth_events.size());
    opts.lower_latents = lower_latents;
    const auto preds = model.rollout(state, opts, rng);
    long hits = 0;
    for (size_t k = 0; k < preds.size(); ++k)
        if (factor_of(preds[k].data) == truth_events[k]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth_events.size());
}

int nearest_index(double value, const std::vector<double>& codebook) {
    if (codebook.empty()) throw std::invalid_argument("nearest_index: empty codebook");
    int best = 0;
    for (int k = 1; k < static_cast<int>(codebook.size()); ++k)
        if (std::abs(codebook[static_cast<size_t>(k)] - value) <
            std::abs(codebook[static_cast<size_t>(best)] - value))
            best = k;
    return best;
}

std::vector<int> nested_factor_ids(const std::vector<double>& obs,
                                   const NestedFactorsConfig& cfg) {
    const auto books = nested_factors_codebooks(cfg);
    if (obs.size() < books.size())
        throw std::invalid_argument("nested_factor_ids: observation too short");
    std::vector<int> ids(books.size());
    for (size_t f = 0; f < books.size(); ++f) ids[f] = nearest_index(obs[f], books[f]);
    return ids;
}

int ball_color_id(const std::vector<double>& obs, int num_colors, double color_scale) {
    if (obs.size() < 5) throw std::invalid_argument("ball_color_id: observation too short");
    const auto palette = moving_ball_palette(num_colors);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < num_colors; ++k) {
        double d = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double diff =
                obs[static_cast<size_t>(2 + j)] -
                color_scale * palette[static_cast<size_t>(k)][static_cast<size_t>(j)];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace vpr
