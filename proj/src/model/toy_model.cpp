#include "vpr/model/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vpr/numerics/tape.hpp"

namespace vpr {

ToyVpr::ToyVpr(const ToyConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg_.posterior_noise < 0.0) throw std::invalid_argument("toy: posterior_noise must be >= 0");
    if (cfg_.base_var <= 0.0) throw std::invalid_argument("toy: base_var must be positive");
    if (cfg_.hidden < 1) throw std::invalid_argument("toy: hidden must be positive");
    if (cfg_.detector.gamma <= 0.0 || cfg_.detector.window < 1)
        throw std::invalid_argument("toy: detector gamma must be > 0 and window >= 1");
    Rng rng(init_seed);
    l1_ = Dense(store_, "toy.l1", 1, cfg_.hidden, rng);
    l2_ = Dense(store_, "toy.l2", cfg_.hidden, 2, rng, 0.0);
    store_.param(l2_.bias_index()).value.data[1] = -4.0;
}

DiagGaussian ToyVpr::predict(double s) {
    if (oracle_) return oracle_(s);
    Tape t;
    store_.stage(t);
    Tensor x = Tensor::zeros({1, 1});
    x.data[0] = s;
    const int raw = l2_.apply(t, store_, t.tanh(l1_.apply(t, store_, t.leaf(std::move(x)))));
    const Tensor& v = t.val(raw);
    const double lv = std::clamp(v.at(0, 1), kLogVarMin, kLogVarMax);
    return DiagGaussian({v.at(0, 0)}, {lv});
}

ToyEpisodeResult ToyVpr::run_episode(const std::vector<double>& obs, CuWindow& window, Rng& rng,
                                     const ToyOptions& opts) {
    if (obs.empty()) throw std::invalid_argument("toy: empty sequence");
    if (cfg_.detector.reset_each_episode) window.clear();
    const double s2 = sigma2();
    const double lv = std::log(s2);

    ToyEpisodeResult out;
    DiagGaussian q_stored, p_pred;
    double s_committed = 0.0;
    // (last committed value, posterior that replaced the prediction)
    std::vector<std::pair<double, DiagGaussian>> pairs;

    for (size_t t = 0; t < obs.size(); ++t) {
        const double c = cfg_.posterior_noise > 0.0 ? rng.normal(0.0, cfg_.posterior_noise) : 0.0;
        const DiagGaussian q_new({obs[t] + c}, {lv});

        bool fired = true;  // the first step always commits
        if (t > 0) {
            const double d_st = DiagGaussian::kl(q_new, q_stored);
            const double d_ch = DiagGaussian::kl(q_new, p_pred);
            const bool ce = criterion_e(d_st, d_ch);
            const CuResult cu = criterion_u(d_st, window, cfg_.detector);
            // Either criterion alone is enough to trigger a refresh.
            fired = (cfg_.detector.use_ce && ce) || (cfg_.detector.use_cu && cu.fired);
            window.push(d_st);
            if (opts.record_trace) {
                TraceRow r;
                r.episode = opts.trace_episode;
                r.t = static_cast<int>(t);
                r.level = 1;
                r.d_st = d_st;
                r.d_ch = d_ch;
                r.cu_threshold = cu.threshold;
                r.fired_ce = ce;
                r.fired_cu = cu.fired;
                r.mask = fired;
                r.h_st = q_new.entropy();
                r.h_ch = q_new.entropy();
                r.ce_st = DiagGaussian::cross_entropy(q_new, q_stored);
                r.ce_ch = DiagGaussian::cross_entropy(q_new, p_pred);
                out.trace.push_back(r);
            }
        }
        if (fired) {
            if (t > 0) {
                out.boundaries.push_back(static_cast<int>(t));
                pairs.emplace_back(s_committed, q_new);
            }
            q_stored = q_new;
            s_committed = q_new.mean[0];
            p_pred = predict(s_committed);
        }
    }

    if (opts.train && !oracle_ && !pairs.empty()) {
        const int64_t m = static_cast<int64_t>(pairs.size());
        Tensor xs = Tensor::zeros({m, 1});
        Tensor qm = Tensor::zeros({m, 1});
        Tensor qlv = Tensor::zeros({m, 1});
        for (int64_t i = 0; i < m; ++i) {
            xs.data[static_cast<size_t>(i)] = pairs[static_cast<size_t>(i)].first;
            qm.data[static_cast<size_t>(i)] = pairs[static_cast<size_t>(i)].second.mean[0];
            qlv.data[static_cast<size_t>(i)] = pairs[static_cast<size_t>(i)].second.log_var[0];
        }
        Tape t;
        store_.stage(t);
        const int raw =
            l2_.apply(t, store_, t.tanh(l1_.apply(t, store_, t.leaf(std::move(xs)))));
        const int mu = t.slice_cols(raw, 0, 1);
        const int plv = t.clamp(t.slice_cols(raw, 1, 2), kLogVarMin, kLogVarMax);
        const int kl = gauss_kl_rows(t, t.leaf(std::move(qm)), t.leaf(std::move(qlv)), mu, plv);
        const int loss = t.mean_all(kl);
        t.backward(loss);
        store_.adam_step(t, opts.lr, AdamConfig{});
        out.loss = t.scalar_val(loss);
        out.num_trained = static_cast<int>(m);
    }
    return out;
}

}  // namespace vpr
