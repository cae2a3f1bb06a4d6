#include "vpr/model/vpr_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vpr {

namespace {

bool any_set(const std::vector<char>& m) {
    return std::any_of(m.begin(), m.end(), [](char v) { return v != 0; });
}

Tensor mask_tensor(const std::vector<char>& m) {
    Tensor t = Tensor::zeros({static_cast<int64_t>(m.size())});
    for (size_t i = 0; i < m.size(); ++i) t.data[i] = m[i] ? 1.0 : 0.0;
    return t;
}

// Row r of a [batch, k] node value as a value-level Gaussian.
DiagGaussian row_gaussian(const Tensor& mean, const Tensor& log_var, int64_t r) {
    const int64_t k = mean.cols();
    DiagGaussian g;
    g.mean.resize(static_cast<size_t>(k));
    g.log_var.resize(static_cast<size_t>(k));
    for (int64_t j = 0; j < k; ++j) {
        g.mean[static_cast<size_t>(j)] = mean.at(r, j);
        g.log_var[static_cast<size_t>(j)] = log_var.at(r, j);
    }
    return g;
}

}  // namespace

VprModel::VprModel(const HierarchyConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    validate();
    Rng rng(init_seed);
    const int64_t K = cfg_.latent_dim;
    const int64_t D = cfg_.det_dim;
    obs_embed_ = DenseStack(store_, "obs_embed", cfg_.obs_dim, D, D, 2, rng);
    obs_rec_ = DenseStack(store_, "obs_rec", D, D, cfg_.obs_dim, 2, rng);
    lv_.resize(static_cast<size_t>(cfg_.levels));
    for (int n = 1; n <= cfg_.levels; ++n) {
        LevelNets& L = nets(n);
        const std::string p = "l" + std::to_string(n);
        L.comp = DenseStack(store_, p + ".comp", D, D, K, 3, rng);
        L.post = GaussianHead(store_, p + ".post", K + 2 * D, D, K, rng, cfg_.head_init_scale);
        L.bridge = Dense(store_, p + ".tran_fc", D, K, rng);
        L.prior = GaussianHead(store_, p + ".prior", K + D, D, K, rng, cfg_.head_init_scale);
        L.tran = GruCell(store_, p + ".tran", K, D, rng);
        L.dec = DenseStack(store_, p + ".dec", K + D, D, D, 4, rng);
        if (n < cfg_.levels) {
            L.enc = ResidualStack(store_, p + ".enc", D, rng);
            L.has_enc = true;
        }
    }
}

void VprModel::validate() const {
    if (cfg_.levels < 1) throw std::invalid_argument("hierarchy: levels must be >= 1");
    if (cfg_.obs_dim < 1 || cfg_.latent_dim < 1 || cfg_.det_dim < 1)
        throw std::invalid_argument("hierarchy: dimensions must be positive");
    if (cfg_.update_mode != "adaptive" && cfg_.update_mode != "fixed")
        throw std::invalid_argument("hierarchy: update_mode must be adaptive or fixed");
    if (cfg_.recon_loss != "mse" && cfg_.recon_loss != "bce")
        throw std::invalid_argument("hierarchy: recon_loss must be mse or bce");
    if (cfg_.update_mode == "fixed") {
        if (static_cast<int>(cfg_.fixed_intervals.size()) != cfg_.levels)
            throw std::invalid_argument("hierarchy: fixed_intervals must list every level");
        if (cfg_.fixed_intervals[0] != 1)
            throw std::invalid_argument("hierarchy: the bottom level refreshes every step");
        for (size_t i = 0; i < cfg_.fixed_intervals.size(); ++i) {
            if (cfg_.fixed_intervals[i] < 1)
                throw std::invalid_argument("hierarchy: fixed intervals must be >= 1");
            if (i > 0 && cfg_.fixed_intervals[i] % cfg_.fixed_intervals[i - 1] != 0)
                throw std::invalid_argument(
                    "hierarchy: each fixed interval must be a multiple of the one below");
        }
    }
    if (cfg_.detector.warmup != "mean_available" && cfg_.detector.warmup != "skip_until_full")
        throw std::invalid_argument("detector: unknown warmup policy");
    if (cfg_.detector.gamma <= 0.0 || cfg_.detector.window < 1)
        throw std::invalid_argument("detector: gamma must be > 0 and window >= 1");
}

std::vector<CuWindow> VprModel::make_windows() const {
    return std::vector<CuWindow>(static_cast<size_t>(cfg_.levels) + 1,
                                 CuWindow(cfg_.detector.window));
}

int VprModel::decode_node(Tape& t, int level, int s, int c) const {
    const LevelNets& L = nets(level);
    return t.add(L.dec.apply(t, store_, t.concat(s, c)), t.scale(c, kResidualScale));
}

int VprModel::posterior_input(Tape& t, int code, int d, int c) const {
    return t.concat(t.concat(code, d), c);
}

// The temporal state reaches the prediction head through a latent-width
// summary layer; the head then conditions on that summary and the context.
int VprModel::prior_input(Tape& t, int level, int d, int c) const {
    const int e = t.leaky_relu(nets(level).bridge.apply(t, store_, d), kLeakySlope);
    return t.concat(e, c);
}

EpisodeResult VprModel::run_episode(Tape& t, const std::vector<Tensor>& obs_steps,
                                    std::vector<CuWindow>& windows, const EpisodeOptions& opts,
                                    Rng& rng) {
    const int N = cfg_.levels;
    const int T = static_cast<int>(obs_steps.size());
    if (T == 0) throw std::invalid_argument("run_episode: empty sequence");
    const int64_t B = obs_steps[0].rows();
    const int64_t K = cfg_.latent_dim;
    const int64_t D = cfg_.det_dim;
    if (static_cast<int>(windows.size()) != N + 1)
        throw std::invalid_argument("run_episode: need one surprise window per level");
    for (const Tensor& o : obs_steps)
        if (o.rows() != B || o.cols() != cfg_.obs_dim)
            throw std::invalid_argument("run_episode: observation shape mismatch");
    const bool fixed = cfg_.update_mode == "fixed";
    if (cfg_.detector.reset_each_episode)
        for (CuWindow& w : windows) w.clear();

    store_.stage(t);

    // Recurrent node ids per level (index 1..N).
    std::vector<int> s(N + 1), d(N + 1), c(N + 1), qm(N + 1), qlv(N + 1), pm(N + 1),
        plv(N + 1), dc(N + 1);
    for (int n = 1; n <= N; ++n) {
        s[n] = t.leaf(Tensor::zeros({B, K}));
        d[n] = t.leaf(Tensor::zeros({B, D}));
        c[n] = t.leaf(Tensor::zeros({B, D}));
        qm[n] = t.leaf(Tensor::zeros({B, K}));
        qlv[n] = t.leaf(Tensor::zeros({B, K}));
        pm[n] = t.leaf(Tensor::zeros({B, K}));
        plv[n] = t.leaf(Tensor::zeros({B, K}));
        dc[n] = t.leaf(Tensor::zeros({B, D}));
    }
    const int zeros_bd = t.leaf(Tensor::zeros({B, D}));
    const int zeros_bk = t.leaf(Tensor::zeros({B, K}));

    int recon_total = -1;                    // [B]
    std::vector<int> kl_total(N + 1, -1);    // [B] per level

    EpisodeResult out;
    out.update_mask.reserve(static_cast<size_t>(T));
    out.boundaries.assign(static_cast<size_t>(N),
                          std::vector<std::vector<int>>(static_cast<size_t>(B)));

    for (int step = 0; step < T; ++step) {
        const int obs = t.leaf(obs_steps[static_cast<size_t>(step)]);

        // Lift the observation through the stack; every level sees a fresh
        // bottom-up input each step.
        std::vector<int> x(static_cast<size_t>(N) + 1, -1);
        x[1] = obs_embed_.apply(t, store_, obs);
        for (int n = 1; n < N; ++n) x[static_cast<size_t>(n) + 1] = nets(n).enc.apply(t, store_, x[static_cast<size_t>(n)]);

        std::vector<int> code(static_cast<size_t>(N) + 1, -1);
        auto lift_code = [&](int n) {
            if (code[static_cast<size_t>(n)] < 0)
                code[static_cast<size_t>(n)] = nets(n).comp.apply(t, store_, x[static_cast<size_t>(n)]);
            return code[static_cast<size_t>(n)];
        };

        // ---- decide which levels refresh ----
        std::vector<std::vector<char>> mask(static_cast<size_t>(N) + 1);
        mask[1].assign(static_cast<size_t>(B), 1);
        for (int n = 2; n <= N; ++n) {
            auto& mn = mask[static_cast<size_t>(n)];
            mn.assign(static_cast<size_t>(B), 0);
            if (step == 0) {
                mn.assign(static_cast<size_t>(B), 1);
                continue;
            }
            if (fixed) {
                const char on = (step % cfg_.fixed_intervals[static_cast<size_t>(n - 1)] == 0) ? 1 : 0;
                mn.assign(static_cast<size_t>(B), on);
                continue;
            }
            const auto& parent = mask[static_cast<size_t>(n - 1)];
            if (!any_set(parent)) continue;  // criteria not evaluated at all

            const int cx = lift_code(n);
            const LevelNets& L = nets(n);
            const auto q_st = L.post.apply(t, store_, posterior_input(t, cx, d[n], c[n]));
            const auto q_ch = L.post.apply(t, store_, posterior_input(t, cx, dc[n], c[n]));
            const Tensor& stm = t.val(q_st.mean);
            const Tensor& stv = t.val(q_st.log_var);
            const Tensor& chm = t.val(q_ch.mean);
            const Tensor& chv = t.val(q_ch.log_var);
            const Tensor& sqm = t.val(qm[n]);
            const Tensor& sqv = t.val(qlv[n]);
            const Tensor& spm = t.val(pm[n]);
            const Tensor& spv = t.val(plv[n]);

            // Thresholds are taken against the window as it stood before this
            // step; the batch's surprise values are appended afterwards in
            // element order.
            std::vector<double> d_st(static_cast<size_t>(B), 0.0);
            for (int64_t b = 0; b < B; ++b) {
                if (!parent[static_cast<size_t>(b)]) continue;
                const DiagGaussian g_st = row_gaussian(stm, stv, b);
                const DiagGaussian g_stored = row_gaussian(sqm, sqv, b);
                const DiagGaussian g_ch = row_gaussian(chm, chv, b);
                const DiagGaussian g_pred = row_gaussian(spm, spv, b);
                const double dst = DiagGaussian::kl(g_st, g_stored);
                const double dch = DiagGaussian::kl(g_ch, g_pred);
                d_st[static_cast<size_t>(b)] = dst;
                const bool ce = criterion_e(dst, dch);
                const CuResult cu = criterion_u(dst, windows[static_cast<size_t>(n)], cfg_.detector);
                // Either criterion alone is enough to trigger a refresh.
                bool fired = false;
                if (cfg_.detector.use_ce && ce) fired = true;
                if (cfg_.detector.use_cu && cu.fired) fired = true;
                mn[static_cast<size_t>(b)] = fired ? 1 : 0;
                if (opts.record_trace) {
                    TraceRow r;
                    r.episode = opts.trace_episode_base + static_cast<int>(b);
                    r.t = step;
                    r.level = n;
                    r.d_st = dst;
                    r.d_ch = dch;
                    r.cu_threshold = cu.threshold;
                    r.fired_ce = ce;
                    r.fired_cu = cu.fired;
                    r.mask = fired;
                    r.h_st = g_st.entropy();
                    r.h_ch = g_ch.entropy();
                    r.ce_st = DiagGaussian::cross_entropy(g_st, g_stored);
                    r.ce_ch = DiagGaussian::cross_entropy(g_ch, g_pred);
                    out.trace.push_back(r);
                }
            }
            for (int64_t b = 0; b < B; ++b)
                if (parent[static_cast<size_t>(b)]) windows[static_cast<size_t>(n)].push(d_st[static_cast<size_t>(b)]);
        }

        std::vector<int> mask_leaf(static_cast<size_t>(N) + 1, -1);
        for (int n = 1; n <= N; ++n)
            mask_leaf[static_cast<size_t>(n)] = t.leaf(mask_tensor(mask[static_cast<size_t>(n)]));

        // ---- refresh from the top down ----
        std::vector<int> c_used(static_cast<size_t>(N) + 1, -1);
        for (int n = N; n >= 1; --n) {
            const auto& mn = mask[static_cast<size_t>(n)];
            if (!any_set(mn)) continue;
            // Context in effect for this refresh: regenerated from above when
            // the level above also refreshed, otherwise the stored one.
            int cu_n;
            if (n == N) {
                cu_n = zeros_bd;
            } else if (any_set(mask[static_cast<size_t>(n) + 1])) {
                const int fresh = decode_node(t, n + 1, s[n + 1], c_used[static_cast<size_t>(n) + 1]);
                cu_n = t.where(mask_leaf[static_cast<size_t>(n) + 1], fresh, c[n]);
            } else {
                cu_n = c[n];
            }
            c_used[static_cast<size_t>(n)] = cu_n;

            const LevelNets& L = nets(n);
            const int cx = lift_code(n);
            const int d_for_q = (step == 0) ? zeros_bd : dc[n];
            const auto q_fin = L.post.apply(t, store_, posterior_input(t, cx, d_for_q, cu_n));

            // Score the refreshed posterior against the prediction made at the
            // previous refresh; the very first step has no history, so the top
            // level is scored against N(0, I) and lower levels against their
            // context-conditioned prediction from rest.
            int p_mean_node, p_lv_node;
            if (step == 0) {
                if (n == N) {
                    p_mean_node = zeros_bk;
                    p_lv_node = zeros_bk;
                } else {
                    const auto p0 = L.prior.apply(t, store_, prior_input(t, n, zeros_bd, cu_n));
                    p_mean_node = p0.mean;
                    p_lv_node = p0.log_var;
                }
            } else {
                p_mean_node = pm[n];
                p_lv_node = plv[n];
            }
            const int kl_rows = gauss_kl_rows(t, q_fin.mean, q_fin.log_var, p_mean_node, p_lv_node);
            const int kl_masked = t.mul(kl_rows, mask_leaf[static_cast<size_t>(n)]);
            kl_total[static_cast<size_t>(n)] =
                (kl_total[static_cast<size_t>(n)] < 0) ? kl_masked : t.add(kl_total[static_cast<size_t>(n)], kl_masked);

            int s_new;
            if (opts.train) {
                Tensor eps = Tensor::zeros({B, K});
                for (double& e : eps.data) e = rng.normal();
                s_new = gauss_sample(t, q_fin.mean, q_fin.log_var, t.leaf(std::move(eps)));
            } else {
                s_new = q_fin.mean;
            }

            const int ml = mask_leaf[static_cast<size_t>(n)];
            s[n] = t.where(ml, s_new, s[n]);
            if (step > 0) d[n] = t.where(ml, dc[n], d[n]);
            c[n] = t.where(ml, cu_n, c[n]);
            qm[n] = t.where(ml, q_fin.mean, qm[n]);
            qlv[n] = t.where(ml, q_fin.log_var, qlv[n]);

            // Seed the next interval: one transition from the committed pair
            // and one prediction of the next latent. Neither is touched again
            // until this level's next refresh.
            const int fresh_d = L.tran.apply(t, store_, s[n], d[n]);
            dc[n] = t.where(ml, fresh_d, dc[n]);
            const auto p_next = L.prior.apply(t, store_, prior_input(t, n, dc[n], c[n]));
            pm[n] = t.where(ml, p_next.mean, pm[n]);
            plv[n] = t.where(ml, p_next.log_var, plv[n]);

            if (n == 1) {
                const int c0 = decode_node(t, 1, s[1], cu_n);
                const int y = obs_rec_.apply(t, store_, c0);
                int rec_rows;
                if (cfg_.recon_loss == "bce") {
                    rec_rows = t.sum_rows(t.sub(t.softplus(y), t.mul(obs, y)));
                } else {
                    const int diff = t.sub(y, obs);
                    rec_rows = t.sum_rows(t.mul(diff, diff));
                }
                recon_total = (recon_total < 0) ? rec_rows : t.add(recon_total, rec_rows);
            }
        }

        // Bookkeeping for the caller.
        std::vector<std::vector<char>> step_mask(static_cast<size_t>(N));
        for (int n = 1; n <= N; ++n) {
            step_mask[static_cast<size_t>(n - 1)] = mask[static_cast<size_t>(n)];
            if (step >= 1)
                for (int64_t b = 0; b < B; ++b)
                    if (mask[static_cast<size_t>(n)][static_cast<size_t>(b)])
                        out.boundaries[static_cast<size_t>(n - 1)][static_cast<size_t>(b)].push_back(step);
        }
        out.update_mask.push_back(std::move(step_mask));
    }

    // ---- assemble the loss ----
    int kl_rows_all = -1;
    out.kl_per_level.assign(static_cast<size_t>(N), 0.0);
    for (int n = 1; n <= N; ++n) {
        const int kn = kl_total[static_cast<size_t>(n)];
        if (kn < 0) continue;
        kl_rows_all = (kl_rows_all < 0) ? kn : t.add(kl_rows_all, kn);
        const Tensor& v = t.val(kn);
        double m = 0.0;
        for (double e : v.data) m += e;
        out.kl_per_level[static_cast<size_t>(n - 1)] = m / static_cast<double>(B);
        out.kl += out.kl_per_level[static_cast<size_t>(n - 1)];
    }
    int loss_rows = recon_total;
    if (kl_rows_all >= 0) loss_rows = t.add(loss_rows, t.scale(kl_rows_all, opts.beta));
    out.loss = t.mean_all(loss_rows);
    {
        const Tensor& v = t.val(recon_total);
        double m = 0.0;
        for (double e : v.data) m += e;
        out.recon = m / static_cast<double>(B);
    }

    // ---- read out the final recurrent state ----
    ModelState& st = out.final_state;
    st.batch = B;
    for (int n = 1; n <= N; ++n) {
        st.s.push_back(t.val(s[n]));
        st.d.push_back(t.val(d[n]));
        st.c.push_back(t.val(c[n]));
        st.q_mean.push_back(t.val(qm[n]));
        st.q_log_var.push_back(t.val(qlv[n]));
        st.p_mean.push_back(t.val(pm[n]));
        st.p_log_var.push_back(t.val(plv[n]));
        st.d_cand.push_back(t.val(dc[n]));
    }
    return out;
}

DiagGaussian VprModel::posterior_at(int level, const Tensor& x, const Tensor& d,
                                    const Tensor& c) {
    Tape t;
    store_.stage(t);
    const int cx = nets(level).comp.apply(t, store_, t.leaf(x));
    const auto q = nets(level).post.apply(
        t, store_, posterior_input(t, cx, t.leaf(d), t.leaf(c)));
    return DiagGaussian(t.val(q.mean).data, t.val(q.log_var).data);
}

DiagGaussian VprModel::prior_at(int level, const Tensor& d, const Tensor& c) {
    Tape t;
    store_.stage(t);
    const auto p =
        nets(level).prior.apply(t, store_, prior_input(t, level, t.leaf(d), t.leaf(c)));
    return DiagGaussian(t.val(p.mean).data, t.val(p.log_var).data);
}

Tensor VprModel::transition_at(int level, const Tensor& s, const Tensor& d) {
    Tape t;
    store_.stage(t);
    return t.val(nets(level).tran.apply(t, store_, t.leaf(s), t.leaf(d)));
}

Tensor VprModel::decode_at(int level, const Tensor& s, const Tensor& c) {
    Tape t;
    store_.stage(t);
    return t.val(decode_node(t, level, t.leaf(s), t.leaf(c)));
}

Tensor VprModel::lift_at(int level, const Tensor& x) {
    Tape t;
    store_.stage(t);
    return t.val(nets(level).enc.apply(t, store_, t.leaf(x)));
}

Tensor VprModel::embed_obs_at(const Tensor& obs) {
    Tape t;
    store_.stage(t);
    return t.val(obs_embed_.apply(t, store_, t.leaf(obs)));
}

Tensor VprModel::readout_at(const Tensor& c0) {
    Tape t;
    store_.stage(t);
    int y = obs_rec_.apply(t, store_, t.leaf(c0));
    if (cfg_.recon_loss == "bce") y = t.sigmoid(y);
    return t.val(y);
}

Tensor VprModel::decode_down(const ModelState& state, int level, const Tensor& s_at_level,
                             const std::string& lower_latents, Rng* rng) {
    if (lower_latents != "prior_mean" && lower_latents != "prior_sample" &&
        lower_latents != "stored")
        throw std::invalid_argument("decode_down: unknown lower-latent mode");
    if (lower_latents == "prior_sample" && rng == nullptr)
        throw std::invalid_argument("decode_down: sampling needs an rng");
    Tape t;
    store_.stage(t);
    const int64_t B = state.batch;
    const int zeros_bd = t.leaf(Tensor::zeros({B, cfg_.det_dim}));
    int s_cur = t.leaf(s_at_level);
    int c_cur = t.leaf(state.c[static_cast<size_t>(level - 1)]);
    for (int m = level; m >= 1; --m) {
        const int c_low = decode_node(t, m, s_cur, c_cur);
        if (m == 1) {
            int y = obs_rec_.apply(t, store_, c_low);
            if (cfg_.recon_loss == "bce") y = t.sigmoid(y);
            return t.val(y);
        }
        if (lower_latents == "stored") {
            s_cur = t.leaf(state.s[static_cast<size_t>(m - 2)]);
        } else {
            const auto p =
                nets(m - 1).prior.apply(t, store_, prior_input(t, m - 1, zeros_bd, c_low));
            if (lower_latents == "prior_sample") {
                Tensor draw = t.val(p.mean);
                const Tensor& lvv = t.val(p.log_var);
                for (size_t i = 0; i < draw.data.size(); ++i)
                    draw.data[i] += std::exp(0.5 * lvv.data[i]) * rng->normal();
                s_cur = t.leaf(std::move(draw));
            } else {
                s_cur = p.mean;
            }
        }
        c_cur = c_low;
    }
    throw std::logic_error("decode_down: unreachable");
}

std::vector<Tensor> VprModel::rollout(const ModelState& state, const RolloutOptions& opts,
                                      Rng& rng) {
    if (opts.level < 1 || opts.level > cfg_.levels)
        throw std::invalid_argument("rollout: level out of range");
    const int n = opts.level;
    Tensor s_v = state.s[static_cast<size_t>(n - 1)];
    Tensor d_v = state.d[static_cast<size_t>(n - 1)];
    const Tensor& c_v = state.c[static_cast<size_t>(n - 1)];
    std::vector<Tensor> preds;
    preds.reserve(static_cast<size_t>(opts.num_steps));
    for (int k = 0; k < opts.num_steps; ++k) {
        Tape t;
        store_.stage(t);
        const int dn = nets(n).tran.apply(t, store_, t.leaf(s_v), t.leaf(d_v));
        const auto p = nets(n).prior.apply(t, store_, prior_input(t, n, dn, t.leaf(c_v)));
        d_v = t.val(dn);
        s_v = t.val(p.mean);
        if (opts.sample_top) {
            const Tensor& lvv = t.val(p.log_var);
            for (size_t i = 0; i < s_v.data.size(); ++i)
                s_v.data[i] += std::exp(0.5 * lvv.data[i]) * rng.normal();
        }
        preds.push_back(decode_down(state, n, s_v, opts.lower_latents, &rng));
    }
    return preds;
}

}  // namespace vpr
