#include "vpr/trainer.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "vpr/checkpoint.hpp"
#include "vpr/evaluation.hpp"

namespace vpr {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

// Open the metrics file in append mode, writing the header only when the
// file is new or empty, so an interrupted run's rows are never clobbered.
std::ofstream open_metrics(const std::string& path, const std::string& header) {
    namespace fs = std::filesystem;
    bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open metrics file '" + path + "'");
    if (fresh) out << header << "\n";
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

struct ResumeInfo {
    int start_iteration = 0;
};

// Configuration identity for resume purposes: everything that shapes the
// training trajectory. The total iteration count only bounds the loop and
// the output directory only names files, so extending a run or moving its
// outputs is still the same run.
std::string resume_identity(RunConfig cfg) {
    cfg.training.iterations = 0;
    cfg.out_dir.clear();
    return resolved_config_text(cfg);
}

// Common resume handling: restore parameters, counters, RNG and windows,
// and refuse checkpoints written under a different configuration.
ResumeInfo apply_resume(const std::string& path, const RunConfig& cfg, ParamStore& store,
                        Rng& rng, std::vector<CuWindow*> windows) {
    TrainState st = load_checkpoint(path, store);
    if (resume_identity(parse_config_text(st.config_text)) != resume_identity(cfg))
        throw std::invalid_argument(
            "resume: checkpoint '" + path + "' was written under a different configuration");
    if (st.windows.size() != windows.size())
        throw std::runtime_error("resume: checkpoint window count does not match the model");
    for (std::size_t i = 0; i < windows.size(); ++i)
        windows[i]->restore(st.window_capacity, st.windows[i]);
    rng.load_state(st.rng_state);
    return {st.iteration};
}

}  // namespace

ToyStream::ToyStream(const Synthetic1dConfig& cfg, std::uint64_t seed, int chunk_episodes)
    : cfg_(cfg), seed_(seed), chunk_(chunk_episodes) {
    if (chunk_ < 1) throw std::invalid_argument("toy stream: chunk_episodes must be >= 1");
    if (cfg_.T < 1) throw std::invalid_argument("toy stream: episode length must be >= 1");
}

void ToyStream::refill() {
    std::int64_t chunk_idx = next_index_ / chunk_;
    if (chunk_idx == buffer_chunk_) return;
    Synthetic1dConfig long_cfg = cfg_;
    long_cfg.T = cfg_.T * chunk_;
    Rng rng(seed_ ^ (kGolden * static_cast<std::uint64_t>(chunk_idx + 1)));
    SequenceSample stream = gen_synthetic1d(long_cfg, rng);
    buffer_.assign(static_cast<std::size_t>(chunk_), SequenceSample{});
    for (int e = 0; e < chunk_; ++e) {
        SequenceSample& ep = buffer_[static_cast<std::size_t>(e)];
        int t0 = e * cfg_.T;
        ep.obs.assign(stream.obs.begin() + t0, stream.obs.begin() + t0 + cfg_.T);
        ep.factor_values.resize(1);
        ep.factor_values[0].assign(stream.factor_values[0].begin() + t0,
                                   stream.factor_values[0].begin() + t0 + cfg_.T);
        ep.boundaries.resize(1);
        for (int b : stream.boundaries[0])
            if (b > t0 && b < t0 + cfg_.T) ep.boundaries[0].push_back(b - t0);
    }
    buffer_chunk_ = chunk_idx;
}

SequenceSample ToyStream::next() {
    refill();
    SequenceSample ep = buffer_[static_cast<std::size_t>(next_index_ % chunk_)];
    ++next_index_;
    return ep;
}

void ToyStream::seek(std::int64_t episode_index) {
    if (episode_index < 0) throw std::invalid_argument("toy stream: cannot seek before the start");
    next_index_ = episode_index;
}

HierarchyConfig hierarchy_from(const RunConfig& cfg) {
    HierarchyConfig h = cfg.model.hierarchy;
    h.obs_dim = dataset_obs_dim(cfg.dataset);
    h.detector = cfg.detector;
    return h;
}

ToyConfig toy_from(const RunConfig& cfg) {
    ToyConfig t;
    t.posterior_noise = cfg.model.toy_noise;
    t.base_var = cfg.model.toy_base_var;
    t.hidden = cfg.model.toy_hidden;
    t.detector = cfg.detector;
    return t;
}

TrainResult train_toy_model(ToyVpr& toy, CuWindow& window, const RunConfig& cfg,
                            const TrainOptions& opts) {
    const auto& tr = cfg.training;
    Schedule sched{tr.lr_start, tr.lr_end, tr.lr_decay_iters, tr.beta_ramp_iters};
    Rng rng(tr.seed ^ kGolden);
    ToyStream stream(cfg.dataset.synthetic1d, tr.seed);
    const std::string config_text = resolved_config_text(cfg);

    TrainResult result;
    int start = 0;
    if (!opts.resume_path.empty())
        start = apply_resume(opts.resume_path, cfg, toy.params(), rng, {&window}).start_iteration;
    stream.seek(start);

    std::ofstream metrics;
    if (opts.write_files) {
        std::filesystem::create_directories(opts.out_dir);
        write_text(opts.out_dir + "/config.resolved.toml", config_text);
        result.metrics_path = opts.out_dir + "/metrics.csv";
        result.checkpoint_path = opts.out_dir + "/checkpoint.json";
        metrics = open_metrics(result.metrics_path, "iteration,loss,recon,kl,beta,lr,f1");
    }

    // Detection quality on held-out episodes: fresh stream, warm copy of the
    // training window, inference only — the training state is untouched.
    auto probe_f1 = [&](int it) {
        ToyStream ev(cfg.dataset.synthetic1d,
                     tr.seed ^ (kGolden * static_cast<std::uint64_t>(it + 2)) ^ 0x5EEDULL,
                     tr.f1_episodes);
        Rng erng(tr.seed + kGolden * static_cast<std::uint64_t>(it + 3));
        CuWindow wcopy = window;
        std::vector<std::vector<int>> pred, truth;
        ToyOptions eo;
        eo.train = false;
        for (int e = 0; e < tr.f1_episodes; ++e) {
            SequenceSample ep = ev.next();
            std::vector<double> scalars(ep.obs.size());
            for (std::size_t t = 0; t < ep.obs.size(); ++t) scalars[t] = ep.obs[t][0];
            ToyEpisodeResult r = toy.run_episode(scalars, wcopy, erng, eo);
            pred.push_back(r.boundaries);
            truth.push_back(ep.boundaries[0]);
        }
        return boundary_f1_many(pred, truth, tr.f1_tol).f1;
    };

    for (int it = start; it < tr.iterations; ++it) {
        SequenceSample ep = stream.next();
        std::vector<double> scalars(ep.obs.size());
        for (std::size_t t = 0; t < ep.obs.size(); ++t) scalars[t] = ep.obs[t][0];

        CuWindow wcopy = window;
        std::string rng_before = rng.save_state();
        ToyOptions to;
        to.train = true;
        to.lr = sched.lr_at(it);
        ToyEpisodeResult res = toy.run_episode(scalars, window, rng, to);

        if (!std::isfinite(res.loss)) {
            std::string detail;
            if (opts.write_files) {
                Rng drng(1);
                drng.load_state(rng_before);
                ToyOptions dbg = to;
                dbg.train = false;
                dbg.record_trace = true;
                ToyEpisodeResult dump = toy.run_episode(scalars, wcopy, drng, dbg);
                save_ndjson(opts.out_dir + "/nan_episode.ndjson", {ep});
                write_trace_csv(opts.out_dir + "/nan_trace.csv", dump.trace);
                detail = "; diagnostics in " + opts.out_dir + "/nan_episode.ndjson and " +
                         opts.out_dir + "/nan_trace.csv";
            }
            throw std::runtime_error("training aborted: non-finite loss at iteration " +
                                     std::to_string(it) + detail);
        }

        result.final_loss = res.loss;
        result.iterations_run = it + 1;
        bool last = it + 1 == tr.iterations;
        bool probe = (it + 1) % tr.f1_every == 0 || last;
        if (probe) result.final_f1 = probe_f1(it);
        if (opts.write_files && ((it + 1) % tr.log_every == 0 || probe)) {
            metrics << (it + 1) << "," << fmt(res.loss) << ",,,," << fmt(to.lr) << ","
                    << (probe ? fmt(result.final_f1) : "") << "\n";
            metrics.flush();
        }
        if (probe && !opts.quiet)
            std::printf("iteration %d/%d  loss %.6g  boundary F1 %.4f\n", it + 1, tr.iterations,
                        res.loss, result.final_f1);
        if (opts.write_files && ((it + 1) % tr.checkpoint_every == 0 || last)) {
            TrainState st;
            st.config_text = config_text;
            st.iteration = it + 1;
            st.rng_state = rng.save_state();
            st.window_capacity = cfg.detector.window;
            st.windows = {window.snapshot()};
            save_checkpoint(result.checkpoint_path, toy.params(), st);
        }
    }
    return result;
}

TrainResult train_full_model(VprModel& model, std::vector<CuWindow>& windows,
                             const RunConfig& cfg, const TrainOptions& opts) {
    const auto& tr = cfg.training;
    if (model.config().obs_dim != dataset_obs_dim(cfg.dataset))
        throw std::invalid_argument("training: model width does not match the dataset");
    Schedule sched{tr.lr_start, tr.lr_end, tr.lr_decay_iters, tr.beta_ramp_iters};
    Rng rng(tr.seed ^ kGolden);
    const std::string config_text = resolved_config_text(cfg);

    TrainResult result;
    int start = 0;
    if (!opts.resume_path.empty()) {
        std::vector<CuWindow*> wp;
        for (auto& w : windows) wp.push_back(&w);
        start = apply_resume(opts.resume_path, cfg, model.params(), rng, wp).start_iteration;
    }

    std::ofstream metrics;
    if (opts.write_files) {
        std::filesystem::create_directories(opts.out_dir);
        write_text(opts.out_dir + "/config.resolved.toml", config_text);
        result.metrics_path = opts.out_dir + "/metrics.csv";
        result.checkpoint_path = opts.out_dir + "/checkpoint.json";
        std::string header = "iteration,loss,recon,kl,beta,lr,f1";
        for (int n = 1; n <= cfg.model.hierarchy.levels; ++n)
            header += ",kl_level" + std::to_string(n);
        metrics = open_metrics(result.metrics_path, header);
    }

    auto probe_f1 = [&](int it) {
        Rng egen(tr.seed + kGolden * static_cast<std::uint64_t>(it + 2));
        Rng erun(tr.seed ^ (kGolden * static_cast<std::uint64_t>(it + 3)));
        auto source = [&]() { return generate_episode(cfg.dataset, egen); };
        return model_boundary_f1(model, source, tr.f1_episodes, tr.f1_level, tr.f1_factor,
                                 tr.f1_tol, erun)
            .f1;
    };

    for (int it = start; it < tr.iterations; ++it) {
        std::vector<SequenceSample> eps(static_cast<std::size_t>(tr.batch));
        for (auto& e : eps) e = generate_episode(cfg.dataset, rng);
        std::vector<Tensor> steps = batch_obs_steps(eps);

        std::vector<CuWindow> wcopy = windows;
        std::string rng_before = rng.save_state();
        EpisodeOptions eo;
        eo.train = true;
        eo.beta = sched.kl_beta(it);
        Tape tape;
        EpisodeResult res = model.run_episode(tape, steps, windows, eo, rng);
        double loss = tape.scalar_val(res.loss);

        if (!std::isfinite(loss)) {
            std::string detail;
            if (opts.write_files) {
                Rng drng(1);
                drng.load_state(rng_before);
                EpisodeOptions dbg;
                dbg.train = false;
                dbg.beta = eo.beta;
                dbg.record_trace = true;
                Tape dtape;
                EpisodeResult dump = model.run_episode(dtape, steps, wcopy, dbg, drng);
                save_ndjson(opts.out_dir + "/nan_batch.ndjson", eps);
                write_trace_csv(opts.out_dir + "/nan_trace.csv", dump.trace);
                detail = "; diagnostics in " + opts.out_dir + "/nan_batch.ndjson and " +
                         opts.out_dir + "/nan_trace.csv";
            }
            throw std::runtime_error("training aborted: non-finite loss at iteration " +
                                     std::to_string(it) + detail);
        }

        tape.backward(res.loss);
        model.params().adam_step(tape, sched.lr_at(it));

        result.final_loss = loss;
        result.iterations_run = it + 1;
        bool last = it + 1 == tr.iterations;
        bool probe = (it + 1) % tr.f1_every == 0 || last;
        if (probe) result.final_f1 = probe_f1(it);
        if (opts.write_files && ((it + 1) % tr.log_every == 0 || probe)) {
            metrics << (it + 1) << "," << fmt(loss) << "," << fmt(res.recon) << "," << fmt(res.kl)
                    << "," << fmt(eo.beta) << "," << fmt(sched.lr_at(it)) << ","
                    << (probe ? fmt(result.final_f1) : "");
            for (double k : res.kl_per_level) metrics << "," << fmt(k);
            metrics << "\n";
            metrics.flush();
        }
        if (probe && !opts.quiet)
            std::printf("iteration %d/%d  loss %.6g  recon %.6g  kl %.6g  boundary F1 %.4f\n",
                        it + 1, tr.iterations, loss, res.recon, res.kl, result.final_f1);
        if (opts.write_files && ((it + 1) % tr.checkpoint_every == 0 || last)) {
            TrainState st;
            st.config_text = config_text;
            st.iteration = it + 1;
            st.rng_state = rng.save_state();
            st.window_capacity = cfg.detector.window;
            st.windows.clear();
            for (const auto& w : windows) st.windows.push_back(w.snapshot());
            save_checkpoint(result.checkpoint_path, model.params(), st);
        }
    }
    return result;
}

TrainResult train_run(const RunConfig& cfg, const TrainOptions& opts) {
    validate(cfg);
    if (cfg.model.mode == "toy") {
        ToyVpr toy(toy_from(cfg), cfg.training.seed);
        CuWindow window = toy.make_window();
        return train_toy_model(toy, window, cfg, opts);
    }
    VprModel model(hierarchy_from(cfg), cfg.training.seed);
    std::vector<CuWindow> windows = model.make_windows();
    return train_full_model(model, windows, cfg, opts);
}

}  // namespace vpr
