#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "vpr/checkpoint.hpp"
#include "vpr/config.hpp"
#include "vpr/evaluation.hpp"
#include "vpr/sweep.hpp"
#include "vpr/trainer.hpp"

namespace {

using namespace vpr;
using nlohmann::json;

struct CommonOpts {
    std::string config_path;
    std::string out;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool has_seed = false;
};

RunConfig load_run_config(const CommonOpts& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : parse_config_file(c.config_path);
    for (const auto& s : c.sets) apply_override(cfg, s);
    if (c.has_seed) cfg.training.seed = c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
    validate(cfg);
    return cfg;
}

void write_snapshot(const RunConfig& cfg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/config.resolved.toml");
    if (!out) throw std::runtime_error("cannot write '" + dir + "/config.resolved.toml'");
    out << resolved_config_text(cfg);
}

int cmd_generate(const CommonOpts& common, int episodes) {
    RunConfig cfg = load_run_config(common);
    if (episodes < 1) throw std::invalid_argument("generate: --episodes must be >= 1");
    std::string dir = resolve_out_dir(cfg);
    write_snapshot(cfg, dir);
    Rng rng(cfg.training.seed);
    std::vector<SequenceSample> samples(static_cast<std::size_t>(episodes));
    for (auto& s : samples) s = generate_episode(cfg.dataset, rng);
    std::string path = dir + "/dataset.ndjson";
    save_ndjson(path, samples);
    std::size_t factors = samples[0].boundaries.size();
    std::printf("wrote %d episodes of length %d to %s\n", episodes, samples[0].length(),
                path.c_str());
    for (std::size_t f = 0; f < factors; ++f) {
        long total = 0;
        for (const auto& s : samples) total += static_cast<long>(s.boundaries[f].size());
        std::printf("factor %zu: %ld boundaries (%.3f per episode)\n", f, total,
                    static_cast<double>(total) / episodes);
    }
    return 0;
}

int cmd_train(const CommonOpts& common, const std::string& resume) {
    RunConfig cfg;
    if (!resume.empty() && common.config_path.empty()) {
        // Resuming without a config file: rebuild the run from the snapshot
        // embedded in the checkpoint (overrides would change the run and are
        // rejected by the resume consistency check).
        cfg = parse_config_text(checkpoint_config_text(resume));
        for (const auto& s : common.sets) apply_override(cfg, s);
        if (common.has_seed) cfg.training.seed = common.seed;
        if (!common.out.empty()) cfg.out_dir = common.out;
        validate(cfg);
    } else {
        cfg = load_run_config(common);
    }
    TrainOptions opts;
    opts.out_dir = resolve_out_dir(cfg);
    opts.resume_path = resume;
    TrainResult res = train_run(cfg, opts);
    std::printf("trained %d iterations; final loss %.6g; final boundary F1 %.4f\n",
                res.iterations_run, res.final_loss, res.final_f1);
    std::printf("metrics: %s\ncheckpoint: %s\n", res.metrics_path.c_str(),
                res.checkpoint_path.c_str());
    return 0;
}

struct EvalOpts {
    std::string checkpoint;
    std::string dataset_path;
    std::vector<std::string> metrics{"f1"};
    int episodes = 20;
    int steps = 200;
    int samples = 32;
    int trials = 100;
    int level = -1;   // -1: use training.f1_level
    int factor = -1;  // -1: use training.f1_factor
    int tol = -1;     // -1: use training.f1_tol
};

// Factor reader for whichever dataset the run uses; arity = number of
// ground-truth factors.
std::pair<FactorExtractor, int> extractor_for(const RunConfig& cfg) {
    if (cfg.dataset.kind == "synthetic1d") {
        auto codebook = synthetic1d_codebook(cfg.dataset.synthetic1d);
        return {[codebook](const std::vector<double>& obs) {
                    return std::vector<int>{nearest_index(obs[0], codebook)};
                },
                1};
    }
    if (cfg.dataset.kind == "moving_ball") {
        int colors = cfg.dataset.moving_ball.num_colors;
        double scale = cfg.dataset.moving_ball.color_scale;
        return {[colors, scale](const std::vector<double>& obs) {
                    return std::vector<int>{ball_color_id(obs, colors, scale)};
                },
                1};
    }
    NestedFactorsConfig nf = cfg.dataset.nested_factors;
    return {[nf](const std::vector<double>& obs) { return nested_factor_ids(obs, nf); },
            nf.num_factors};
}

int cmd_eval(const CommonOpts& common, const EvalOpts& eo) {
    static const std::set<std::string> known{"f1", "update_rate", "disentanglement", "rollout"};
    for (const auto& m : eo.metrics)
        if (!known.count(m)) throw std::invalid_argument("eval: unknown metric '" + m + "'");
    if (eo.metrics.empty()) throw std::invalid_argument("eval: --metrics must name at least one metric");
    if (eo.episodes < 1) throw std::invalid_argument("eval: --episodes must be >= 1");

    RunConfig cfg = parse_config_text(checkpoint_config_text(eo.checkpoint));
    for (const auto& s : common.sets) apply_override(cfg, s);
    if (common.has_seed) cfg.training.seed = common.seed;
    if (!common.out.empty()) cfg.out_dir = common.out;
    validate(cfg);

    const auto& tr = cfg.training;
    int level = eo.level > 0 ? eo.level : tr.f1_level;
    int factor = eo.factor >= 0 ? eo.factor : tr.f1_factor;
    int tol = eo.tol >= 0 ? eo.tol : tr.f1_tol;
    std::string dir = resolve_out_dir(cfg);
    write_snapshot(cfg, dir);
    std::uint64_t seed = tr.seed;

    json report;
    report["seed"] = seed;
    report["checkpoint"] = eo.checkpoint;
    report["config"] = resolved_config_text(cfg);

    std::vector<SequenceSample> file_eps;
    if (!eo.dataset_path.empty()) {
        file_eps = load_ndjson(eo.dataset_path);
        if (file_eps.empty()) throw std::invalid_argument("eval: dataset file holds no episodes");
    }

    if (cfg.model.mode == "toy") {
        for (const auto& m : eo.metrics)
            if (m != "f1")
                throw std::invalid_argument("eval: metric '" + m + "' needs the full model; the toy variant only supports f1");
        ToyVpr toy(toy_from(cfg), seed);
        TrainState st = load_checkpoint(eo.checkpoint, toy.params());
        CuWindow window = toy.make_window();
        if (!st.windows.empty()) window.restore(st.window_capacity, st.windows[0]);
        ToyStream stream(cfg.dataset.synthetic1d, seed ^ 0x5EEDULL, eo.episodes);
        Rng rng(seed + 7);
        std::vector<std::vector<int>> pred, truth;
        int count = file_eps.empty() ? eo.episodes : static_cast<int>(file_eps.size());
        ToyOptions to;
        to.train = false;
        for (int e = 0; e < count; ++e) {
            SequenceSample ep = file_eps.empty() ? stream.next() : file_eps[static_cast<std::size_t>(e)];
            std::vector<double> scalars(ep.obs.size());
            for (std::size_t t = 0; t < ep.obs.size(); ++t) scalars[t] = ep.obs[t][0];
            pred.push_back(toy.run_episode(scalars, window, rng, to).boundaries);
            truth.push_back(ep.boundaries.at(0));
        }
        BoundaryScore score = boundary_f1_many(pred, truth, tol);
        std::ofstream csv(dir + "/f1.csv");
        csv << "seed,level,factor,tolerance,precision,recall,f1,true_positive_rate,"
               "false_positive_rate,tp,fp,fn\n";
        csv << seed << ",1,0," << tol << "," << score.precision << "," << score.recall << ","
            << score.f1 << "," << score.true_positive_rate << "," << score.false_positive_rate
            << "," << score.tp << "," << score.fp << "," << score.fn << "\n";
        report["f1"] = {{"precision", score.precision}, {"recall", score.recall},
                        {"f1", score.f1},               {"tolerance", tol},
                        {"tp", score.tp},               {"fp", score.fp},
                        {"fn", score.fn}};
        std::ofstream(dir + "/eval_report.json") << report.dump(1) << "\n";
        std::printf("f1 %.4f (precision %.4f recall %.4f)\n", score.f1, score.precision,
                    score.recall);
        return 0;
    }

    VprModel model(hierarchy_from(cfg), seed);
    load_checkpoint(eo.checkpoint, model.params());
    if (level > cfg.model.hierarchy.levels)
        throw std::invalid_argument("eval: --level exceeds the model's level count");

    std::size_t cursor = 0;
    Rng gen_rng(seed + 11);
    auto source = [&]() -> SequenceSample {
        if (file_eps.empty()) return generate_episode(cfg.dataset, gen_rng);
        SequenceSample s = file_eps[cursor % file_eps.size()];
        ++cursor;
        return s;
    };
    int episodes = file_eps.empty() ? eo.episodes : static_cast<int>(file_eps.size());
    Rng run_rng(seed + 13);

    for (const auto& m : eo.metrics) {
        if (m == "f1") {
            BoundaryScore score =
                model_boundary_f1(model, source, episodes, level, factor, tol, run_rng);
            std::ofstream csv(dir + "/f1.csv");
            csv << "seed,level,factor,tolerance,precision,recall,f1,true_positive_rate,"
                   "false_positive_rate,tp,fp,fn\n";
            csv << seed << "," << level << "," << factor << "," << tol << "," << score.precision
                << "," << score.recall << "," << score.f1 << "," << score.true_positive_rate
                << "," << score.false_positive_rate << "," << score.tp << "," << score.fp << ","
                << score.fn << "\n";
            report["f1"] = {{"precision", score.precision}, {"recall", score.recall},
                            {"f1", score.f1},               {"tolerance", tol},
                            {"tp", score.tp},               {"fp", score.fp},
                            {"fn", score.fn}};
            std::printf("f1 %.4f (precision %.4f recall %.4f, level %d)\n", score.f1,
                        score.precision, score.recall, level);
        } else if (m == "update_rate") {
            int n = std::max(100, episodes);
            std::vector<double> rates = update_rate(model, source, n, run_rng);
            std::ofstream csv(dir + "/update_rate.csv");
            csv << "seed,level,mean_gap\n";
            for (std::size_t i = 0; i < rates.size(); ++i)
                csv << seed << "," << (i + 1) << "," << rates[i] << "\n";
            report["update_rate"] = rates;
            for (std::size_t i = 0; i < rates.size(); ++i)
                std::printf("level %zu mean refresh gap: %.4f steps\n", i + 1, rates[i]);
        } else if (m == "disentanglement") {
            auto [extract, nf] = extractor_for(cfg);
            DisentanglementReport rep = disentanglement_entropy(model, source, extract, nf,
                                                                eo.samples, eo.trials, run_rng);
            std::ofstream csv(dir + "/disentanglement.csv");
            csv << "seed,level,factor,entropy_nats\n";
            for (std::size_t n = 0; n < rep.H.size(); ++n)
                for (std::size_t f = 0; f < rep.H[n].size(); ++f)
                    csv << seed << "," << (n + 1) << "," << f << "," << rep.H[n][f] << "\n";
            report["disentanglement"] = rep.H;
            for (std::size_t n = 0; n < rep.H.size(); ++n)
                for (std::size_t f = 0; f < rep.H[n].size(); ++f)
                    std::printf("level %zu factor %zu entropy %.4f nats\n", n + 1, f,
                                rep.H[n][f]);
        } else {  // rollout
            if (cfg.dataset.kind != "moving_ball" || cfg.dataset.moving_ball.recolor_mode != "cycle")
                throw std::invalid_argument(
                    "eval: the rollout metric needs the moving_ball dataset with cycling colors");
            if (eo.steps < 1) throw std::invalid_argument("eval: --steps must be >= 1");
            const auto& mb = cfg.dataset.moving_ball;
            SequenceSample ep = source();
            std::vector<Tensor> steps = to_obs_steps(ep);
            std::vector<CuWindow> windows = model.make_windows();
            EpisodeOptions epo;
            epo.train = false;
            Tape tape;
            EpisodeResult res = model.run_episode(tape, steps, windows, epo, run_rng);
            // With a cycling palette the sequence of future colors is fixed
            // by the last observed color, independent of event timing.
            int last = ep.factor_values[0].back();
            std::vector<int> truth(static_cast<std::size_t>(eo.steps));
            for (int k = 0; k < eo.steps; ++k)
                truth[static_cast<std::size_t>(k)] = (last + 1 + k) % mb.num_colors;
            int colors = mb.num_colors;
            double scale = mb.color_scale;
            double acc = event_prediction_accuracy(
                model, res.final_state, level, truth,
                [colors, scale](const std::vector<double>& o) {
                    return ball_color_id(o, colors, scale);
                },
                run_rng);
            std::ofstream csv(dir + "/rollout.csv");
            csv << "seed,level,steps,accuracy\n";
            csv << seed << "," << level << "," << eo.steps << "," << acc << "\n";
            report["rollout"] = {{"level", level}, {"steps", eo.steps}, {"accuracy", acc}};
            std::printf("rollout accuracy over %d events: %.4f\n", eo.steps, acc);
        }
    }
    std::ofstream(dir + "/eval_report.json") << report.dump(1) << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& common, SweepConfig sc) {
    sc.base = load_run_config(common);
    std::string dir = resolve_out_dir(sc.base);
    SweepResult res = run_sweep(sc, dir, /*write_files=*/true, /*quiet=*/false);
    std::printf("\n%zu cells done; marginal means:\n", res.cells.size());
    for (const auto& m : res.marginals)
        std::printf("  %s = %-6g mean F1 %.4f (std %.4f)\n", m.axis.c_str(), m.value, m.mean_f1,
                    m.std_f1);
    std::printf("tables: %s, %s\n", res.cells_path.c_str(), res.marginals_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical event segmentation: generate data, train, evaluate, sweep"};
    app.require_subcommand(1);

    CommonOpts common;
    int gen_episodes = 100;
    std::string resume;
    EvalOpts eopts;
    SweepConfig sweep_cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "run description file (TOML-style)");
        sub->add_option("--seed", common.seed, "override training.seed")
            ->each([&](const std::string&) { common.has_seed = true; });
        sub->add_option("--out", common.out, "output directory (else [output] dir, else $" +
                                                 std::string(kOutRootEnvVar) + ", else ./runs)");
        sub->add_option("--set", common.sets,
                        "override one config field, e.g. --set detector.gamma=1.2");
    };

    CLI::App* gen = app.add_subcommand("generate", "write a dataset file plus summary stats");
    add_common(gen);
    gen->add_option("--episodes", gen_episodes, "episodes to generate");

    CLI::App* train = app.add_subcommand("train", "train a model and log metrics");
    add_common(train);
    train->add_option("--resume", resume, "checkpoint to continue from");

    CLI::App* eval = app.add_subcommand("eval", "compute metrics from a checkpoint");
    add_common(eval);
    eval->add_option("--checkpoint", eopts.checkpoint, "trained checkpoint")->required();
    eval->add_option("--dataset", eopts.dataset_path, "evaluate on this NDJSON dataset file");
    eval->add_option("--metrics", eopts.metrics,
                     "f1, update_rate, disentanglement, rollout (comma separated)")
        ->delimiter(',');
    eval->add_option("--episodes", eopts.episodes, "episodes per metric");
    eval->add_option("--steps", eopts.steps, "rollout: predicted events");
    eval->add_option("--samples", eopts.samples, "disentanglement: draws per trial");
    eval->add_option("--trials", eopts.trials, "disentanglement: trials");
    eval->add_option("--level", eopts.level, "hierarchy level under evaluation");
    eval->add_option("--factor", eopts.factor, "ground-truth factor index");
    eval->add_option("--tol", eopts.tol, "boundary match tolerance");

    CLI::App* sweep = app.add_subcommand("sweep", "threshold sensitivity grid");
    add_common(sweep);
    sweep->add_option("--windows", sweep_cfg.windows, "surprise window sizes")->delimiter(',');
    sweep->add_option("--gammas", sweep_cfg.gammas, "threshold multipliers")->delimiter(',');
    sweep->add_option("--sweep-seeds", sweep_cfg.seeds, "one model per seed per cell")
        ->delimiter(',');
    sweep->add_option("--workers", sweep_cfg.workers, "parallel cell workers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(gen)) return cmd_generate(common, gen_episodes);
        if (app.got_subcommand(train)) return cmd_train(common, resume);
        if (app.got_subcommand(eval)) return cmd_eval(common, eopts);
        return cmd_sweep(common, sweep_cfg);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
