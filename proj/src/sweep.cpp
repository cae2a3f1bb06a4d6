#include "vpr/sweep.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "vpr/trainer.hpp"

namespace vpr {
namespace {

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

double run_cell(const SweepConfig& sc, const SweepCell& cell) {
    RunConfig cfg = sc.base;
    cfg.detector.window = cell.window;
    cfg.detector.gamma = cell.gamma;
    cfg.training.seed = cell.seed;
    validate(cfg);
    VprModel model(hierarchy_from(cfg), cfg.training.seed);
    std::vector<CuWindow> windows = model.make_windows();
    TrainOptions topts;
    topts.write_files = false;
    topts.quiet = true;
    return train_full_model(model, windows, cfg, topts).final_f1;
}

SweepMarginal reduce(const std::vector<SweepCell>& cells, const std::string& axis, double value) {
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (const auto& c : cells) {
        double key = axis == "gamma" ? c.gamma : static_cast<double>(c.window);
        if (key != value) continue;
        sum += c.f1;
        sum2 += c.f1 * c.f1;
        ++n;
    }
    SweepMarginal m{axis, value, 0.0, 0.0};
    if (n > 0) {
        m.mean_f1 = sum / n;
        m.std_f1 = std::sqrt(std::max(0.0, sum2 / n - m.mean_f1 * m.mean_f1));
    }
    return m;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& sc, const std::string& out_dir, bool write_files,
                      bool quiet) {
    if (sc.windows.empty() || sc.gammas.empty() || sc.seeds.empty())
        throw std::invalid_argument("sweep: every grid axis needs at least one value");
    if (sc.workers < 1) throw std::invalid_argument("sweep: workers must be >= 1");
    validate(sc.base);

    SweepResult result;
    for (int w : sc.windows)
        for (double g : sc.gammas)
            for (std::uint64_t s : sc.seeds) result.cells.push_back({w, g, s, 0.0});

    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= result.cells.size()) return;
            SweepCell& cell = result.cells[i];
            cell.f1 = run_cell(sc, cell);
            if (!quiet) {
                std::lock_guard<std::mutex> lock(io);
                std::printf("cell %zu/%zu  window %d  gamma %s  seed %llu  F1 %.4f\n", i + 1,
                            result.cells.size(), cell.window, fmt(cell.gamma).c_str(),
                            static_cast<unsigned long long>(cell.seed), cell.f1);
            }
        }
    };
    int nw = std::min<int>(sc.workers, static_cast<int>(result.cells.size()));
    if (nw <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (double g : sc.gammas) result.marginals.push_back(reduce(result.cells, "gamma", g));
    for (int w : sc.windows)
        result.marginals.push_back(reduce(result.cells, "window", static_cast<double>(w)));

    if (write_files) {
        std::filesystem::create_directories(out_dir);
        {
            std::ofstream snap(out_dir + "/config.resolved.toml");
            snap << resolved_config_text(sc.base);
        }
        result.cells_path = out_dir + "/sweep_cells.csv";
        std::ofstream cells(result.cells_path);
        cells << "window,gamma,seed,f1\n";
        for (const auto& c : result.cells)
            cells << c.window << "," << fmt(c.gamma) << "," << c.seed << "," << fmt(c.f1) << "\n";
        result.marginals_path = out_dir + "/sweep_marginals.csv";
        std::ofstream marg(result.marginals_path);
        marg << "axis,value,mean_f1,std_f1\n";
        for (const auto& m : result.marginals)
            marg << m.axis << "," << fmt(m.value) << "," << fmt(m.mean_f1) << "," << fmt(m.std_f1)
                 << "\n";
    }
    return result;
}

double marginal_mean(const SweepResult& r, const std::string& axis, double value) {
    for (const auto& m : r.marginals)
        if (m.axis == axis && m.value == value) return m.mean_f1;
    throw std::invalid_argument("sweep: no marginal for " + axis + " = " + fmt(value));
}

}  // namespace vpr
