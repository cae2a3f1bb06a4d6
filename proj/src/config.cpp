#include "vpr/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace vpr {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Strip a trailing comment, respecting double-quoted strings.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        else if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

long long to_int(const std::string& v, const std::string& where) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) fail(where + ": expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) fail(where + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

double to_double(const std::string& v, const std::string& where) {
    // strtod accepts the full float grammar including inf/nan and exponents.
    const char* begin = v.c_str();
    char* end = nullptr;
    double out = std::strtod(begin, &end);
    if (end != begin + v.size() || v.empty()) fail(where + ": expected a number, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& v, const std::string& where) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(where + ": expected true or false, got '" + v + "'");
}

std::string to_str(const std::string& v, const std::string& where) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    if (!v.empty() && (v.front() == '"' || v.back() == '"')) fail(where + ": unbalanced quotes in '" + v + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& v, const std::string& where) {
    std::string t = trim(v);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') fail(where + ": expected a [..] list, got '" + v + "'");
    t = trim(t.substr(1, t.size() - 2));
    std::vector<std::string> items;
    if (t.empty()) return items;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = t.find(',', start);
        std::string item = trim(comma == std::string::npos ? t.substr(start) : t.substr(start, comma - start));
        if (item.empty()) fail(where + ": empty list element");
        items.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return items;
}

std::vector<int> to_int_list(const std::string& v, const std::string& where) {
    std::vector<int> out;
    for (const auto& item : split_list(v, where)) out.push_back(static_cast<int>(to_int(item, where)));
    return out;
}

// One key=value assignment, routed by (section, key). `where` names the
// source location for error messages.
void set_field(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, const std::string& where) {
    if (section == "dataset") {
        auto& ds = cfg.dataset;
        if (key == "kind") {
            ds.kind = to_str(value, where);
            if (ds.kind != "synthetic1d" && ds.kind != "moving_ball" && ds.kind != "nested_factors")
                fail(where + ": unknown dataset kind '" + ds.kind + "'");
            return;
        }
        if (ds.kind == "synthetic1d") {
            auto& g = ds.synthetic1d;
            if (key == "T") g.T = static_cast<int>(to_int(value, where));
            else if (key == "jump_period") g.jump_period = static_cast<int>(to_int(value, where));
            else if (key == "noise_sigma") g.noise_sigma = to_double(value, where);
            else if (key == "value_mode") g.value_mode = to_str(value, where);
            else if (key == "num_levels") g.num_levels = static_cast<int>(to_int(value, where));
            else if (key == "value_range") g.value_range = to_double(value, where);
            else if (key == "min_jump") g.min_jump = to_double(value, where);
            else if (key == "cycle_order") g.cycle_order = to_int_list(value, where);
            else fail(where + ": unknown key '" + key + "' for dataset kind synthetic1d");
            return;
        }
        if (ds.kind == "moving_ball") {
            auto& g = ds.moving_ball;
            if (key == "T") g.T = static_cast<int>(to_int(value, where));
            else if (key == "speed") g.speed = to_double(value, where);
            else if (key == "recolor_prob") g.recolor_prob = to_double(value, where);
            else if (key == "num_colors") g.num_colors = static_cast<int>(to_int(value, where));
            else if (key == "recolor_mode") g.recolor_mode = to_str(value, where);
            else if (key == "color_scale") g.color_scale = to_double(value, where);
            else fail(where + ": unknown key '" + key + "' for dataset kind moving_ball");
            return;
        }
        auto& g = ds.nested_factors;
        if (key == "T") g.T = static_cast<int>(to_int(value, where));
        else if (key == "num_factors") g.num_factors = static_cast<int>(to_int(value, where));
        else if (key == "base_periods") g.base_periods = to_int_list(value, where);
        else if (key == "cardinality") g.cardinality = to_int_list(value, where);
        else if (key == "schedule") g.schedule = to_str(value, where);
        else if (key == "jitter") g.jitter = to_double(value, where);
        else if (key == "value_mode") g.value_mode = to_str(value, where);
        else if (key == "value_range") g.value_range = to_double(value, where);
        else fail(where + ": unknown key '" + key + "' for dataset kind nested_factors");
        return;
    }
    if (section == "model") {
        auto& m = cfg.model;
        auto& h = m.hierarchy;
        if (key == "mode") m.mode = to_str(value, where);
        else if (key == "levels") h.levels = static_cast<int>(to_int(value, where));
        else if (key == "latent_dim") h.latent_dim = static_cast<int>(to_int(value, where));
        else if (key == "det_dim") h.det_dim = static_cast<int>(to_int(value, where));
        else if (key == "update_mode") h.update_mode = to_str(value, where);
        else if (key == "fixed_intervals") h.fixed_intervals = to_int_list(value, where);
        else if (key == "recon_loss") h.recon_loss = to_str(value, where);
        else if (key == "head_init_scale") h.head_init_scale = to_double(value, where);
        else if (key == "toy_noise") m.toy_noise = to_double(value, where);
        else if (key == "toy_base_var") m.toy_base_var = to_double(value, where);
        else if (key == "toy_hidden") m.toy_hidden = static_cast<int>(to_int(value, where));
        else fail(where + ": unknown key '" + key + "' in [model]");
        return;
    }
    if (section == "detector") {
        auto& d = cfg.detector;
        if (key == "gamma") d.gamma = to_double(value, where);
        else if (key == "window") d.window = static_cast<int>(to_int(value, where));
        else if (key == "warmup") d.warmup = to_str(value, where);
        else if (key == "use_ce") d.use_ce = to_bool(value, where);
        else if (key == "use_cu") d.use_cu = to_bool(value, where);
        else if (key == "reset_each_episode") d.reset_each_episode = to_bool(value, where);
        else fail(where + ": unknown key '" + key + "' in [detector]");
        return;
    }
    if (section == "training") {
        auto& t = cfg.training;
        if (key == "iterations") t.iterations = static_cast<int>(to_int(value, where));
        else if (key == "batch") t.batch = static_cast<int>(to_int(value, where));
        else if (key == "seed") t.seed = to_u64(value, where);
        else if (key == "lr_start") t.lr_start = to_double(value, where);
        else if (key == "lr_end") t.lr_end = to_double(value, where);
        else if (key == "lr_decay_iters") t.lr_decay_iters = static_cast<int>(to_int(value, where));
        else if (key == "beta_ramp_iters") t.beta_ramp_iters = static_cast<int>(to_int(value, where));
        else if (key == "log_every") t.log_every = static_cast<int>(to_int(value, where));
        else if (key == "f1_every") t.f1_every = static_cast<int>(to_int(value, where));
        else if (key == "f1_episodes") t.f1_episodes = static_cast<int>(to_int(value, where));
        else if (key == "f1_level") t.f1_level = static_cast<int>(to_int(value, where));
        else if (key == "f1_factor") t.f1_factor = static_cast<int>(to_int(value, where));
        else if (key == "f1_tol") t.f1_tol = static_cast<int>(to_int(value, where));
        else if (key == "checkpoint_every") t.checkpoint_every = static_cast<int>(to_int(value, where));
        else fail(where + ": unknown key '" + key + "' in [training]");
        return;
    }
    if (section == "output") {
        if (key == "dir") cfg.out_dir = to_str(value, where);
        else fail(where + ": unknown key '" + key + "' in [output]");
        return;
    }
    fail(where + ": unknown section [" + section + "]");
}

struct Entry {
    std::string section, key, value, where;
};

std::vector<Entry> lex(const std::string& text) {
    std::vector<Entry> entries;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') fail(where + ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(where + ": empty section name");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(where + ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(where + ": missing key");
        if (section.empty()) fail(where + ": key '" + key + "' appears before any [section]");
        if (!seen.insert(section + "." + key).second) fail(where + ": duplicate key '" + section + "." + key + "'");
        entries.push_back({section, key, value, where});
    }
    return entries;
}

void apply_entries(RunConfig& cfg, const std::vector<Entry>& entries) {
    // The dataset kind decides which dataset keys are legal, so route it
    // first regardless of where it appears in the file.
    for (const auto& e : entries)
        if (e.section == "dataset" && e.key == "kind") set_field(cfg, e.section, e.key, e.value, e.where);
    for (const auto& e : entries)
        if (!(e.section == "dataset" && e.key == "kind")) set_field(cfg, e.section, e.key, e.value, e.where);
}

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

std::string fmt(const std::vector<int>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(v[i]);
    }
    return out + "]";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

void check(bool ok, const std::string& msg) {
    if (!ok) fail(msg);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    apply_entries(cfg, lex(text));
    validate(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) fail("override '" + assignment + "': expected section.key=value");
    std::string path = trim(assignment.substr(0, eq));
    std::string value = trim(assignment.substr(eq + 1));
    std::size_t dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
        fail("override '" + assignment + "': expected section.key=value");
    set_field(cfg, path.substr(0, dot), path.substr(dot + 1), value, "override '" + assignment + "'");
}

std::string resolved_config_text(const RunConfig& cfg) {
    std::ostringstream out;
    const auto& ds = cfg.dataset;
    out << "[dataset]\n";
    out << "kind = " << quoted(ds.kind) << "\n";
    if (ds.kind == "synthetic1d") {
        const auto& g = ds.synthetic1d;
        out << "T = " << g.T << "\n";
        out << "jump_period = " << g.jump_period << "\n";
        out << "noise_sigma = " << fmt(g.noise_sigma) << "\n";
        out << "value_mode = " << quoted(g.value_mode) << "\n";
        out << "num_levels = " << g.num_levels << "\n";
        out << "value_range = " << fmt(g.value_range) << "\n";
        out << "min_jump = " << fmt(g.min_jump) << "\n";
        out << "cycle_order = " << fmt(g.cycle_order) << "\n";
    } else if (ds.kind == "moving_ball") {
        const auto& g = ds.moving_ball;
        out << "T = " << g.T << "\n";
        out << "speed = " << fmt(g.speed) << "\n";
        out << "recolor_prob = " << fmt(g.recolor_prob) << "\n";
        out << "num_colors = " << g.num_colors << "\n";
        out << "recolor_mode = " << quoted(g.recolor_mode) << "\n";
        out << "color_scale = " << fmt(g.color_scale) << "\n";
    } else {
        const auto& g = ds.nested_factors;
        out << "T = " << g.T << "\n";
        out << "num_factors = " << g.num_factors << "\n";
        out << "base_periods = " << fmt(g.base_periods) << "\n";
        out << "cardinality = " << fmt(g.cardinality) << "\n";
        out << "schedule = " << quoted(g.schedule) << "\n";
        out << "jitter = " << fmt(g.jitter) << "\n";
        out << "value_mode = " << quoted(g.value_mode) << "\n";
        out << "value_range = " << fmt(g.value_range) << "\n";
    }
    const auto& m = cfg.model;
    const auto& h = m.hierarchy;
    out << "\n[model]\n";
    out << "mode = " << quoted(m.mode) << "\n";
    out << "levels = " << h.levels << "\n";
    out << "latent_dim = " << h.latent_dim << "\n";
    out << "det_dim = " << h.det_dim << "\n";
    out << "update_mode = " << quoted(h.update_mode) << "\n";
    out << "fixed_intervals = " << fmt(h.fixed_intervals) << "\n";
    out << "recon_loss = " << quoted(h.recon_loss) << "\n";
    out << "head_init_scale = " << fmt(h.head_init_scale) << "\n";
    out << "toy_noise = " << fmt(m.toy_noise) << "\n";
    out << "toy_base_var = " << fmt(m.toy_base_var) << "\n";
    out << "toy_hidden = " << m.toy_hidden << "\n";
    const auto& d = cfg.detector;
    out << "\n[detector]\n";
    out << "gamma = " << fmt(d.gamma) << "\n";
    out << "window = " << d.window << "\n";
    out << "warmup = " << quoted(d.warmup) << "\n";
    out << "use_ce = " << (d.use_ce ? "true" : "false") << "\n";
    out << "use_cu = " << (d.use_cu ? "true" : "false") << "\n";
    out << "reset_each_episode = " << (d.reset_each_episode ? "true" : "false") << "\n";
    const auto& t = cfg.training;
    out << "\n[training]\n";
    out << "iterations = " << t.iterations << "\n";
    out << "batch = " << t.batch << "\n";
    out << "seed = " << t.seed << "\n";
    out << "lr_start = " << fmt(t.lr_start) << "\n";
    out << "lr_end = " << fmt(t.lr_end) << "\n";
    out << "lr_decay_iters = " << t.lr_decay_iters << "\n";
    out << "beta_ramp_iters = " << t.beta_ramp_iters << "\n";
    out << "log_every = " << t.log_every << "\n";
    out << "f1_every = " << t.f1_every << "\n";
    out << "f1_episodes = " << t.f1_episodes << "\n";
    out << "f1_level = " << t.f1_level << "\n";
    out << "f1_factor = " << t.f1_factor << "\n";
    out << "f1_tol = " << t.f1_tol << "\n";
    out << "checkpoint_every = " << t.checkpoint_every << "\n";
    out << "\n[output]\n";
    out << "dir = " << quoted(cfg.out_dir) << "\n";
    return out.str();
}

std::string resolve_out_dir(const RunConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv(kOutRootEnvVar); env && *env) return env;
    return "runs";
}

int dataset_obs_dim(const DatasetSection& ds) {
    if (ds.kind == "synthetic1d") return 1;
    if (ds.kind == "moving_ball") return 5;
    if (ds.kind == "nested_factors") return ds.nested_factors.num_factors;
    fail("unknown dataset kind '" + ds.kind + "'");
}

SequenceSample generate_episode(const DatasetSection& ds, Rng& rng) {
    if (ds.kind == "synthetic1d") return gen_synthetic1d(ds.synthetic1d, rng);
    if (ds.kind == "moving_ball") return gen_moving_ball(ds.moving_ball, rng);
    if (ds.kind == "nested_factors") return gen_nested_factors(ds.nested_factors, rng);
    fail("unknown dataset kind '" + ds.kind + "'");
}

void validate(const RunConfig& cfg) {
    const auto& ds = cfg.dataset;
    check(ds.kind == "synthetic1d" || ds.kind == "moving_ball" || ds.kind == "nested_factors",
          "unknown dataset kind '" + ds.kind + "'");
    if (ds.kind == "synthetic1d") {
        const auto& g = ds.synthetic1d;
        check(g.T >= 1, "dataset.T must be >= 1");
        check(g.jump_period >= 1, "dataset.jump_period must be >= 1");
        check(g.noise_sigma >= 0.0, "dataset.noise_sigma must be >= 0");
        check(g.value_mode == "cycle" || g.value_mode == "uniform",
              "dataset.value_mode must be cycle or uniform");
        check(g.num_levels >= 2, "dataset.num_levels must be >= 2");
        check(g.value_range > 0.0, "dataset.value_range must be > 0");
    } else if (ds.kind == "moving_ball") {
        const auto& g = ds.moving_ball;
        check(g.T >= 1, "dataset.T must be >= 1");
        check(g.speed >= 0.0, "dataset.speed must be >= 0");
        check(g.recolor_prob >= 0.0 && g.recolor_prob <= 1.0, "dataset.recolor_prob must be in [0, 1]");
        check(g.num_colors >= 2 && g.num_colors <= 8, "dataset.num_colors must be in [2, 8]");
        check(g.recolor_mode == "cycle" || g.recolor_mode == "uniform",
              "dataset.recolor_mode must be cycle or uniform");
        check(g.color_scale > 0.0, "dataset.color_scale must be > 0");
    } else {
        const auto& g = ds.nested_factors;
        check(g.T >= 1, "dataset.T must be >= 1");
        check(g.num_factors >= 1, "dataset.num_factors must be >= 1");
        check(static_cast<int>(g.base_periods.size()) == g.num_factors,
              "dataset.base_periods must list one period per factor");
        check(static_cast<int>(g.cardinality.size()) == g.num_factors,
              "dataset.cardinality must list one size per factor");
        for (int p : g.base_periods) check(p >= 1, "dataset.base_periods entries must be >= 1");
        for (int c : g.cardinality) check(c >= 2, "dataset.cardinality entries must be >= 2");
        check(g.schedule == "jittered" || g.schedule == "nested",
              "dataset.schedule must be jittered or nested");
        check(g.jitter >= 0.0, "dataset.jitter must be >= 0");
        check(g.value_mode == "cycle" || g.value_mode == "uniform",
              "dataset.value_mode must be cycle or uniform");
    }
    const auto& m = cfg.model;
    check(m.mode == "full" || m.mode == "toy", "model.mode must be full or toy");
    if (m.mode == "toy") {
        check(ds.kind == "synthetic1d", "model.mode toy requires a scalar dataset (synthetic1d)");
        check(m.toy_noise >= 0.0, "model.toy_noise must be >= 0");
        check(m.toy_base_var > 0.0, "model.toy_base_var must be > 0");
        check(m.toy_hidden >= 1, "model.toy_hidden must be >= 1");
    }
    const auto& h = m.hierarchy;
    check(h.levels >= 1, "model.levels must be >= 1");
    check(h.latent_dim >= 1, "model.latent_dim must be >= 1");
    check(h.det_dim >= 1, "model.det_dim must be >= 1");
    check(h.update_mode == "adaptive" || h.update_mode == "fixed",
          "model.update_mode must be adaptive or fixed");
    if (h.update_mode == "fixed") {
        check(static_cast<int>(h.fixed_intervals.size()) == h.levels,
              "model.fixed_intervals must list one interval per level");
        check(h.fixed_intervals.empty() || h.fixed_intervals[0] == 1,
              "model.fixed_intervals must start at 1 (the bottom level refreshes every step)");
        int prev = 1;
        for (int k : h.fixed_intervals) {
            check(k >= 1, "model.fixed_intervals entries must be >= 1");
            check(k % prev == 0, "model.fixed_intervals must nest (each a multiple of the level below)");
            prev = k;
        }
    }
    check(h.recon_loss == "mse" || h.recon_loss == "bce", "model.recon_loss must be mse or bce");
    check(h.head_init_scale >= 0.0, "model.head_init_scale must be >= 0");
    const auto& d = cfg.detector;
    check(d.gamma > 0.0, "detector.gamma must be > 0");
    check(d.window >= 1, "detector.window must be >= 1");
    check(d.warmup == "mean_available" || d.warmup == "skip_until_full",
          "detector.warmup must be mean_available or skip_until_full");
    const auto& t = cfg.training;
    check(t.iterations >= 0, "training.iterations must be >= 0");
    check(t.batch >= 1, "training.batch must be >= 1");
    check(t.lr_start > 0.0 && t.lr_end > 0.0, "training learning rates must be > 0");
    check(t.lr_decay_iters >= 1, "training.lr_decay_iters must be >= 1");
    check(t.beta_ramp_iters >= 1, "training.beta_ramp_iters must be >= 1");
    check(t.log_every >= 1, "training.log_every must be >= 1");
    check(t.f1_every >= 1, "training.f1_every must be >= 1");
    check(t.f1_episodes >= 1, "training.f1_episodes must be >= 1");
    check(t.f1_level >= 1 && t.f1_level <= h.levels, "training.f1_level must name a model level");
    check(t.f1_factor >= 0, "training.f1_factor must be >= 0");
    check(t.f1_tol >= 0, "training.f1_tol must be >= 0");
    check(t.checkpoint_every >= 1, "training.checkpoint_every must be >= 1");
}

}  // namespace vpr
