#include "vpr/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace vpr {
namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "vpr-checkpoint-v1";

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape}, {"data", t.data}};
}

Tensor tensor_from_json(const json& j) {
    Tensor t;
    t.shape = j.at("shape").get<std::vector<int64_t>>();
    t.data = j.at("data").get<std::vector<double>>();
    int64_t n = 1;
    for (int64_t d : t.shape) n *= d;
    if (n != static_cast<int64_t>(t.data.size()))
        throw std::runtime_error("checkpoint: tensor data does not match its shape");
    return t;
}

json read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    json j = json::parse(in, nullptr, /*allow_exceptions=*/true);
    if (j.value("format", "") != kFormatTag)
        throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint file");
    return j;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, const TrainState& state) {
    json params = json::array();
    for (const auto& p : store.all()) {
        params.push_back(json{{"name", p.name},
                              {"value", tensor_to_json(p.value)},
                              {"m", tensor_to_json(p.m)},
                              {"v", tensor_to_json(p.v)}});
    }
    json j{{"format", kFormatTag},
           {"config", state.config_text},
           {"iteration", state.iteration},
           {"step_count", store.step_count()},
           {"rng", state.rng_state},
           {"window_capacity", state.window_capacity},
           {"windows", state.windows},
           {"params", params}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    out << j.dump(1) << "\n";
    if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

std::string checkpoint_config_text(const std::string& path) {
    return read_file(path).at("config").get<std::string>();
}

TrainState load_checkpoint(const std::string& path, ParamStore& store) {
    json j = read_file(path);
    const json& params = j.at("params");
    if (static_cast<int>(params.size()) != store.count())
        throw std::runtime_error("checkpoint: parameter count mismatch (file has " +
                                 std::to_string(params.size()) + ", model has " +
                                 std::to_string(store.count()) + ")");
    for (int i = 0; i < store.count(); ++i) {
        const json& pj = params[static_cast<size_t>(i)];
        auto& p = store.param(i);
        if (pj.at("name").get<std::string>() != p.name)
            throw std::runtime_error("checkpoint: parameter name mismatch at index " +
                                     std::to_string(i) + " (file has '" +
                                     pj.at("name").get<std::string>() + "', model has '" + p.name + "')");
        Tensor value = tensor_from_json(pj.at("value"));
        if (value.shape != p.value.shape)
            throw std::runtime_error("checkpoint: shape mismatch for parameter '" + p.name + "'");
        p.value = std::move(value);
        p.m = tensor_from_json(pj.at("m"));
        p.v = tensor_from_json(pj.at("v"));
    }
    store.set_step_count(j.at("step_count").get<int64_t>());
    TrainState state;
    state.config_text = j.at("config").get<std::string>();
    state.iteration = j.at("iteration").get<int>();
    state.rng_state = j.at("rng").get<std::string>();
    state.window_capacity = j.at("window_capacity").get<int>();
    state.windows = j.at("windows").get<std::vector<std::vector<double>>>();
    return state;
}

}  // namespace vpr
