#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vpr/numerics/optim.hpp"
#include "vpr/numerics/tape.hpp"
#include "vpr/numerics/tensor.hpp"

namespace fdtest {

struct FdReport {
    double max_rel_err = 0.0;
    long checked = 0;
};

inline double rel_err(double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

// Compare reverse-mode gradients against central finite differences for a
// graph over explicit leaf inputs. The builder must construct the same graph
// on every call (any randomness captured beforehand) and return a scalar
// node.
using LeafBuilder = std::function<int(vpr::Tape&, const std::vector<int>&)>;

inline FdReport check_leaf_gradients(const LeafBuilder& build, std::vector<vpr::Tensor> inputs,
                                     double h = 1e-5) {
    vpr::Tape t;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const auto& in : inputs) ids.push_back(t.leaf(in, /*requires_grad=*/true));
    t.backward(build(t, ids));
    std::vector<vpr::Tensor> grads;
    grads.reserve(ids.size());
    for (int id : ids) grads.push_back(t.grad_of(id));

    auto eval = [&](std::size_t i, std::size_t j, double v) {
        vpr::Tensor bumped = inputs[i];
        bumped.data[j] = v;
        vpr::Tape tt;
        std::vector<int> idv;
        idv.reserve(inputs.size());
        for (std::size_t k = 0; k < inputs.size(); ++k)
            idv.push_back(tt.leaf(k == i ? bumped : inputs[k]));
        return tt.scalar_val(build(tt, idv));
    };

    FdReport rep;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t j = 0; j < inputs[i].data.size(); ++j) {
            double x = inputs[i].data[j];
            double fd = (eval(i, j, x + h) - eval(i, j, x - h)) / (2.0 * h);
            rep.max_rel_err = std::max(rep.max_rel_err, rel_err(grads[i].data[j], fd));
            ++rep.checked;
        }
    }
    return rep;
}

// Same comparison, but for the trainable parameters of a store. The builder
// must call store.stage(tape) itself and return a scalar node; parameters
// are perturbed in place and restored.
using StoreBuilder = std::function<int(vpr::Tape&)>;

inline FdReport check_store_gradients(vpr::ParamStore& store, const StoreBuilder& build,
                                      double h = 1e-5) {
    vpr::Tape t;
    t.backward(build(t));
    std::vector<vpr::Tensor> grads;
    for (int i = 0; i < store.count(); ++i) grads.push_back(t.grad_of(store.node(i)));

    auto eval = [&](int i, std::size_t j, double v) {
        double saved = store.param(i).value.data[j];
        store.param(i).value.data[j] = v;
        vpr::Tape tt;
        double out = tt.scalar_val(build(tt));
        store.param(i).value.data[j] = saved;
        return out;
    };

    FdReport rep;
    for (int i = 0; i < store.count(); ++i) {
        for (std::size_t j = 0; j < store.param(i).value.data.size(); ++j) {
            double x = store.param(i).value.data[j];
            double fd = (eval(i, j, x + h) - eval(i, j, x - h)) / (2.0 * h);
            rep.max_rel_err = std::max(rep.max_rel_err, rel_err(grads[i].data[j], fd));
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace fdtest
