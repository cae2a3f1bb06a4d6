#include "vpr/numerics/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace vpr {

int ParamStore::add(const std::string& name, Tensor init) {
    Param p;
    p.name = name;
    p.m = Tensor::zeros(init.shape);
    p.v = Tensor::zeros(init.shape);
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

void ParamStore::stage(Tape& tape) {
    for (Param& p : params_) p.node = tape.leaf(p.value, /*requires_grad=*/true);
}

void ParamStore::adam_step(const Tape& tape, double lr, const AdamConfig& cfg) {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (Param& p : params_) {
        if (p.node < 0) throw std::logic_error("adam_step: parameters not staged");
        Tensor g = tape.grad_of(p.node);
        for (size_t i = 0; i < p.value.data.size(); ++i) {
            double gi = g.data[i];
            p.m.data[i] = cfg.beta1 * p.m.data[i] + (1.0 - cfg.beta1) * gi;
            p.v.data[i] = cfg.beta2 * p.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            double mhat = p.m.data[i] / bc1;
            double vhat = p.v.data[i] / bc2;
            p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        p.node = -1;
    }
}

double Schedule::lr_at(int64_t it) const {
    if (lr_decay_steps <= 0 || it >= lr_decay_steps) return final_lr;
    double t = static_cast<double>(it) / static_cast<double>(lr_decay_steps);
    return final_lr + (base_lr - final_lr) * 0.5 * (1.0 + std::cos(3.141592653589793238462643383279 * t));
}

double Schedule::kl_beta(int64_t it) const {
    if (kl_anneal_steps <= 0) return 1.0;
    if (it >= kl_anneal_steps) return 1.0;
    return static_cast<double>(it) / static_cast<double>(kl_anneal_steps);
}

}  // namespace vpr
