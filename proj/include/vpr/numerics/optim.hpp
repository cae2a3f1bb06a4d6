#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpr/numerics/tape.hpp"
#include "vpr/numerics/tensor.hpp"

namespace vpr {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Named trainable tensors plus their Adam moment estimates. Parameters are
// staged onto a fresh Tape each step; adam_step reads the gradients back from
// the staged nodes. Iteration order is construction order and is fixed.
class ParamStore {
  public:
    struct Param {
        std::string name;
        Tensor value;
        Tensor m;
        Tensor v;
        int node = -1;
    };

    int add(const std::string& name, Tensor init);

    // Create leaf nodes (requires_grad) for every parameter on `tape`.
    void stage(Tape& tape);

    int node(int idx) const { return params_[static_cast<size_t>(idx)].node; }
    Param& param(int idx) { return params_[static_cast<size_t>(idx)]; }
    const Param& param(int idx) const { return params_[static_cast<size_t>(idx)]; }
    int count() const { return static_cast<int>(params_.size()); }
    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }

    // One Adam update from the gradients accumulated on `tape`.
    void adam_step(const Tape& tape, double lr, const AdamConfig& cfg = {});

    std::vector<Param>& all() { return params_; }
    const std::vector<Param>& all() const { return params_; }

  private:
    std::vector<Param> params_;
    int64_t step_ = 0;
};

// Training-length schedules: half-cosine learning-rate decay and a linear
// KL-weight ramp from 0 to 1.
struct Schedule {
    double base_lr = 5e-4;
    double final_lr = 5e-5;
    int64_t lr_decay_steps = 15000;
    int64_t kl_anneal_steps = 3000;

    double lr_at(int64_t it) const;
    double kl_beta(int64_t it) const;
};

}  // namespace vpr
