#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpr/numerics/optim.hpp"
#include "vpr/numerics/rng.hpp"
#include "vpr/numerics/tape.hpp"

namespace vpr {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kResidualScale = 0.1;

// One affine layer. Weights use uniform fan-in scaling; `scale = 0` makes the
// layer an exact zero map at initialization.
class Dense {
  public:
    Dense() = default;
    Dense(ParamStore& store, const std::string& name, int64_t in, int64_t out, Rng& rng,
          double scale = 1.0);

    int apply(Tape& t, const ParamStore& store, int x) const;
    int64_t in_dim() const { return in_; }
    int64_t out_dim() const { return out_; }
    int weight_index() const { return w_; }
    int bias_index() const { return b_; }

  private:
    int w_ = -1;
    int b_ = -1;
    int64_t in_ = 0;
    int64_t out_ = 0;
};

// Stack of affine layers with leaky-ReLU between them and a linear last
// layer. Layer widths: in -> hidden x (n-1) -> out.
class DenseStack {
  public:
    DenseStack() = default;
    DenseStack(ParamStore& store, const std::string& name, int64_t in, int64_t hidden,
               int64_t out, int layers, Rng& rng, double final_scale = 1.0);

    int apply(Tape& t, const ParamStore& store, int x) const;
    int64_t in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
    int64_t out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
    long calls() const { return calls_; }
    const std::vector<Dense>& layers() const { return layers_; }

  private:
    std::vector<Dense> layers_;
    mutable long calls_ = 0;
};

// Four-layer stack with the scaled skip connection out = body(x) + 0.1 * x.
// Input and output widths are equal.
class ResidualStack {
  public:
    ResidualStack() = default;
    ResidualStack(ParamStore& store, const std::string& name, int64_t dim, Rng& rng);

    int apply(Tape& t, const ParamStore& store, int x) const;
    int body(Tape& t, const ParamStore& store, int x) const;  // stack without the skip
    long calls() const { return calls_; }

  private:
    DenseStack stack_;
    mutable long calls_ = 0;
};

// Standard gated recurrent cell: update gate, reset gate, tanh candidate.
// Update-gate convention: z = 0 keeps the old state, z = 1 takes the
// candidate.
class GruCell {
  public:
    GruCell() = default;
    GruCell(ParamStore& store, const std::string& name, int64_t in, int64_t hidden, Rng& rng);

    int apply(Tape& t, const ParamStore& store, int x, int h) const;
    long calls() const { return calls_; }

  private:
    Dense xz_, hz_;
    Dense xr_, hr_;
    Dense xh_, hh_;
    mutable long calls_ = 0;
};

// Dense stack emitting (mean, log_var) of a diagonal Gaussian; log_var is
// clamped inside the head. A zero final scale starts the head at N(0, I).
class GaussianHead {
  public:
    GaussianHead() = default;
    GaussianHead(ParamStore& store, const std::string& name, int64_t in, int64_t hidden,
                 int64_t out, Rng& rng, double final_scale = 0.0);

    struct Out {
        int mean = -1;
        int log_var = -1;
    };
    Out apply(Tape& t, const ParamStore& store, int x) const;
    int64_t out_dim() const { return out_; }
    long calls() const { return calls_; }

  private:
    DenseStack stack_;
    int64_t out_ = 0;
    mutable long calls_ = 0;
};

}  // namespace vpr
