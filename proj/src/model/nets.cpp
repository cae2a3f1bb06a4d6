#include "vpr/model/nets.hpp"

#include <cmath>
#include <stdexcept>

#include "vpr/distributions.hpp"

namespace vpr {

Dense::Dense(ParamStore& store, const std::string& name, int64_t in, int64_t out, Rng& rng,
             double scale)
    : in_(in), out_(out) {
    if (in <= 0 || out <= 0) throw std::invalid_argument("Dense: dims must be positive");
    Tensor w = Tensor::zeros({in, out});
    if (scale != 0.0) {
        const double bound = scale * std::sqrt(3.0 / static_cast<double>(in));
        for (double& v : w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
    }
    w_ = store.add(name + ".w", w);
    b_ = store.add(name + ".b", Tensor::zeros({out}));
}

int Dense::apply(Tape& t, const ParamStore& store, int x) const {
    const int w = store.node(w_);
    const int b = store.node(b_);
    if (w < 0 || b < 0) throw std::logic_error("Dense::apply: parameters not staged");
    return t.add(t.matmul(x, w), b);
}

DenseStack::DenseStack(ParamStore& store, const std::string& name, int64_t in, int64_t hidden,
                       int64_t out, int layers, Rng& rng, double final_scale) {
    if (layers < 1) throw std::invalid_argument("DenseStack: needs at least one layer");
    layers_.reserve(static_cast<size_t>(layers));
    for (int i = 0; i < layers; ++i) {
        const int64_t li = (i == 0) ? in : hidden;
        const int64_t lo = (i == layers - 1) ? out : hidden;
        const double scale = (i == layers - 1) ? final_scale : 1.0;
        layers_.emplace_back(store, name + ".l" + std::to_string(i), li, lo, rng, scale);
    }
}

int DenseStack::apply(Tape& t, const ParamStore& store, int x) const {
    ++calls_;
    int h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
        h = layers_[i].apply(t, store, h);
        if (i + 1 < layers_.size()) h = t.leaky_relu(h, kLeakySlope);
    }
    return h;
}

ResidualStack::ResidualStack(ParamStore& store, const std::string& name, int64_t dim, Rng& rng)
    : stack_(store, name, dim, dim, dim, 4, rng, 1.0) {}

int ResidualStack::body(Tape& t, const ParamStore& store, int x) const {
    return stack_.apply(t, store, x);
}

int ResidualStack::apply(Tape& t, const ParamStore& store, int x) const {
    ++calls_;
    return t.add(stack_.apply(t, store, x), t.scale(x, kResidualScale));
}

GruCell::GruCell(ParamStore& store, const std::string& name, int64_t in, int64_t hidden, Rng& rng)
    : xz_(store, name + ".xz", in, hidden, rng),
      hz_(store, name + ".hz", hidden, hidden, rng),
      xr_(store, name + ".xr", in, hidden, rng),
      hr_(store, name + ".hr", hidden, hidden, rng),
      xh_(store, name + ".xh", in, hidden, rng),
      hh_(store, name + ".hh", hidden, hidden, rng) {}

int GruCell::apply(Tape& t, const ParamStore& store, int x, int h) const {
    ++calls_;
    const int z = t.sigmoid(t.add(xz_.apply(t, store, x), hz_.apply(t, store, h)));
    const int r = t.sigmoid(t.add(xr_.apply(t, store, x), hr_.apply(t, store, h)));
    const int cand =
        t.tanh(t.add(xh_.apply(t, store, x), hh_.apply(t, store, t.mul(r, h))));
    // h' = h + z * (cand - h): z = 0 keeps the state, z = 1 replaces it.
    return t.add(h, t.mul(z, t.sub(cand, h)));
}

GaussianHead::GaussianHead(ParamStore& store, const std::string& name, int64_t in, int64_t hidden,
                           int64_t out, Rng& rng, double final_scale)
    : stack_(store, name, in, hidden, 2 * out, 4, rng, final_scale), out_(out) {}

GaussianHead::Out GaussianHead::apply(Tape& t, const ParamStore& store, int x) const {
    ++calls_;
    const int raw = stack_.apply(t, store, x);
    Out o;
    o.mean = t.slice_cols(raw, 0, out_);
    o.log_var = t.clamp(t.slice_cols(raw, out_, 2 * out_), kLogVarMin, kLogVarMax);
    return o;
}

}  // namespace vpr
