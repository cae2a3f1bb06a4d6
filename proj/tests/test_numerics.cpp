#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"

#include "vpr/distributions.hpp"
#include "vpr/model/nets.hpp"
#include "vpr/numerics/optim.hpp"
#include "vpr/numerics/rng.hpp"
#include "vpr/numerics/tape.hpp"
#include "vpr/numerics/tensor.hpp"

using namespace vpr;

namespace {

Tensor randu(Rng& rng, std::vector<int64_t> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("tensor shape helpers") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.size() == 6);
    t.at(1, 2) = 7.0;
    CHECK(t.data[5] == 7.0);
    Tensor f = Tensor::full({2}, 1.5);
    CHECK(f.data == std::vector<double>{1.5, 1.5});
}

TEST_CASE("op values match hand results") {
    Tape t;
    int a = t.leaf(Tensor{{2, 2}, {1, 2, 3, 4}});
    int b = t.leaf(Tensor{{2, 2}, {5, 6, 7, 8}});
    int mm = t.matmul(a, b);
    CHECK(t.val(mm).data == std::vector<double>{19, 22, 43, 50});

    int row = t.leaf(Tensor{{2}, {1, 2}});
    int base = t.leaf(Tensor{{2, 2}, {0, 0, 10, 10}});
    CHECK(t.val(t.add(base, row)).data == std::vector<double>{1, 2, 11, 12});

    int x = t.leaf(Tensor{{1, 3}, {-2.0, 0.0, 500.0}});
    const Tensor& sp = t.val(t.softplus(x));
    CHECK(sp.data[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(sp.data[2] == doctest::Approx(500.0));  // large inputs stay finite
    CHECK(std::isfinite(sp.data[2]));
    const Tensor& lr = t.val(t.leaky_relu(x, 0.01));
    CHECK(lr.data[0] == doctest::Approx(-0.02));
    CHECK(lr.data[2] == doctest::Approx(500.0));
    const Tensor& cl = t.val(t.clamp(x, -1.0, 1.0));
    CHECK(cl.data == std::vector<double>{-1.0, 0.0, 1.0});

    int c1 = t.leaf(Tensor{{2, 1}, {1, 2}});
    int c2 = t.leaf(Tensor{{2, 2}, {3, 4, 5, 6}});
    int cc = t.concat(c1, c2);
    CHECK(t.val(cc).data == std::vector<double>{1, 3, 4, 2, 5, 6});
    CHECK(t.val(t.slice_cols(cc, 1, 3)).data == std::vector<double>{3, 4, 5, 6});
    CHECK(t.val(t.sum_rows(c2)).data == std::vector<double>{7, 11});
    CHECK(t.scalar_val(t.mean_all(c2)) == doctest::Approx(4.5));
    CHECK(t.scalar_val(t.sum_all(c2)) == doctest::Approx(18.0));

    int m = t.leaf(Tensor{{2}, {1, 0}});
    CHECK(t.val(t.where(m, c2, t.leaf(Tensor{{2, 2}, {9, 9, 9, 9}}))).data ==
          std::vector<double>{3, 4, 9, 9});
}

TEST_CASE("gradients match finite differences on mixed op graphs") {
    Rng rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        auto build = [](Tape& t, const std::vector<int>& in) {
            int h = t.tanh(t.matmul(in[0], in[1]));
            h = t.mul(h, t.sigmoid(t.add(in[0], in[2])));
            h = t.add_const(t.scale(h, 0.7), 0.3);
            int g = t.softplus(t.sub(h, in[0]));
            g = t.concat(g, t.leaky_relu(h, 0.01));
            g = t.slice_cols(g, 1, 5);
            return t.mean_all(t.mul(g, g));
        };
        auto rep1 = fdtest::check_leaf_gradients(
            build, {randu(rng, {3, 4}), randu(rng, {4, 4}), randu(rng, {4})});
        CHECK(rep1.max_rel_err < 1e-4);
        CHECK(rep1.checked == 32);
    }
}

TEST_CASE("gradients flow through where by rows") {
    auto build = [](Tape& t, const std::vector<int>& in) {
        int m = t.leaf(Tensor{{3}, {1, 0, 1}});
        return t.sum_all(t.where(m, t.tanh(in[0]), t.mul(in[1], in[1])));
    };
    Rng rng(5);
    auto rep = fdtest::check_leaf_gradients(build, {randu(rng, {3, 2}), randu(rng, {3, 2})});
    CHECK(rep.max_rel_err < 1e-4);

    // The masked-out branch receives exactly zero gradient.
    Tape t;
    int a = t.leaf(Tensor{{2, 2}, {1, 2, 3, 4}}, true);
    int b = t.leaf(Tensor{{2, 2}, {5, 6, 7, 8}}, true);
    int m = t.leaf(Tensor{{2}, {1, 0}});
    t.backward(t.sum_all(t.where(m, a, b)));
    CHECK(t.grad_of(a).data == std::vector<double>{1, 1, 0, 0});
    CHECK(t.grad_of(b).data == std::vector<double>{0, 0, 1, 1});
}

TEST_CASE("gradients match finite differences through the recurrent cell") {
    Rng rng(21);
    ParamStore store;
    GruCell cell(store, "g", 3, 4, rng);
    Tensor x = randu(rng, {2, 3});
    Tensor h = randu(rng, {2, 4});
    auto build = [&](Tape& t) {
        store.stage(t);
        int hh = cell.apply(t, store, t.leaf(x), t.leaf(h));
        hh = cell.apply(t, store, t.leaf(x), hh);  // two chained steps
        return t.mean_all(t.mul(hh, hh));
    };
    auto rep = fdtest::check_store_gradients(store, build);
    CHECK(rep.max_rel_err < 1e-4);
    CHECK(rep.checked > 0);
}

TEST_CASE("gradients match finite differences through both Gaussian heads and the KL") {
    Rng rng(31);
    ParamStore store;
    GaussianHead post(store, "post", 5, 6, 3, rng, 0.5);
    GaussianHead prior(store, "prior", 4, 6, 3, rng, 0.5);
    Tensor xq = randu(rng, {2, 5});
    Tensor xp = randu(rng, {2, 4});
    Tensor eps = randu(rng, {2, 3});
    auto build = [&](Tape& t) {
        store.stage(t);
        auto q = post.apply(t, store, t.leaf(xq));
        auto p = prior.apply(t, store, t.leaf(xp));
        int kl = gauss_kl_rows(t, q.mean, q.log_var, p.mean, p.log_var);
        int s = gauss_sample(t, q.mean, q.log_var, t.leaf(eps));
        int lp = gauss_log_prob_rows(t, p.mean, p.log_var, s);
        return t.mean_all(t.sub(kl, lp));
    };
    auto rep = fdtest::check_store_gradients(store, build);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("adam first step matches the closed form") {
    ParamStore store;
    store.add("w", Tensor{{1, 1}, {1.0}});
    Tape t;
    store.stage(t);
    // loss = w^2, so dl/dw = 2w = 2.
    t.backward(t.mean_all(t.mul(store.node(0), store.node(0))));
    store.adam_step(t, 1e-3);
    double g = 2.0;
    double expect = 1.0 - 1e-3 * g / (std::sqrt(g * g) + 1e-8);
    CHECK(store.param(0).value.data[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(store.step_count() == 1);
}

TEST_CASE("adam two steps match a scripted oracle") {
    ParamStore store;
    store.add("w", Tensor{{1, 1}, {0.5}});
    AdamConfig ac;
    double w = 0.5, m = 0.0, v = 0.0;
    for (int step = 1; step <= 2; ++step) {
        Tape t;
        store.stage(t);
        int node = store.node(0);
        t.backward(t.mean_all(t.mul(node, t.tanh(node))));
        double x = w;
        double g = std::tanh(x) + x * (1.0 - std::tanh(x) * std::tanh(x));
        m = ac.beta1 * m + (1 - ac.beta1) * g;
        v = ac.beta2 * v + (1 - ac.beta2) * g * g;
        double mh = m / (1 - std::pow(ac.beta1, step));
        double vh = v / (1 - std::pow(ac.beta2, step));
        w -= 2e-3 * mh / (std::sqrt(vh) + ac.eps);
        store.adam_step(t, 2e-3, ac);
        CHECK(store.param(0).value.data[0] == doctest::Approx(w).epsilon(1e-10));
    }
}

TEST_CASE("zero gradient leaves a parameter untouched") {
    ParamStore store;
    store.add("used", Tensor{{1, 1}, {2.0}});
    store.add("unused", Tensor{{1, 1}, {3.0}});
    Tape t;
    store.stage(t);
    t.backward(t.mean_all(t.mul(store.node(0), store.node(0))));
    store.adam_step(t, 1e-2);
    CHECK(store.param(0).value.data[0] != 2.0);
    CHECK(store.param(1).value.data[0] == 3.0);
}

TEST_CASE("learning-rate decay and KL ramp hit their pinned values") {
    Schedule s;
    CHECK(s.lr_at(0) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(s.lr_at(7500) == doctest::Approx(2.75e-4).epsilon(1e-9));
    CHECK(s.lr_at(15000) == doctest::Approx(5e-5).epsilon(1e-12));
    CHECK(s.lr_at(30000) == doctest::Approx(5e-5).epsilon(1e-12));
    CHECK(s.kl_beta(0) == doctest::Approx(0.0));
    CHECK(s.kl_beta(1500) == doctest::Approx(0.5));
    CHECK(s.kl_beta(3000) == doctest::Approx(1.0));
    CHECK(s.kl_beta(9000) == doctest::Approx(1.0));
}

TEST_CASE("random source is deterministic and serializable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    std::string state = a.save_state();
    std::vector<double> want(50);
    for (double& w : want) w = a.normal();
    Rng c(7);
    c.load_state(state);
    for (double w : want) CHECK(c.normal() == w);
    for (int i = 0; i < 1000; ++i) {
        int64_t k = b.below(10);
        CHECK(k >= 0);
        CHECK(k < 10);
    }
}

TEST_CASE("normal draws have the right first two moments") {
    Rng rng(123);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

}  // TEST_SUITE
