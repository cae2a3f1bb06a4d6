#include "vpr/distributions.hpp"

#include <cassert>
#include <cmath>

namespace vpr {

double DiagGaussian::kl(const DiagGaussian& q, const DiagGaussian& p) {
    assert(q.dim() == p.dim());
    double acc = 0.0;
    for (size_t i = 0; i < q.dim(); ++i) {
        double vq = std::exp(q.log_var[i]);
        double vp = std::exp(p.log_var[i]);
        double dm = q.mean[i] - p.mean[i];
        acc += p.log_var[i] - q.log_var[i] + (vq + dm * dm) / vp - 1.0;
    }
    return 0.5 * acc;
}

double DiagGaussian::entropy() const {
    double acc = 0.0;
    for (double lv : log_var) acc += 1.0 + kLn2Pi + lv;
    return 0.5 * acc;
}

double DiagGaussian::cross_entropy(const DiagGaussian& q, const DiagGaussian& p) {
    assert(q.dim() == p.dim());
    double acc = 0.0;
    for (size_t i = 0; i < q.dim(); ++i) {
        double vq = std::exp(q.log_var[i]);
        double vp = std::exp(p.log_var[i]);
        double dm = q.mean[i] - p.mean[i];
        acc += kLn2Pi + p.log_var[i] + (vq + dm * dm) / vp;
    }
    return 0.5 * acc;
}

std::vector<double> DiagGaussian::sample(Rng& rng) const {
    std::vector<double> out(dim());
    for (size_t i = 0; i < dim(); ++i)
        out[i] = mean[i] + std::exp(0.5 * log_var[i]) * rng.normal();
    return out;
}

double DiagGaussian::log_prob(const std::vector<double>& x) const {
    assert(x.size() == dim());
    double acc = 0.0;
    for (size_t i = 0; i < dim(); ++i) {
        double d = x[i] - mean[i];
        acc += kLn2Pi + log_var[i] + d * d * std::exp(-log_var[i]);
    }
    return -0.5 * acc;
}

int gauss_kl_rows(Tape& t, int q_mean, int q_log_var, int p_mean, int p_log_var) {
    int dm = t.sub(q_mean, p_mean);
    int dm2 = t.mul(dm, dm);
    int num = t.add(t.exp(q_log_var), dm2);
    int inv_vp = t.exp(t.scale(p_log_var, -1.0));
    int ratio = t.mul(num, inv_vp);
    int terms = t.add_const(t.add(t.sub(p_log_var, q_log_var), ratio), -1.0);
    return t.scale(t.sum_rows(terms), 0.5);
}

int gauss_entropy_rows(Tape& t, int log_var) {
    return t.scale(t.sum_rows(t.add_const(log_var, 1.0 + kLn2Pi)), 0.5);
}

int gauss_cross_entropy_rows(Tape& t, int q_mean, int q_log_var, int p_mean, int p_log_var) {
    int dm = t.sub(q_mean, p_mean);
    int dm2 = t.mul(dm, dm);
    int num = t.add(t.exp(q_log_var), dm2);
    int inv_vp = t.exp(t.scale(p_log_var, -1.0));
    int ratio = t.mul(num, inv_vp);
    int terms = t.add_const(t.add(p_log_var, ratio), kLn2Pi);
    return t.scale(t.sum_rows(terms), 0.5);
}

int gauss_sample(Tape& t, int mean, int log_var, int eps) {
    int sigma = t.exp(t.scale(log_var, 0.5));
    return t.add(mean, t.mul(sigma, eps));
}

int gauss_log_prob_rows(Tape& t, int x, int mean, int log_var) {
    int d = t.sub(x, mean);
    int d2 = t.mul(d, d);
    int inv_v = t.exp(t.scale(log_var, -1.0));
    int quad = t.mul(d2, inv_v);
    int terms = t.add_const(t.add(log_var, quad), kLn2Pi);
    return t.scale(t.sum_rows(terms), -0.5);
}

}  // namespace vpr
