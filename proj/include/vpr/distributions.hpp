#pragma once

#include <vector>

#include "vpr/numerics/rng.hpp"
#include "vpr/numerics/tape.hpp"

namespace vpr {

// Bounds applied to log-variance outputs of Gaussian parameter heads.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
inline constexpr double kLn2Pi = 1.8378770664093454835606594728112;

// Diagonal Gaussian over R^k parameterized by mean and log-variance.
// All divergences are closed-form; nothing is estimated by sampling.
struct DiagGaussian {
    std::vector<double> mean;
    std::vector<double> log_var;

    DiagGaussian() = default;
    DiagGaussian(std::vector<double> m, std::vector<double> lv)
        : mean(std::move(m)), log_var(std::move(lv)) {}

    static DiagGaussian standard(size_t k) {
        return DiagGaussian(std::vector<double>(k, 0.0), std::vector<double>(k, 0.0));
    }

    size_t dim() const { return mean.size(); }

    // KL(q || p), >= 0, zero iff q == p.
    static double kl(const DiagGaussian& q, const DiagGaussian& p);
    // Differential entropy H(q).
    double entropy() const;
    // Cross-entropy CE(q, p) = -E_q[log p] = H(q) + KL(q, p).
    static double cross_entropy(const DiagGaussian& q, const DiagGaussian& p);
    // Reparameterized draw: mean + sigma * eps, eps ~ N(0, I).
    std::vector<double> sample(Rng& rng) const;
    double log_prob(const std::vector<double>& x) const;
};

// Tape-level counterparts operating on [batch, k] mean/log-variance nodes and
// returning per-row reductions ([batch] vectors). These carry gradients.
int gauss_kl_rows(Tape& t, int q_mean, int q_log_var, int p_mean, int p_log_var);
int gauss_entropy_rows(Tape& t, int log_var);
int gauss_cross_entropy_rows(Tape& t, int q_mean, int q_log_var, int p_mean, int p_log_var);
// Reparameterized sample node; eps is a leaf of matching shape.
int gauss_sample(Tape& t, int mean, int log_var, int eps);
// log N(x | mean, exp(log_var)) summed per row; x is a constant leaf.
int gauss_log_prob_rows(Tape& t, int x, int mean, int log_var);

}  // namespace vpr
