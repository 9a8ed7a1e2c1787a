#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cdiff/schedule.hpp"

namespace oracles {

// Bayes-rule categorical posterior q(e_{t-1} | e_t, e_0) computed from
// the forward kernels alone: proportional to q(e_t | e_{t-1}) q(e_{t-1} | e_0).
inline std::vector<double> bayes_type_posterior(int noisy_type, int clean_type, int num_types,
                                                int t, const cdiff::DiffusionSchedule& sched) {
    double alpha = sched.alpha_at(t);
    double bar_prev = sched.alpha_bar_at(t - 1);
    std::vector<double> post(num_types);
    double total = 0.0;
    for (int k = 0; k < num_types; ++k) {
        // P(e_t = noisy | e_{t-1} = k) under the single-step kernel.
        double step = (k == noisy_type ? alpha : 0.0) + (1.0 - alpha) / num_types;
        // P(e_{t-1} = k | e_0 = clean) under the t-1 step marginal.
        double marg = (k == clean_type ? bar_prev : 0.0) + (1.0 - bar_prev) / num_types;
        post[k] = step * marg;
        total += post[k];
    }
    for (double& v : post) v /= total;
    return post;
}

// Chain the single-step type kernels t times on a probability vector.
inline std::vector<double> chained_type_marginal(int clean_type, int num_types, int t,
                                                 const cdiff::DiffusionSchedule& sched) {
    std::vector<double> p(num_types, 0.0);
    p[clean_type] = 1.0;
    for (int s = 1; s <= t; ++s) {
        double alpha = sched.alpha_at(s);
        std::vector<double> q(num_types, 0.0);
        double mass = 0.0;
        for (double v : p) mass += v;
        for (int k = 0; k < num_types; ++k) q[k] = alpha * p[k] + (1.0 - alpha) * mass / num_types;
        p = std::move(q);
    }
    return p;
}

// Variance of x_0 when the reverse chain is iterated with a zero noise
// prediction: x_{t-1} = x_t / sqrt(alpha_t) + sqrt(beta_t) z, x_T ~ N(0,1).
inline double zero_net_chain_variance(const cdiff::DiffusionSchedule& sched) {
    double var = 1.0;
    for (int t = sched.total_steps; t >= 1; --t)
        var = var / sched.alpha_at(t) + sched.beta_at(t);
    return var;
}

// Two-sided Kolmogorov-Smirnov statistic of samples against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        worst = std::max(worst, std::abs(f - static_cast<double>(i) / n));
        worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return worst;
}

// Critical K-S value at the 1% level (asymptotic).
inline double ks_critical_1pct(size_t n) {
    return 1.62762 / std::sqrt(static_cast<double>(n));
}

inline double normal_cdf(double x, double mean, double sd) {
    return 0.5 * (1.0 + std::erf((x - mean) / (sd * std::sqrt(2.0))));
}

inline double exponential_cdf(double x, double rate) {
    return x <= 0.0 ? 0.0 : 1.0 - std::exp(-rate * x);
}

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
};

inline MeanVar mean_var(const std::vector<double>& xs) {
    MeanVar mv;
    for (double x : xs) mv.mean += x;
    mv.mean /= static_cast<double>(xs.size());
    for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
    mv.var /= static_cast<double>(xs.size() - 1);
    return mv;
}

// Profile log-likelihood of the Box-Cox transform evaluated directly on
// shifted/scaled data (grid-search oracle for the fitted lambda).
inline double boxcox_profile_loglik(const std::vector<double>& raw, double shift, double scale,
                                    double lambda) {
    const size_t n = raw.size();
    std::vector<double> z(n);
    double sum_log = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double y = (raw[i] + shift) * scale;
        sum_log += std::log(y);
        z[i] = lambda == 0.0 ? std::log(y) : (std::pow(y, lambda) - 1.0) / lambda;
    }
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    return -0.5 * static_cast<double>(n) * std::log(var) + (lambda - 1.0) * sum_log;
}

} // namespace oracles
