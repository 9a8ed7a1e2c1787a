#pragma once

#include <vector>

#include "cdiff/error.hpp"

namespace cdiff {

// Variance schedule for the diffusion chain. Arrays are indexed by step
// t = 1..T; index 0 holds the conventional values beta=0, alpha=1,
// alpha_bar=1.
struct DiffusionSchedule {
    int total_steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    double beta_at(int t) const { return beta[check(t)]; }
    double alpha_at(int t) const { return alpha[check(t)]; }
    // alpha_bar_at accepts t = 0 (signal fully preserved).
    double alpha_bar_at(int t) const {
        require(t >= 0 && t <= total_steps, "schedule: step out of range");
        return alpha_bar[t];
    }

private:
    int check(int t) const {
        require(t >= 1 && t <= total_steps, "schedule: step out of range");
        return t;
    }
};

// Cosine schedule: alpha_bar follows cos^2(((t/T + s)/(1 + s)) * pi/2)
// normalized to 1 at t = 0, with s = 0.008 and per-step beta clipped to
// 0.999 before alpha_bar is recomputed.
DiffusionSchedule cosine_schedule(int total_steps);

// Descending subsequence of {1..T} with exactly `steps` evenly spaced
// indices; endpoints T and 1 are always included when steps >= 2.
std::vector<int> ddim_subsequence(int total_steps, int steps);

} // namespace cdiff
