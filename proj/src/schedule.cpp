#include "cdiff/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace cdiff {

DiffusionSchedule cosine_schedule(int total_steps) {
    require(total_steps >= 2, "cosine_schedule: need at least 2 steps");
    const double s = 0.008;
    const double pi_half = 1.57079632679489661923;

    auto f = [&](int t) {
        double u = (static_cast<double>(t) / total_steps + s) / (1.0 + s);
        double c = std::cos(u * pi_half);
        return c * c;
    };

    DiffusionSchedule sched;
    sched.total_steps = total_steps;
    sched.beta.assign(total_steps + 1, 0.0);
    sched.alpha.assign(total_steps + 1, 1.0);
    sched.alpha_bar.assign(total_steps + 1, 1.0);

    double f0 = f(0);
    double prev_bar = 1.0;
    for (int t = 1; t <= total_steps; ++t) {
        double bar = f(t) / f0;
        double beta = std::min(1.0 - bar / prev_bar, 0.999);
        sched.beta[t] = beta;
        sched.alpha[t] = 1.0 - beta;
        sched.alpha_bar[t] = sched.alpha_bar[t - 1] * sched.alpha[t];
        prev_bar = bar;
    }
    return sched;
}

std::vector<int> ddim_subsequence(int total_steps, int steps) {
    require(steps >= 1 && steps <= total_steps, "ddim_subsequence: steps out of range");
    std::vector<int> tau;
    if (steps == 1) {
        tau.push_back(total_steps);
        return tau;
    }
    tau.reserve(steps);
    double gap = static_cast<double>(total_steps - 1) / (steps - 1);
    for (int k = steps - 1; k >= 0; --k)
        tau.push_back(static_cast<int>(std::lround(1.0 + k * gap)));
    return tau;
}

} // namespace cdiff
