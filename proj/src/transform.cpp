#include "cdiff/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdiff {

namespace {

double transform_scaled(double y, double lambda) {
    // y is already shifted and scaled, y > 0.
    if (lambda == 0.0) return std::log(y);
    return (std::pow(y, lambda) - 1.0) / lambda;
}

// Profile log-likelihood of the Box-Cox transform at a given lambda:
// -n/2 * log(var(z)) + (lambda - 1) * sum(log y), z = y(lambda).
double profile_loglik(const std::vector<double>& ys, double sum_log_y, double lambda) {
    const size_t n = ys.size();
    double mean = 0.0;
    std::vector<double> z(n);
    for (size_t i = 0; i < n; ++i) {
        z[i] = transform_scaled(ys[i], lambda);
        mean += z[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = z[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    if (var <= 0.0) return -std::numeric_limits<double>::infinity();
    return -0.5 * static_cast<double>(n) * std::log(var) + (lambda - 1.0) * sum_log_y;
}

} // namespace

BoxCoxParams fit_lambda(const std::vector<double>& train_deltas) {
    require(!train_deltas.empty(), "fit_lambda: empty input");
    BoxCoxParams p;

    std::vector<double> ys(train_deltas.size());
    double sum_log_y = 0.0;
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -y_min;
    for (size_t i = 0; i < train_deltas.size(); ++i) {
        require(std::isfinite(train_deltas[i]) && train_deltas[i] > 0.0,
                "fit_lambda: values must be > 0");
        ys[i] = (train_deltas[i] + p.shift) * p.scale;
        sum_log_y += std::log(ys[i]);
        y_min = std::min(y_min, ys[i]);
        y_max = std::max(y_max, ys[i]);
    }
    if (y_min == y_max) {
        p.lambda = 1.0; // flat likelihood, identity-like tie-break
        return p;
    }

    auto f = [&](double lambda) { return profile_loglik(ys, sum_log_y, lambda); };

    // Coarse scan locates the (unimodal) peak bracket, golden-section
    // refines it to 1e-5.
    const double lo_bound = -5.0, hi_bound = 5.0;
    const int grid = 51;
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        double lam = lo_bound + (hi_bound - lo_bound) * i / (grid - 1);
        double v = f(lam);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    double step = (hi_bound - lo_bound) / (grid - 1);
    double a = std::max(lo_bound, lo_bound + step * (best - 1));
    double b = std::min(hi_bound, lo_bound + step * (best + 1));

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-5) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    p.lambda = 0.5 * (a + b);
    return p;
}

double boxcox_apply(double x_plus, const BoxCoxParams& p) {
    require(std::isfinite(x_plus) && x_plus > 0.0, "boxcox_apply: input must be > 0");
    double y = (x_plus + p.shift) * p.scale;
    return transform_scaled(y, p.lambda);
}

double boxcox_invert(double y, const BoxCoxParams& p) {
    require(std::isfinite(y), "boxcox_invert: input must be finite");
    double raw;
    if (p.lambda == 0.0) {
        raw = std::exp(y);
    } else {
        double base = p.lambda * y + 1.0;
        // Values outside the transform image map to the smallest legal delta.
        if (base <= 0.0) return 1e-12;
        raw = std::pow(base, 1.0 / p.lambda);
    }
    double x = raw / p.scale - p.shift;
    return std::max(x, 1e-12);
}

std::vector<double> boxcox_apply(const std::vector<double>& xs, const BoxCoxParams& p) {
    std::vector<double> out(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) out[i] = boxcox_apply(xs[i], p);
    return out;
}

std::vector<double> boxcox_invert(const std::vector<double>& ys, const BoxCoxParams& p) {
    std::vector<double> out(ys.size());
    for (size_t i = 0; i < ys.size(); ++i) out[i] = boxcox_invert(ys[i], p);
    return out;
}

TimeScaler fit_time_scaler(const std::vector<double>& train_deltas) {
    TimeScaler s;
    s.boxcox = fit_lambda(train_deltas);
    double mean = 0.0;
    for (double d : train_deltas) mean += boxcox_apply(d, s.boxcox);
    mean /= static_cast<double>(train_deltas.size());
    double var = 0.0;
    for (double d : train_deltas) {
        double z = boxcox_apply(d, s.boxcox) - mean;
        var += z * z;
    }
    var /= static_cast<double>(train_deltas.size());
    s.center = mean;
    s.spread = std::max(std::sqrt(var), 1e-12);
    s.z_lo = std::numeric_limits<double>::infinity();
    s.z_hi = -s.z_lo;
    for (double d : train_deltas) {
        double z = (boxcox_apply(d, s.boxcox) - mean) / s.spread;
        s.z_lo = std::min(s.z_lo, z);
        s.z_hi = std::max(s.z_hi, z);
    }
    s.z_lo -= 1.0;
    s.z_hi += 1.0;
    return s;
}

double to_diffusion_space(double x_plus, const TimeScaler& s) {
    return (boxcox_apply(x_plus, s.boxcox) - s.center) / s.spread;
}

double from_diffusion_space(double z, const TimeScaler& s) {
    return boxcox_invert(s.center + s.spread * z, s.boxcox);
}

std::vector<double> to_diffusion_space(const std::vector<double>& xs, const TimeScaler& s) {
    std::vector<double> out(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) out[i] = to_diffusion_space(xs[i], s);
    return out;
}

} // namespace cdiff
