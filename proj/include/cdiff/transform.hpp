#pragma once

#include <vector>

#include "cdiff/error.hpp"

namespace cdiff {

// Box-Cox power transform between strictly positive inter-arrival times
// and the unrestricted real line. Raw values are first shifted by a small
// offset and scaled, then transformed with parameter lambda.
struct BoxCoxParams {
    double lambda = 0.0;
    double shift = 1e-7;
    double scale = 100.0;
};

// Maximizes the profile log-likelihood of (deltas + shift) * scale over
// lambda in [-5, 5] (golden-section search, absolute tolerance 1e-5).
// Constant data makes the likelihood flat; ties break to lambda = 1.
BoxCoxParams fit_lambda(const std::vector<double>& train_deltas);

// Forward transform; requires x_plus > 0.
double boxcox_apply(double x_plus, const BoxCoxParams& p);

// Inverse transform; the result is clamped to >= 1e-12 so the positive
// delta invariant holds for any real input.
double boxcox_invert(double y, const BoxCoxParams& p);

std::vector<double> boxcox_apply(const std::vector<double>& xs, const BoxCoxParams& p);
std::vector<double> boxcox_invert(const std::vector<double>& ys, const BoxCoxParams& p);

// Composition of the Box-Cox transform with an affine standardization of
// its output; the diffusion chain runs on the standardized values so its
// terminal noise distribution matches the data scale. The Box-Cox mapping
// itself is untouched.
struct TimeScaler {
    BoxCoxParams boxcox;
    double center = 0.0;
    double spread = 1.0;
    // Standardized range of the train deltas plus one unit of margin;
    // samplers clamp their clean estimates to it.
    double z_lo = -1e300;
    double z_hi = 1e300;
};

// Fits lambda, then the mean and standard deviation of the transformed
// train deltas (spread floors at 1e-12 for constant data), then the
// clamp range.
TimeScaler fit_time_scaler(const std::vector<double>& train_deltas);

double to_diffusion_space(double x_plus, const TimeScaler& s);
double from_diffusion_space(double z, const TimeScaler& s);
std::vector<double> to_diffusion_space(const std::vector<double>& xs, const TimeScaler& s);

} // namespace cdiff
