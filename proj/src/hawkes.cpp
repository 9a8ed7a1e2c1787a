#include "cdiff/hawkes.hpp"

#include <algorithm>
#include <cmath>

namespace cdiff {

namespace {

// Kind d caps at 4x its origin value: 0.1 (0.5 + y)^2 reaches 0.1 at
// y = 0.5 and follows a 0.1 exp(-0.1 (y - 0.5)) tail beyond.
constexpr double kCapOnset = 0.5;
constexpr double kCapValue = 0.1;

} // namespace

char impact_kind_char(ImpactKind k) { return static_cast<char>('a' + static_cast<int>(k)); }

ImpactKind impact_kind_from_char(char c) {
    require(c >= 'a' && c <= 'd', std::string("unknown impact kind '") + c + "'");
    return static_cast<ImpactKind>(c - 'a');
}

double impact(ImpactKind kind, double y) {
    require(y >= 0.0, "impact: elapsed time must be >= 0");
    switch (kind) {
        case ImpactKind::a:
            return 0.99 * std::exp(-0.4 * y);
        case ImpactKind::b:
            return 0.01 * std::exp(-0.8 * y) + 0.03 * std::exp(-0.6 * y) +
                   0.05 * std::exp(-0.4 * y);
        case ImpactKind::c:
            return 0.25 * std::abs(std::cos(3.0 * y)) * std::exp(-0.1 * y);
        default:
            if (y <= kCapOnset) return 0.1 * (0.5 + y) * (0.5 + y);
            return kCapValue * std::exp(-0.1 * (y - kCapOnset));
    }
}

double impact_envelope(ImpactKind kind, double y) {
    require(y >= 0.0, "impact_envelope: elapsed time must be >= 0");
    switch (kind) {
        case ImpactKind::a:
        case ImpactKind::b:
            return impact(kind, y); // already non-increasing
        case ImpactKind::c:
            return 0.25 * std::exp(-0.1 * y);
        default:
            if (y <= kCapOnset) return kCapValue;
            return kCapValue * std::exp(-0.1 * (y - kCapOnset));
    }
}

double impact_integral(ImpactKind kind) {
    switch (kind) {
        case ImpactKind::a:
            return 0.99 / 0.4;
        case ImpactKind::b:
            return 0.01 / 0.8 + 0.03 / 0.6 + 0.05 / 0.4;
        case ImpactKind::c: {
            // Composite Simpson out to where the tail is negligible;
            // computed once.
            static const double cached = [] {
                const double hi = 400.0;
                const int n = 400000;
                double h = hi / n;
                double acc = impact(ImpactKind::c, 0.0) + impact(ImpactKind::c, hi);
                for (int i = 1; i < n; ++i)
                    acc += impact(ImpactKind::c, i * h) * (i % 2 == 1 ? 4.0 : 2.0);
                return acc * h / 3.0;
            }();
            return cached;
        }
        default:
            // Polynomial head plus exponential tail of the capped kernel.
            return 0.1 * (std::pow(0.5 + kCapOnset, 3.0) - std::pow(0.5, 3.0)) / 3.0 +
                   kCapValue / 0.1;
    }
}

double branching_radius(const HawkesSpec& spec) {
    const int k = spec.num_types;
    std::vector<std::vector<double>> gamma(k, std::vector<double>(k, 0.0));
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i)
            gamma[j][i] = spec.impact_scale * impact_integral(spec.impact_ids[j][i]);

    // Power iteration; the matrix is non-negative so the dominant
    // eigenvalue is real and reached from a positive start.
    std::vector<double> v(k, 1.0);
    double radius = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> w(k, 0.0);
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < k; ++i) w[j] += gamma[j][i] * v[i];
        double norm = 0.0;
        for (double x : w) norm = std::max(norm, std::abs(x));
        if (norm == 0.0) return 0.0;
        for (double& x : w) x /= norm;
        v = std::move(w);
        radius = norm;
    }
    return radius;
}

HawkesSpec make_hawkes_spec(int num_types, std::vector<double> base_rates, double impact_scale,
                            std::uint64_t seed) {
    require(num_types >= 1, "hawkes: need at least one event type");
    require(static_cast<int>(base_rates.size()) == num_types, "hawkes: one base rate per type");
    require(impact_scale >= 0.0, "hawkes: impact_scale must be >= 0");

    HawkesSpec spec;
    spec.num_types = num_types;
    spec.base_rates = std::move(base_rates);
    spec.impact_scale = impact_scale;
    spec.seed = seed;
    spec.impact_ids.assign(num_types, std::vector<ImpactKind>(num_types, ImpactKind::a));

    Rng rng = Rng::stream(seed, 0x4B45524EULL); // kernel-draw stream
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (int j = 0; j < num_types; ++j)
            for (int i = 0; i < num_types; ++i)
                spec.impact_ids[j][i] = static_cast<ImpactKind>(rng.uniform_int(0, 3));
        if (branching_radius(spec) < 1.0) {
            validate_spec(spec);
            return spec;
        }
    }
    throw Error("make_hawkes_spec: no stable kernel assignment found; lower impact_scale");
}

void validate_spec(const HawkesSpec& spec) {
    require(spec.num_types >= 1, "hawkes: need at least one event type");
    require(static_cast<int>(spec.base_rates.size()) == spec.num_types,
            "hawkes: one base rate per type");
    for (double mu : spec.base_rates) require(mu > 0.0, "hawkes: base rates must be > 0");
    require(static_cast<int>(spec.impact_ids.size()) == spec.num_types,
            "hawkes: impact matrix must be K x K");
    for (const auto& row : spec.impact_ids)
        require(static_cast<int>(row.size()) == spec.num_types, "hawkes: impact matrix must be K x K");
    double radius = branching_radius(spec);
    require(radius < 1.0, "hawkes: unstable spec (branching radius " + std::to_string(radius) + ")");
}

EventSequence simulate(const HawkesSpec& spec, int n_events, Rng& rng) {
    validate_spec(spec);
    require(n_events >= 1, "simulate: need at least one event");
    const int k = spec.num_types;
    double mu_total = 0.0;
    for (double mu : spec.base_rates) mu_total += mu;

    // Past events older than this contribute below 1e-14 through every
    // envelope and are skipped.
    const double horizon = 350.0;

    std::vector<double> times;
    std::vector<int> types;
    times.reserve(n_events);
    types.reserve(n_events);
    size_t window_start = 0;
    double now = 0.0;

    std::vector<double> lambda(k);
    while (static_cast<int>(times.size()) < n_events) {
        while (window_start < times.size() && now - times[window_start] > horizon) ++window_start;

        double bound = 0.0;
        for (int j = 0; j < k; ++j) {
            double b = spec.base_rates[j];
            for (size_t e = window_start; e < times.size(); ++e)
                b += spec.impact_scale *
                     impact_envelope(spec.impact_ids[j][types[e]], now - times[e]);
            bound += b;
        }

        double proposed = now + rng.exponential(bound);
        double total = 0.0;
        for (int j = 0; j < k; ++j) {
            double l = spec.base_rates[j];
            for (size_t e = window_start; e < times.size(); ++e) {
                double y = proposed - times[e];
                if (y > horizon) continue;
                l += spec.impact_scale * impact(spec.impact_ids[j][types[e]], y);
            }
            lambda[j] = l;
            total += l;
        }
        require(total <= bound * (1.0 + 1e-9) + 1e-12,
                "simulate: thinning bound violated (intensity " + std::to_string(total) +
                    " > bound " + std::to_string(bound) + ")");
        require(total <= 1e6 * mu_total, "simulate: runaway intensity");

        now = proposed;
        if (rng.uniform() * bound <= total) {
            int type = rng.categorical(lambda.data(), k);
            times.push_back(now);
            types.push_back(type);
        }
    }

    EventSequence seq;
    seq.num_types = k;
    seq.types = std::move(types);
    seq.deltas.resize(times.size());
    double prev = 0.0;
    for (size_t i = 0; i < times.size(); ++i) {
        seq.deltas[i] = times[i] - prev;
        prev = times[i];
    }
    validate(seq, "hawkes simulation");
    return seq;
}

Dataset generate_hawkes_dataset(const HawkesSpec& spec, int n_train, int n_val, int n_test,
                                int seq_len, const std::string& unit) {
    require(n_train >= 0 && n_val >= 0 && n_test >= 0, "generate: negative split size");
    require(seq_len >= 1, "generate: sequence length must be >= 1");
    Dataset data;
    data.num_types = spec.num_types;
    data.unit = unit;
    int total = n_train + n_val + n_test;
    for (int s = 0; s < total; ++s) {
        Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(s) + 1);
        data.sequences.push_back(simulate(spec, seq_len, rng));
        data.splits.push_back(s < n_train ? Split::train
                                          : (s < n_train + n_val ? Split::val : Split::test));
    }
    return data;
}

// ---------------------------------------------------------------------------
// Poisson baseline
// ---------------------------------------------------------------------------

PoissonBaseline fit_poisson(const Dataset& data) {
    PoissonBaseline b;
    b.type_probs.assign(data.num_types, 0.0);
    double delta_sum = 0.0;
    long count = 0;
    for (size_t s = 0; s < data.sequences.size(); ++s) {
        if (data.splits[s] != Split::train) continue;
        const EventSequence& seq = data.sequences[s];
        for (int i = 0; i < seq.length(); ++i) {
            delta_sum += seq.deltas[i];
            b.type_probs[seq.types[i]] += 1.0;
            ++count;
        }
    }
    require(count > 0, "fit_poisson: empty train split");
    b.rate = static_cast<double>(count) / delta_sum;
    for (double& p : b.type_probs) p /= static_cast<double>(count);
    return b;
}

EventSequence poisson_forecast_n(const PoissonBaseline& b, int n, Rng& rng) {
    require(n >= 1, "poisson_forecast_n: n must be >= 1");
    EventSequence seq;
    seq.num_types = static_cast<int>(b.type_probs.size());
    seq.deltas.resize(n);
    seq.types.resize(n);
    for (int i = 0; i < n; ++i) {
        seq.deltas[i] = rng.exponential(b.rate);
        seq.types[i] = rng.categorical(b.type_probs);
    }
    return seq;
}

EventSequence poisson_forecast_interval(const PoissonBaseline& b, double t_prime, Rng& rng) {
    require(t_prime > 0.0, "poisson_forecast_interval: t_prime must be > 0");
    EventSequence seq;
    seq.num_types = static_cast<int>(b.type_probs.size());
    double total = 0.0;
    while (true) {
        double d = rng.exponential(b.rate);
        if (total + d > t_prime) break;
        total += d;
        seq.deltas.push_back(d);
        seq.types.push_back(rng.categorical(b.type_probs));
    }
    return seq;
}

} // namespace cdiff
