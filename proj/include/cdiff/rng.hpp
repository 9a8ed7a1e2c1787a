#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cdiff/error.hpp"

namespace cdiff {

// Deterministic random source. mt19937_64 is fully specified by the
// standard, and all variate transformations live here (library
// distributions are implementation-defined), so identical seeds give
// identical streams on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Sub-seed derived from a master seed; mix(seed, 0) differs from seed.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Independent stream derived from a master seed.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(mix(seed, stream_id));
    }

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    // Standard normal via Box-Muller (second value discarded to keep
    // the stream stateless).
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double exponential(double rate) {
        require(rate > 0.0, "exponential: rate must be > 0");
        return -std::log(uniform_pos()) / rate;
    }

    // Uniform integer on [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        require(hi >= lo, "uniform_int: empty range");
        auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    // Index sampled proportionally to non-negative weights (need not be
    // normalized).
    int categorical(const double* w, int k) {
        double total = 0.0;
        for (int i = 0; i < k; ++i) total += w[i];
        require(total > 0.0, "categorical: weights sum to zero");
        double u = uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < k; ++i) {
            acc += w[i];
            if (u < acc) return i;
        }
        return k - 1;
    }

    int categorical(const std::vector<double>& w) {
        return categorical(w.data(), static_cast<int>(w.size()));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace cdiff
