#include <doctest.h>

#include <cmath>

#include "cdiff/metrics.hpp"
#include "cdiff/rng.hpp"

using namespace cdiff;

namespace {

EventSequence make_seq(std::vector<double> deltas, std::vector<int> types, int k) {
    EventSequence s;
    s.deltas = std::move(deltas);
    s.types = std::move(types);
    s.num_types = k;
    return s;
}

EventSequence random_seq(Rng& rng, int max_len, int k) {
    EventSequence s;
    s.num_types = k;
    int len = rng.uniform_int(0, max_len);
    for (int i = 0; i < len; ++i) {
        s.deltas.push_back(rng.uniform_pos() * 3.0);
        s.types.push_back(rng.uniform_int(0, k - 1));
    }
    return s;
}

} // namespace

TEST_CASE("otd basics") {
    EventSequence a = make_seq({1.0, 0.5, 2.0}, {0, 1, 0}, 2);
    CHECK(otd(a, a, 1.0) == 0.0);

    EventSequence empty = make_seq({}, {}, 2);
    EventSequence four = make_seq({1, 1, 1, 1}, {0, 1, 0, 1}, 2);
    CHECK(otd(empty, four, 0.7) == doctest::Approx(4 * 0.7));
    CHECK(otd(four, empty, 0.7) == doctest::Approx(4 * 0.7));

    // Matching costs 0.4; deleting both costs 0.2.
    EventSequence p = make_seq({1.0}, {0}, 1);
    EventSequence t = make_seq({1.4}, {0}, 1);
    CHECK(otd(p, t, 0.1) == doctest::Approx(0.2));
    CHECK(otd(p, t, 1.0) == doctest::Approx(0.4));

    CHECK_THROWS_AS(otd(p, t, 0.0), Error);
    CHECK_THROWS_AS(otd(p, t, -1.0), Error);
}

TEST_CASE("otd only matches events of identical type") {
    EventSequence p = make_seq({1.0}, {0}, 2);
    EventSequence t = make_seq({1.0}, {1}, 2);
    // No match possible: delete + insert.
    CHECK(otd(p, t, 0.3) == doctest::Approx(0.6));
}

TEST_CASE("otd dynamic program equals brute force on random pairs") {
    Rng rng(616);
    for (int trial = 0; trial < 300; ++trial) {
        EventSequence p = random_seq(rng, 4, 3);
        EventSequence t = random_seq(rng, 4, 3);
        for (double c : kOtdCosts) {
            double fast = otd(p, t, c);
            double slow = otd_bruteforce(p, t, c);
            CHECK(std::abs(fast - slow) < 1e-9);
        }
    }
}

TEST_CASE("otd_bruteforce refuses long sequences and is symmetric") {
    Rng rng(99);
    EventSequence long_seq = random_seq(rng, 4, 2);
    long_seq.deltas.assign(7, 1.0);
    long_seq.types.assign(7, 0);
    EventSequence ok = make_seq({1.0}, {0}, 2);
    CHECK_THROWS_AS(otd_bruteforce(long_seq, ok, 1.0), Error);

    EventSequence empty = make_seq({}, {}, 2);
    CHECK(otd_bruteforce(empty, empty, 1.0) == 0.0);

    for (int trial = 0; trial < 60; ++trial) {
        EventSequence a = random_seq(rng, 4, 2);
        EventSequence b = random_seq(rng, 4, 2);
        CHECK(otd_bruteforce(a, b, 1.5) == doctest::Approx(otd_bruteforce(b, a, 1.5)));
    }
}

TEST_CASE("otd is bounded by deleting everything") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        EventSequence a = random_seq(rng, 6, 3);
        EventSequence b = random_seq(rng, 6, 3);
        for (double c : {0.05, 1.0, 4.0})
            CHECK(otd(a, b, c) <= c * (a.length() + b.length()) + 1e-12);
    }
}

TEST_CASE("otd_avg averages the seven per-cost values, nondecreasing in cost") {
    Rng rng(212);
    EventSequence a = random_seq(rng, 6, 3);
    EventSequence b = random_seq(rng, 6, 3);
    auto [avg, per_cost] = otd_avg(a, b);
    REQUIRE(per_cost.size() == 7);
    double mean = 0.0;
    double prev = -1.0;
    for (double c : kOtdCosts) {
        double v = per_cost.at(c);
        CHECK(v >= prev);
        prev = v;
        mean += v;
    }
    mean /= 7.0;
    CHECK(std::abs(avg - mean) < 1e-12);

    auto [zero_avg, zero_costs] = otd_avg(a, a);
    CHECK(zero_avg == 0.0);
    for (auto& [c, v] : zero_costs) CHECK(v == 0.0);
}

TEST_CASE("rmse_e hand example and permutation invariance") {
    // One task, K=2, truth counts (3,1), pred counts (1,1) -> sqrt(4/2).
    EventSequence truth = make_seq({1, 1, 1, 1}, {0, 0, 0, 1}, 2);
    EventSequence pred = make_seq({1, 1}, {0, 1}, 2);
    CHECK(rmse_e({{pred, truth}}, 2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    CHECK(rmse_e({{truth, truth}, {pred, pred}}, 2) == 0.0);

    Rng rng(5);
    std::vector<TaskPair> tasks;
    for (int i = 0; i < 6; ++i) tasks.push_back({random_seq(rng, 5, 3), random_seq(rng, 5, 3)});
    double base = rmse_e(tasks, 3);
    std::reverse(tasks.begin(), tasks.end());
    CHECK(rmse_e(tasks, 3) == doctest::Approx(base).epsilon(1e-15));

    CHECK_THROWS_AS(rmse_e({}, 3), Error);
}

TEST_CASE("time metrics formulas") {
    // Single position: truth 2, pred 1.
    EventSequence truth = make_seq({2.0}, {0}, 1);
    EventSequence pred = make_seq({1.0}, {0}, 1);
    TimeMetrics tm = time_metrics({{pred, truth}});
    CHECK(tm.rmse_x == doctest::Approx(1.0));
    CHECK(tm.mape == doctest::Approx(50.0));
    CHECK(tm.smape == doctest::Approx(200.0 / 3.0).epsilon(1e-9));

    TimeMetrics zero = time_metrics({{truth, truth}});
    CHECK(zero.rmse_x == 0.0);
    CHECK(zero.mape == 0.0);
    CHECK(zero.smape == 0.0);

    EventSequence wrong_len = make_seq({1.0, 1.0}, {0, 0}, 1);
    CHECK_THROWS_AS(time_metrics({{wrong_len, truth}}), Error);

    Rng rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        EventSequence a = random_seq(rng, 6, 2);
        if (a.length() == 0) continue;
        EventSequence b = a;
        for (double& d : b.deltas) d = rng.uniform_pos() * 5.0;
        TimeMetrics m = time_metrics({{b, a}});
        CHECK(m.smape >= 0.0);
        CHECK(m.smape <= 200.0);
        CHECK(m.mape >= 0.0);
    }
}

TEST_CASE("count metrics") {
    EventSequence five = make_seq({1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}, 1);
    EventSequence three = make_seq({1, 1, 1}, {0, 0, 0}, 1);
    EventSequence two = make_seq({1, 1}, {0, 0}, 1);
    auto [mae, rmse] = count_metrics({{three, five}, {two, two}});
    CHECK(mae == doctest::Approx(1.0));
    CHECK(rmse == doctest::Approx(std::sqrt(2.0)));

    auto [z_mae, z_rmse] = count_metrics({{two, two}});
    CHECK(z_mae == 0.0);
    CHECK(z_rmse == 0.0);

    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<TaskPair> tasks;
        for (int i = 0; i < 5; ++i) tasks.push_back({random_seq(rng, 8, 2), random_seq(rng, 8, 2)});
        auto [m, r] = count_metrics(tasks);
        CHECK(r >= m - 1e-12); // quadratic mean dominates the mean
    }

    CHECK_THROWS_AS(count_metrics({}), Error);
}

TEST_CASE("report assembles per-mode fields and serializes") {
    Rng rng(8);
    std::vector<TaskPair> tasks;
    for (int i = 0; i < 4; ++i) {
        EventSequence truth = random_seq(rng, 5, 3);
        if (truth.length() == 0) {
            truth.deltas.push_back(1.0);
            truth.types.push_back(0);
        }
        EventSequence pred = truth;
        tasks.push_back({pred, truth});
    }
    MetricsReport next_n = compute_report(tasks, 3, true, false);
    CHECK(next_n.time.has_value());
    CHECK_FALSE(next_n.counts.has_value());
    CHECK(next_n.otd_avg == 0.0);
    CHECK(next_n.rmse_e == 0.0);
    CHECK(next_n.time->smape == 0.0);
    CHECK(next_n.n_tasks == 4);

    MetricsReport interval = compute_report(tasks, 3, false, true);
    CHECK_FALSE(interval.time.has_value());
    CHECK(interval.counts.has_value());

    std::string header = report_csv_header();
    std::string row = report_csv_row("cdiff", next_n);
    CHECK(header.find("otd_0.05") != std::string::npos);
    CHECK(header.find("smape") != std::string::npos);
    CHECK(std::count(header.begin(), header.end(), ',') ==
          std::count(row.begin(), row.end(), ','));
    CHECK(report_json("cdiff", next_n).find("\"otd_avg\"") != std::string::npos);
}
