#include "cdiff/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>

namespace cdiff {

const std::vector<double> kOtdCosts = {0.05, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};

double otd(const EventSequence& pred, const EventSequence& truth, double c_del) {
    require(c_del > 0.0, "otd: deletion cost must be > 0");
    std::vector<double> a = arrival_times(pred);
    std::vector<double> b = arrival_times(truth);
    const int n = pred.length(), m = truth.length();

    // dp[i][j]: minimum cost of aligning the first i predicted with the
    // first j true events.
    std::vector<std::vector<double>> dp(n + 1, std::vector<double>(m + 1, 0.0));
    for (int i = 1; i <= n; ++i) dp[i][0] = i * c_del;
    for (int j = 1; j <= m; ++j) dp[0][j] = j * c_del;
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= m; ++j) {
            double best = std::min(dp[i - 1][j], dp[i][j - 1]) + c_del;
            if (pred.types[i - 1] == truth.types[j - 1])
                best = std::min(best, dp[i - 1][j - 1] + std::abs(a[i - 1] - b[j - 1]));
            dp[i][j] = best;
        }
    }
    return dp[n][m];
}

namespace {

// Enumerates matchings directly: each predicted event is either left
// unmatched or paired with a same-type true event after the previous
// partner. Structurally independent of the DP recurrence above.
double otd_brute_rec(const std::vector<double>& a, const std::vector<int>& ta,
                     const std::vector<double>& b, const std::vector<int>& tb, size_t i, size_t j,
                     double c_del) {
    if (i == a.size()) return (b.size() - j) * c_del;
    double best = c_del + otd_brute_rec(a, ta, b, tb, i + 1, j, c_del);
    for (size_t jj = j; jj < b.size(); ++jj) {
        if (ta[i] != tb[jj]) continue;
        double cost = std::abs(a[i] - b[jj]) + (jj - j) * c_del +
                      otd_brute_rec(a, ta, b, tb, i + 1, jj + 1, c_del);
        best = std::min(best, cost);
    }
    return best;
}

} // namespace

double otd_bruteforce(const EventSequence& pred, const EventSequence& truth, double c_del) {
    require(pred.length() <= 6 && truth.length() <= 6,
            "otd_bruteforce: refuses sequences longer than 6 events");
    require(c_del > 0.0, "otd_bruteforce: deletion cost must be > 0");
    return otd_brute_rec(arrival_times(pred), pred.types, arrival_times(truth), truth.types, 0, 0,
                         c_del);
}

std::pair<double, std::map<double, double>> otd_avg(const EventSequence& pred,
                                                    const EventSequence& truth) {
    std::map<double, double> per_cost;
    double sum = 0.0;
    for (double c : kOtdCosts) {
        double v = otd(pred, truth, c);
        per_cost[c] = v;
        sum += v;
    }
    return {sum / kOtdCosts.size(), std::move(per_cost)};
}

double rmse_e(const std::vector<TaskPair>& tasks, int num_types) {
    require(!tasks.empty(), "rmse_e: empty task list");
    double acc = 0.0;
    for (const auto& [pred, truth] : tasks) {
        std::vector<int> cp(num_types, 0), ct(num_types, 0);
        for (int t : pred.types) cp[t] += 1;
        for (int t : truth.types) ct[t] += 1;
        double per_task = 0.0;
        for (int k = 0; k < num_types; ++k) {
            double d = ct[k] - cp[k];
            per_task += d * d;
        }
        acc += per_task / num_types;
    }
    return std::sqrt(acc / tasks.size());
}

TimeMetrics time_metrics(const std::vector<TaskPair>& tasks) {
    require(!tasks.empty(), "time_metrics: empty task list");
    double sq = 0.0, mape = 0.0, smape = 0.0;
    for (const auto& [pred, truth] : tasks) {
        require(pred.length() == truth.length(), "time_metrics: length mismatch");
        const int n = truth.length();
        require(n >= 1, "time_metrics: empty sequences");
        double task_mape = 0.0, task_smape = 0.0;
        for (int i = 0; i < n; ++i) {
            double err = std::abs(truth.deltas[i] - pred.deltas[i]);
            sq += err * err;
            task_mape += err / std::abs(truth.deltas[i]);
            task_smape += 2.0 * err / (std::abs(truth.deltas[i]) + std::abs(pred.deltas[i]));
        }
        mape += 100.0 * task_mape / n;
        smape += 100.0 * task_smape / n;
    }
    TimeMetrics out;
    out.rmse_x = std::sqrt(sq / tasks.size());
    out.mape = mape / tasks.size();
    out.smape = smape / tasks.size();
    return out;
}

std::pair<double, double> count_metrics(const std::vector<TaskPair>& tasks) {
    require(!tasks.empty(), "count_metrics: empty task list");
    double mae = 0.0, mse = 0.0;
    for (const auto& [pred, truth] : tasks) {
        double d = std::abs(truth.length() - pred.length());
        mae += d;
        mse += d * d;
    }
    return {mae / tasks.size(), std::sqrt(mse / tasks.size())};
}

MetricsReport compute_report(const std::vector<TaskPair>& tasks, int num_types, bool with_time,
                             bool with_counts) {
    require(!tasks.empty(), "compute_report: empty task list");
    MetricsReport report;
    report.n_tasks = static_cast<int>(tasks.size());
    for (double c : kOtdCosts) report.otd_per_cost[c] = 0.0;
    for (const auto& [pred, truth] : tasks) {
        auto [avg, per_cost] = otd_avg(pred, truth);
        (void)avg;
        for (const auto& [c, v] : per_cost) report.otd_per_cost[c] += v;
    }
    double sum = 0.0;
    for (auto& [c, v] : report.otd_per_cost) {
        v /= tasks.size();
        sum += v;
    }
    report.otd_avg = sum / kOtdCosts.size();
    report.rmse_e = rmse_e(tasks, num_types);
    if (with_time) report.time = time_metrics(tasks);
    if (with_counts) report.counts = count_metrics(tasks);
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string cost_label(double c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", c);
    return buf;
}

} // namespace

std::string report_csv_header() {
    std::string h = "model,otd_avg";
    for (double c : kOtdCosts) h += ",otd_" + cost_label(c);
    h += ",rmse_e,rmse_x,mape,smape,mae_count,rmse_count,n_tasks";
    return h;
}

std::string report_csv_row(const std::string& label, const MetricsReport& report) {
    std::string row = label + "," + fmt(report.otd_avg);
    for (double c : kOtdCosts) row += "," + fmt(report.otd_per_cost.at(c));
    row += "," + fmt(report.rmse_e);
    if (report.time) {
        row += "," + fmt(report.time->rmse_x) + "," + fmt(report.time->mape) + "," +
               fmt(report.time->smape);
    } else {
        row += ",,,";
    }
    if (report.counts) {
        row += "," + fmt(report.counts->first) + "," + fmt(report.counts->second);
    } else {
        row += ",,";
    }
    row += "," + std::to_string(report.n_tasks);
    return row;
}

std::string report_json(const std::string& label, const MetricsReport& report) {
    nlohmann::json j;
    j["model"] = label;
    j["otd_avg"] = report.otd_avg;
    for (const auto& [c, v] : report.otd_per_cost) j["otd_per_cost"][cost_label(c)] = v;
    j["rmse_e"] = report.rmse_e;
    if (report.time) {
        j["rmse_x"] = report.time->rmse_x;
        j["mape"] = report.time->mape;
        j["smape"] = report.time->smape;
    }
    if (report.counts) {
        j["mae_count"] = report.counts->first;
        j["rmse_count"] = report.counts->second;
    }
    j["n_tasks"] = report.n_tasks;
    return j.dump(2);
}

} // namespace cdiff
