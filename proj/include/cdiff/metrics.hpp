#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdiff/sequences.hpp"

namespace cdiff {

// The seven deletion/insertion costs averaged for the headline score.
extern const std::vector<double> kOtdCosts;

// Minimum cost of editing `pred` into `truth`: an order-preserving
// one-to-one partial matching between same-type events, paying the
// absolute arrival-time difference (measured from the forecast start)
// per matched pair and c_del per unmatched event on either side.
// O(n*m) dynamic program.
double otd(const EventSequence& pred, const EventSequence& truth, double c_del);

// Exhaustive enumeration of all alignments; oracle for the DP. Refuses
// sequences longer than 6 events.
double otd_bruteforce(const EventSequence& pred, const EventSequence& truth, double c_del);

// OTD at each of the seven costs plus their mean.
std::pair<double, std::map<double, double>> otd_avg(const EventSequence& pred,
                                                    const EventSequence& truth);

using TaskPair = std::pair<EventSequence, EventSequence>; // (pred, truth)

// Root mean square error of per-type event counts across tasks.
double rmse_e(const std::vector<TaskPair>& tasks, int num_types);

struct TimeMetrics {
    double rmse_x = 0.0;
    double mape = 0.0;
    double smape = 0.0;
};

// Inter-arrival metrics for equal-length (next-N) forecasts; MAPE and
// sMAPE are percentages averaged per position then per task.
TimeMetrics time_metrics(const std::vector<TaskPair>& tasks);

// MAE and RMSE of the event-count difference across tasks.
std::pair<double, double> count_metrics(const std::vector<TaskPair>& tasks);

// Aggregate report; optional groups are filled per evaluation mode.
struct MetricsReport {
    double otd_avg = 0.0;
    std::map<double, double> otd_per_cost;
    double rmse_e = 0.0;
    std::optional<TimeMetrics> time;
    std::optional<std::pair<double, double>> counts; // (mae, rmse)
    int n_tasks = 0;
};

MetricsReport compute_report(const std::vector<TaskPair>& tasks, int num_types, bool with_time,
                             bool with_counts);

std::string report_csv_header();
std::string report_csv_row(const std::string& label, const MetricsReport& report);
std::string report_json(const std::string& label, const MetricsReport& report);

} // namespace cdiff
