#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdiff/error.hpp"

namespace cdiff {

// Marked event sequence: strictly positive inter-arrival times paired
// with integer event types in [0, num_types).
struct EventSequence {
    std::vector<double> deltas;
    std::vector<int> types;
    int num_types = 0;

    int length() const { return static_cast<int>(deltas.size()); }
};

// Throws unless lengths match, every delta > 0 and every type is in range.
void validate(const EventSequence& seq, const std::string& context = "");

// Cumulative arrival times; strictly increasing for valid sequences.
std::vector<double> arrival_times(const EventSequence& seq);

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct Dataset {
    std::vector<EventSequence> sequences;
    std::vector<Split> splits; // parallel to sequences
    int num_types = 0;
    std::string unit;

    std::vector<int> indices_of(Split s) const;
};

// One forecasting problem: exactly one horizon form is set.
struct ForecastTask {
    EventSequence context;
    EventSequence target;
    std::optional<int> horizon_n;
    std::optional<double> horizon_interval;
};

// Last n events become the target, everything before them the context.
// Requires length(seq) > n >= 1 so the context is non-empty.
ForecastTask split_context_target(const EventSequence& seq, int n);

// JSONL exchange format. Line 1 is a header {"K":<int>,"unit":"<str>"},
// each further line one sequence {"deltas":[...],"types":[...],"split":...}.
Dataset load_jsonl(const std::string& path);
void write_jsonl(const Dataset& data, const std::string& path);

} // namespace cdiff
