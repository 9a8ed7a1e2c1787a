#include "cdiff/sequences.hpp"

#include <fstream>
#include <json.hpp>

namespace cdiff {

using nlohmann::json;

void validate(const EventSequence& seq, const std::string& context) {
    auto where = [&](const std::string& msg) {
        return context.empty() ? msg : context + ": " + msg;
    };
    require(seq.deltas.size() == seq.types.size(), where("deltas/types length mismatch"));
    require(seq.num_types >= 1, where("num_types must be >= 1"));
    for (size_t i = 0; i < seq.deltas.size(); ++i) {
        require(std::isfinite(seq.deltas[i]) && seq.deltas[i] > 0.0,
                where("delta at index " + std::to_string(i) + " must be > 0"));
        require(seq.types[i] >= 0 && seq.types[i] < seq.num_types,
                where("type at index " + std::to_string(i) + " out of range [0," +
                      std::to_string(seq.num_types) + ")"));
    }
}

std::vector<double> arrival_times(const EventSequence& seq) {
    std::vector<double> out(seq.deltas.size());
    double acc = 0.0;
    for (size_t i = 0; i < seq.deltas.size(); ++i) {
        acc += seq.deltas[i];
        out[i] = acc;
    }
    return out;
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw Error("unknown split tag '" + name + "'");
}

std::vector<int> Dataset::indices_of(Split s) const {
    std::vector<int> out;
    for (size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == s) out.push_back(static_cast<int>(i));
    return out;
}

ForecastTask split_context_target(const EventSequence& seq, int n) {
    require(n >= 1, "split_context_target: n must be >= 1");
    require(seq.length() > n,
            "split_context_target: sequence length " + std::to_string(seq.length()) +
                " too short for horizon " + std::to_string(n));
    ForecastTask task;
    int ctx_len = seq.length() - n;
    task.context.num_types = seq.num_types;
    task.target.num_types = seq.num_types;
    task.context.deltas.assign(seq.deltas.begin(), seq.deltas.begin() + ctx_len);
    task.context.types.assign(seq.types.begin(), seq.types.begin() + ctx_len);
    task.target.deltas.assign(seq.deltas.begin() + ctx_len, seq.deltas.end());
    task.target.types.assign(seq.types.begin() + ctx_len, seq.types.end());
    task.horizon_n = n;
    return task;
}

Dataset load_jsonl(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open dataset file: " + path);

    Dataset data;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": JSON parse error: " + e.what());
        }
        if (line_no == 1) {
            require(obj.contains("K") && obj.contains("unit"),
                    path + ":1: header must carry \"K\" and \"unit\"");
            data.num_types = obj.at("K").get<int>();
            data.unit = obj.at("unit").get<std::string>();
            require(data.num_types >= 1, path + ": header K must be >= 1");
            continue;
        }
        require(data.num_types >= 1, path + ": missing header line");
        EventSequence seq;
        seq.num_types = data.num_types;
        try {
            seq.deltas = obj.at("deltas").get<std::vector<double>>();
            seq.types = obj.at("types").get<std::vector<int>>();
        } catch (const json::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": bad sequence record: " + e.what());
        }
        Split split = Split::train;
        if (obj.contains("split")) split = split_from_name(obj.at("split").get<std::string>());
        validate(seq, path + ": sequence " + std::to_string(data.sequences.size()));
        data.sequences.push_back(std::move(seq));
        data.splits.push_back(split);
    }
    require(data.num_types >= 1, path + ": empty file (no header)");
    return data;
}

void write_jsonl(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open output file: " + path);
    json header;
    header["K"] = data.num_types;
    header["unit"] = data.unit;
    out << header.dump() << "\n";
    for (size_t i = 0; i < data.sequences.size(); ++i) {
        json obj;
        obj["deltas"] = data.sequences[i].deltas;
        obj["types"] = data.sequences[i].types;
        obj["split"] = split_name(data.splits[i]);
        out << obj.dump() << "\n";
    }
    require(out.good(), "write failed: " + path);
}

} // namespace cdiff
