#include <cstring>
#include <fstream>
#include <json.hpp>

#include "cdiff/trainer.hpp"

namespace cdiff {

using nlohmann::json;

namespace {

const char* kB64Chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        unsigned v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64Chars[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64Chars[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        if (c == '=') return -1;
        throw Error("checkpoint: invalid base64 character");
    };
    require(s.size() % 4 == 0, "checkpoint: truncated base64 payload");
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    for (size_t i = 0; i < s.size(); i += 4) {
        int a = val(s[i]), b = val(s[i + 1]), c = val(s[i + 2]), d = val(s[i + 3]);
        require(a >= 0 && b >= 0, "checkpoint: malformed base64 quad");
        unsigned v = (a << 18) | (b << 12) | ((c < 0 ? 0 : c) << 6) | (d < 0 ? 0 : d);
        out.push_back((v >> 16) & 0xFF);
        if (c >= 0) out.push_back((v >> 8) & 0xFF);
        if (d >= 0) out.push_back(v & 0xFF);
    }
    return out;
}

// Doubles are serialized little-endian regardless of host order.
std::string encode_doubles(const std::vector<double>& xs) {
    std::vector<unsigned char> bytes(xs.size() * 8);
    for (size_t i = 0; i < xs.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &xs[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = (bits >> (8 * b)) & 0xFF;
    }
    return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> decode_doubles(const std::string& payload, size_t expected) {
    std::vector<unsigned char> bytes = base64_decode(payload);
    require(bytes.size() == expected * 8, "checkpoint: parameter payload size mismatch");
    std::vector<double> xs(expected);
    for (size_t i = 0; i < expected; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&xs[i], &bits, 8);
    }
    return xs;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j;
    j["model"]["embed_dim"] = ckpt.cfg.embed_dim;
    j["model"]["num_heads"] = ckpt.cfg.num_heads;
    j["model"]["num_layers"] = ckpt.cfg.num_layers;
    j["model"]["ff_dim"] = ckpt.cfg.ff_dim;
    j["model"]["num_types"] = ckpt.cfg.num_types;
    j["model"]["horizon"] = ckpt.cfg.horizon;
    j["model"]["diffusion_steps"] = ckpt.cfg.diffusion_steps;
    j["model"]["learning_rate"] = ckpt.cfg.learning_rate;
    j["model"]["order"] = order_name(ckpt.cfg.order);
    j["boxcox"]["lambda"] = ckpt.scaler.boxcox.lambda;
    j["boxcox"]["shift"] = ckpt.scaler.boxcox.shift;
    j["boxcox"]["scale"] = ckpt.scaler.boxcox.scale;
    j["boxcox"]["center"] = ckpt.scaler.center;
    j["boxcox"]["spread"] = ckpt.scaler.spread;
    j["boxcox"]["z_lo"] = ckpt.scaler.z_lo;
    j["boxcox"]["z_hi"] = ckpt.scaler.z_hi;
    j["schedule"]["kind"] = "cosine";
    j["schedule"]["steps"] = ckpt.schedule_steps;
    j["interval_n"] = ckpt.interval_n;
    j["meta"]["best_epoch"] = ckpt.best_epoch;
    j["meta"]["best_val_loss"] = ckpt.best_val_loss;
    j["meta"]["seed"] = ckpt.seed;
    for (const auto& [name, mat] : ckpt.params) {
        j["params"][name]["rows"] = mat.rows;
        j["params"][name]["cols"] = mat.cols;
        j["params"][name]["data"] = encode_doubles(mat.a);
    }
    std::ofstream out(path);
    require(out.good(), "cannot open checkpoint file for writing: " + path);
    out << j.dump(2) << "\n";
    require(out.good(), "checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open checkpoint file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw Error("checkpoint parse error in " + path + ": " + e.what());
    }
    Checkpoint ckpt;
    try {
        const json& m = j.at("model");
        ckpt.cfg.embed_dim = m.at("embed_dim").get<int>();
        ckpt.cfg.num_heads = m.at("num_heads").get<int>();
        ckpt.cfg.num_layers = m.at("num_layers").get<int>();
        ckpt.cfg.ff_dim = m.at("ff_dim").get<int>();
        ckpt.cfg.num_types = m.at("num_types").get<int>();
        ckpt.cfg.horizon = m.at("horizon").get<int>();
        ckpt.cfg.diffusion_steps = m.at("diffusion_steps").get<int>();
        ckpt.cfg.learning_rate = m.at("learning_rate").get<double>();
        ckpt.cfg.order = order_from_name(m.at("order").get<std::string>());
        ckpt.scaler.boxcox.lambda = j.at("boxcox").at("lambda").get<double>();
        ckpt.scaler.boxcox.shift = j.at("boxcox").at("shift").get<double>();
        ckpt.scaler.boxcox.scale = j.at("boxcox").at("scale").get<double>();
        ckpt.scaler.center = j.at("boxcox").at("center").get<double>();
        ckpt.scaler.spread = j.at("boxcox").at("spread").get<double>();
        ckpt.scaler.z_lo = j.at("boxcox").at("z_lo").get<double>();
        ckpt.scaler.z_hi = j.at("boxcox").at("z_hi").get<double>();
        ckpt.schedule_steps = j.at("schedule").at("steps").get<int>();
        ckpt.interval_n = j.at("interval_n").get<int>();
        ckpt.best_epoch = j.at("meta").at("best_epoch").get<int>();
        ckpt.best_val_loss = j.at("meta").at("best_val_loss").get<double>();
        ckpt.seed = j.at("meta").at("seed").get<std::uint64_t>();
        for (const auto& [name, pj] : j.at("params").items()) {
            Mat mat(pj.at("rows").get<int>(), pj.at("cols").get<int>());
            mat.a = decode_doubles(pj.at("data").get<std::string>(), mat.size());
            ckpt.params.emplace(name, std::move(mat));
        }
    } catch (const json::exception& e) {
        throw Error("checkpoint field error in " + path + ": " + e.what());
    }
    return ckpt;
}

} // namespace cdiff
