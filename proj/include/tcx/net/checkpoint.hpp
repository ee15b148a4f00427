#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "tcx/net/network.hpp"

namespace tcx::net {

// Container layout:
//   8 bytes   magic "TCXCKPT1"
//   8 bytes   header length n (little-endian uint64)
//   n bytes   JSON header {"config": {...}, "meta": {...}, "tensors": [{"name", "shape", "offset"}]}
//   rest      raw little-endian float64 values, tensors back to back at their offsets (in values)

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[9] = "TCXCKPT1";

inline nlohmann::json config_to_json(const NetConfig& c) {
    return {{"heads", c.heads},   {"c_base", c.c_base}, {"levels", c.levels},     {"kernel", c.kernel},
            {"groups", c.groups}, {"C", c.C},           {"features", c.features}, {"seed", c.seed},
            {"gn_eps", c.gn_eps}};
}

inline NetConfig config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.heads = j.at("heads");
    c.c_base = j.at("c_base");
    c.levels = j.at("levels");
    c.kernel = j.at("kernel");
    c.groups = j.at("groups");
    c.C = j.at("C");
    c.features = j.at("features");
    c.seed = j.at("seed");
    c.gn_eps = j.at("gn_eps");
    return c;
}

inline void save_checkpoint(std::ostream& os, const ValueNet& net, const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json header{{"config", config_to_json(net.config())}, {"meta", meta}, {"tensors", nlohmann::json::array()}};
    std::uint64_t offset = 0;
    for (const auto& [name, a] : net.params()) {
        header["tensors"].push_back({{"name", name}, {"shape", a.shape()}, {"offset", offset}});
        offset += a.size();
    }
    const std::string h = header.dump();
    const std::uint64_t n = h.size();
    os.write(kCheckpointMagic, 8);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& [_, a] : net.params())
        os.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!os) throw CheckpointError("checkpoint: write failed");
}

struct LoadedCheckpoint {
    ValueNet net;
    nlohmann::json meta;
};

inline LoadedCheckpoint load_checkpoint(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw CheckpointError("checkpoint: bad magic");
    std::uint64_t n = 0;
    if (!is.read(reinterpret_cast<char*>(&n), sizeof n) || n > (1u << 26)) throw CheckpointError("checkpoint: bad header length");
    std::string h(n, '\0');
    if (!is.read(h.data(), static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint: truncated header");
    const auto header = nlohmann::json::parse(h);
    LoadedCheckpoint out{ValueNet(config_from_json(header.at("config"))), header.value("meta", nlohmann::json::object())};
    const auto& tensors = header.at("tensors");
    if (tensors.size() != out.net.params().size()) throw CheckpointError("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& [name, a] = out.net.params()[i];
        if (tensors[i].at("name") != name || tensors[i].at("shape").get<Shape>() != a.shape())
            throw CheckpointError("checkpoint: tensor " + name + " does not match the configured layout");
        if (!is.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double))))
            throw CheckpointError("checkpoint: truncated data for " + name);
    }
    return out;
}

inline void save_checkpoint_file(const std::string& path, const ValueNet& net, const nlohmann::json& meta = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("checkpoint: cannot open " + path);
    save_checkpoint(os, net, meta.is_null() ? nlohmann::json::object() : meta);
}

inline LoadedCheckpoint load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open " + path);
    return load_checkpoint(is);
}

}  // namespace tcx::net
