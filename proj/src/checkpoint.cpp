#include "midt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace midt {

using nlohmann::json;

void quantize_to_f32(ParameterStore& store) {
    for (auto& [name, e] : store.entries)
        for (auto& v : e.value.data) v = double(float(v));
}

void save_checkpoint(const ParameterStore& store, const std::string& path,
                     const std::string& config_hash) {
    json manifest;
    manifest["magic"] = "MIDTCKPT";
    manifest["version"] = 1;
    manifest["config_hash"] = config_hash;
    json params = json::array();
    size_t offset = 0;
    for (const auto& [name, e] : store.entries) {
        json p;
        p["name"] = name;
        p["shape"] = e.value.shape;
        p["offset"] = offset;
        offset += e.value.size() * 4;
        params.push_back(std::move(p));
    }
    manifest["params"] = std::move(params);
    manifest["payload_bytes"] = offset;

    std::ofstream mout(path);
    if (!mout) throw Error("save_checkpoint: cannot open '" + path + "'");
    mout << manifest.dump(1) << "\n";

    std::ofstream bout(path + ".bin", std::ios::binary);
    if (!bout) throw Error("save_checkpoint: cannot open '" + path + ".bin'");
    for (const auto& [name, e] : store.entries)
        for (double v : e.value.data) {
            float f = float(v);
            char bytes[4];
            std::memcpy(bytes, &f, 4);
            bout.write(bytes, 4);
        }
}

ParameterStore load_checkpoint(const std::string& path, std::string* config_hash) {
    std::ifstream min(path);
    if (!min) throw Error("load_checkpoint: cannot open '" + path + "'");
    json manifest;
    try {
        min >> manifest;
    } catch (const json::exception& e) {
        throw Error("load_checkpoint: malformed manifest: " + std::string(e.what()));
    }
    if (!manifest.contains("magic") || manifest["magic"] != "MIDTCKPT")
        throw Error("load_checkpoint: bad magic");
    if (manifest["version"] != 1) throw Error("load_checkpoint: unsupported version");
    if (config_hash) *config_hash = manifest.value("config_hash", "");

    std::ifstream bin(path + ".bin", std::ios::binary);
    if (!bin) throw Error("load_checkpoint: cannot open '" + path + ".bin'");
    bin.seekg(0, std::ios::end);
    size_t bytes = size_t(bin.tellg());
    bin.seekg(0);
    size_t expected = manifest.value("payload_bytes", size_t(0));
    if (bytes != expected)
        throw Error("load_checkpoint: payload length mismatch (have " + std::to_string(bytes) +
                    ", manifest says " + std::to_string(expected) + ")");

    // validate the offset/shape chain before reading, so a tampered shape is
    // reported against the right parameter
    const auto& params = manifest.at("params");
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        std::string name = p.at("name").get<std::string>();
        size_t n = Tensor::size_from_shape(p.at("shape").get<std::vector<size_t>>());
        size_t offset = p.at("offset").get<size_t>();
        size_t end = i + 1 < params.size() ? params[i + 1].at("offset").get<size_t>() : bytes;
        if (i == 0 && offset != 0)
            throw Error("load_checkpoint: shape/offset mismatch for parameter '" + name + "'");
        if (end < offset || end - offset != n * 4)
            throw Error("load_checkpoint: shape/offset mismatch for parameter '" + name + "'");
    }

    ParameterStore store;
    for (const auto& p : params) {
        std::string name = p.at("name").get<std::string>();
        std::vector<size_t> shape = p.at("shape").get<std::vector<size_t>>();
        size_t n = Tensor::size_from_shape(shape);
        Tensor t = Tensor::zeros(shape);
        std::vector<char> buf(n * 4);
        bin.read(buf.data(), std::streamsize(buf.size()));
        if (!bin) throw Error("load_checkpoint: payload length mismatch (truncated)");
        for (size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, &buf[i * 4], 4);
            t.data[i] = double(f);
        }
        store.add(name, std::move(t));
    }
    return store;
}

}  // namespace midt
