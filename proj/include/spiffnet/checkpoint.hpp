#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spiffnet/tensor.hpp"

namespace spiffnet::ckpt {

// On-disk container: magic "SPFF", u32 LE version (= 1), u32 config-block
// byte length, UTF-8 "key = value" lines, u32 tensor count, then per tensor
// u16 name length + name, u8 ndim, ndim u32 dims, raw f32 LE payload.
constexpr uint32_t kVersion = 1;

struct TensorEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct CheckpointData {
    std::vector<std::pair<std::string, std::string>> config;  // ordered
    std::vector<TensorEntry> tensors;

    std::optional<std::string> config_get(const std::string& key) const {
        for (const auto& [k, v] : config)
            if (k == key) return v;
        return std::nullopt;
    }
    void config_set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : config)
            if (k == key) {
                v = value;
                return;
            }
        config.emplace_back(key, value);
    }
    const TensorEntry* find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }
};

// Throws FormatError on bad magic, unsupported version, truncation or
// duplicate tensor names; IoError on filesystem problems.
CheckpointData read_checkpoint(const std::string& path);
void write_checkpoint(const CheckpointData& data, const std::string& path);

}  // namespace spiffnet::ckpt
