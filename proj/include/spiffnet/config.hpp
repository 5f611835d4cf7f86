#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spiffnet/common.hpp"

namespace spiffnet {

// Architecture hyperparameters. Defaults are the full-size model.
struct ModelConfig {
    int64_t scale = 4;     // upscaling factor r, one of {2,3,4}
    int64_t groups = 10;   // number of SPIFFNet groups K
    int64_t channels = 64; // feature dim C
    int64_t heads = 4;     // attention heads h
    int64_t window = 16;   // local / contextual window side G
    int64_t mlp_ratio = 2; // transformer MLP hidden expansion
    int64_t ffn_ratio = 2; // gated FFN hidden expansion
    double gumbel_tau = 1.0;
    bool enable_cspia = true;
    bool enable_csffa = true;

    void validate() const {
        require<ValueError>(scale >= 2 && scale <= 4, "scale must be 2, 3 or 4");
        require<ValueError>(groups >= 0, "groups must be non-negative");
        require<ValueError>(channels > 0 && heads > 0 && channels % heads == 0,
                            "channels must be a positive multiple of heads");
        require<ValueError>(window > 0, "window must be positive");
        require<ValueError>(mlp_ratio > 0 && ffn_ratio > 0, "ratios must be positive");
        require<ValueError>(gumbel_tau > 0.0, "gumbel_tau must be positive");
    }
};

struct TrainConfig {
    double lr = 4e-4;
    double lr_min = 5e-7;
    int64_t batch = 8;
    int64_t epochs = 2000;
    int64_t steps_per_epoch = 100;
    int64_t patch = 48;  // LR patch side
    uint64_t seed = 1;

    void validate() const {
        require<ValueError>(lr_min < lr, "lr_min must be below lr");
        require<ValueError>(batch > 0 && epochs > 0 && steps_per_epoch > 0 && patch > 0,
                            "counts must be positive");
    }
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

// "key = value" lines, '#' comments; unknown keys are rejected.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

std::string format_double(double v);  // round-trip exact
std::vector<std::pair<std::string, std::string>> model_config_kv(const ModelConfig& m);
ModelConfig model_config_from_kv(const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace spiffnet
