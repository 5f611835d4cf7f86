#include "spiffnet/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

namespace spiffnet {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require<FormatError>(ec == std::errc() && p == v.data() + v.size(),
                         "config: invalid integer for '" + key + "': " + v);
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double out = std::stod(v, &pos);
        require<FormatError>(pos == v.size(), "config: invalid number for '" + key + "': " + v);
        return out;
    } catch (const std::logic_error&) {
        throw FormatError("config: invalid number for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw FormatError("config: invalid boolean for '" + key + "': " + v);
}

}  // namespace

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "scale") cfg.model.scale = parse_int(key, value);
    else if (key == "groups") cfg.model.groups = parse_int(key, value);
    else if (key == "channels") cfg.model.channels = parse_int(key, value);
    else if (key == "heads") cfg.model.heads = parse_int(key, value);
    else if (key == "window") cfg.model.window = parse_int(key, value);
    else if (key == "mlp_ratio") cfg.model.mlp_ratio = parse_int(key, value);
    else if (key == "ffn_ratio") cfg.model.ffn_ratio = parse_int(key, value);
    else if (key == "gumbel_tau") cfg.model.gumbel_tau = parse_double(key, value);
    else if (key == "enable_cspia") cfg.model.enable_cspia = parse_bool(key, value);
    else if (key == "enable_csffa") cfg.model.enable_csffa = parse_bool(key, value);
    else if (key == "lr") cfg.train.lr = parse_double(key, value);
    else if (key == "lr_min") cfg.train.lr_min = parse_double(key, value);
    else if (key == "batch") cfg.train.batch = parse_int(key, value);
    else if (key == "epochs") cfg.train.epochs = parse_int(key, value);
    else if (key == "steps_per_epoch") cfg.train.steps_per_epoch = parse_int(key, value);
    else if (key == "patch") cfg.train.patch = parse_int(key, value);
    else if (key == "seed") cfg.train.seed = static_cast<uint64_t>(parse_int(key, value));
    else throw FormatError("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    size_t start = 0;
    int lineno = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        start = end + 1;
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const size_t eq = line.find('=');
        require<FormatError>(eq != std::string::npos,
                             "config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require<FormatError>(!key.empty() && !value.empty(),
                             "config line " + std::to_string(lineno) + ": empty key or value");
        apply_config_kv(cfg, key, value);
        if (end == text.size()) break;
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    require<IoError>(f.good(), "cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::pair<std::string, std::string>> model_config_kv(const ModelConfig& m) {
    return {
        {"scale", std::to_string(m.scale)},
        {"groups", std::to_string(m.groups)},
        {"channels", std::to_string(m.channels)},
        {"heads", std::to_string(m.heads)},
        {"window", std::to_string(m.window)},
        {"mlp_ratio", std::to_string(m.mlp_ratio)},
        {"ffn_ratio", std::to_string(m.ffn_ratio)},
        {"gumbel_tau", format_double(m.gumbel_tau)},
        {"enable_cspia", m.enable_cspia ? "true" : "false"},
        {"enable_csffa", m.enable_csffa ? "true" : "false"},
    };
}

ModelConfig model_config_from_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
    RunConfig cfg;
    for (const auto& [k, v] : kv) {
        // progress/bookkeeping keys in checkpoints are handled by the caller
        if (k == "epoch" || k == "adam_t" || k == "format") continue;
        apply_config_kv(cfg, k, v);
    }
    cfg.model.validate();
    return cfg.model;
}

}  // namespace spiffnet
