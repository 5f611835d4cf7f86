#include "spiffnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

namespace spiffnet::ckpt {

namespace {

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        require<FormatError>(pos + n <= buf.size(),
                             std::string("truncated checkpoint while reading ") + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    std::string bytes(size_t n, const char* what) {
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void write_checkpoint(const CheckpointData& data, const std::string& path) {
    std::unordered_set<std::string> seen;
    for (const auto& t : data.tensors)
        require<FormatError>(seen.insert(t.name).second, "duplicate tensor name: " + t.name);

    std::string out;
    out += "SPFF";
    put_u32(out, kVersion);

    std::string cfg;
    for (const auto& [k, v] : data.config) cfg += k + " = " + v + "\n";
    put_u32(out, static_cast<uint32_t>(cfg.size()));
    out += cfg;

    put_u32(out, static_cast<uint32_t>(data.tensors.size()));
    for (const auto& t : data.tensors) {
        require<FormatError>(t.name.size() <= 0xffff, "tensor name too long: " + t.name);
        require<FormatError>(t.shape.size() <= 0xff, "tensor rank too large: " + t.name);
        require<FormatError>(static_cast<size_t>(numel(t.shape)) == t.data.size(),
                             "tensor payload size mismatch: " + t.name);
        put_u16(out, static_cast<uint16_t>(t.name.size()));
        out += t.name;
        out.push_back(static_cast<char>(t.shape.size()));
        for (int64_t d : t.shape) put_u32(out, static_cast<uint32_t>(d));
        for (float f : t.data) put_f32(out, f);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require<IoError>(f.good(), "cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    require<IoError>(f.good(), "write failed for " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require<IoError>(f.good(), "cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{buf};
    const std::string magic = r.bytes(4, "magic");
    require<FormatError>(magic == "SPFF", "bad magic bytes (not a checkpoint file)");
    const uint32_t version = r.u32("version");
    require<FormatError>(version == kVersion,
                         "unsupported checkpoint version " + std::to_string(version));

    CheckpointData data;
    const uint32_t cfg_len = r.u32("config length");
    const std::string cfg = r.bytes(cfg_len, "config block");
    size_t start = 0;
    while (start < cfg.size()) {
        size_t end = cfg.find('\n', start);
        if (end == std::string::npos) end = cfg.size();
        const std::string line = cfg.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        const size_t eq = line.find(" = ");
        require<FormatError>(eq != std::string::npos, "malformed config line: " + line);
        data.config.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }

    const uint32_t count = r.u32("tensor count");
    std::unordered_set<std::string> seen;
    for (uint32_t i = 0; i < count; ++i) {
        TensorEntry t;
        const uint16_t nlen = r.u16("name length");
        t.name = r.bytes(nlen, "tensor name");
        require<FormatError>(seen.insert(t.name).second, "duplicate tensor name: " + t.name);
        const uint8_t ndim = r.u8("rank");
        t.shape.resize(ndim);
        int64_t n = 1;
        for (uint8_t d = 0; d < ndim; ++d) {
            t.shape[d] = static_cast<int64_t>(r.u32("dims"));
            n *= t.shape[d];
        }
        const std::string payload = r.bytes(static_cast<size_t>(n) * 4, "tensor payload");
        t.data.resize(static_cast<size_t>(n));
        for (int64_t j = 0; j < n; ++j) {
            uint32_t v = 0;
            for (int b = 0; b < 4; ++b)
                v |= static_cast<uint32_t>(static_cast<uint8_t>(payload[static_cast<size_t>(j * 4 + b)]))
                     << (8 * b);
            float fv;
            std::memcpy(&fv, &v, 4);
            t.data[static_cast<size_t>(j)] = fv;
        }
        data.tensors.push_back(std::move(t));
    }
    require<FormatError>(r.pos == buf.size(), "trailing bytes after checkpoint payload");
    return data;
}

}  // namespace spiffnet::ckpt
