#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dect/error.hpp"

namespace dect::detail {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swapping");

// Shortest round-trip formatting: parse(format(v)) == v exactly.
inline std::string format_double(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw ContractError("failed to format double");
    return std::string(buf, end);
}

inline double parse_double(const std::string& s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw IntegrityError("malformed number '" + s + "'");
    return v;
}

inline int64_t parse_int(const std::string& s) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw IntegrityError("malformed integer '" + s + "'");
    return v;
}

struct ByteWriter {
    std::vector<char> bytes;

    void raw(const void* p, size_t n) {
        const char* c = static_cast<const char*>(p);
        bytes.insert(bytes.end(), c, c + n);
    }
    void u8(uint8_t v) { raw(&v, 1); }
    void u32(uint32_t v) { raw(&v, 4); }
    void u64(uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f32_span(const float* p, size_t n) { raw(p, n * sizeof(float)); }
};

struct ByteReader {
    const std::vector<char>& bytes;
    size_t pos = 0;
    std::string context;

    void raw(void* p, size_t n) {
        if (pos + n > bytes.size())
            throw IntegrityError(context + ": truncated file (wanted " + std::to_string(n) + " bytes at offset " +
                                 std::to_string(pos) + ", file has " + std::to_string(bytes.size()) + ")");
        std::memcpy(p, bytes.data() + pos, n);
        pos += n;
    }
    uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
    uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
    uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
    float f32() { float v; raw(&v, 4); return v; }
    void f32_span(float* p, size_t n) { raw(p, n * sizeof(float)); }
    bool done() const { return pos == bytes.size(); }
};

// Write-to-temp-then-rename so readers never observe a partial file.
inline void atomic_write_file(const std::string& path, const std::vector<char>& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("failed to move '" + tmp.string() + "' into place: " + ec.message());
}

inline std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<char> bytes(static_cast<size_t>(size));
    in.read(bytes.data(), size);
    if (!in) throw IoError("failed reading '" + path + "'");
    return bytes;
}

inline void atomic_write_text(const std::string& path, const std::string& text) {
    atomic_write_file(path, std::vector<char>(text.begin(), text.end()));
}

}  // namespace dect::detail
