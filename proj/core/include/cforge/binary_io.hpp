#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "cforge/errors.hpp"

namespace cforge::binary {

inline void write_u64(std::ostream& out, std::uint64_t v)
{
    char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(buf, 8);
}

inline void write_u32(std::ostream& out, std::uint32_t v)
{
    char buf[4];
    for (int i = 0; i < 4; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(buf, 4);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_f64s(std::ostream& out, std::span<const double> values)
{
    for (double v : values) {
        write_f64(out, v);
    }
}

inline void write_string(std::ostream& out, std::string_view s)
{
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic)
{
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in || got != magic) {
        throw FormatError("bad magic, expected '" + std::string(magic) + "'");
    }
}

inline std::uint64_t read_u64(std::istream& in)
{
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) {
        throw FormatError("truncated file");
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | buf[i];
    }
    return v;
}

inline std::uint32_t read_u32(std::istream& in)
{
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) {
        throw FormatError("truncated file");
    }
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | buf[i];
    }
    return v;
}

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline void read_f64s(std::istream& in, std::span<double> out)
{
    for (double& v : out) {
        v = read_f64(in);
    }
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1u << 20)
{
    const auto n = read_u64(in);
    if (n > max_len) {
        throw FormatError("string length " + std::to_string(n) + " out of range");
    }
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) {
        throw FormatError("truncated file");
    }
    return s;
}

}  // namespace cforge::binary
