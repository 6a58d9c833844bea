#pragma once

// Little-endian binary serialization helpers shared by the cache and dataset
// file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "nprt/common.hpp"

namespace nprt::io {

class ByteWriter {
public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
    void u16(std::uint16_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<char>& bytes() const { return bytes_; }

    void write_file(const std::filesystem::path& path) const
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
        out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
        if (!out) throw DataError("write failed: '" + path.string() + "'");
    }

private:
    template <typename U>
    void put(U v)
    {
        for (std::size_t b = 0; b < sizeof(U); ++b) bytes_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
    }

    std::vector<char> bytes_;
};

class ByteReader {
public:
    ByteReader(std::vector<char> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    static ByteReader from_file(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open '" + path.string() + "'");
        std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data), path.string());
    }

    bool expect_magic(std::string_view m)
    {
        need(m.size());
        const bool ok = std::memcmp(bytes_.data() + pos_, m.data(), m.size()) == 0;
        pos_ += m.size();
        return ok;
    }
    std::uint16_t u16() { return get<std::uint16_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& name() const { return name_; }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) throw FormatError("truncated file '" + name_ + "'");
    }

    template <typename U>
    U get()
    {
        need(sizeof(U));
        U v = 0;
        for (std::size_t b = 0; b < sizeof(U); ++b)
            v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b));
        pos_ += sizeof(U);
        return v;
    }

    std::vector<char> bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

}  // namespace nprt::io
