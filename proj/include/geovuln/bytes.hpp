#pragma once

#include "geovuln/error.hpp"

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geovuln {

using ByteSpan = std::span<const std::uint8_t>;

inline ByteSpan as_bytes(std::string_view s) { return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}; }

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_file_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view data)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("cannot write " + path);
}

/// Bounds-checked reads at absolute offsets. Every out-of-range access throws
/// ParseError("unexpected end of file").
class ByteReader {
public:
    explicit ByteReader(ByteSpan data) : data_(data) {}

    std::size_t size() const { return data_.size(); }
    bool has(std::size_t offset, std::size_t count) const
    {
        return offset <= data_.size() && count <= data_.size() - offset;
    }

    ByteSpan slice(std::size_t offset, std::size_t count) const
    {
        require(offset, count);
        return data_.subspan(offset, count);
    }

    std::uint8_t u8(std::size_t offset) const
    {
        require(offset, 1);
        return data_[offset];
    }

    std::uint16_t u16(std::size_t offset, std::endian order) const { return load<std::uint16_t>(offset, order); }
    std::uint32_t u32(std::size_t offset, std::endian order) const { return load<std::uint32_t>(offset, order); }
    std::int32_t i32(std::size_t offset, std::endian order) const
    {
        return static_cast<std::int32_t>(load<std::uint32_t>(offset, order));
    }
    std::uint64_t u64(std::size_t offset, std::endian order) const { return load<std::uint64_t>(offset, order); }

    double f64(std::size_t offset, std::endian order) const { return std::bit_cast<double>(u64(offset, order)); }
    float f32(std::size_t offset, std::endian order) const { return std::bit_cast<float>(u32(offset, order)); }

private:
    void require(std::size_t offset, std::size_t count) const
    {
        if (!has(offset, count)) throw ParseError("unexpected end of file");
    }

    template <class T>
    T load(std::size_t offset, std::endian order) const
    {
        require(offset, sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            const std::size_t idx = order == std::endian::big ? i : sizeof(T) - 1 - i;
            v = static_cast<T>((v << 8) | data_[offset + idx]);
        }
        return v;
    }

    ByteSpan data_;
};

} // namespace geovuln
