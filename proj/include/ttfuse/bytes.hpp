#pragma once

// Little-endian byte packing shared by the clip container and checkpoints.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "ttfuse/errors.hpp"

namespace ttfuse::bytes {

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void text(std::string_view s) { raw(s.data(), s.size()); }
    void reserve(std::size_t n) { buf_.reserve(n); }

    std::vector<unsigned char> take() { return std::move(buf_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size, std::string what) : p_(data), n_(size), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    const unsigned char* take(std::size_t n) {
        need(n);
        const unsigned char* out = p_ + pos_;
        pos_ += n;
        return out;
    }
    std::string text(std::size_t n) {
        const unsigned char* s = take(n);
        return std::string(reinterpret_cast<const char*>(s), n);
    }
    std::size_t remaining() const { return n_ - pos_; }

private:
    void need(std::size_t k) const {
        if (k > n_ - pos_) throw FormatError(what_ + ": truncated data");
    }
    std::uint64_t get(int k) {
        need(static_cast<std::size_t>(k));
        std::uint64_t v = 0;
        for (int i = 0; i < k; ++i) v |= static_cast<std::uint64_t>(p_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(k);
        return v;
    }
    const unsigned char* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<unsigned char>& data);

}  // namespace ttfuse::bytes
