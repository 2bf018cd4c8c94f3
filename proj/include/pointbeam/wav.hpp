#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pointbeam/error.hpp"
#include "pointbeam/signal.hpp"

namespace pointbeam::io {

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x & 0xFF));
    v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xFF));
    v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xFF));
    v.push_back(static_cast<std::uint8_t>((x >> 24) & 0xFF));
}

inline void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(static_cast<std::uint8_t>(x & 0xFF));
    v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xFF));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8));
}

} // namespace detail

// Mono 32-bit IEEE float WAV.
inline void write_wav(const std::string& path, const SampleBuffer& buf) {
    std::vector<std::uint8_t> bytes;
    const auto n = static_cast<std::uint32_t>(buf.size());
    const std::uint32_t data_bytes = n * 4;
    bytes.reserve(58 + data_bytes);

    auto put_tag = [&](const char* t) { bytes.insert(bytes.end(), t, t + 4); };
    put_tag("RIFF");
    detail::put_u32(bytes, 4 + 26 + 8 + data_bytes);
    put_tag("WAVE");
    put_tag("fmt ");
    detail::put_u32(bytes, 18);
    detail::put_u16(bytes, 3); // IEEE float
    detail::put_u16(bytes, 1); // mono
    const auto rate = static_cast<std::uint32_t>(buf.rate);
    detail::put_u32(bytes, rate);
    detail::put_u32(bytes, rate * 4);
    detail::put_u16(bytes, 4);
    detail::put_u16(bytes, 32);
    detail::put_u16(bytes, 0); // cbSize
    put_tag("data");
    detail::put_u32(bytes, data_bytes);
    for (double s : buf.samples) {
        const float f = static_cast<float>(s);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put_u32(bytes, u);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(Errc::io_error, "io", "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(Errc::io_error, "io", "short write: " + path);
}

// Reads mono (or first channel of) float32 / PCM16 WAV files.
inline SampleBuffer read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::io_error, "io", "cannot open for reading: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        fail(Errc::io_error, "io", "not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t data_off = 0, data_len = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = detail::get_u32(bytes.data() + pos + 4);
        if (std::memcmp(tag, "fmt ", 4) == 0 && pos + 8 + 16 <= bytes.size()) {
            format = detail::get_u16(bytes.data() + pos + 8);
            channels = detail::get_u16(bytes.data() + pos + 10);
            rate = detail::get_u32(bytes.data() + pos + 12);
            bits = detail::get_u16(bytes.data() + pos + 22);
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data_off = pos + 8;
            data_len = len;
        }
        pos += 8 + len + (len & 1);
    }
    if (!rate || !channels || !data_off || data_off + data_len > bytes.size())
        fail(Errc::io_error, "io", "malformed WAV: " + path);

    SampleBuffer out;
    out.rate = static_cast<double>(rate);
    if (format == 3 && bits == 32) {
        const std::size_t frames = data_len / (4 * channels);
        out.samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
            const std::uint32_t u = detail::get_u32(bytes.data() + data_off + i * 4 * channels);
            float f;
            std::memcpy(&f, &u, 4);
            out.samples[i] = static_cast<double>(f);
        }
    } else if (format == 1 && bits == 16) {
        const std::size_t frames = data_len / (2 * channels);
        out.samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
            const auto v = static_cast<std::int16_t>(detail::get_u16(bytes.data() + data_off + i * 2 * channels));
            out.samples[i] = static_cast<double>(v) / 32768.0;
        }
    } else {
        fail(Errc::io_error, "io", "unsupported WAV encoding (want float32 or pcm16): " + path);
    }
    return out;
}

} // namespace pointbeam::io
