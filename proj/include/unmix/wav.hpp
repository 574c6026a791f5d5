// 16-bit PCM mono WAV reading and writing.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

struct Wav {
  std::vector<double> samples;  // in [-1, 1)
  int sample_rate = 16000;
};

namespace detail {

inline uint32_t read_u32le(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
inline uint16_t read_u16le(const unsigned char* p) {
  return uint16_t(p[0] | p[1] << 8);
}
inline void put_u32le(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}
inline void put_u16le(std::vector<unsigned char>& out, uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back(v >> 8);
}

}  // namespace detail

inline Wav decode_wav(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("wav: not a RIFF/WAVE file");

  Wav wav;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const uint32_t size = detail::read_u32le(chunk + 4);
    const size_t body = pos + 8;
    if (body + size > bytes.size())
      throw std::runtime_error("wav: truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw std::runtime_error("wav: short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      const uint16_t format = detail::read_u16le(f);
      const uint16_t channels = detail::read_u16le(f + 2);
      const uint16_t bits = detail::read_u16le(f + 14);
      if (format != 1) throw std::runtime_error("wav: only PCM is supported");
      if (channels != 1) throw std::runtime_error("wav: only mono is supported");
      if (bits != 16) throw std::runtime_error("wav: only 16-bit is supported");
      wav.sample_rate = int(detail::read_u32le(f + 4));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav: data before fmt");
      const size_t n = size / 2;
      wav.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const auto raw =
            static_cast<int16_t>(detail::read_u16le(bytes.data() + body + 2 * i));
        wav.samples[i] = raw / 32768.0;
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  throw std::runtime_error("wav: no data chunk");
}

inline std::vector<unsigned char> encode_wav(const Wav& wav) {
  const auto n = static_cast<uint32_t>(wav.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * size_t(n));
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32le(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32le(out, 16);
  detail::put_u16le(out, 1);
  detail::put_u16le(out, 1);
  detail::put_u32le(out, uint32_t(wav.sample_rate));
  detail::put_u32le(out, uint32_t(wav.sample_rate) * 2);
  detail::put_u16le(out, 2);
  detail::put_u16le(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32le(out, 2 * n);
  for (double s : wav.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto q = static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    detail::put_u16le(out, static_cast<uint16_t>(q));
  }
  return out;
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Wav read_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(read_file(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline Wav read_wav(const std::filesystem::path& path, int expected_rate) {
  Wav wav = read_wav(path);
  if (wav.sample_rate != expected_rate)
    throw std::runtime_error(path.string() + ": sample rate " +
                             std::to_string(wav.sample_rate) + " != configured " +
                             std::to_string(expected_rate));
  return wav;
}

}  // namespace unmix
