#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/core/text.hpp"

namespace adx::audio {

/// Mono 16-bit PCM.
struct PcmClip {
  std::uint32_t sample_rate = 16000;
  std::vector<std::int16_t> samples;

  bool operator==(const PcmClip&) const = default;
};

enum class WavErrorKind {
  unsupported_container,
  unsupported_format,
  unsupported_bit_depth,
  unsupported_channels,
  truncated,
  malformed,
};

class WavError : public DataError {
 public:
  WavError(WavErrorKind kind, const std::string& message) : DataError(message), kind_(kind) {}
  WavErrorKind wav_kind() const noexcept { return kind_; }

 private:
  WavErrorKind kind_;
};

namespace detail {

inline std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

inline std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace detail

/// Decodes a RIFF/WAVE byte buffer holding mono 16-bit PCM. Chunks other
/// than "fmt " and "data" are skipped.
inline PcmClip parse_wav(std::span<const std::uint8_t> bytes) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12) throw WavError(WavErrorKind::truncated, "wav: shorter than the RIFF header");
  if (!detail::tag_is(bytes, 0, "RIFF")) {
    throw WavError(WavErrorKind::unsupported_container, "wav: not a little-endian RIFF container");
  }
  if (!detail::tag_is(bytes, 8, "WAVE")) {
    throw WavError(WavErrorKind::unsupported_container, "wav: RIFF form type is not WAVE");
  }

  bool have_format = false;
  PcmClip clip;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (detail::tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || body + 16 > bytes.size()) {
        throw WavError(WavErrorKind::truncated, "wav: format chunk truncated");
      }
      const auto format = read_u16(bytes, body);
      const auto channels = read_u16(bytes, body + 2);
      clip.sample_rate = read_u32(bytes, body + 4);
      const auto bits = read_u16(bytes, body + 14);
      if (format != 1) {
        throw WavError(WavErrorKind::unsupported_format,
                       "wav: format code " + std::to_string(format) + " is not PCM (1)");
      }
      if (bits != 16) {
        throw WavError(WavErrorKind::unsupported_bit_depth,
                       "wav: " + std::to_string(bits) + "-bit samples are not supported (16 only)");
      }
      if (channels != 1) {
        throw WavError(WavErrorKind::unsupported_channels,
                       "wav: " + std::to_string(channels) + " channels; only mono is supported");
      }
      if (clip.sample_rate == 0) throw WavError(WavErrorKind::malformed, "wav: sample rate is zero");
      have_format = true;
    } else if (detail::tag_is(bytes, pos, "data")) {
      if (!have_format) throw WavError(WavErrorKind::malformed, "wav: data chunk precedes format chunk");
      if (body + chunk_size > bytes.size()) {
        throw WavError(WavErrorKind::truncated, "wav: data chunk declares " + std::to_string(chunk_size) +
                                                    " bytes but only " + std::to_string(bytes.size() - body) +
                                                    " remain");
      }
      if (chunk_size % 2 != 0) throw WavError(WavErrorKind::malformed, "wav: odd data size for 16-bit PCM");
      clip.samples.resize(chunk_size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        clip.samples[i] = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
      }
      return clip;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw WavError(have_format ? WavErrorKind::truncated : WavErrorKind::malformed,
                 have_format ? "wav: no data chunk" : "wav: no format chunk");
}

/// Canonical 44-byte header followed by the samples.
inline std::vector<std::uint8_t> encode_wav(const PcmClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  detail::put_tag(out, "RIFF");
  detail::put_u32(out, 36 + data_bytes);
  detail::put_tag(out, "WAVE");
  detail::put_tag(out, "fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, clip.sample_rate);
  detail::put_u32(out, clip.sample_rate * 2);  // byte rate
  detail::put_u16(out, 2);                     // block align
  detail::put_u16(out, 16);
  detail::put_tag(out, "data");
  detail::put_u32(out, data_bytes);
  for (auto s : clip.samples) detail::put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

inline PcmClip read_wav(const std::filesystem::path& path) {
  const auto raw = text::read_file(path);
  try {
    return parse_wav(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
  } catch (const WavError& e) {
    throw WavError(e.wav_kind(), path.string() + ": " + e.what());
  }
}

inline void write_wav(const PcmClip& clip, const std::filesystem::path& path) {
  const auto bytes = encode_wav(clip);
  text::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline constexpr std::size_t kSegmentCount = 10;

/// Segment i covers [floor(i*N/10), floor((i+1)*N/10)).
inline std::vector<PcmClip> split_ten(const PcmClip& clip) {
  const std::size_t n = clip.samples.size();
  if (n < kSegmentCount) {
    throw DataError("clip too short to split: " + std::to_string(n) + " samples, need at least 10");
  }
  std::vector<PcmClip> parts;
  parts.reserve(kSegmentCount);
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    const std::size_t begin = i * n / kSegmentCount;
    const std::size_t end = (i + 1) * n / kSegmentCount;
    parts.push_back({clip.sample_rate, std::vector<std::int16_t>(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                                                 clip.samples.begin() + static_cast<std::ptrdiff_t>(end))});
  }
  return parts;
}

}  // namespace adx::audio
