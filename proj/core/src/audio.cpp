#include "emostress/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "emostress/error.hpp"

namespace emostress {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

struct WavFormat {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const WavFormat& fmt) {
  switch (fmt.bits) {
    case 8:
      return (static_cast<double>(p[0]) - 128.0) / 128.0;
    case 16: {
      const auto v = static_cast<std::int16_t>(read_u16(p));
      return static_cast<double>(v) / 32768.0;
    }
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<double>(v) / 8388608.0;
    }
    case 32: {
      const std::uint32_t raw = read_u32(p);
      if (fmt.tag == kFormatFloat) {
        float f;
        std::memcpy(&f, &raw, sizeof f);
        if (!std::isfinite(f)) return 0.0;
        return std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
      return static_cast<double>(static_cast<std::int32_t>(raw)) / 2147483648.0;
    }
    default:
      return 0.0;
  }
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_path) {
  const auto where = source_path.empty() ? std::string("<memory>") : source_path;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::CorruptHeader, "not a RIFF/WAVE file: " + where);
  }

  WavFormat fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw Error(Errc::CorruptHeader, "bad fmt chunk in " + where);
      const std::uint8_t* f = bytes.data() + body;
      fmt.tag = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.block_align = read_u16(f + 12);
      fmt.bits = read_u16(f + 14);
      if (fmt.tag == kFormatExtensible) {
        if (size < 40) throw Error(Errc::CorruptHeader, "short WAVE_FORMAT_EXTENSIBLE header in " + where);
        fmt.tag = read_u16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Writers that stream audio often leave the size unpatched; take what is there.
      data_size = std::min<std::size_t>(size, available);
      break;
    }
    if (size > available) throw Error(Errc::CorruptHeader, "chunk overruns file in " + where);
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw Error(Errc::CorruptHeader, "missing fmt chunk in " + where);
  if (data == nullptr) throw Error(Errc::CorruptHeader, "missing data chunk in " + where);

  const bool pcm_ok = fmt.tag == kFormatPcm &&
                      (fmt.bits == 8 || fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool float_ok = fmt.tag == kFormatFloat && fmt.bits == 32;
  if (!pcm_ok && !float_ok) {
    throw Error(Errc::UnsupportedFormat, "format tag " + std::to_string(fmt.tag) + " with " +
                                             std::to_string(fmt.bits) + " bits in " + where);
  }
  if (fmt.channels == 0 || fmt.sample_rate == 0) throw Error(Errc::CorruptHeader, "zero channels or rate in " + where);

  const std::size_t sample_bytes = fmt.bits / 8;
  const std::size_t frame_bytes = sample_bytes * fmt.channels;
  if (fmt.block_align != 0 && fmt.block_align != frame_bytes) {
    throw Error(Errc::CorruptHeader, "block align disagrees with channels*bits in " + where);
  }
  const std::size_t frame_count = data_size / frame_bytes;
  if (frame_count == 0) throw Error(Errc::CorruptHeader, "no audio frames in " + where);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.channels = fmt.channels;
  clip.source_path = std::move(source_path);
  clip.samples.resize(frame_count * fmt.channels);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    clip.samples[i] = decode_sample(data + i * sample_bytes, fmt);
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  if (clip.channels <= 0 || clip.sample_rate <= 0) throw Error(Errc::InvalidConfig, "clip has no channels or rate");
  if (clip.samples.size() % static_cast<std::size_t>(clip.channels) != 0) {
    throw Error(Errc::ChannelMismatch, "sample count is not a multiple of the channel count");
  }
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, static_cast<std::uint16_t>(clip.channels));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate * clip.channels * 2));
  put_u16(out, static_cast<std::uint16_t>(clip.channels * 2));
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav_pcm16(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

AudioClip to_mono(const AudioClip& clip) {
  if (clip.channels < 1) throw Error(Errc::ChannelMismatch, "channel count must be >= 1");
  if (clip.channels == 1) return clip;
  const auto ch = static_cast<std::size_t>(clip.channels);
  if (clip.samples.size() % ch != 0) {
    throw Error(Errc::ChannelMismatch, "sample count is not a multiple of the channel count");
  }
  AudioClip mono;
  mono.sample_rate = clip.sample_rate;
  mono.channels = 1;
  mono.source_path = clip.source_path;
  mono.samples.resize(clip.samples.size() / ch);
  for (std::size_t f = 0; f < mono.samples.size(); ++f) {
    double sum = 0.0;
    for (std::size_t c = 0; c < ch; ++c) sum += clip.samples[f * ch + c];
    mono.samples[f] = sum / static_cast<double>(ch);
  }
  return mono;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw Error(Errc::InvalidRate, "target rate must be positive");
  if (clip.sample_rate <= 0) throw Error(Errc::InvalidRate, "source rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const auto ch = static_cast<std::size_t>(clip.channels);
  const std::size_t in_frames = clip.frames();
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const auto out_frames = static_cast<std::size_t>(std::llround(static_cast<double>(in_frames) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.channels = clip.channels;
  out.source_path = clip.source_path;
  out.samples.resize(out_frames * ch);
  if (in_frames == 0) return out;

  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  for (std::size_t i = 0; i < out_frames; ++i) {
    const double pos = static_cast<double>(i) * step;
    auto left = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(left);
    if (left >= in_frames - 1) {
      left = in_frames - 1;
      frac = 0.0;
    }
    const std::size_t right = std::min(left + 1, in_frames - 1);
    for (std::size_t c = 0; c < ch; ++c) {
      const double a = clip.samples[left * ch + c];
      const double b = clip.samples[right * ch + c];
      out.samples[i * ch + c] = a + frac * (b - a);
    }
  }
  return out;
}

}  // namespace emostress
