#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "emostress/audio.hpp"
#include "emostress/error.hpp"
#include "support.hpp"

using namespace emostress;

namespace {

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void put_tag(std::vector<std::uint8_t>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

// Hand-assembled RIFF file with a 16-byte fmt chunk.
std::vector<std::uint8_t> wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                                    const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> b;
  put_tag(b, "RIFF");
  put32(b, static_cast<std::uint32_t>(4 + 8 + 16 + 8 + payload.size()));
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put32(b, 16);
  put16(b, format);
  put16(b, channels);
  put32(b, rate);
  put32(b, rate * channels * bits / 8);
  put16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put16(b, bits);
  put_tag(b, "data");
  put32(b, static_cast<std::uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

std::vector<std::uint8_t> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<std::uint8_t> p;
  for (auto s : v) put16(p, static_cast<std::uint16_t>(s));
  return p;
}

}  // namespace

TEST_CASE("16-bit sample 32767 decodes to 32767/32768") {
  const auto clip = decode_wav(wav_bytes(1, 1, 16000, 16, pcm16({32767, -32768, 0})));
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[0] == 32767.0 / 32768.0);
  CHECK(clip.samples[1] == -1.0);
  CHECK(clip.samples[2] == 0.0);
  CHECK(clip.sample_rate == 16000);
  CHECK(clip.channels == 1);
}

TEST_CASE("32000-sample mono file") {
  std::vector<std::int16_t> s(32000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<std::int16_t>((i * 37) % 2000 - 1000);
  const auto clip = decode_wav(wav_bytes(1, 1, 16000, 16, pcm16(s)));
  CHECK(clip.samples.size() == 32000);
  CHECK(clip.sample_rate == 16000);
  CHECK(clip.duration_seconds() == doctest::Approx(2.0));
}

TEST_CASE("8-bit unsigned, 24-bit, 32-bit and float formats scale into [-1, 1]") {
  SUBCASE("u8") {
    const auto clip = decode_wav(wav_bytes(1, 1, 8000, 8, {0, 128, 255}));
    CHECK(clip.samples[0] == -1.0);
    CHECK(clip.samples[1] == 0.0);
    CHECK(clip.samples[2] == 127.0 / 128.0);
  }
  SUBCASE("s24") {
    const auto clip = decode_wav(wav_bytes(1, 1, 8000, 24, {0x00, 0x00, 0x80, 0xff, 0xff, 0x7f}));
    CHECK(clip.samples[0] == -1.0);
    CHECK(clip.samples[1] == 8388607.0 / 8388608.0);
  }
  SUBCASE("s32") {
    std::vector<std::uint8_t> p;
    put32(p, 0x40000000u);
    const auto clip = decode_wav(wav_bytes(1, 1, 8000, 32, p));
    CHECK(clip.samples[0] == 0.5);
  }
  SUBCASE("float32") {
    std::vector<std::uint8_t> p;
    const float v = -0.25f;
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put32(p, bits);
    const auto clip = decode_wav(wav_bytes(3, 1, 8000, 32, p));
    CHECK(clip.samples[0] == -0.25);
  }
}

TEST_CASE("stereo is preserved interleaved") {
  const auto clip = decode_wav(wav_bytes(1, 2, 16000, 16, pcm16({16384, -16384, 8192, 8192})));
  CHECK(clip.channels == 2);
  CHECK(clip.frames() == 2);
  const auto mono = to_mono(clip);
  CHECK(mono.channels == 1);
  CHECK(mono.samples[0] == 0.0);
  CHECK(mono.samples[1] == 0.25);
}

TEST_CASE("decode errors") {
  CHECK_THROWS_WITH_AS(decode_wav(wav_bytes(7, 1, 8000, 8, {1, 2, 3})), doctest::Contains("UnsupportedFormat"), Error);
  std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0};
  CHECK_THROWS_AS(decode_wav(junk), Error);
  try {
    decode_wav(junk);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CorruptHeader);
  }
  try {
    read_wav("/nonexistent/path/clip.wav");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::FileNotFound);
  }
}

TEST_CASE("16-bit encode/decode is bijective on integer samples") {
  std::vector<std::int16_t> s;
  for (int v = -32768; v <= 32767; v += 97) s.push_back(static_cast<std::int16_t>(v));
  s.push_back(32767);
  const auto original = wav_bytes(1, 1, 16000, 16, pcm16(s));
  const auto clip = decode_wav(original);
  const auto encoded = encode_wav_pcm16(clip);
  const auto again = decode_wav(encoded);
  CHECK(again.samples == clip.samples);
  // Payload bytes identical to the original integer stream.
  const std::size_t header = 44;
  REQUIRE(encoded.size() == original.size());
  CHECK(std::equal(encoded.begin() + header, encoded.end(), original.begin() + header));
}

TEST_CASE("write_wav_pcm16 and read_wav round trip through the filesystem") {
  testing::TempDir dir("audio");
  AudioClip clip{{0.0, 0.5, -0.5, 0.25}, 22050, 1, {}};
  write_wav_pcm16(dir.path() / "x.wav", clip);
  const auto back = read_wav(dir.path() / "x.wav");
  CHECK(back.samples == clip.samples);
  CHECK(back.sample_rate == 22050);
}

TEST_CASE("to_mono rules") {
  AudioClip mono{{0.1, 0.2, 0.3}, 16000, 1, {}};
  CHECK(to_mono(mono).samples == mono.samples);
  AudioClip quad{{0.3, 0.3, 0.3, 0.3, -0.7, -0.7, -0.7, -0.7}, 16000, 4, {}};
  const auto m = to_mono(quad);
  REQUIRE(m.samples.size() == 2);
  CHECK(m.samples[0] == doctest::Approx(0.3));
  CHECK(m.samples[1] == doctest::Approx(-0.7));
  CHECK(to_mono(m).samples == m.samples);
  AudioClip ragged{{0.1, 0.2, 0.3}, 16000, 2, {}};
  CHECK_THROWS_AS(to_mono(ragged), Error);
}

TEST_CASE("resample") {
  SUBCASE("ramp 8 kHz to 16 kHz inserts the midpoint") {
    AudioClip ramp{{0.0, 1.0}, 8000, 1, {}};
    const auto up = resample(ramp, 16000);
    REQUIRE(up.samples.size() == 4);
    CHECK(up.samples[0] == 0.0);
    CHECK(up.samples[1] == 0.5);
    CHECK(up.samples[2] == 1.0);
    CHECK(up.sample_rate == 16000);
  }
  SUBCASE("identity at the same rate") {
    AudioClip c{{0.1, -0.2, 0.3}, 16000, 1, {}};
    CHECK(resample(c, 16000).samples == c.samples);
  }
  SUBCASE("constants stay constant and length follows the rounding rule") {
    AudioClip c{std::vector<double>(441, 0.37), 44100, 1, {}};
    const auto r = resample(c, 16000);
    CHECK(r.samples.size() == static_cast<std::size_t>(std::llround(441 * 16000.0 / 44100.0)));
    for (double v : r.samples) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
  }
  SUBCASE("zero target rate") {
    AudioClip c{{0.1}, 16000, 1, {}};
    try {
      resample(c, 0);
      FAIL("expected InvalidRate");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InvalidRate);
    }
  }
}
