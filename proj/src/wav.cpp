#include "clue/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "clue/errors.hpp"
#include "clue/io.hpp"

namespace fs = std::filesystem;

namespace clue {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

AudioClip read_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  auto malformed = [&](const std::string& why) {
    throw_schema("malformed WAV " + path.string() + ": " + why);
  };

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    malformed("missing RIFF/WAVE header");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char id[5] = {0};
    std::memcpy(id, bytes.data() + pos, 4);
    uint32_t len = read_u32(bytes.data() + pos + 4);
    size_t body = pos + 8;
    if (body + len > bytes.size()) malformed("chunk overruns file");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) malformed("fmt chunk too short");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt) malformed("no fmt chunk");
  if (data_off == 0) malformed("no data chunk");
  if (format != 1) malformed("only PCM (format 1) supported, got " + std::to_string(format));
  if (bits != 16) malformed("only 16-bit samples supported, got " + std::to_string(bits));
  if (channels < 1 || channels > 2) malformed("unsupported channel count " + std::to_string(channels));
  if (sample_rate == 0) malformed("zero sample rate");

  size_t frame_bytes = 2u * channels;
  size_t n_frames = data_len / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(n_frames);
  const unsigned char* p = bytes.data() + data_off;
  for (size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      int16_t s = static_cast<int16_t>(read_u16(p + i * frame_bytes + 2 * c));
      acc += static_cast<double>(s) / 32768.0;
    }
    clip.samples[i] = static_cast<float>(acc / channels);
  }
  return clip;
}

void write_wav(const fs::path& path, const std::vector<float>& samples, int sample_rate) {
  std::string out;
  auto put_u32 = [&](uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
  };
  auto put_u16 = [&](uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
  };

  uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  out += "RIFF";
  put_u32(36 + data_len);
  out += "WAVE";
  out += "fmt ";
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(static_cast<uint32_t>(sample_rate));
  put_u32(static_cast<uint32_t>(sample_rate) * 2);
  put_u16(2);
  put_u16(16);
  out += "data";
  put_u32(data_len);
  for (float s : samples) {
    double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
    int16_t q = static_cast<int16_t>(std::lrint(v * 32767.0));
    put_u16(static_cast<uint16_t>(q));
  }
  write_file_atomic(path, out);
}

std::vector<float> resample_linear(const std::vector<float>& in, int src_rate, int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0) throw_numeric("resample rates must be positive");
  if (src_rate == dst_rate || in.empty()) return in;
  size_t n_out = static_cast<size_t>(
      std::llround(static_cast<double>(in.size()) * dst_rate / src_rate));
  std::vector<float> out(n_out);
  double step = static_cast<double>(src_rate) / dst_rate;
  for (size_t i = 0; i < n_out; ++i) {
    double t = i * step;
    size_t k = static_cast<size_t>(t);
    if (k + 1 >= in.size()) {
      out[i] = in.back();
    } else {
      double frac = t - static_cast<double>(k);
      out[i] = static_cast<float>((1.0 - frac) * in[k] + frac * in[k + 1]);
    }
  }
  return out;
}

}  // namespace clue
