#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace clue {

struct AudioClip {
  std::vector<float> samples;  // mono, in [-1, 1]
  int sample_rate = 0;

  double seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads a 16-bit PCM WAV file. Stereo is averaged down to mono.
AudioClip read_wav(const std::filesystem::path& path);

// Test/fixture writer, 16-bit PCM mono.
void write_wav(const std::filesystem::path& path, const std::vector<float>& samples,
               int sample_rate);

// Linear-interpolation resampling.
std::vector<float> resample_linear(const std::vector<float>& in, int src_rate,
                                   int dst_rate);

}  // namespace clue
