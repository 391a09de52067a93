#include "clue/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "clue/errors.hpp"

namespace clue::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

size_t frame_count(size_t n_samples, const DspConfig& c) {
  if (n_samples < static_cast<size_t>(c.frame_length))
    throw_numeric("input too short: need at least " + std::to_string(c.frame_length) +
                  " samples, got " + std::to_string(n_samples));
  return 1 + (n_samples - static_cast<size_t>(c.frame_length)) /
                 static_cast<size_t>(c.hop);
}

// Power spectrum (|X|^2) of one Hann-windowed frame, bins 0..N/2.
std::vector<double> frame_power_spectrum(std::span<const float> samples, size_t offset,
                                         const std::vector<double>& window,
                                         const DspConfig& c,
                                         std::vector<std::complex<double>>& scratch) {
  size_t n = static_cast<size_t>(c.frame_length);
  scratch.assign(n, {0.0, 0.0});
  for (size_t i = 0; i < n; ++i)
    scratch[i] = {static_cast<double>(samples[offset + i]) * window[i], 0.0};
  fft(scratch);
  std::vector<double> power(n / 2 + 1);
  for (size_t k = 0; k <= n / 2; ++k) power[k] = std::norm(scratch[k]);
  return power;
}

}  // namespace

void DspConfig::validate() const {
  if (sample_rate <= 0) throw_numeric("sample_rate must be positive");
  if (!is_power_of_two(frame_length)) throw_numeric("frame_length must be a power of two");
  if (hop <= 0) throw_numeric("hop must be positive");
  if (n_mfcc > n_mels) throw_numeric("n_mfcc must not exceed n_mels");
  if (n_mels <= 0 || n_mfcc <= 0) throw_numeric("n_mels and n_mfcc must be positive");
  if (log_floor <= 0.0) throw_numeric("log_floor must be positive");
  if (effective_fmax() <= fmin) throw_numeric("fmax must exceed fmin");
}

void fft(std::vector<std::complex<double>>& a) {
  size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw_numeric("fft size must be a power of two");

  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    double angle = -2.0 * kPi / static_cast<double>(len);
    std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(const DspConfig& c) {
  int n_bins = c.frame_length / 2 + 1;
  double mel_lo = hz_to_mel(c.fmin);
  double mel_hi = hz_to_mel(c.effective_fmax());

  // n_mels + 2 equally spaced mel points: filter i spans points i-1 .. i+1
  std::vector<double> mel_points(static_cast<size_t>(c.n_mels) + 2);
  for (size_t i = 0; i < mel_points.size(); ++i)
    mel_points[i] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                 static_cast<double>(c.n_mels + 1);

  std::vector<std::vector<double>> bank(
      static_cast<size_t>(c.n_mels), std::vector<double>(static_cast<size_t>(n_bins), 0.0));
  for (int k = 0; k < n_bins; ++k) {
    double f = static_cast<double>(k) * c.sample_rate / c.frame_length;
    double m = hz_to_mel(f);
    for (int i = 0; i < c.n_mels; ++i) {
      double left = mel_points[static_cast<size_t>(i)];
      double center = mel_points[static_cast<size_t>(i) + 1];
      double right = mel_points[static_cast<size_t>(i) + 2];
      double w = 0.0;
      if (m > left && m < right)
        w = m <= center ? (m - left) / (center - left) : (right - m) / (right - center);
      else if (m == center)
        w = 1.0;
      bank[static_cast<size_t>(i)][static_cast<size_t>(k)] = w;
    }
  }
  return bank;
}

std::vector<double> dct2_orthonormal(std::span<const double> v, int n_out) {
  size_t n = v.size();
  std::vector<double> out(static_cast<size_t>(n_out), 0.0);
  for (int k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i)
      acc += v[i] * std::cos(kPi * (2.0 * static_cast<double>(i) + 1.0) * k / (2.0 * static_cast<double>(n)));
    double scale = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                          : std::sqrt(2.0 / static_cast<double>(n));
    out[static_cast<size_t>(k)] = scale * acc;
  }
  return out;
}

namespace {

// Per-frame log-mel (dB) rows.
std::vector<std::vector<double>> log_mel_frames(std::span<const float> samples,
                                                const DspConfig& c) {
  c.validate();
  size_t n_frames = frame_count(samples.size(), c);
  auto window = hann_window(c.frame_length);
  auto bank = mel_filterbank(c);

  std::vector<std::vector<double>> frames;
  frames.reserve(n_frames);
  std::vector<std::complex<double>> scratch;
  for (size_t f = 0; f < n_frames; ++f) {
    auto power = frame_power_spectrum(samples, f * static_cast<size_t>(c.hop), window, c, scratch);
    std::vector<double> mel_row(static_cast<size_t>(c.n_mels));
    for (int m = 0; m < c.n_mels; ++m) {
      const auto& filter = bank[static_cast<size_t>(m)];
      double acc = 0.0;
      for (size_t k = 0; k < power.size(); ++k) acc += filter[k] * power[k];
      mel_row[static_cast<size_t>(m)] = 10.0 * std::log10(std::max(acc, c.log_floor));
    }
    frames.push_back(std::move(mel_row));
  }
  return frames;
}

std::vector<double> mean_rows(const std::vector<std::vector<double>>& rows) {
  std::vector<double> mean(rows.front().size(), 0.0);
  for (const auto& row : rows)
    for (size_t i = 0; i < row.size(); ++i) mean[i] += row[i];
  for (double& v : mean) v /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace

std::vector<double> mel_spectrogram(std::span<const float> samples, const DspConfig& c) {
  return mean_rows(log_mel_frames(samples, c));
}

std::vector<double> mfcc(std::span<const float> samples, const DspConfig& c) {
  auto frames = log_mel_frames(samples, c);
  std::vector<double> mean(static_cast<size_t>(c.n_mfcc), 0.0);
  for (const auto& row : frames) {
    auto coeffs = dct2_orthonormal(row, c.n_mfcc);
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += coeffs[i];
  }
  for (double& v : mean) v /= static_cast<double>(frames.size());
  return mean;
}

std::vector<double> chroma(std::span<const float> samples, const DspConfig& c) {
  c.validate();
  size_t n_frames = frame_count(samples.size(), c);
  auto window = hann_window(c.frame_length);

  // pitch class of FFT bin k: round(12*log2(f/440)) + 9 mod 12, DC excluded
  size_t n_bins = static_cast<size_t>(c.frame_length) / 2 + 1;
  std::vector<int> bin_class(n_bins, -1);
  for (size_t k = 1; k < n_bins; ++k) {
    double f = static_cast<double>(k) * c.sample_rate / c.frame_length;
    long idx = std::lround(12.0 * std::log2(f / 440.0)) + 9;
    bin_class[k] = static_cast<int>(((idx % 12) + 12) % 12);
  }

  std::vector<double> classes(12, 0.0);
  std::vector<std::complex<double>> scratch;
  for (size_t f = 0; f < n_frames; ++f) {
    auto power = frame_power_spectrum(samples, f * static_cast<size_t>(c.hop), window, c, scratch);
    for (size_t k = 1; k < n_bins; ++k) classes[static_cast<size_t>(bin_class[k])] += power[k];
  }
  for (double& v : classes) v /= static_cast<double>(n_frames);

  double peak = *std::max_element(classes.begin(), classes.end());
  if (peak > 0.0)
    for (double& v : classes) v /= peak;
  else
    std::fill(classes.begin(), classes.end(), 0.0);
  return classes;
}

std::vector<double> SpeechFeatureVector::concat() const {
  std::vector<double> out;
  out.reserve(mfcc.size() + mel.size() + chroma.size());
  out.insert(out.end(), mfcc.begin(), mfcc.end());
  out.insert(out.end(), mel.begin(), mel.end());
  out.insert(out.end(), chroma.begin(), chroma.end());
  return out;
}

// Single pass over the frames; accumulation order matches the standalone
// functions, so the outputs are bit-identical to calling them separately.
SpeechFeatureVector speech_feature_vector(std::span<const float> samples, const DspConfig& c) {
  c.validate();
  size_t n_frames = frame_count(samples.size(), c);
  auto window = hann_window(c.frame_length);
  auto bank = mel_filterbank(c);

  size_t n_bins = static_cast<size_t>(c.frame_length) / 2 + 1;
  std::vector<int> bin_class(n_bins, -1);
  for (size_t k = 1; k < n_bins; ++k) {
    double f = static_cast<double>(k) * c.sample_rate / c.frame_length;
    long idx = std::lround(12.0 * std::log2(f / 440.0)) + 9;
    bin_class[k] = static_cast<int>(((idx % 12) + 12) % 12);
  }

  std::vector<double> mfcc_acc(static_cast<size_t>(c.n_mfcc), 0.0);
  std::vector<double> mel_acc(static_cast<size_t>(c.n_mels), 0.0);
  std::vector<double> chroma_acc(12, 0.0);
  std::vector<std::complex<double>> scratch;
  for (size_t f = 0; f < n_frames; ++f) {
    auto power = frame_power_spectrum(samples, f * static_cast<size_t>(c.hop), window, c, scratch);
    std::vector<double> mel_row(static_cast<size_t>(c.n_mels));
    for (int m = 0; m < c.n_mels; ++m) {
      const auto& filter = bank[static_cast<size_t>(m)];
      double acc = 0.0;
      for (size_t k = 0; k < power.size(); ++k) acc += filter[k] * power[k];
      mel_row[static_cast<size_t>(m)] = 10.0 * std::log10(std::max(acc, c.log_floor));
    }
    auto coeffs = dct2_orthonormal(mel_row, c.n_mfcc);
    for (size_t i = 0; i < mfcc_acc.size(); ++i) mfcc_acc[i] += coeffs[i];
    for (size_t i = 0; i < mel_acc.size(); ++i) mel_acc[i] += mel_row[i];
    for (size_t k = 1; k < n_bins; ++k)
      chroma_acc[static_cast<size_t>(bin_class[k])] += power[k];
  }
  for (double& v : mfcc_acc) v /= static_cast<double>(n_frames);
  for (double& v : mel_acc) v /= static_cast<double>(n_frames);
  for (double& v : chroma_acc) v /= static_cast<double>(n_frames);

  double peak = *std::max_element(chroma_acc.begin(), chroma_acc.end());
  if (peak > 0.0)
    for (double& v : chroma_acc) v /= peak;
  else
    std::fill(chroma_acc.begin(), chroma_acc.end(), 0.0);

  SpeechFeatureVector v;
  v.mfcc = std::move(mfcc_acc);
  v.mel = std::move(mel_acc);
  v.chroma = std::move(chroma_acc);
  return v;
}

}  // namespace clue::dsp
