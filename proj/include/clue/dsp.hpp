#pragma once

#include <complex>
#include <span>
#include <vector>

namespace clue::dsp {

struct DspConfig {
  int sample_rate = 22050;
  int frame_length = 2048;  // power of two
  int hop = 512;
  int n_mels = 128;
  int n_mfcc = 40;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 -> sample_rate / 2
  double log_floor = 1e-10;

  double effective_fmax() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
  void validate() const;
};

// mfcc ‖ mel ‖ chroma, length 40 + 128 + 12 = 180.
struct SpeechFeatureVector {
  std::vector<double> mfcc;    // 40
  std::vector<double> mel;     // 128, dB
  std::vector<double> chroma;  // 12, in [0, 1]

  std::vector<double> concat() const;
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a);

// HTK mel scale: 2595 * log10(1 + f / 700)
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filterbank over the frame_length/2 + 1 FFT bins; rows are
// filters. Peak weight 1; any bin's column sum is <= 1.
std::vector<std::vector<double>> mel_filterbank(const DspConfig& config);

// Orthonormal DCT-II of v, first n_out coefficients.
std::vector<double> dct2_orthonormal(std::span<const double> v, int n_out);

// Per-frame Hann-windowed power spectra -> mel filterbank -> 10*log10 with
// floor -> mean over frames.
std::vector<double> mel_spectrogram(std::span<const float> samples, const DspConfig& config);

// DCT-II of the per-frame log-mel (dB) vectors, first n_mfcc coefficients,
// mean over frames.
std::vector<double> mfcc(std::span<const float> samples, const DspConfig& config);

// STFT power mapped onto the 12 pitch classes (C ... B), mean over frames,
// max-normalized; an all-silent frame set yields all zeros.
std::vector<double> chroma(std::span<const float> samples, const DspConfig& config);

SpeechFeatureVector speech_feature_vector(std::span<const float> samples,
                                          const DspConfig& config);

}  // namespace clue::dsp
