#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "clue/errors.hpp"

namespace clue {

// Text head classes, fixed order.
inline const std::array<std::string, 5> kTextEmotionClasses = {
    "joy", "sadness", "fear", "anger", "neutral"};

// Speech head classes, fixed alphabetical order.
inline const std::array<std::string, 8> kSpeechEmotionClasses = {
    "angry", "calm", "disgust", "fearful", "happy", "neutral", "sad", "surprised"};

// Probability vector over K emotion classes (5 for text, 8 for speech).
struct EmotionDistribution {
  std::vector<double> p;

  EmotionDistribution() = default;
  explicit EmotionDistribution(std::vector<double> probs) : p(std::move(probs)) {}

  static EmotionDistribution uniform(size_t k) {
    return EmotionDistribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  size_t size() const { return p.size(); }
  double operator[](size_t i) const { return p[i]; }

  void validate() const {
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw_numeric("emotion distribution has a negative or non-finite entry");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
      throw_numeric("emotion distribution sums to " + std::to_string(sum));
  }

  // Shannon entropy in nats, with 0*log(0) = 0.
  double entropy() const {
    double h = 0.0;
    for (double v : p)
      if (v > 0.0) h -= v * std::log(v);
    return h;
  }
};

}  // namespace clue
