#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "clue/dsp.hpp"
#include "clue/emotion.hpp"

namespace clue::speechnet {

// Architecture constants. conv outputs are valid-mode: 180-20+1 and 161-10+1.
inline constexpr int kInputLen = 180;
inline constexpr int kConv1Filters = 128;
inline constexpr int kConv1Kernel = 20;
inline constexpr int kConv1OutLen = 161;
inline constexpr int kConv2Filters = 64;
inline constexpr int kConv2Kernel = 10;
inline constexpr int kConv2OutLen = 152;
inline constexpr int kFlattenLen = kConv2OutLen * kConv2Filters;  // 9728
inline constexpr int kHiddenLen = 520;
inline constexpr int kNumClasses = 8;

struct Conv1d {
  int in_ch = 0, out_ch = 0, kernel = 0;
  std::vector<double> w;  // [out_ch][kernel][in_ch]
  std::vector<double> b;  // [out_ch]
};

struct BatchNorm {
  int channels = 0;
  std::vector<double> gamma, beta;              // trainable
  std::vector<double> running_mean, running_var;  // non-trainable
  double eps = 1e-5;
  double momentum = 0.9;
};

struct Dense {
  int in_dim = 0, out_dim = 0;
  std::vector<double> w;  // [out_dim][in_dim]
  std::vector<double> b;  // [out_dim]
};

struct CnnModel {
  Conv1d conv1, conv2;
  BatchNorm bn1, bn2;
  Dense dense1, dense2;
  uint64_t seed = 0;
};

enum class Mode { train, eval };

struct ParamCounts {
  size_t total = 0;
  size_t trainable = 0;
  size_t non_trainable = 0;
};

ParamCounts count_parameters(const CnnModel& model);

// He-normal weights, zero biases, BN scale 1 / shift 0 / running stats (0,1).
CnnModel init_cnn(uint64_t seed);

// batch: B x 180 row-major. Returns B x 8 row-major probabilities.
std::vector<double> cnn_forward(const CnnModel& model, std::span<const double> batch,
                                size_t batch_size, Mode mode);

// Gradients for the trainable parameters, same shapes as the model.
struct CnnGradients {
  std::vector<double> conv1_w, conv1_b, bn1_gamma, bn1_beta;
  std::vector<double> conv2_w, conv2_b, bn2_gamma, bn2_beta;
  std::vector<double> dense1_w, dense1_b, dense2_w, dense2_b;
};

// Mean categorical cross-entropy of the batch in the given mode; no state is
// touched (used by the finite-difference suite).
double cnn_loss(const CnnModel& model, std::span<const double> batch,
                std::span<const int> labels, Mode mode);

// Loss + gradients; train mode backpropagates through the batch statistics.
double cnn_backward(const CnnModel& model, std::span<const double> batch,
                    std::span<const int> labels, Mode mode, CnnGradients& grads);

// Backward pass seeded with dL/d(probabilities) instead of labels, eval-mode
// normalization; feeds the fusion fine-tuning path.
void cnn_backward_from_probs(const CnnModel& model, std::span<const double> batch,
                             std::span<const double> dprobs, CnnGradients& grads);

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 190;
  uint64_t seed = 0;
  std::optional<double> early_stop_train_acc;  // stop once reached
};

struct AdamState {
  std::vector<double> m, v;
  int64_t step = 0;
};

AdamState make_adam_state(const CnnModel& model);

// One optimizer step: forward (train mode), backprop, Adam update, running
// stats update. learning_rate == 0 is a strict no-op. Returns the batch loss.
double train_step(CnnModel& model, std::span<const double> batch, std::span<const int> labels,
                  const TrainConfig& config, AdamState& adam);

struct EpochStats {
  int epoch = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

std::string history_to_csv(const TrainHistory& history);

// Shuffled seeded mini-batches; train/val accuracy evaluated per epoch in
// eval mode.
TrainHistory train_cnn(CnnModel& model, const std::vector<std::vector<double>>& train_x,
                       const std::vector<int>& train_y,
                       const std::vector<std::vector<double>>& val_x,
                       const std::vector<int>& val_y, const TrainConfig& config);

struct TimelineWindow {
  double start = 0.0;  // seconds
  EmotionDistribution dist;
};

// Per-window speech-emotion distributions, windows sorted by start.
struct EmotionTimeline {
  std::vector<TimelineWindow> windows;
};

// 10 s windows, 10 s hop; a trailing remainder >= 5 s is zero-padded and
// kept, a shorter one is dropped. Audio under 5 s is an error.
EmotionTimeline predict_emotion_timeline(const CnnModel& model, std::span<const float> audio,
                                         int sample_rate, const dsp::DspConfig& dsp_config,
                                         int n_threads = 1);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MacroMetrics {
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// Unweighted mean over classes.
double macro_average(std::span<const double> per_class_values);

// confusion[i][j] = count of true class i predicted as class j; metrics are 0
// where the denominator is 0.
MacroMetrics prf_macro(const std::vector<std::vector<int64_t>>& confusion);

void save_cnn(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_cnn(const std::filesystem::path& path);

}  // namespace clue::speechnet
