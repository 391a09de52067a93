#include "clue/speechnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <sstream>

#include "clue/errors.hpp"
#include "clue/io.hpp"
#include "clue/rng.hpp"

namespace clue::speechnet {

namespace {

Conv1d make_conv(int in_ch, int out_ch, int kernel, Rng& rng) {
  Conv1d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.kernel = kernel;
  c.w.resize(static_cast<size_t>(out_ch) * kernel * in_ch);
  c.b.assign(static_cast<size_t>(out_ch), 0.0);
  double stddev = std::sqrt(2.0 / (static_cast<double>(kernel) * in_ch));
  for (double& v : c.w) v = stddev * rng.next_normal();
  return c;
}

BatchNorm make_bn(int channels) {
  BatchNorm bn;
  bn.channels = channels;
  bn.gamma.assign(static_cast<size_t>(channels), 1.0);
  bn.beta.assign(static_cast<size_t>(channels), 0.0);
  bn.running_mean.assign(static_cast<size_t>(channels), 0.0);
  bn.running_var.assign(static_cast<size_t>(channels), 1.0);
  return bn;
}

Dense make_dense(int in_dim, int out_dim, Rng& rng) {
  Dense d;
  d.in_dim = in_dim;
  d.out_dim = out_dim;
  d.w.resize(static_cast<size_t>(out_dim) * in_dim);
  d.b.assign(static_cast<size_t>(out_dim), 0.0);
  double stddev = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (double& v : d.w) v = stddev * rng.next_normal();
  return d;
}

// out[b][t][oc] = bias[oc] + sum_{k,ic} w[oc][k][ic] * in[b][t+k][ic]
void conv_forward(const Conv1d& c, const double* in, size_t batch, int in_len, double* out) {
  int out_len = in_len - c.kernel + 1;
  for (size_t b = 0; b < batch; ++b) {
    const double* in_b = in + b * static_cast<size_t>(in_len) * c.in_ch;
    double* out_b = out + b * static_cast<size_t>(out_len) * c.out_ch;
    for (int t = 0; t < out_len; ++t) {
      double* o = out_b + static_cast<size_t>(t) * c.out_ch;
      std::memcpy(o, c.b.data(), sizeof(double) * static_cast<size_t>(c.out_ch));
      for (int k = 0; k < c.kernel; ++k) {
        const double* x = in_b + (static_cast<size_t>(t) + k) * c.in_ch;
        for (int oc = 0; oc < c.out_ch; ++oc) {
          const double* wr = c.w.data() + (static_cast<size_t>(oc) * c.kernel + k) * c.in_ch;
          double acc = 0.0;
          for (int ic = 0; ic < c.in_ch; ++ic) acc += wr[ic] * x[ic];
          o[oc] += acc;
        }
      }
    }
  }
}

void conv_backward(const Conv1d& c, const double* in, size_t batch, int in_len,
                   const double* dout, std::vector<double>& dw, std::vector<double>& db,
                   double* din /* may be null */) {
  int out_len = in_len - c.kernel + 1;
  dw.assign(c.w.size(), 0.0);
  db.assign(c.b.size(), 0.0);
  if (din)
    std::fill(din, din + batch * static_cast<size_t>(in_len) * c.in_ch, 0.0);
  for (size_t b = 0; b < batch; ++b) {
    const double* in_b = in + b * static_cast<size_t>(in_len) * c.in_ch;
    const double* dout_b = dout + b * static_cast<size_t>(out_len) * c.out_ch;
    double* din_b = din ? din + b * static_cast<size_t>(in_len) * c.in_ch : nullptr;
    for (int t = 0; t < out_len; ++t) {
      const double* g = dout_b + static_cast<size_t>(t) * c.out_ch;
      for (int k = 0; k < c.kernel; ++k) {
        const double* x = in_b + (static_cast<size_t>(t) + k) * c.in_ch;
        double* dx = din_b ? din_b + (static_cast<size_t>(t) + k) * c.in_ch : nullptr;
        for (int oc = 0; oc < c.out_ch; ++oc) {
          double go = g[oc];
          if (go == 0.0) continue;
          double* dwr = dw.data() + (static_cast<size_t>(oc) * c.kernel + k) * c.in_ch;
          const double* wr = c.w.data() + (static_cast<size_t>(oc) * c.kernel + k) * c.in_ch;
          for (int ic = 0; ic < c.in_ch; ++ic) dwr[ic] += go * x[ic];
          if (dx)
            for (int ic = 0; ic < c.in_ch; ++ic) dx[ic] += go * wr[ic];
        }
      }
    }
    for (int t = 0; t < out_len; ++t) {
      const double* g = dout_b + static_cast<size_t>(t) * c.out_ch;
      for (int oc = 0; oc < c.out_ch; ++oc) db[static_cast<size_t>(oc)] += g[oc];
    }
  }
}

void dense_forward(const Dense& d, const double* in, size_t batch, double* out) {
  for (size_t b = 0; b < batch; ++b) {
    const double* x = in + b * static_cast<size_t>(d.in_dim);
    double* o = out + b * static_cast<size_t>(d.out_dim);
    for (int j = 0; j < d.out_dim; ++j) {
      const double* wr = d.w.data() + static_cast<size_t>(j) * d.in_dim;
      double acc = d.b[static_cast<size_t>(j)];
      for (int i = 0; i < d.in_dim; ++i) acc += wr[i] * x[i];
      o[j] = acc;
    }
  }
}

void dense_backward(const Dense& d, const double* in, size_t batch, const double* dout,
                    std::vector<double>& dw, std::vector<double>& db, double* din) {
  dw.assign(d.w.size(), 0.0);
  db.assign(d.b.size(), 0.0);
  if (din) std::fill(din, din + batch * static_cast<size_t>(d.in_dim), 0.0);
  for (size_t b = 0; b < batch; ++b) {
    const double* x = in + b * static_cast<size_t>(d.in_dim);
    const double* g = dout + b * static_cast<size_t>(d.out_dim);
    double* dx = din ? din + b * static_cast<size_t>(d.in_dim) : nullptr;
    for (int j = 0; j < d.out_dim; ++j) {
      double gj = g[j];
      db[static_cast<size_t>(j)] += gj;
      if (gj == 0.0) continue;
      double* dwr = dw.data() + static_cast<size_t>(j) * d.in_dim;
      const double* wr = d.w.data() + static_cast<size_t>(j) * d.in_dim;
      for (int i = 0; i < d.in_dim; ++i) dwr[i] += gj * x[i];
      if (dx)
        for (int i = 0; i < d.in_dim; ++i) dx[i] += gj * wr[i];
    }
  }
}

struct BnStats {
  std::vector<double> mean, var;  // stats used by the forward pass
};

// x, xhat, out: [B][L][C]. Returns the stats the normalization used.
BnStats bn_forward(const BatchNorm& bn, const double* x, size_t batch, int len, Mode mode,
                   double* xhat, double* out) {
  size_t m = batch * static_cast<size_t>(len);
  int C = bn.channels;
  BnStats stats;
  if (mode == Mode::train) {
    stats.mean.assign(static_cast<size_t>(C), 0.0);
    stats.var.assign(static_cast<size_t>(C), 0.0);
    for (size_t i = 0; i < m; ++i) {
      const double* row = x + i * static_cast<size_t>(C);
      for (int c = 0; c < C; ++c) stats.mean[static_cast<size_t>(c)] += row[c];
    }
    for (int c = 0; c < C; ++c) stats.mean[static_cast<size_t>(c)] /= static_cast<double>(m);
    for (size_t i = 0; i < m; ++i) {
      const double* row = x + i * static_cast<size_t>(C);
      for (int c = 0; c < C; ++c) {
        double d = row[c] - stats.mean[static_cast<size_t>(c)];
        stats.var[static_cast<size_t>(c)] += d * d;
      }
    }
    for (int c = 0; c < C; ++c) stats.var[static_cast<size_t>(c)] /= static_cast<double>(m);
  } else {
    stats.mean = bn.running_mean;
    stats.var = bn.running_var;
  }

  std::vector<double> inv_s(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c)
    inv_s[static_cast<size_t>(c)] = 1.0 / std::sqrt(stats.var[static_cast<size_t>(c)] + bn.eps);
  for (size_t i = 0; i < m; ++i) {
    const double* row = x + i * static_cast<size_t>(C);
    double* xh = xhat + i * static_cast<size_t>(C);
    double* o = out + i * static_cast<size_t>(C);
    for (int c = 0; c < C; ++c) {
      size_t cc = static_cast<size_t>(c);
      xh[c] = (row[c] - stats.mean[cc]) * inv_s[cc];
      o[c] = bn.gamma[cc] * xh[c] + bn.beta[cc];
    }
  }
  return stats;
}

// Train mode backpropagates through the batch statistics; eval mode treats
// the normalization as a fixed affine map.
void bn_backward(const BatchNorm& bn, const BnStats& stats, const double* xhat, size_t batch,
                 int len, Mode mode, const double* dout, std::vector<double>& dgamma,
                 std::vector<double>& dbeta, double* dx) {
  size_t m = batch * static_cast<size_t>(len);
  int C = bn.channels;
  dgamma.assign(static_cast<size_t>(C), 0.0);
  dbeta.assign(static_cast<size_t>(C), 0.0);

  std::vector<double> sum_dxhat(static_cast<size_t>(C), 0.0);
  std::vector<double> sum_dxhat_xhat(static_cast<size_t>(C), 0.0);
  for (size_t i = 0; i < m; ++i) {
    const double* g = dout + i * static_cast<size_t>(C);
    const double* xh = xhat + i * static_cast<size_t>(C);
    for (int c = 0; c < C; ++c) {
      size_t cc = static_cast<size_t>(c);
      dgamma[cc] += g[c] * xh[c];
      dbeta[cc] += g[c];
      double dxh = g[c] * bn.gamma[cc];
      sum_dxhat[cc] += dxh;
      sum_dxhat_xhat[cc] += dxh * xh[c];
    }
  }

  std::vector<double> inv_s(static_cast<size_t>(C));
  for (int c = 0; c < C; ++c)
    inv_s[static_cast<size_t>(c)] = 1.0 / std::sqrt(stats.var[static_cast<size_t>(c)] + bn.eps);

  double inv_m = 1.0 / static_cast<double>(m);
  for (size_t i = 0; i < m; ++i) {
    const double* g = dout + i * static_cast<size_t>(C);
    const double* xh = xhat + i * static_cast<size_t>(C);
    double* d = dx + i * static_cast<size_t>(C);
    for (int c = 0; c < C; ++c) {
      size_t cc = static_cast<size_t>(c);
      double dxh = g[c] * bn.gamma[cc];
      if (mode == Mode::train)
        d[c] = inv_s[cc] * (dxh - inv_m * sum_dxhat[cc] - xh[c] * inv_m * sum_dxhat_xhat[cc]);
      else
        d[c] = inv_s[cc] * dxh;
    }
  }
}

struct Cache {
  size_t batch = 0;
  std::vector<double> z1, xhat1, a1, r1;
  std::vector<double> z2, xhat2, a2, r2;
  std::vector<double> h1, logits, probs;
  BnStats stats1, stats2;
};

void forward_cache(const CnnModel& model, std::span<const double> batch_data, size_t B,
                   Mode mode, Cache& c) {
  if (batch_data.size() != B * static_cast<size_t>(kInputLen))
    throw_numeric("cnn input must be batch x 180, got " + std::to_string(batch_data.size()) +
                  " values for batch " + std::to_string(B));
  c.batch = B;
  size_t n1 = B * static_cast<size_t>(kConv1OutLen) * kConv1Filters;
  size_t n2 = B * static_cast<size_t>(kConv2OutLen) * kConv2Filters;
  c.z1.resize(n1);
  c.xhat1.resize(n1);
  c.a1.resize(n1);
  c.r1.resize(n1);
  c.z2.resize(n2);
  c.xhat2.resize(n2);
  c.a2.resize(n2);
  c.r2.resize(n2);
  c.h1.resize(B * static_cast<size_t>(kHiddenLen));
  c.logits.resize(B * static_cast<size_t>(kNumClasses));
  c.probs.resize(B * static_cast<size_t>(kNumClasses));

  conv_forward(model.conv1, batch_data.data(), B, kInputLen, c.z1.data());
  c.stats1 = bn_forward(model.bn1, c.z1.data(), B, kConv1OutLen, mode, c.xhat1.data(), c.a1.data());
  for (size_t i = 0; i < n1; ++i) c.r1[i] = c.a1[i] > 0.0 ? c.a1[i] : 0.0;

  conv_forward(model.conv2, c.r1.data(), B, kConv1OutLen, c.z2.data());
  c.stats2 = bn_forward(model.bn2, c.z2.data(), B, kConv2OutLen, mode, c.xhat2.data(), c.a2.data());
  for (size_t i = 0; i < n2; ++i) c.r2[i] = c.a2[i] > 0.0 ? c.a2[i] : 0.0;

  dense_forward(model.dense1, c.r2.data(), B, c.h1.data());
  dense_forward(model.dense2, c.h1.data(), B, c.logits.data());

  for (size_t b = 0; b < B; ++b) {
    const double* z = c.logits.data() + b * static_cast<size_t>(kNumClasses);
    double* p = c.probs.data() + b * static_cast<size_t>(kNumClasses);
    double mx = z[0];
    for (int k = 1; k < kNumClasses; ++k) mx = std::max(mx, z[k]);
    double sum = 0.0;
    for (int k = 0; k < kNumClasses; ++k) {
      p[k] = std::exp(z[k] - mx);
      sum += p[k];
    }
    for (int k = 0; k < kNumClasses; ++k) p[k] /= sum;
  }
}

double loss_from_cache(const Cache& c, std::span<const int> labels) {
  double loss = 0.0;
  for (size_t b = 0; b < c.batch; ++b) {
    int y = labels[b];
    if (y < 0 || y >= kNumClasses) throw_schema("class label out of range: " + std::to_string(y));
    double p = c.probs[b * static_cast<size_t>(kNumClasses) + static_cast<size_t>(y)];
    loss -= std::log(std::max(p, 1e-300));
  }
  return loss / static_cast<double>(c.batch);
}

// dlogits -> gradients for every trainable parameter
void backward_core(const CnnModel& model, std::span<const double> batch_data, const Cache& c,
                   const std::vector<double>& dlogits, Mode mode, CnnGradients& g) {
  size_t B = c.batch;
  size_t n1 = B * static_cast<size_t>(kConv1OutLen) * kConv1Filters;
  size_t n2 = B * static_cast<size_t>(kConv2OutLen) * kConv2Filters;

  std::vector<double> dh1(B * static_cast<size_t>(kHiddenLen));
  dense_backward(model.dense2, c.h1.data(), B, dlogits.data(), g.dense2_w, g.dense2_b, dh1.data());

  std::vector<double> dr2(n2);
  dense_backward(model.dense1, c.r2.data(), B, dh1.data(), g.dense1_w, g.dense1_b, dr2.data());

  std::vector<double> da2(n2);
  for (size_t i = 0; i < n2; ++i) da2[i] = c.a2[i] > 0.0 ? dr2[i] : 0.0;

  std::vector<double> dz2(n2);
  bn_backward(model.bn2, c.stats2, c.xhat2.data(), B, kConv2OutLen, mode, da2.data(),
              g.bn2_gamma, g.bn2_beta, dz2.data());

  std::vector<double> dr1(n1);
  conv_backward(model.conv2, c.r1.data(), B, kConv1OutLen, dz2.data(), g.conv2_w, g.conv2_b,
                dr1.data());

  std::vector<double> da1(n1);
  for (size_t i = 0; i < n1; ++i) da1[i] = c.a1[i] > 0.0 ? dr1[i] : 0.0;

  std::vector<double> dz1(n1);
  bn_backward(model.bn1, c.stats1, c.xhat1.data(), B, kConv1OutLen, mode, da1.data(),
              g.bn1_gamma, g.bn1_beta, dz1.data());

  conv_backward(model.conv1, batch_data.data(), B, kInputLen, dz1.data(), g.conv1_w, g.conv1_b,
                nullptr);
}

std::vector<std::span<double>> trainable_segments(CnnModel& m) {
  return {m.conv1.w, m.conv1.b, m.bn1.gamma, m.bn1.beta,
          m.conv2.w, m.conv2.b, m.bn2.gamma, m.bn2.beta,
          m.dense1.w, m.dense1.b, m.dense2.w, m.dense2.b};
}

std::vector<std::span<const double>> grad_segments(const CnnGradients& g) {
  return {g.conv1_w, g.conv1_b, g.bn1_gamma, g.bn1_beta,
          g.conv2_w, g.conv2_b, g.bn2_gamma, g.bn2_beta,
          g.dense1_w, g.dense1_b, g.dense2_w, g.dense2_b};
}

}  // namespace

CnnModel init_cnn(uint64_t seed) {
  Rng rng(derive_seed(seed, "speechnet.init"));
  CnnModel m;
  m.seed = seed;
  m.conv1 = make_conv(1, kConv1Filters, kConv1Kernel, rng);
  m.bn1 = make_bn(kConv1Filters);
  m.conv2 = make_conv(kConv1Filters, kConv2Filters, kConv2Kernel, rng);
  m.bn2 = make_bn(kConv2Filters);
  m.dense1 = make_dense(kFlattenLen, kHiddenLen, rng);
  m.dense2 = make_dense(kHiddenLen, kNumClasses, rng);
  return m;
}

ParamCounts count_parameters(const CnnModel& m) {
  ParamCounts counts;
  auto add = [&](size_t n, bool trainable) {
    counts.total += n;
    if (trainable)
      counts.trainable += n;
    else
      counts.non_trainable += n;
  };
  add(m.conv1.w.size(), true);
  add(m.conv1.b.size(), true);
  add(m.bn1.gamma.size(), true);
  add(m.bn1.beta.size(), true);
  add(m.bn1.running_mean.size(), false);
  add(m.bn1.running_var.size(), false);
  add(m.conv2.w.size(), true);
  add(m.conv2.b.size(), true);
  add(m.bn2.gamma.size(), true);
  add(m.bn2.beta.size(), true);
  add(m.bn2.running_mean.size(), false);
  add(m.bn2.running_var.size(), false);
  add(m.dense1.w.size(), true);
  add(m.dense1.b.size(), true);
  add(m.dense2.w.size(), true);
  add(m.dense2.b.size(), true);
  return counts;
}

std::vector<double> cnn_forward(const CnnModel& model, std::span<const double> batch,
                                size_t batch_size, Mode mode) {
  Cache c;
  forward_cache(model, batch, batch_size, mode, c);
  return std::move(c.probs);
}

double cnn_loss(const CnnModel& model, std::span<const double> batch,
                std::span<const int> labels, Mode mode) {
  Cache c;
  forward_cache(model, batch, labels.size(), mode, c);
  return loss_from_cache(c, labels);
}

double cnn_backward(const CnnModel& model, std::span<const double> batch,
                    std::span<const int> labels, Mode mode, CnnGradients& grads) {
  size_t B = labels.size();
  Cache c;
  forward_cache(model, batch, B, mode, c);
  double loss = loss_from_cache(c, labels);

  std::vector<double> dlogits(B * static_cast<size_t>(kNumClasses));
  double inv_b = 1.0 / static_cast<double>(B);
  for (size_t b = 0; b < B; ++b)
    for (int k = 0; k < kNumClasses; ++k) {
      size_t i = b * static_cast<size_t>(kNumClasses) + static_cast<size_t>(k);
      dlogits[i] = (c.probs[i] - (labels[b] == k ? 1.0 : 0.0)) * inv_b;
    }
  backward_core(model, batch, c, dlogits, mode, grads);
  return loss;
}

void cnn_backward_from_probs(const CnnModel& model, std::span<const double> batch,
                             std::span<const double> dprobs, CnnGradients& grads) {
  size_t B = dprobs.size() / static_cast<size_t>(kNumClasses);
  Cache c;
  forward_cache(model, batch, B, Mode::eval, c);

  // through the softmax: dz_j = p_j * (g_j - sum_k g_k p_k)
  std::vector<double> dlogits(B * static_cast<size_t>(kNumClasses));
  for (size_t b = 0; b < B; ++b) {
    const double* p = c.probs.data() + b * static_cast<size_t>(kNumClasses);
    const double* g = dprobs.data() + b * static_cast<size_t>(kNumClasses);
    double dot = 0.0;
    for (int k = 0; k < kNumClasses; ++k) dot += g[k] * p[k];
    for (int k = 0; k < kNumClasses; ++k)
      dlogits[b * static_cast<size_t>(kNumClasses) + static_cast<size_t>(k)] =
          p[k] * (g[k] - dot);
  }
  backward_core(model, batch, c, dlogits, Mode::eval, grads);
}

AdamState make_adam_state(const CnnModel& model) {
  AdamState s;
  s.m.assign(count_parameters(model).trainable, 0.0);
  s.v.assign(s.m.size(), 0.0);
  return s;
}

double train_step(CnnModel& model, std::span<const double> batch, std::span<const int> labels,
                  const TrainConfig& config, AdamState& adam) {
  if (labels.empty()) throw_schema("empty training batch");

  if (config.learning_rate == 0.0)  // strict no-op, running stats included
    return cnn_loss(model, batch, labels, Mode::train);

  Cache c;
  forward_cache(model, batch, labels.size(), Mode::train, c);
  double loss = loss_from_cache(c, labels);
  if (!std::isfinite(loss)) throw_numeric("training loss is not finite (diverged)");

  size_t B = labels.size();
  std::vector<double> dlogits(B * static_cast<size_t>(kNumClasses));
  double inv_b = 1.0 / static_cast<double>(B);
  for (size_t b = 0; b < B; ++b)
    for (int k = 0; k < kNumClasses; ++k) {
      size_t i = b * static_cast<size_t>(kNumClasses) + static_cast<size_t>(k);
      dlogits[i] = (c.probs[i] - (labels[b] == k ? 1.0 : 0.0)) * inv_b;
    }
  CnnGradients grads;
  backward_core(model, batch, c, dlogits, Mode::train, grads);

  // running stats: r = momentum * r + (1 - momentum) * batch stat
  auto update_running = [](BatchNorm& bn, const BnStats& stats) {
    for (int ch = 0; ch < bn.channels; ++ch) {
      size_t cc = static_cast<size_t>(ch);
      bn.running_mean[cc] = bn.momentum * bn.running_mean[cc] + (1.0 - bn.momentum) * stats.mean[cc];
      bn.running_var[cc] = bn.momentum * bn.running_var[cc] + (1.0 - bn.momentum) * stats.var[cc];
    }
  };
  update_running(model.bn1, c.stats1);
  update_running(model.bn2, c.stats2);

  adam.step += 1;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
  auto params = trainable_segments(model);
  auto gsegs = grad_segments(grads);
  size_t off = 0;
  for (size_t s = 0; s < params.size(); ++s) {
    std::span<double> p = params[s];
    std::span<const double> g = gsegs[s];
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = g[i];
      double& m = adam.m[off + i];
      double& v = adam.v[off + i];
      m = config.beta1 * m + (1.0 - config.beta1) * gi;
      v = config.beta2 * v + (1.0 - config.beta2) * gi * gi;
      p[i] -= config.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + config.epsilon);
    }
    off += p.size();
  }
  return loss;
}

namespace {

double accuracy(const CnnModel& model, const std::vector<std::vector<double>>& xs,
                const std::vector<int>& ys) {
  if (xs.empty()) return 0.0;
  size_t correct = 0;
  constexpr size_t kEvalBatch = 64;
  std::vector<double> buffer;
  for (size_t start = 0; start < xs.size(); start += kEvalBatch) {
    size_t b = std::min(kEvalBatch, xs.size() - start);
    buffer.assign(b * static_cast<size_t>(kInputLen), 0.0);
    for (size_t i = 0; i < b; ++i)
      std::copy(xs[start + i].begin(), xs[start + i].end(),
                buffer.begin() + static_cast<long>(i * static_cast<size_t>(kInputLen)));
    auto probs = cnn_forward(model, buffer, b, Mode::eval);
    for (size_t i = 0; i < b; ++i) {
      const double* p = probs.data() + i * static_cast<size_t>(kNumClasses);
      int argmax = 0;
      for (int k = 1; k < kNumClasses; ++k)
        if (p[k] > p[argmax]) argmax = k;
      if (argmax == ys[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(xs.size());
}

}  // namespace

TrainHistory train_cnn(CnnModel& model, const std::vector<std::vector<double>>& train_x,
                       const std::vector<int>& train_y,
                       const std::vector<std::vector<double>>& val_x,
                       const std::vector<int>& val_y, const TrainConfig& config) {
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size())
    throw_schema("features and labels differ in length");
  if (train_x.size() < static_cast<size_t>(config.batch_size))
    throw_schema("dataset smaller than one batch (" + std::to_string(train_x.size()) + " < " +
                 std::to_string(config.batch_size) + ")");
  for (const auto& row : train_x)
    if (row.size() != static_cast<size_t>(kInputLen))
      throw_schema("feature rows must have length 180");

  Rng rng(derive_seed(config.seed, "speechnet.train"));
  AdamState adam = make_adam_state(model);
  TrainHistory history;

  std::vector<size_t> order(train_x.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> batch;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    size_t n_seen = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      size_t b = std::min(static_cast<size_t>(config.batch_size), order.size() - start);
      batch.assign(b * static_cast<size_t>(kInputLen), 0.0);
      labels.resize(b);
      for (size_t i = 0; i < b; ++i) {
        const auto& row = train_x[order[start + i]];
        std::copy(row.begin(), row.end(),
                  batch.begin() + static_cast<long>(i * static_cast<size_t>(kInputLen)));
        labels[i] = train_y[order[start + i]];
      }
      double loss = train_step(model, batch, labels, config, adam);
      loss_sum += loss * static_cast<double>(b);
      n_seen += b;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(n_seen);
    stats.train_acc = accuracy(model, train_x, train_y);
    stats.val_acc = accuracy(model, val_x, val_y);
    history.epochs.push_back(stats);

    if (config.early_stop_train_acc && stats.train_acc >= *config.early_stop_train_acc) break;
  }
  return history;
}

std::string history_to_csv(const TrainHistory& history) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_acc,val_acc,loss\n";
  for (const auto& e : history.epochs)
    out << e.epoch << ',' << e.train_acc << ',' << e.val_acc << ',' << e.loss << '\n';
  return out.str();
}

EmotionTimeline predict_emotion_timeline(const CnnModel& model, std::span<const float> audio,
                                         int sample_rate, const dsp::DspConfig& dsp_config,
                                         int n_threads) {
  constexpr double kWindowSeconds = 10.0;
  constexpr double kMinTailSeconds = 5.0;
  if (sample_rate <= 0) throw_numeric("sample rate must be positive");
  size_t window_len = static_cast<size_t>(kWindowSeconds * sample_rate);
  size_t min_tail = static_cast<size_t>(kMinTailSeconds * sample_rate);
  if (audio.size() < min_tail)
    throw_numeric("audio must be at least 5 s for an emotion timeline, got " +
                  std::to_string(static_cast<double>(audio.size()) / sample_rate) + " s");

  size_t full = audio.size() / window_len;
  size_t remainder = audio.size() - full * window_len;
  size_t n_windows = full + (remainder >= min_tail ? 1 : 0);

  auto eval_window = [&](size_t wi) {
    std::vector<float> window(window_len, 0.0f);
    size_t begin = wi * window_len;
    size_t count = std::min(window_len, audio.size() - begin);
    std::copy(audio.begin() + static_cast<long>(begin),
              audio.begin() + static_cast<long>(begin + count), window.begin());
    auto features = dsp::speech_feature_vector(window, dsp_config).concat();
    auto probs = cnn_forward(model, features, 1, Mode::eval);
    TimelineWindow out;
    out.start = static_cast<double>(wi) * kWindowSeconds;
    out.dist = EmotionDistribution(std::move(probs));
    return out;
  };

  EmotionTimeline timeline;
  timeline.windows.resize(n_windows);
  if (n_threads <= 1 || n_windows <= 1) {
    for (size_t wi = 0; wi < n_windows; ++wi) timeline.windows[wi] = eval_window(wi);
  } else {
    // windows are independent; results land in fixed slots, so the thread
    // count cannot change the output
    std::vector<std::future<void>> workers;
    std::atomic<size_t> next{0};
    size_t n_workers = std::min<size_t>(static_cast<size_t>(n_threads), n_windows);
    for (size_t w = 0; w < n_workers; ++w)
      workers.push_back(std::async(std::launch::async, [&]() {
        for (size_t wi = next.fetch_add(1); wi < n_windows; wi = next.fetch_add(1))
          timeline.windows[wi] = eval_window(wi);
      }));
    for (auto& f : workers) f.get();
  }
  for (auto& w : timeline.windows) w.dist.validate();
  return timeline;
}

double macro_average(std::span<const double> per_class_values) {
  double acc = 0.0;
  for (double v : per_class_values) acc += v;
  return per_class_values.empty() ? 0.0 : acc / static_cast<double>(per_class_values.size());
}

MacroMetrics prf_macro(const std::vector<std::vector<int64_t>>& confusion) {
  size_t k = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != k) throw_schema("confusion matrix must be square");
    for (int64_t v : row)
      if (v < 0) throw_schema("confusion matrix entries must be nonnegative");
  }

  MacroMetrics m;
  std::vector<double> precisions, recalls, f1s;
  for (size_t c = 0; c < k; ++c) {
    int64_t tp = confusion[c][c];
    int64_t fp = 0, fn = 0;
    for (size_t i = 0; i < k; ++i) {
      if (i != c) {
        fp += confusion[i][c];
        fn += confusion[c][i];
      }
    }
    ClassMetrics cm;
    cm.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    cm.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    cm.f1 = (cm.precision + cm.recall) > 0.0
                ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                : 0.0;
    m.per_class.push_back(cm);
    precisions.push_back(cm.precision);
    recalls.push_back(cm.recall);
    f1s.push_back(cm.f1);
  }
  m.macro_precision = macro_average(precisions);
  m.macro_recall = macro_average(recalls);
  m.macro_f1 = macro_average(f1s);
  return m;
}

namespace {

constexpr char kCnnMagic[8] = {'C', 'L', 'U', 'E', 'C', 'N', 'N', '1'};

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

void put_doubles(std::string& out, const std::vector<double>& v, const std::string& name) {
  put_string(out, name);
  put_u64(out, v.size());
  size_t bytes = v.size() * sizeof(double);
  size_t off = out.size();
  out.resize(off + bytes);
  std::memcpy(out.data() + off, v.data(), bytes);
}

struct Reader {
  const std::string& data;
  size_t pos = 0;
  const std::string origin;

  uint64_t u64() {
    if (pos + 8 > data.size()) throw_schema(origin + ": truncated model file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(data[pos + static_cast<size_t>(i)]))
           << (8 * i);
    pos += 8;
    return v;
  }

  std::string str() {
    uint64_t n = u64();
    if (pos + n > data.size()) throw_schema(origin + ": truncated model file");
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
  }

  std::vector<double> doubles(const std::string& expect_name, size_t expect_size) {
    std::string name = str();
    if (name != expect_name)
      throw_schema(origin + ": expected record '" + expect_name + "', found '" + name + "'");
    uint64_t n = u64();
    if (n != expect_size)
      throw_schema(origin + ": record '" + name + "' has " + std::to_string(n) +
                   " values, expected " + std::to_string(expect_size));
    size_t bytes = n * sizeof(double);
    if (pos + bytes > data.size()) throw_schema(origin + ": truncated model file");
    std::vector<double> v(n);
    std::memcpy(v.data(), data.data() + pos, bytes);
    pos += bytes;
    return v;
  }
};

}  // namespace

void save_cnn(const CnnModel& m, const std::filesystem::path& path) {
  std::string out;
  out.append(kCnnMagic, sizeof(kCnnMagic));
  put_u64(out, kNumClasses);
  for (const auto& name : kSpeechEmotionClasses) put_string(out, name);
  put_u64(out, m.seed);
  put_doubles(out, m.conv1.w, "conv1.w");
  put_doubles(out, m.conv1.b, "conv1.b");
  put_doubles(out, m.bn1.gamma, "bn1.gamma");
  put_doubles(out, m.bn1.beta, "bn1.beta");
  put_doubles(out, m.bn1.running_mean, "bn1.running_mean");
  put_doubles(out, m.bn1.running_var, "bn1.running_var");
  put_doubles(out, m.conv2.w, "conv2.w");
  put_doubles(out, m.conv2.b, "conv2.b");
  put_doubles(out, m.bn2.gamma, "bn2.gamma");
  put_doubles(out, m.bn2.beta, "bn2.beta");
  put_doubles(out, m.bn2.running_mean, "bn2.running_mean");
  put_doubles(out, m.bn2.running_var, "bn2.running_var");
  put_doubles(out, m.dense1.w, "dense1.w");
  put_doubles(out, m.dense1.b, "dense1.b");
  put_doubles(out, m.dense2.w, "dense2.w");
  put_doubles(out, m.dense2.b, "dense2.b");
  write_file_atomic(path, out);
}

CnnModel load_cnn(const std::filesystem::path& path) {
  std::string data = read_text_file(path);
  std::string origin = path.string();
  if (data.size() < sizeof(kCnnMagic) ||
      std::memcmp(data.data(), kCnnMagic, sizeof(kCnnMagic)) != 0)
    throw_schema(origin + ": not a CNN model file (bad magic)");

  Reader r{data, sizeof(kCnnMagic), origin};
  uint64_t n_classes = r.u64();
  if (n_classes != kNumClasses)
    throw_schema(origin + ": model has " + std::to_string(n_classes) + " classes, expected 8");
  for (const auto& expected : kSpeechEmotionClasses) {
    std::string name = r.str();
    if (name != expected)
      throw_schema(origin + ": class order mismatch: '" + name + "' vs '" + expected + "'");
  }

  CnnModel m = init_cnn(0);
  m.seed = r.u64();
  m.conv1.w = r.doubles("conv1.w", m.conv1.w.size());
  m.conv1.b = r.doubles("conv1.b", m.conv1.b.size());
  m.bn1.gamma = r.doubles("bn1.gamma", m.bn1.gamma.size());
  m.bn1.beta = r.doubles("bn1.beta", m.bn1.beta.size());
  m.bn1.running_mean = r.doubles("bn1.running_mean", m.bn1.running_mean.size());
  m.bn1.running_var = r.doubles("bn1.running_var", m.bn1.running_var.size());
  m.conv2.w = r.doubles("conv2.w", m.conv2.w.size());
  m.conv2.b = r.doubles("conv2.b", m.conv2.b.size());
  m.bn2.gamma = r.doubles("bn2.gamma", m.bn2.gamma.size());
  m.bn2.beta = r.doubles("bn2.beta", m.bn2.beta.size());
  m.bn2.running_mean = r.doubles("bn2.running_mean", m.bn2.running_mean.size());
  m.bn2.running_var = r.doubles("bn2.running_var", m.bn2.running_var.size());
  m.dense1.w = r.doubles("dense1.w", m.dense1.w.size());
  m.dense1.b = r.doubles("dense1.b", m.dense1.b.size());
  m.dense2.w = r.doubles("dense2.w", m.dense2.w.size());
  m.dense2.b = r.doubles("dense2.b", m.dense2.b.size());
  return m;
}

}  // namespace clue::speechnet
