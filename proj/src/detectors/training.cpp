#include "tinyva/detectors/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "tinyva/errors.hpp"
#include "tinyva/random.hpp"

namespace tinyva::detectors {

CnnNetwork::CnnNetwork(const CnnConfig& config, std::uint64_t seed)
    : CnnNetwork(config.zero_model()) {
  Rng rng(derive_seed(seed, "init"));
  auto glorot = [&](std::size_t offset, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i) params_[offset + i] = rng.uniform(-limit, limit);
  };
  glorot(layout_.conv_w, out_channels_ * in_channels_ * kernel_, in_channels_ * kernel_,
         out_channels_ * kernel_);
  std::size_t width = out_channels_ * positions_;
  for (std::size_t l = 0; l < widths_.size(); ++l) {
    glorot(layout_.dense_w[l], width * widths_[l], width, widths_[l]);
    width = widths_[l];
  }
}

CnnNetwork::CnnNetwork(const FloatCnn& model) {
  model.validate();
  input_length_ = model.input_length;
  in_channels_ = model.conv.in_channels;
  out_channels_ = model.conv.out_channels;
  kernel_ = model.conv.kernel;
  stride_ = model.conv.stride;
  positions_ = model.conv_positions();
  const auto flat = flatten_parameters(model);
  params_.assign(flat.begin(), flat.end());

  std::size_t offset = 0;
  layout_.conv_w = offset;
  offset += model.conv.weights.size();
  layout_.conv_b = offset;
  offset += model.conv.bias.size();
  for (const auto& d : model.dense) {
    widths_.push_back(d.outputs);
    layout_.dense_w.push_back(offset);
    offset += d.weights.size();
    layout_.dense_b.push_back(offset);
    offset += d.bias.size();
  }
}

FloatCnn CnnNetwork::to_float() const {
  FloatCnn m;
  m.input_length = input_length_;
  auto slice = [&](std::size_t offset, std::size_t count) {
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<float>(params_[offset + i]);
    return out;
  };
  m.conv = {in_channels_, out_channels_, kernel_, stride_,
            slice(layout_.conv_w, out_channels_ * in_channels_ * kernel_),
            slice(layout_.conv_b, out_channels_)};
  std::size_t width = out_channels_ * positions_;
  for (std::size_t l = 0; l < widths_.size(); ++l) {
    m.dense.push_back({width, widths_[l], slice(layout_.dense_w[l], width * widths_[l]),
                       slice(layout_.dense_b[l], widths_[l])});
    width = widths_[l];
  }
  return m;
}

// Forward pass for one example; when `gradient` is set, accumulates
// weight * d(loss)/d(params) into it. Returns the example's loss.
double CnnNetwork::example_pass(const Example& ex, std::vector<double>* gradient,
                                double weight) const {
  if (ex.samples.size() != input_length_) throw ModelError("training example has the wrong length");
  const double* p = params_.data();
  const float* x = ex.samples.data();

  // Pre-activations per layer; layer 0 is the conv.
  std::vector<std::vector<double>> pre(widths_.size() + 1);
  std::vector<std::vector<double>> post(widths_.size() + 1);

  auto& conv_z = pre[0];
  conv_z.resize(out_channels_ * positions_);
  for (std::size_t c = 0; c < out_channels_; ++c) {
    const double* w = p + layout_.conv_w + c * kernel_;
    const double b = p[layout_.conv_b + c];
    for (std::size_t t = 0; t < positions_; ++t) {
      const float* in = x + t * stride_;
      double acc = b;
      for (std::size_t k = 0; k < kernel_; ++k) acc += w[k] * in[k];
      conv_z[c * positions_ + t] = acc;
    }
  }
  post[0].resize(conv_z.size());
  std::transform(conv_z.begin(), conv_z.end(), post[0].begin(), [](double z) { return std::max(z, 0.0); });

  for (std::size_t l = 0; l < widths_.size(); ++l) {
    const auto& in = post[l];
    const std::size_t n_in = in.size();
    const std::size_t n_out = widths_[l];
    const double* w = p + layout_.dense_w[l];
    const double* b = p + layout_.dense_b[l];
    auto& z = pre[l + 1];
    z.resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = b[o];
      const double* row = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
      z[o] = acc;
    }
    const bool last = l + 1 == widths_.size();
    post[l + 1].resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) post[l + 1][o] = last ? z[o] : std::max(z[o], 0.0);
  }

  // Softmax cross-entropy over the two logits, stabilized by the max.
  const auto& logits = post.back();
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx);
  const double e1 = std::exp(logits[1] - mx);
  const double log_sum = mx + std::log(e0 + e1);
  const std::size_t y = ex.label == iegm::MainCategory::VA ? 1 : 0;
  const double loss = log_sum - logits[y];
  if (!gradient) return loss;

  auto& g = *gradient;
  std::vector<double> delta = {e0 / (e0 + e1), e1 / (e0 + e1)};
  delta[y] -= 1.0;
  for (auto& d : delta) d *= weight;

  for (std::size_t l = widths_.size(); l-- > 0;) {
    const auto& in = post[l];
    const std::size_t n_in = in.size();
    const std::size_t n_out = widths_[l];
    const double* w = p + layout_.dense_w[l];
    double* gw = g.data() + layout_.dense_w[l];
    double* gb = g.data() + layout_.dense_b[l];
    std::vector<double> back(n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      const double* row = w + o * n_in;
      double* grow = gw + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) {
        grow[i] += d * in[i];
        back[i] += d * row[i];
      }
    }
    const auto& z_in = pre[l];
    for (std::size_t i = 0; i < n_in; ++i) back[i] = z_in[i] > 0.0 ? back[i] : 0.0;
    delta.swap(back);
  }

  for (std::size_t c = 0; c < out_channels_; ++c) {
    double* gw = g.data() + layout_.conv_w + c * kernel_;
    double& gb = g[layout_.conv_b + c];
    for (std::size_t t = 0; t < positions_; ++t) {
      const double d = delta[c * positions_ + t];
      if (d == 0.0) continue;
      gb += d;
      const float* in = x + t * stride_;
      for (std::size_t k = 0; k < kernel_; ++k) gw[k] += d * in[k];
    }
  }
  return loss;
}

double CnnNetwork::loss_and_gradient(std::span<const Example> batch,
                                     std::vector<double>& gradient) const {
  gradient.assign(params_.size(), 0.0);
  if (batch.empty()) return 0.0;
  const double weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) total += example_pass(ex, &gradient, weight);
  return total * weight;
}

double CnnNetwork::loss(std::span<const Example> batch) const {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : batch) total += example_pass(ex, nullptr, 0.0);
  return total / static_cast<double>(batch.size());
}

double cosine_learning_rate(double initial, int epoch, int epochs) {
  return initial * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

TrainingResult train_cnn(const CnnConfig& config, std::span<const iegm::IegmSegment> train,
                         std::uint64_t seed, const TrainingOptions& options) {
  config.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  bool has_va = false;
  bool has_non_va = false;
  for (const auto& seg : train) {
    if (seg.samples.size() != config.input_length) {
      throw ConfigError("training segment of patient '" + seg.patient_id + "' has the wrong length");
    }
    (seg.main() == iegm::MainCategory::VA ? has_va : has_non_va) = true;
  }
  if (!has_va || !has_non_va) throw ConfigError("training set must contain both VA and non-VA segments");

  const auto& tc = config.training;
  CnnNetwork net(config, seed);
  TrainingResult result;
  result.initial = net.to_float();
  result.report.seed = seed;

  const std::size_t n_params = net.parameters().size();
  std::vector<double> grad, m(n_params, 0.0), v(n_params, 0.0);
  std::vector<double> swa_sum(n_params, 0.0);
  int swa_count = 0;
  std::uint64_t step = 0;

  std::vector<double> sample_std(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) sample_std[i] = iegm::population_std(train[i].samples);

  Rng rng(derive_seed(seed, "train"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(tc.batch_size);
  std::vector<std::vector<float>> buffers(batch_size, std::vector<float>(config.input_length));
  std::vector<CnnNetwork::Example> batch;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = cosine_learning_rate(tc.learning_rate, epoch, tc.epochs);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t b = start; b < end; ++b) {
        const auto& seg = train[order[b]];
        auto& buf = buffers[b - start];
        std::copy(seg.samples.begin(), seg.samples.end(), buf.begin());
        if (tc.augment_flip && rng.bernoulli(0.5)) {
          if (tc.flip_mode == iegm::FlipMode::Amplitude) {
            for (float& s : buf) s = -s;
          } else {
            std::reverse(buf.begin(), buf.end());
          }
        }
        if (tc.noise_sigma_fraction > 0.0) {
          const double sigma = tc.noise_sigma_fraction * sample_std[order[b]];
          for (float& s : buf) s = static_cast<float>(s + sigma * rng.normal());
        }
        batch.push_back({buf, seg.main()});
      }

      const double loss = net.loss_and_gradient(batch, grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged (non-finite loss) in epoch " + std::to_string(epoch + 1),
                            epoch + 1);
      }
      epoch_loss += loss * static_cast<double>(batch.size());

      ++step;
      const double bc1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(step));
      auto params = net.parameters();
      for (std::size_t k = 0; k < n_params; ++k) {
        m[k] = tc.adam_beta1 * m[k] + (1.0 - tc.adam_beta1) * grad[k];
        v[k] = tc.adam_beta2 * v[k] + (1.0 - tc.adam_beta2) * grad[k] * grad[k];
        params[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + tc.adam_epsilon);
      }
    }
    result.report.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    result.report.epoch_learning_rate.push_back(lr);

    if (epoch + 1 >= tc.swa_start_epoch) {
      const auto params = net.parameters();
      for (std::size_t k = 0; k < n_params; ++k) swa_sum[k] += params[k];
      ++swa_count;
      if (options.keep_swa_snapshots) {
        result.report.snapshots.emplace_back(params.begin(), params.end());
      }
    }
  }

  if (swa_count > 0) {
    auto params = net.parameters();
    for (std::size_t k = 0; k < n_params; ++k) params[k] = swa_sum[k] / swa_count;
  }
  result.report.swa_snapshots = swa_count;
  result.model = ModelArtifact(net.to_float());
  return result;
}

}  // namespace tinyva::detectors
