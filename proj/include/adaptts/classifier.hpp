#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "adaptts/timeseries.hpp"

namespace adaptts {

/// One-hidden-layer tanh MLP over the flattened K*T input with a softmax
/// head. Small enough to gradient-check, large enough to exercise every
/// training rule; the trainer only sees the generic forward/loss/gradient
/// surface, so other models can be slotted in behind it.
struct Architecture {
  int channels = 0;      // K
  int length = 0;        // T
  int hidden = 32;       // h
  int label_count = 0;   // L

  int input_dim() const { return channels * length; }
  int parameter_count() const {
    return hidden * input_dim() + hidden + label_count * hidden + label_count;
  }
};

enum class InitScheme {
  UniformZeroOne,  // weights ~ Uniform[0,1], biases 0 (reproduction mode)
  Symmetric        // weights ~ Uniform[-s, s], s = 1/sqrt(fan_in)
};

struct ClassifierState {
  Architecture arch;
  Eigen::VectorXd theta;
  std::uint64_t rng_seed = 0;
};

using Prediction = Eigen::VectorXd;  // L nonnegative entries summing to 1

struct Example {
  const TimeSeries* series;
  Label label;
};

using Batch = std::vector<Example>;

Batch make_batch(const DomainDataset& domain, const std::vector<Label>& labels);

ClassifierState init_classifier(const Architecture& arch, std::uint64_t seed,
                                InitScheme scheme = InitScheme::UniformZeroOne);

Prediction forward(const ClassifierState& state, const TimeSeries& x);

/// Mean categorical cross-entropy over the batch; probabilities are
/// clamped below by 1e-12 before the log.
double loss(const ClassifierState& state, const Batch& batch);

/// Exact gradient of `loss` with respect to theta.
Eigen::VectorXd gradient(const ClassifierState& state, const Batch& batch);

/// Joint evaluation, one forward/backward pass.
void loss_and_gradient(const ClassifierState& state, const Batch& batch,
                       double& loss_out, Eigen::VectorXd& grad_out);

ClassifierState step(const ClassifierState& state, const Eigen::VectorXd& grad,
                     double lr);

int predict_label(const ClassifierState& state, const TimeSeries& x);

void save_checkpoint(const ClassifierState& state,
                     const std::filesystem::path& file);
ClassifierState load_checkpoint(const std::filesystem::path& file);

}  // namespace adaptts
