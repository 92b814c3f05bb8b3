#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ipp/features.hpp"

namespace ipp {

namespace detail {
struct NetLayout;
}

/// Architecture of the policy-value network.
///
/// stem 3x3 conv -> `encoder_blocks` non-bottleneck-1D residual blocks
/// (3x1, 1x3, 3x1, 1x3) with a global-pooling bias layer after every
/// `pooling_bias_interval`-th block -> two heads. Each head starts with a
/// global-pooling bias layer, runs `head_blocks` 3x3 conv blocks and reduces
/// with global mean and max pooling. The policy head emits one logit per
/// (level, cell) from a 1x1 conv plus a pooled per-level bias; the value head
/// maps the pooled vector to a softplus scalar. Nothing depends on the grid
/// size, so one set of weights serves any g >= 1.
struct NetConfig {
  int input_planes = 17;
  int action_levels = 2;
  int channels = 32;
  int encoder_blocks = 10;
  int pooling_bias_interval = 3;
  bool global_pooling_bias = true;
  int head_channels = 32;
  int head_blocks = 3;

  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Coefficients of value MSE, policy cross-entropy and L2 penalty.
struct LossWeights {
  double value = 1.0;
  double policy = 1.0;
  double l2 = 1e-4;
};

template <typename T>
struct NetOutput {
  std::vector<T> logits;  // raw, over all actions
  std::vector<T> policy;  // zero outside the reachable set
  T value{};
};

/// One supervised example. Spans must outlive the loss call.
struct LossSample {
  const FeatureStack* features = nullptr;
  std::span<const int> reachable;
  std::span<const float> target_policy;  // dense over all actions
  double target_value = 0.0;
};

/// Softmax over `reachable` entries of `logits`; every other entry is 0.
template <typename T>
std::vector<T> masked_softmax(std::span<const T> logits, std::span<const int> reachable);

template <typename T>
class PolicyValueNet {
 public:
  explicit PolicyValueNet(NetConfig config);

  const NetConfig& config() const { return config_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<T> parameters() { return params_; }
  std::span<const T> parameters() const { return params_; }

  /// He-style uniform fan-in initialization; output layers start small so
  /// the initial policy is close to uniform.
  void initialize(std::uint64_t seed);

  NetOutput<T> forward(const FeatureStack& features, std::span<const int> reachable) const;

  /// Mean loss over `batch` plus the L2 term. When `grad` is non-empty it is
  /// overwritten with the gradient w.r.t. the parameters.
  T loss(std::span<const LossSample> batch, const LossWeights& weights,
         std::span<T> grad = {}) const;

  template <typename U>
  PolicyValueNet<U> cast() const {
    PolicyValueNet<U> out(config_);
    auto dst = out.parameters();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i] = static_cast<U>(params_[i]);
    return out;
  }

 private:
  NetConfig config_;
  std::vector<T> params_;
  std::shared_ptr<const detail::NetLayout> layout_;
};

extern template class PolicyValueNet<float>;
extern template class PolicyValueNet<double>;

using Network = PolicyValueNet<float>;

}  // namespace ipp
