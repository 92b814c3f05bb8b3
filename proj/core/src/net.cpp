#include "ipp/net.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Core>
#include <fmt/format.h>

#include "ipp/error.hpp"
#include "ipp/rng.hpp"

namespace ipp {

namespace detail {

struct Conv {
  int in = 0, out = 0, kh = 1, kw = 1;
  std::size_t w = 0, b = 0;
  int fan_in() const { return in * kh * kw; }
};

struct Linear {
  int in = 0, out = 0;
  std::size_t w = 0, b = 0;
};

struct ResidualBlock {
  std::array<Conv, 4> convs;
  bool pool_bias = false;
  Linear pool;  // 2C -> C
};

struct Head {
  bool pool_bias = false;
  Linear pool;
  std::vector<Conv> convs;
};

struct WeightInit {
  std::size_t offset, count;
  int fan_in;
  double scale;
};

struct NetLayout {
  Conv stem;
  std::vector<ResidualBlock> blocks;
  Head policy, value;
  Conv policy_cells;     // 1x1, head_channels -> levels
  Linear policy_levels;  // pooled (2 * head_channels) -> levels
  Linear value_out;      // pooled (2 * head_channels) -> 1
  std::vector<WeightInit> inits;
  std::size_t total = 0;

  Conv conv(int in, int out, int kh, int kw, double scale = 1.0) {
    Conv c{in, out, kh, kw, total, 0};
    total += static_cast<std::size_t>(out) * in * kh * kw;
    c.b = total;
    total += static_cast<std::size_t>(out);
    inits.push_back({c.w, c.b - c.w, c.fan_in(), scale});
    return c;
  }

  Linear linear(int in, int out, double scale = 1.0) {
    Linear l{in, out, total, 0};
    total += static_cast<std::size_t>(out) * in;
    l.b = total;
    total += static_cast<std::size_t>(out);
    inits.push_back({l.w, l.b - l.w, in, scale});
    return l;
  }
};

namespace {

NetLayout make_layout(const NetConfig& cfg) {
  NetLayout l;
  const int c = cfg.channels, h = cfg.head_channels;
  l.stem = l.conv(cfg.input_planes, c, 3, 3);
  for (int i = 0; i < cfg.encoder_blocks; ++i) {
    ResidualBlock b;
    b.convs[0] = l.conv(c, c, 3, 1);
    b.convs[1] = l.conv(c, c, 1, 3);
    b.convs[2] = l.conv(c, c, 3, 1);
    // Residual branches start close to the identity.
    b.convs[3] = l.conv(c, c, 1, 3, 0.25);
    b.pool_bias = cfg.global_pooling_bias && cfg.pooling_bias_interval > 0 &&
                  (i + 1) % cfg.pooling_bias_interval == 0;
    if (b.pool_bias) b.pool = l.linear(2 * c, c, 0.5);
    l.blocks.push_back(b);
  }
  for (Head* head : {&l.policy, &l.value}) {
    head->pool_bias = cfg.global_pooling_bias;
    if (head->pool_bias) head->pool = l.linear(2 * c, c, 0.5);
    int in = c;
    for (int i = 0; i < cfg.head_blocks; ++i) {
      head->convs.push_back(l.conv(in, h, 3, 3));
      in = h;
    }
  }
  const int head_out = cfg.head_blocks > 0 ? h : c;
  l.policy_cells = l.conv(head_out, cfg.action_levels, 1, 1, 0.1);
  l.policy_levels = l.linear(2 * head_out, cfg.action_levels, 0.1);
  l.value_out = l.linear(2 * head_out, 1, 0.1);
  return l;
}

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using WeightMap = Eigen::Map<const Mat<T>>;
template <typename T>
using GradMap = Eigen::Map<Mat<T>>;

struct Shape {
  int h, w;
  int pixels() const { return h * w; }
};

template <typename T>
Mat<T> im2col(const Mat<T>& in, Shape s, int kh, int kw) {
  if (kh == 1 && kw == 1) return in;
  const int ph = kh / 2, pw = kw / 2;
  Mat<T> col = Mat<T>::Zero(in.rows() * kh * kw, s.pixels());
  for (Eigen::Index ci = 0; ci < in.rows(); ++ci)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        T* dst = col.row((ci * kh + ky) * kw + kx).data();
        const T* src = in.row(ci).data();
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + ky - ph;
          if (sy < 0 || sy >= s.h) continue;
          const int x_lo = std::max(0, pw - kx), x_hi = std::min(s.w, s.w + pw - kx);
          for (int x = x_lo; x < x_hi; ++x) dst[y * s.w + x] = src[sy * s.w + x + kx - pw];
        }
      }
  return col;
}

template <typename T>
Mat<T> col2im(const Mat<T>& col, int channels, Shape s, int kh, int kw) {
  if (kh == 1 && kw == 1) return col;
  const int ph = kh / 2, pw = kw / 2;
  Mat<T> out = Mat<T>::Zero(channels, s.pixels());
  for (int ci = 0; ci < channels; ++ci)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const T* src = col.row((ci * kh + ky) * kw + kx).data();
        T* dst = out.row(ci).data();
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + ky - ph;
          if (sy < 0 || sy >= s.h) continue;
          const int x_lo = std::max(0, pw - kx), x_hi = std::min(s.w, s.w + pw - kx);
          for (int x = x_lo; x < x_hi; ++x) dst[sy * s.w + x + kx - pw] += src[y * s.w + x];
        }
      }
  return out;
}

template <typename T>
Mat<T> conv_forward(const T* p, const Conv& l, const Mat<T>& in, Shape s) {
  const WeightMap<T> w(p + l.w, l.out, l.fan_in());
  const Eigen::Map<const Vec<T>> b(p + l.b, l.out);
  Mat<T> out = w * im2col(in, s, l.kh, l.kw);
  out.colwise() += b;
  return out;
}

// Accumulates parameter gradients; returns d input when requested.
template <typename T>
Mat<T> conv_backward(const T* p, const Conv& l, const Mat<T>& in, const Mat<T>& dout, Shape s,
                     T* g, bool need_input_grad) {
  const Mat<T> col = im2col(in, s, l.kh, l.kw);
  GradMap<T> gw(g + l.w, l.out, l.fan_in());
  Eigen::Map<Vec<T>> gb(g + l.b, l.out);
  gw.noalias() += dout * col.transpose();
  gb += dout.rowwise().sum();
  if (!need_input_grad) return {};
  const WeightMap<T> w(p + l.w, l.out, l.fan_in());
  const Mat<T> dcol = w.transpose() * dout;
  return col2im(dcol, l.in, s, l.kh, l.kw);
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
Mat<T> silu(const Mat<T>& pre) {
  return pre.unaryExpr([](T x) { return x * sigmoid(x); });
}

template <typename T>
Mat<T> silu_backward(const Mat<T>& pre, const Mat<T>& dout) {
  return dout.binaryExpr(pre, [](T d, T x) {
    const T s = sigmoid(x);
    return d * s * (T(1) + x * (T(1) - s));
  });
}

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

// Channel-wise [mean..., max...] with the argmax pixel of each channel.
template <typename T>
struct Pooled {
  Vec<T> values;
  std::vector<Eigen::Index> argmax;
};

template <typename T>
Pooled<T> global_pool(const Mat<T>& x) {
  const auto c = x.rows();
  Pooled<T> out{Vec<T>(2 * c), std::vector<Eigen::Index>(static_cast<std::size_t>(c))};
  for (Eigen::Index i = 0; i < c; ++i) {
    out.values[i] = x.row(i).mean();
    Eigen::Index idx = 0;
    out.values[c + i] = x.row(i).maxCoeff(&idx);
    out.argmax[static_cast<std::size_t>(i)] = idx;
  }
  return out;
}

template <typename T>
void global_pool_backward(const Pooled<T>& pooled, const Vec<T>& dpooled, Mat<T>& dx) {
  const auto c = dx.rows();
  const T inv = T(1) / static_cast<T>(dx.cols());
  for (Eigen::Index i = 0; i < c; ++i) {
    dx.row(i).array() += dpooled[i] * inv;
    dx(i, pooled.argmax[static_cast<std::size_t>(i)]) += dpooled[c + i];
  }
}

template <typename T>
Vec<T> linear_forward(const T* p, const Linear& l, const Vec<T>& x) {
  const WeightMap<T> w(p + l.w, l.out, l.in);
  const Eigen::Map<const Vec<T>> b(p + l.b, l.out);
  return w * x + b;
}

template <typename T>
Vec<T> linear_backward(const T* p, const Linear& l, const Vec<T>& x, const Vec<T>& dout, T* g) {
  GradMap<T> gw(g + l.w, l.out, l.in);
  Eigen::Map<Vec<T>> gb(g + l.b, l.out);
  gw.noalias() += dout * x.transpose();
  gb += dout;
  const WeightMap<T> w(p + l.w, l.out, l.in);
  return w.transpose() * dout;
}

// x + broadcast(W [mean; max] + b)
template <typename T>
struct PoolBiasCache {
  Pooled<T> pooled;
};

template <typename T>
Mat<T> pool_bias_forward(const T* p, const Linear& l, const Mat<T>& x, PoolBiasCache<T>& cache) {
  cache.pooled = global_pool(x);
  const Vec<T> bias = linear_forward(p, l, cache.pooled.values);
  Mat<T> out = x;
  out.colwise() += bias;
  return out;
}

template <typename T>
Mat<T> pool_bias_backward(const T* p, const Linear& l, const PoolBiasCache<T>& cache,
                          const Mat<T>& dout, T* g) {
  const Vec<T> dbias = dout.rowwise().sum();
  const Vec<T> dpooled = linear_backward(p, l, cache.pooled.values, dbias, g);
  Mat<T> dx = dout;
  global_pool_backward(cache.pooled, dpooled, dx);
  return dx;
}

template <typename T>
struct BlockCache {
  Mat<T> in;
  std::array<Mat<T>, 4> pre;
  std::array<Mat<T>, 3> act;
  Mat<T> sum;
  Mat<T> out;
  PoolBiasCache<T> pool;
};

template <typename T>
struct HeadCache {
  Mat<T> in;
  PoolBiasCache<T> pool;
  std::vector<Mat<T>> inputs;  // input of each conv
  std::vector<Mat<T>> pre;
  Mat<T> out;
  Pooled<T> pooled;
};

template <typename T>
struct ForwardCache {
  Shape shape{};
  Mat<T> input;
  Mat<T> stem_pre;
  std::vector<BlockCache<T>> blocks;
  Mat<T> trunk;
  HeadCache<T> policy_head, value_head;
  Vec<T> logits;
  T value_pre{};
  T value{};
};

template <typename T>
Mat<T> head_forward(const T* p, const Head& head, const Mat<T>& trunk, Shape s,
                    HeadCache<T>& cache) {
  cache.in = trunk;
  Mat<T> h = head.pool_bias ? pool_bias_forward(p, head.pool, trunk, cache.pool) : trunk;
  cache.inputs.clear();
  cache.pre.clear();
  for (const Conv& c : head.convs) {
    cache.inputs.push_back(h);
    cache.pre.push_back(conv_forward(p, c, h, s));
    h = silu(cache.pre.back());
  }
  cache.pooled = global_pool(h);
  cache.out = h;
  return h;
}

template <typename T>
Mat<T> head_backward(const T* p, const Head& head, const HeadCache<T>& cache, Mat<T> dh,
                     Shape s, T* g) {
  for (std::size_t i = head.convs.size(); i-- > 0;) {
    const Mat<T> dpre = silu_backward(cache.pre[i], dh);
    dh = conv_backward(p, head.convs[i], cache.inputs[i], dpre, s, g, true);
  }
  if (head.pool_bias) dh = pool_bias_backward(p, head.pool, cache.pool, dh, g);
  return dh;
}

template <typename T>
void run_forward(const NetLayout& l, const NetConfig& cfg, const T* p, const FeatureStack& x,
                 ForwardCache<T>& c) {
  if (x.planes != cfg.input_planes)
    throw ContractViolation(fmt::format("network expects {} input planes, got {}",
                                        cfg.input_planes, x.planes));
  c.shape = {x.grid_dim, x.grid_dim};
  const int pixels = c.shape.pixels();
  c.input.resize(x.planes, pixels);
  for (int i = 0; i < x.planes; ++i)
    for (int j = 0; j < pixels; ++j)
      c.input(i, j) = static_cast<T>(x.data[static_cast<std::size_t>(i) * pixels + j]);

  c.stem_pre = conv_forward(p, l.stem, c.input, c.shape);
  Mat<T> h = silu(c.stem_pre);

  c.blocks.resize(l.blocks.size());
  for (std::size_t i = 0; i < l.blocks.size(); ++i) {
    const ResidualBlock& b = l.blocks[i];
    BlockCache<T>& bc = c.blocks[i];
    bc.in = h;
    Mat<T> a = h;
    for (int k = 0; k < 4; ++k) {
      bc.pre[k] = conv_forward(p, b.convs[k], a, c.shape);
      if (k < 3) {
        bc.act[k] = silu(bc.pre[k]);
        a = bc.act[k];
      }
    }
    bc.sum = bc.pre[3] + bc.in;
    bc.out = silu(bc.sum);
    h = b.pool_bias ? pool_bias_forward(p, b.pool, bc.out, bc.pool) : bc.out;
  }
  c.trunk = h;

  const Mat<T> ph = head_forward(p, l.policy, c.trunk, c.shape, c.policy_head);
  const Mat<T> cells = conv_forward(p, l.policy_cells, ph, c.shape);
  const Vec<T> levels = linear_forward(p, l.policy_levels, c.policy_head.pooled.values);
  c.logits.resize(cfg.action_levels * pixels);
  for (int lv = 0; lv < cfg.action_levels; ++lv)
    for (int j = 0; j < pixels; ++j) c.logits[lv * pixels + j] = cells(lv, j) + levels[lv];

  head_forward(p, l.value, c.trunk, c.shape, c.value_head);
  c.value_pre = linear_forward(p, l.value_out, c.value_head.pooled.values)[0];
  c.value = softplus(c.value_pre);
}

template <typename T>
void run_backward(const NetLayout& l, const NetConfig& cfg, const T* p, const ForwardCache<T>& c,
                  const Vec<T>& dlogits, T dvalue, T* g) {
  const int pixels = c.shape.pixels();

  // Policy head.
  Mat<T> dcells(cfg.action_levels, pixels);
  Vec<T> dlevels = Vec<T>::Zero(cfg.action_levels);
  for (int lv = 0; lv < cfg.action_levels; ++lv)
    for (int j = 0; j < pixels; ++j) {
      dcells(lv, j) = dlogits[lv * pixels + j];
      dlevels[lv] += dlogits[lv * pixels + j];
    }
  Mat<T> dph = conv_backward(p, l.policy_cells, c.policy_head.out, dcells, c.shape, g, true);
  const Vec<T> dppool = linear_backward(p, l.policy_levels, c.policy_head.pooled.values, dlevels, g);
  global_pool_backward(c.policy_head.pooled, dppool, dph);
  Mat<T> dtrunk = head_backward(p, l.policy, c.policy_head, std::move(dph), c.shape, g);

  // Value head.
  Vec<T> dvpre(1);
  dvpre[0] = dvalue * sigmoid(c.value_pre);
  const Vec<T> dvpool = linear_backward(p, l.value_out, c.value_head.pooled.values, dvpre, g);
  Mat<T> dvh = Mat<T>::Zero(c.value_head.out.rows(), pixels);
  global_pool_backward(c.value_head.pooled, dvpool, dvh);
  dtrunk += head_backward(p, l.value, c.value_head, std::move(dvh), c.shape, g);

  // Encoder.
  Mat<T> dh = std::move(dtrunk);
  for (std::size_t i = l.blocks.size(); i-- > 0;) {
    const ResidualBlock& b = l.blocks[i];
    const BlockCache<T>& bc = c.blocks[i];
    if (b.pool_bias) dh = pool_bias_backward(p, b.pool, bc.pool, dh, g);
    const Mat<T> dsum = silu_backward(bc.sum, dh);
    Mat<T> din = dsum;
    Mat<T> d = dsum;
    for (int k = 3; k >= 0; --k) {
      const Mat<T>& input = k == 0 ? bc.in : bc.act[k - 1];
      d = conv_backward(p, b.convs[k], input, d, c.shape, g, true);
      if (k > 0) d = silu_backward(bc.pre[k - 1], d);
    }
    din += d;
    dh = std::move(din);
  }

  const Mat<T> dstem = silu_backward(c.stem_pre, dh);
  conv_backward(p, l.stem, c.input, dstem, c.shape, g, false);
}

}  // namespace
}  // namespace detail

void NetConfig::validate() const {
  if (input_planes < 1) throw ConfigError("net.input_planes must be >= 1");
  if (action_levels < 1) throw ConfigError("net.action_levels must be >= 1");
  if (channels < 1) throw ConfigError("net.channels must be >= 1");
  if (encoder_blocks < 0) throw ConfigError("net.encoder_blocks must be >= 0");
  if (pooling_bias_interval < 0) throw ConfigError("net.pooling_bias_interval must be >= 0");
  if (head_channels < 1) throw ConfigError("net.head_channels must be >= 1");
  if (head_blocks < 0) throw ConfigError("net.head_blocks must be >= 0");
}

template <typename T>
std::vector<T> masked_softmax(std::span<const T> logits, std::span<const int> reachable) {
  std::vector<T> p(logits.size(), T(0));
  if (reachable.empty()) return p;
  T hi = -std::numeric_limits<T>::infinity();
  for (int a : reachable) hi = std::max(hi, logits[static_cast<std::size_t>(a)]);
  T z = 0;
  for (int a : reachable) {
    const T e = std::exp(logits[static_cast<std::size_t>(a)] - hi);
    p[static_cast<std::size_t>(a)] = e;
    z += e;
  }
  for (int a : reachable) p[static_cast<std::size_t>(a)] /= z;
  return p;
}

template <typename T>
PolicyValueNet<T>::PolicyValueNet(NetConfig config) : config_(config) {
  config_.validate();
  layout_ = std::make_shared<const detail::NetLayout>(detail::make_layout(config_));
  params_.assign(layout_->total, T(0));
}

template <typename T>
void PolicyValueNet<T>::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x6e6574ULL}));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::fill(params_.begin(), params_.end(), T(0));
  for (const auto& init : layout_->inits) {
    const double bound = init.scale * std::sqrt(6.0 / std::max(1, init.fan_in));
    for (std::size_t i = 0; i < init.count; ++i)
      params_[init.offset + i] = static_cast<T>(bound * unit(rng));
  }
}

template <typename T>
NetOutput<T> PolicyValueNet<T>::forward(const FeatureStack& features,
                                        std::span<const int> reachable) const {
  detail::ForwardCache<T> cache;
  detail::run_forward(*layout_, config_, params_.data(), features, cache);
  NetOutput<T> out;
  out.logits.assign(cache.logits.data(), cache.logits.data() + cache.logits.size());
  out.policy = masked_softmax<T>(out.logits, reachable);
  out.value = cache.value;
  return out;
}

template <typename T>
T PolicyValueNet<T>::loss(std::span<const LossSample> batch, const LossWeights& weights,
                          std::span<T> grad) const {
  if (batch.empty()) throw ContractViolation("loss: empty batch");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != params_.size())
    throw ContractViolation("loss: gradient buffer has the wrong size");
  if (want_grad) std::fill(grad.begin(), grad.end(), T(0));

  constexpr double kLogFloor = 1e-12;
  const T inv_n = T(1) / static_cast<T>(batch.size());
  T total = 0;
  for (const LossSample& s : batch) {
    detail::ForwardCache<T> cache;
    detail::run_forward(*layout_, config_, params_.data(), *s.features, cache);
    std::span<const T> logits(cache.logits.data(), static_cast<std::size_t>(cache.logits.size()));
    const std::vector<T> p = masked_softmax<T>(logits, s.reachable);
    if (s.target_policy.size() != p.size())
      throw ContractViolation("loss: target policy size does not match the action count");

    const T err = static_cast<T>(s.target_value) - cache.value;
    T cross_entropy = 0;
    T active_mass = 0;
    for (std::size_t a = 0; a < p.size(); ++a) {
      const T target = static_cast<T>(s.target_policy[a]);
      if (target == T(0)) continue;
      cross_entropy -= target * std::log(std::max(p[a], static_cast<T>(kLogFloor)));
      if (p[a] >= static_cast<T>(kLogFloor)) active_mass += target;
    }
    total += static_cast<T>(weights.value) * err * err +
             static_cast<T>(weights.policy) * cross_entropy;

    if (!want_grad) continue;
    detail::Vec<T> dlogits = detail::Vec<T>::Zero(cache.logits.size());
    const T scale = static_cast<T>(weights.policy) * inv_n;
    for (int a : s.reachable) {
      const auto i = static_cast<std::size_t>(a);
      const T target = p[i] >= static_cast<T>(kLogFloor) ? static_cast<T>(s.target_policy[i]) : T(0);
      dlogits[a] = scale * (p[i] * active_mass - target);
    }
    const T dvalue = T(-2) * static_cast<T>(weights.value) * err * inv_n;
    detail::run_backward(*layout_, config_, params_.data(), cache, dlogits, dvalue, grad.data());
  }
  total *= inv_n;

  T sq = 0;
  for (T w : params_) sq += w * w;
  total += static_cast<T>(weights.l2) * sq;
  if (want_grad)
    for (std::size_t i = 0; i < params_.size(); ++i)
      grad[i] += T(2) * static_cast<T>(weights.l2) * params_[i];
  return total;
}

template std::vector<float> masked_softmax<float>(std::span<const float>, std::span<const int>);
template std::vector<double> masked_softmax<double>(std::span<const double>, std::span<const int>);
template class PolicyValueNet<float>;
template class PolicyValueNet<double>;

}  // namespace ipp
