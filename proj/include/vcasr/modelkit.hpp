#pragma once

#include "vcasr/common.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vcasr {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Owns named parameters at stable addresses; layers hold raw pointers.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Param* add(const std::string& name, int rows, int cols);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  void zero_grad();
  std::size_t size() const { return params_.size(); }
  long long num_values() const;

  /// Order-dependent hash of every parameter value (bitwise).
  std::uint64_t checksum() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

void init_xavier(Param& p, Rng& rng);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// tanh through the vectorized exp; libm's scalar tanh dominated encoder time.
template <typename Derived>
Eigen::ArrayXXd tanh_array(const Eigen::ArrayBase<Derived>& x) {
  return 2.0 * (1.0 + (-2.0 * x).exp()).inverse() - 1.0;
}

/// y = x W + b with W in x W convention (in x out).
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng);

  Matrix forward(const Matrix& x) const;
  /// Accumulates dW, db; returns dx.
  Matrix backward(const Matrix& x, const Matrix& dy);
  int in() const { return static_cast<int>(W->value.rows()); }
  int out() const { return static_cast<int>(W->value.cols()); }

  Param* W = nullptr;
  Param* b = nullptr;
};

/// Gated recurrent unit: r,z = sigmoid(x Wx + bx + h Wh + bh),
/// n = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n)), h' = (1-z) n + z h.
class Gru {
 public:
  Gru() = default;
  Gru(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng);

  int in() const { return in_; }
  int hidden() const { return hidden_; }

  struct StepCache {
    Matrix x, h_prev, r, z, n, ghn;
  };
  Matrix step(const Matrix& x, const Matrix& h_prev, StepCache* cache) const;
  /// Accumulates parameter grads; writes dx and dh_prev.
  void step_backward(const StepCache& c, const Matrix& dh, Matrix& dx, Matrix& dh_prev);

  struct SeqCache {
    int T = 0, B = 0;
    bool reverse = false;
    Matrix x, h_prev, r, z, n, ghn;  // (T*B) rows, time-major
    std::vector<double> valid;       // T*B, 1 for frames inside the sequence
  };
  /// X is time-major (row t*B + b). Frames at or beyond lengths[b] carry the
  /// state through unchanged, so a reverse pass starts at each true end.
  Matrix forward_seq(const Matrix& x, int T, int B, std::span<const int> lengths, bool reverse,
                     SeqCache* cache) const;
  Matrix backward_seq(const SeqCache& c, const Matrix& dout);

  Param* Wx = nullptr;
  Param* bx = nullptr;
  Param* Wh = nullptr;
  Param* bh = nullptr;

 private:
  int in_ = 0;
  int hidden_ = 0;
};

inline constexpr double kLayerNormEps = 1e-5;

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& prefix, int dim);

  struct Cache {
    Matrix xhat;
    Vector inv_std;
  };
  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& c, const Matrix& dy);

  Param* gain = nullptr;
  Param* bias = nullptr;
};

/// Stack of bidirectional GRU layers, each followed by layer normalization.
class EncoderStack {
 public:
  EncoderStack() = default;
  EncoderStack(ParamStore& store, const std::string& prefix, int n_layers, int in, int hidden,
               Rng& rng);

  int in() const { return in_; }
  int out_dim() const { return 2 * hidden_; }
  int n_layers() const { return static_cast<int>(layers_.size()); }

  struct LayerCache {
    Gru::SeqCache fwd, bwd;
    LayerNorm::Cache norm;
  };
  struct Cache {
    int T = 0, B = 0;
    std::vector<LayerCache> layers;
  };
  /// x: (T*B) x in, time-major. Returns (T*B) x 2*hidden.
  Matrix forward(const Matrix& x, int T, int B, std::span<const int> lengths,
                 Cache* cache) const;
  Matrix backward(const Cache& c, const Matrix& dout);

 private:
  struct Layer {
    Gru fwd, bwd;
    LayerNorm norm;
  };
  std::vector<Layer> layers_;
  int in_ = 0;
  int hidden_ = 0;
};

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);
RowVector log_softmax(const RowVector& logits);

struct LossResult {
  double loss = 0.0;
  Matrix dlogits;  // gradient of the mean loss
  int count = 0;
};

/// Mean over unmasked rows of -sum_k q_k log p_k, q = (1-eps) onehot + eps/V.
LossResult label_smoothed_loss(const Matrix& logits, std::span<const int> targets,
                               std::span<const std::uint8_t> mask, double epsilon);

struct AdamConfig {
  double lr = 4.0e-4;
  long long halving_period = 50000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;
};

/// Adam with global-norm clipping and a step-function learning-rate halving.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig config);

  /// lr0 * 2^-floor(step / halving_period) for the current step counter.
  double effective_lr() const;
  static double effective_lr(const AdamConfig& c, long long step);
  /// Consumes Param::grad. Returns the pre-clip global gradient norm.
  double step();
  long long step_count() const { return step_; }

 private:
  std::vector<Param*> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig config_;
  long long step_ = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  long long worst_index = -1;
  long long checked = 0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

inline constexpr double kGradCheckFloor = 1e-6;

/// `loss_fn(true)` must zero the grads, compute the loss and backpropagate
/// into Param::grad; `loss_fn(false)` computes the loss only. Relative error
/// per entry is |a - n| / max(|a|, |n|, kGradCheckFloor) with the central
/// difference n = (L(theta + h) - L(theta - h)) / 2h.
GradCheckReport gradient_check(std::span<Param* const> params,
                               const std::function<double(bool)>& loss_fn, double h,
                               double tolerance);

}  // namespace vcasr
