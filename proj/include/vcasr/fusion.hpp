#pragma once

#include "vcasr/modelkit.hpp"

#include <span>
#include <string>
#include <vector>

namespace vcasr {

enum class FusionMode { Cat, Gate };

FusionMode parse_fusion_mode(const std::string& s);
std::string to_string(FusionMode m);

/// Combines k attention contexts with the decoder output.
///   Cat:  out = [c_1 .. c_k] W + b + dec
///   Gate: out = sum_c c_c * sigmoid([c_1 .. c_k, dec] W_c + b_c) + dec
/// Contexts are ordered (audio, video[, hypotheses]).
class Fusion {
 public:
  Fusion() = default;
  Fusion(ParamStore& store, const std::string& prefix, FusionMode mode, int k, int d, Rng& rng);

  FusionMode mode() const { return mode_; }
  int k() const { return k_; }
  int d() const { return d_; }

  struct Cache {
    Matrix input;               // concatenated fusion input
    std::vector<Matrix> gates;  // Gate only
  };
  Matrix forward(std::span<const Matrix> contexts, const Matrix& dec, Cache* cache) const;
  /// Writes dcontexts (k entries) and ddec; accumulates parameter grads.
  void backward(const Cache& c, std::span<const Matrix> contexts, const Matrix& dout,
                std::vector<Matrix>& dcontexts, Matrix& ddec);

  Param* cat_W = nullptr;
  Param* cat_b = nullptr;
  std::vector<Param*> gate_W;
  std::vector<Param*> gate_b;

 private:
  void check(std::span<const Matrix> contexts, const Matrix& dec) const;
  FusionMode mode_ = FusionMode::Cat;
  int k_ = 0;
  int d_ = 0;
};

/// Feature-level fusion baseline: one projected utterance-level video vector
/// added to every audio frame.
class VatAdapter {
 public:
  VatAdapter() = default;
  VatAdapter(ParamStore& store, const std::string& prefix, int d_visual, int d_audio, Rng& rng);

  /// audio: T x d_audio; video_vector: 1 x d_visual.
  Matrix adapt(const Matrix& audio, const RowVector& video_vector) const;
  /// Accumulates grads from d(adapted audio); the audio gradient passes
  /// through unchanged.
  void backward(const RowVector& video_vector, const Matrix& dadapted);

  Linear proj;
};

Matrix vat_adapt(const Matrix& audio, const RowVector& video_vector, const Linear& proj);

}  // namespace vcasr
