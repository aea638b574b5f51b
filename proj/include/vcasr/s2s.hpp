#pragma once

#include "vcasr/fusion.hpp"
#include "vcasr/modelkit.hpp"

#include <span>
#include <string>
#include <vector>

namespace vcasr {

/// One encoded input stream for a batch of B elements, batch-major:
/// row b*T + t holds frame t of element b. Masked frames never receive
/// attention weight.
struct StreamBatch {
  int B = 0;
  int T = 0;
  Matrix values;
  std::vector<std::uint8_t> mask;

  auto block(int b) const { return values.middleRows(static_cast<Eigen::Index>(b) * T, T); }
  int valid_count(int b) const;
};

struct AttentionConfig {
  int dim = 32;
  int filters = 4;
  int kernel = 7;
};

/// e_j = w . tanh(q Wq + h_j Wk + (F * alpha_prev)_j U + b), alpha = softmax(e)
/// over unmasked frames, context = sum_j alpha_j h_j.
class LocationAttention {
 public:
  LocationAttention() = default;
  LocationAttention(ParamStore& store, const std::string& prefix, int d_query, int d_key,
                    AttentionConfig config, Rng& rng);

  const AttentionConfig& config() const { return config_; }

  /// (B*T) x dim key projections, computed once per encoded stream.
  Matrix project_keys(const StreamBatch& s) const;
  void project_keys_backward(const StreamBatch& s, const Matrix& dproj, Matrix& dvalues);

  /// Uniform over each element's unmasked frames.
  RowVector initial_weights(const StreamBatch& s, int b) const;

  struct RowCache {
    Matrix conv;  // T x filters
    Matrix z;     // T x dim
    RowVector alpha;
  };

  /// Row r attends over element elem[r]. Writes contexts (R x d_key) and
  /// the new weights.
  void step(const Matrix& query, const StreamBatch& s, const Matrix& keys_proj,
            std::span<const int> elem, std::span<const RowVector> prev,
            Matrix& context, std::vector<RowVector>& weights,
            std::vector<RowCache>* cache) const;

  /// dprev_io carries d(alpha) into the step (from the following step) and
  /// returns d(alpha_prev). Accumulates into dkeys_proj and dvalues.
  void step_backward(const Matrix& query, const StreamBatch& s, std::span<const int> elem,
                     std::span<const RowVector> prev, const std::vector<RowCache>& cache,
                     const Matrix& dcontext, std::vector<RowVector>& dprev_io,
                     Matrix& dquery, Matrix& dkeys_proj, Matrix& dvalues);

  Param* Wq = nullptr;
  Param* Wk = nullptr;
  Param* conv = nullptr;  // filters x kernel
  Param* U = nullptr;
  Param* b = nullptr;
  Param* w = nullptr;  // dim x 1

 private:
  Matrix convolve(const RowVector& alpha) const;
  AttentionConfig config_;
};

/// Encoded streams plus their per-head key projections.
struct EncodedStreams {
  std::vector<StreamBatch> streams;
  std::vector<Matrix> keys_proj;
};

/// Two unidirectional GRU layers, one location-aware head per stream, a
/// fusion module and an output projection. Each step consumes the previous
/// token embedding concatenated with the previous fused output.
class AttentionDecoder {
 public:
  AttentionDecoder() = default;
  AttentionDecoder(ParamStore& store, const std::string& prefix, int vocab, int embed_dim, int d,
                   int n_streams, FusionMode fusion, AttentionConfig attn, Rng& rng);

  int vocab() const { return static_cast<int>(embedding->value.rows()); }
  int d() const { return d_; }
  int n_streams() const { return static_cast<int>(heads_.size()); }
  const Fusion& fusion() const { return fusion_; }

  EncodedStreams prepare(std::vector<StreamBatch> streams) const;

  struct State {
    Matrix h1, h2, fused;
    std::vector<std::vector<RowVector>> alpha;  // [head][row]
  };
  State initial_state(const EncodedStreams& enc, std::span<const int> elem) const;

  struct StepCache {
    std::vector<int> tokens;
    Matrix x;
    Gru::StepCache g1, g2;
    Matrix h2;  // decoder output, also the attention query
    std::vector<Matrix> contexts;
    std::vector<std::vector<RowVector>> alpha_prev;
    std::vector<std::vector<LocationAttention::RowCache>> attn;
    Fusion::Cache fusion;
    Matrix fused;
  };
  /// Returns logits (R x vocab).
  Matrix step(const EncodedStreams& enc, std::span<const int> elem, std::span<const int> tokens,
              const State& prev, State& next, StepCache* cache) const;

  struct TeacherCache {
    std::vector<StepCache> steps;
    std::vector<int> elem;
  };
  /// tokens: U x B input tokens (time-major). Returns (U*B) x vocab logits.
  Matrix teacher_forced(const EncodedStreams& enc, int U, std::span<const int> tokens,
                        TeacherCache* cache) const;
  /// Accumulates parameter grads; returns d(values) per stream.
  std::vector<Matrix> backward(const EncodedStreams& enc, const TeacherCache& cache,
                               const Matrix& dlogits);

  /// Attention weights of every head from the last teacher-forced pass.
  static std::vector<std::vector<RowVector>> weights_at(const TeacherCache& c, int step);

  Param* embedding = nullptr;
  Gru gru1, gru2;
  Linear out;

 private:
  std::vector<LocationAttention> heads_;
  Fusion fusion_;
  int embed_dim_ = 0;
  int d_ = 0;
};

struct Hypothesis {
  std::vector<int> tokens;  // ends with EOS unless truncated
  double score = 0.0;       // sum of per-step log-probabilities
  bool truncated = false;
};

/// Sorted by score, best first; equal scores keep generation order.
struct NBestList {
  std::vector<Hypothesis> hyps;
};

struct BeamConfig {
  int beam = 10;
  int n_best = 10;
  int max_len = 40;
};

/// Beam search over a single encoded element (B = 1). No length
/// normalization; finished hypotheses leave the beam; stops once `beam`
/// hypotheses have finished or max_len steps have run.
NBestList beam_search(const AttentionDecoder& dec, const EncodedStreams& enc,
                      const BeamConfig& config);

/// Independent beams for every element of a batch; element b's result equals
/// decoding it alone up to floating-point summation order.
std::vector<NBestList> beam_search_batch(const AttentionDecoder& dec, const EncodedStreams& enc,
                                         const BeamConfig& config);

/// Argmax decoding, with the summed log-probability of the chosen path.
Hypothesis greedy_decode(const AttentionDecoder& dec, const EncodedStreams& enc, int max_len);

/// Re-scores `tokens` under teacher forcing: sum of log p(token_t | prefix).
double replay_score(const AttentionDecoder& dec, const EncodedStreams& enc,
                    std::span<const int> tokens);

}  // namespace vcasr
