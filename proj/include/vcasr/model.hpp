#pragma once

#include "vcasr/checkpoint.hpp"
#include "vcasr/grounding.hpp"
#include "vcasr/s2s.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vcasr {

enum class ModelKind { AudioOnly, Vat, MultiStream, Deliberation };

ModelKind parse_model_kind(const std::string& s);
std::string to_string(ModelKind k);

struct ModelConfig {
  ModelKind kind = ModelKind::AudioOnly;
  FusionMode fusion = FusionMode::Cat;
  int vocab = 0;
  int d_audio = 0;
  int d_visual = 0;
  int hidden = 32;   // per encoder direction
  int d_model = 32;  // decoder width, attention key width
  int embed_dim = 32;
  int audio_layers = 6;
  int video_layers = 3;
  int hyp_layers = 2;
  AttentionConfig attention;
  // Deliberation only.
  bool visual_stream = true;
  bool vg = false;
  int n_hyps = 4;
  int first_pass_audio_dim = 0;  // width of the frozen audio encoding
  int first_pass_embed_dim = 0;
  std::string first_pass_hash;  // hex checkpoint hash of the frozen first pass

  void validate() const;
  int n_streams() const;
  bool uses_video() const;
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

/// One utterance as seen by a model. `visual` may point at another
/// utterance's video for misaligned evaluation.
struct ModelInput {
  const Matrix* audio = nullptr;
  const Matrix* visual = nullptr;
  const NBestList* nbest = nullptr;
  // Optional cached first-pass audio encoding (T_a x first_pass_audio_dim).
  const Matrix* frozen_audio = nullptr;
  std::span<const int> targets;  // word tokens, no SOS/EOS
};

/// Attention encoder-decoder over one to three encoded streams:
///   AudioOnly    audio
///   Vat          audio shifted by a projected mean video vector
///   MultiStream  audio, video
///   Deliberation frozen first-pass audio encoding, video, N-best hypotheses
///                (video omitted when visual_stream is off)
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed,
        std::shared_ptr<const Model> first_pass = nullptr);
  static Model from_checkpoint(const Checkpoint& ckpt,
                               std::shared_ptr<const Model> first_pass = nullptr);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const AttentionDecoder& decoder() const { return decoder_; }
  const Model* first_pass() const { return first_pass_.get(); }
  std::shared_ptr<const Model> first_pass_ptr() const { return first_pass_; }

  /// Needed for visually grounded hypotheses: maps hypothesis tokens to words
  /// and words to text embeddings.
  void set_grounding(std::shared_ptr<const JointEmbedding> joint,
                     std::vector<std::string> token_words);

  Checkpoint checkpoint() const;
  /// Copies every same-named, same-shaped tensor; returns how many matched.
  int load_matching(const Checkpoint& ckpt);

  /// Mean label-smoothed loss over the batch. With compute_grad, zeroes and
  /// fills Param::grad of this model's own parameters.
  double loss(std::span<const ModelInput> batch, double label_smoothing, bool compute_grad);

  /// Teacher-forced logits ((U*B) x vocab, time-major) plus the attention
  /// weights of every step: [step][head][row].
  struct TeacherOutput {
    Matrix logits;
    int U = 0;
    std::vector<std::vector<std::vector<RowVector>>> weights;
  };
  TeacherOutput teacher_forced(std::span<const ModelInput> batch) const;

  EncodedStreams encode(const ModelInput& input) const;
  NBestList decode(const ModelInput& input, const BeamConfig& beam) const;
  std::vector<NBestList> decode_batch(std::span<const ModelInput> batch,
                                      const BeamConfig& beam) const;
  Hypothesis greedy(const ModelInput& input, int max_len) const;

  /// Frozen first-pass view for deliberation: raw audio encoder output,
  /// time-major (T*B) x 2*hidden, no caches.
  Matrix encode_audio_raw(std::span<const ModelInput> batch, int& T,
                          std::vector<int>& lengths) const;
  /// Same, for one utterance: T_a x 2*hidden.
  Matrix encode_audio_raw(const ModelInput& input) const;

  /// Hypothesis encoder inputs: one row per (hyp, position), time-major over
  /// L positions and B*n_hyps sequences. Exposed for tests.
  struct HypothesisBatch {
    int L = 0;
    int N = 0;
    int B = 0;
    Matrix inputs;            // (L * B*N) x width
    std::vector<int> lengths; // B*N, words + one EOS
    std::vector<int> tokens;  // (L * B*N), EOS padded
  };
  HypothesisBatch hypothesis_batch(std::span<const ModelInput> batch) const;

 private:
  struct StreamCache;
  struct ForwardCache;
  EncodedStreams encode_batch(std::span<const ModelInput> batch, ForwardCache* cache) const;
  void backward_streams(std::span<const ModelInput> batch, ForwardCache& cache,
                        const std::vector<Matrix>& dvalues);
  Matrix visual_vector(const ModelInput& in) const;

  ModelConfig config_;
  ParamStore store_;
  std::shared_ptr<const Model> first_pass_;
  std::shared_ptr<const JointEmbedding> joint_;
  std::vector<std::string> token_words_;

  std::optional<EncoderStack> audio_enc_, video_enc_, hyp_enc_;
  std::optional<Linear> audio_proj_, video_proj_, hyp_proj_;
  std::optional<VatAdapter> vat_;
  AttentionDecoder decoder_;
};

/// Teacher-forcing token layout for a batch: U = max target length + 1,
/// inputs start with SOS, outputs end with EOS, mask marks real positions.
struct TeacherTokens {
  int U = 0;
  std::vector<int> inputs, outputs;
  std::vector<std::uint8_t> mask;
};
TeacherTokens make_teacher_tokens(std::span<const ModelInput> batch);

/// Time-major packing of variable-length sequences, zero padded.
Matrix pack_time_major(std::span<const Matrix* const> seqs, int& T, std::vector<int>& lengths);

}  // namespace vcasr
