#pragma once

#include "vcasr/deliberation.hpp"

namespace vcasr::testing {

/// Small corpus for fast structural tests.
inline SynthConfig tiny_synth(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_function_words = 6;
  c.n_content_words = 6;
  c.n_homophone_pairs = 2;
  c.sentence_len_min = 3;
  c.sentence_len_max = 5;
  c.d_audio = 3;
  c.d_raw_video = 5;
  c.d_embed = 4;
  c.frames_per_token_audio = 2;
  c.frames_per_token_video = 2;
  c.window = 2;
  c.stride = 1;
  c.n_train = 30;
  c.n_dev = 4;
  c.n_test = 4;
  c.seed = seed;
  return c;
}

/// Model sizes for finite-difference checks.
inline void shrink(ModelConfig& c) {
  c.hidden = 4;
  c.d_model = 4;
  c.embed_dim = 3;
  c.audio_layers = 2;
  c.video_layers = 1;
  c.hyp_layers = 1;
  c.attention = AttentionConfig{3, 2, 3};
}

inline Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline RowVector random_row(int n, Rng& rng, double scale = 1.0) {
  return random_matrix(1, n, rng, scale).row(0);
}

/// Gives every parameter a random value so that no gradient is trivially
/// zero (biases and layer-norm terms start at constants).
inline void randomize(ParamStore& store, Rng& rng, double scale = 0.5) {
  for (auto* p : store.all()) p->value = random_matrix(p->value.rows(), p->value.cols(), rng, scale);
}

}  // namespace vcasr::testing
