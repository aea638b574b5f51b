#pragma once

#include "vcasr/synthdata.hpp"

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vcasr {

/// Stand-in for a pre-trained text-video model. Words map to their lexicon
/// concept vectors; raw video windows are averaged and projected back into
/// the concept space, so a matched word/window pair has a large dot product.
class JointEmbedding {
 public:
  JointEmbedding(const Lexicon& lexicon, int window, int stride);

  RowVector embed_word(const std::string& word) const;
  int d_embed() const { return d_embed_; }
  int d_visual() const { return static_cast<int>(projection_.cols()); }
  int window() const { return window_; }
  int stride() const { return stride_; }

  /// Window t is the mean of raw frames [t*stride, t*stride + window),
  /// projected to d_visual. T_v = floor((T_r - window) / stride) + 1.
  Matrix extract_visual_features(const Matrix& raw_video) const;

 private:
  std::unordered_map<std::string, RowVector> table_;
  Matrix projection_;  // d_raw x d_visual
  int d_embed_ = 0;
  int window_ = 0;
  int stride_ = 0;
};

/// n_words x T_v matrix with S_ij = embed(w_i) . v_j + 2.
Matrix similarity_matrix(const JointEmbedding& emb, std::span<const std::string> words,
                         const Matrix& visual);

struct VgContexts {
  Matrix alpha;    // n_words x T_v, rows sum to 1
  Matrix context;  // n_words x d_visual
  int clamped = 0; // number of similarities raised to the positivity floor
};

inline constexpr double kSimilarityFloor = 1e-6;

/// Similarity-weighted average of visual features per word. Non-positive
/// similarities are clamped to kSimilarityFloor with a warning on stderr.
VgContexts vg_context(const JointEmbedding& emb, std::span<const std::string> words,
                      const Matrix& visual);

inline constexpr double kMaskThreshold = 3.5;

/// Words whose max similarity over windows exceeds `threshold`, in word order.
std::vector<MaskCandidate> select_mask_candidates(const JointEmbedding& emb,
                                                  std::span<const std::string> words,
                                                  const Matrix& visual,
                                                  double threshold = kMaskThreshold);

/// Similarity matrix as TSV: header row of window indices, one row per word,
/// cells with four decimals.
std::string similarity_tsv(std::span<const std::string> words, const Matrix& sim);

}  // namespace vcasr
