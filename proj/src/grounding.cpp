#include "vcasr/grounding.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

namespace vcasr {

JointEmbedding::JointEmbedding(const Lexicon& lexicon, int window, int stride)
    : projection_(lexicon.video_projection()),
      d_embed_(lexicon.d_embed()),
      window_(window),
      stride_(stride) {
  if (stride < 1 || window < stride) {
    throw ConfigError("window/stride: need window >= stride >= 1");
  }
  for (const auto& e : lexicon.entries()) table_.emplace(e.word, e.embedding);
}

RowVector JointEmbedding::embed_word(const std::string& word) const {
  auto it = table_.find(word);
  if (it == table_.end()) return RowVector::Zero(d_embed_);
  return it->second;
}

Matrix JointEmbedding::extract_visual_features(const Matrix& raw_video) const {
  const auto T = static_cast<int>(raw_video.rows());
  if (T < window_) {
    throw ShapeError("raw video has " + std::to_string(T) + " frames, window needs " +
                     std::to_string(window_));
  }
  if (raw_video.cols() != projection_.rows()) {
    throw ShapeError("raw video width does not match the video projection");
  }
  const int n = (T - window_) / stride_ + 1;
  Matrix pooled(n, raw_video.cols());
  for (int t = 0; t < n; ++t) {
    pooled.row(t) = raw_video.middleRows(t * stride_, window_).colwise().mean();
  }
  return pooled * projection_;
}

Matrix similarity_matrix(const JointEmbedding& emb, std::span<const std::string> words,
                         const Matrix& visual) {
  if (words.empty() || visual.rows() == 0) throw InputError("similarity of empty input");
  if (visual.cols() != emb.d_embed()) {
    throw ShapeError("visual width " + std::to_string(visual.cols()) +
                     " != embedding width " + std::to_string(emb.d_embed()));
  }
  Matrix e(static_cast<Eigen::Index>(words.size()), emb.d_embed());
  for (std::size_t i = 0; i < words.size(); ++i) e.row(i) = emb.embed_word(words[i]);
  Matrix s = e * visual.transpose();
  s.array() += 2.0;
  return s;
}

VgContexts vg_context(const JointEmbedding& emb, std::span<const std::string> words,
                      const Matrix& visual) {
  VgContexts out;
  out.alpha = similarity_matrix(emb, words, visual);
  for (Eigen::Index i = 0; i < out.alpha.size(); ++i) {
    double& s = out.alpha.data()[i];
    if (!(s > 0.0)) {
      s = kSimilarityFloor;
      ++out.clamped;
    }
  }
  if (out.clamped > 0) {
    std::cerr << "warning: vg_context clamped " << out.clamped
              << " non-positive similarities to " << kSimilarityFloor << "\n";
  }
  for (Eigen::Index i = 0; i < out.alpha.rows(); ++i) {
    out.alpha.row(i) /= out.alpha.row(i).sum();
  }
  out.context = out.alpha * visual;
  return out;
}

std::vector<MaskCandidate> select_mask_candidates(const JointEmbedding& emb,
                                                  std::span<const std::string> words,
                                                  const Matrix& visual, double threshold) {
  std::vector<MaskCandidate> out;
  const Matrix s = similarity_matrix(emb, words, visual);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double best = s.row(i).maxCoeff();
    if (best > threshold) out.push_back({static_cast<int>(i), best});
  }
  return out;
}

std::string similarity_tsv(std::span<const std::string> words, const Matrix& sim) {
  std::string out = "word";
  for (Eigen::Index j = 0; j < sim.cols(); ++j) out += "\t" + std::to_string(j);
  out += "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    out += words[i];
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "\t%.4f", sim(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace vcasr
