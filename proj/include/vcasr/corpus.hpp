#pragma once

#include "vcasr/synthdata.hpp"

#include <filesystem>

namespace vcasr {

// Directory layout:
//   corpus.json                 synth config snapshot + condition
//   lexicon.json
//   manifest.{train,dev,test}.jsonl
//   feats/<id>.{audio,video,visual}.vcft
struct CorpusInfo {
  std::string condition = "clean";  // clean | masked
  double mask_threshold = 0.0;
  std::uint64_t mask_seed = 0;
};

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const CorpusInfo& info,
                  bool force);
Corpus read_corpus(const std::filesystem::path& dir, CorpusInfo* info = nullptr);

/// Masked copy of a clean corpus: random candidate subsets on train,
/// top-scoring candidates on dev/test. Candidates come from the joint
/// embedding similarity against each utterance's own video.
Corpus mask_corpus(const Corpus& clean, double threshold, std::uint64_t seed);

/// Hash over every artifact in a corpus directory (sorted by name), run
/// metadata (run.json) excluded.
std::uint64_t hash_directory(const std::filesystem::path& dir);

}  // namespace vcasr
