#pragma once

#include "vcasr/training.hpp"

#include <optional>

namespace vcasr {

/// Seeded cyclic permutation (Sattolo): perm[i] != i for every i.
/// Throws ConfigError for fewer than two elements.
std::vector<int> derangement(int n, std::uint64_t seed);

struct DecodeOptions {
  BeamConfig beam;
  std::optional<std::uint64_t> misalign_seed;
  int threads = 1;
  int batch = 16;  // utterances decoded together, grouped by length
};

/// Decodes every utterance; output order follows `utts`. With a misalign
/// seed each utterance sees the visual features of utterance perm[i].
/// Results do not depend on `threads`; batch composition can change the
/// last bits of scores.
std::vector<NBestList> decode_corpus(const Model& model, const std::vector<Utterance>& utts,
                                     const DecodeOptions& options,
                                     const NBestStore* nbest = nullptr);

TrainResult train_multistream(const Corpus& corpus, const ModelConfig& model_config,
                              const TrainConfig& config, const ProgressFn& progress = {});

std::vector<NBestList> decode_multistream(const Model& model, const std::vector<Utterance>& utts,
                                          const DecodeOptions& options);

/// Decoded output: one JSON object per line, {id, nbest:[{tokens, words, score}]}.
std::string nbest_jsonl(const std::vector<Utterance>& utts, const std::vector<NBestList>& lists,
                        const Lexicon& lexicon, const char* list_key = "nbest");
/// Reads either decode output or an N-best store back, keyed by utterance id.
NBestStore read_nbest_jsonl(const std::string& text);

std::vector<std::string> hypothesis_word_strings(const Hypothesis& h, const Lexicon& lexicon);

}  // namespace vcasr
