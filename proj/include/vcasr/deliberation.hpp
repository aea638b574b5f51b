#pragma once

#include "vcasr/multistream.hpp"

namespace vcasr {

/// First-pass N-best lists for every utterance of every split.
NBestStore precompute_nbest(const Model& first_pass, const Corpus& corpus, const BeamConfig& beam,
                            int threads = 1);

/// N-best store file for one split: {id, hyps:[{tokens, words, score}]} per line.
std::string nbest_store_jsonl(const std::vector<Utterance>& utts, const NBestStore& store,
                              const Lexicon& lexicon);

/// Per-word visual contexts for each hypothesis word sequence (EOS excluded).
/// Hypotheses with no words get an empty matrix.
std::vector<Matrix> ground_hypotheses(const NBestList& nbest, const Matrix& visual,
                                      const JointEmbedding& joint, const Lexicon& lexicon);

/// Deliberation config sized for `first_pass` and the corpus.
ModelConfig deliberation_config(const Corpus& corpus, const Model& first_pass, FusionMode fusion,
                                bool vg, bool visual_stream);

/// Builds a deliberation model on the frozen first pass (grounding attached
/// when vg is on) and trains only its own parameters.
TrainResult train_deliberation(std::shared_ptr<const Model> first_pass, const Corpus& corpus,
                               const NBestStore& nbest, const ModelConfig& model_config,
                               const TrainConfig& config, const ProgressFn& progress = {});

/// Attaches grounding (a no-op for non-VG models).
void attach_grounding(Model& model, const Corpus& corpus);

/// Misalignment permutes videos only; hypotheses stay those of the true audio.
std::vector<NBestList> decode_deliberation(const Model& model, const std::vector<Utterance>& utts,
                                           const NBestStore& nbest, const DecodeOptions& options);

}  // namespace vcasr
