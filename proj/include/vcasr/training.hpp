#pragma once

#include "vcasr/io.hpp"
#include "vcasr/model.hpp"
#include "vcasr/synthdata.hpp"

#include <functional>
#include <unordered_map>

namespace vcasr {

struct TrainConfig {
  int steps = 3000;
  int batch = 16;
  double lr = 4.0e-4;
  long long halving_period = 1000;
  double clip_norm = 5.0;
  double label_smoothing = 0.2;
  int eval_every = 200;
  std::uint64_t seed = 1;

  void validate() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  AdamConfig adam() const;
};

struct TrainResult {
  Checkpoint best;
  long long best_step = 0;
  double best_dev_loss = 0.0;
  std::vector<double> losses;  // training loss at every step, before its update
  std::vector<std::pair<long long, double>> dev_history;
  double seconds = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

using NBestStore = std::unordered_map<std::string, NBestList>;

/// Owns the per-utterance views fed to a model. `frozen` caches first-pass
/// audio encodings for deliberation so they are computed once.
struct InputSet {
  std::vector<ModelInput> inputs;
  std::vector<Matrix> frozen;
};

/// `videos` optionally overrides which utterance's visual features each
/// input sees (misaligned evaluation).
InputSet make_inputs(const std::vector<Utterance>& utts, const NBestStore* nbest = nullptr,
                     const Model* first_pass = nullptr, const std::vector<int>* videos = nullptr);

/// Model config with corpus-derived sizes filled in.
ModelConfig corpus_model_config(const Corpus& corpus, ModelKind kind, FusionMode fusion);

/// Token-weighted mean loss over `inputs` without gradients.
double evaluate_loss(Model& model, std::span<const ModelInput> inputs, double label_smoothing);

/// Teacher-forced training with Adam, a seeded batch order and best-on-dev
/// checkpoint selection. Only this model's own parameters are updated.
TrainResult train_model(Model& model, std::span<const ModelInput> train,
                        std::span<const ModelInput> dev, const TrainConfig& config,
                        const ProgressFn& progress = {});

TrainResult train_audio_only(const Corpus& corpus, const ModelConfig& model_config,
                             const TrainConfig& config, const ProgressFn& progress = {});

/// Feature-level fusion baseline, starting from a converged audio-only model.
TrainResult train_vat(const Corpus& corpus, const Checkpoint& audio_only, const TrainConfig& config,
                      const ProgressFn& progress = {});

}  // namespace vcasr
