#include "vcasr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace vcasr {

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (halving_period < 1) throw ConfigError("halving_period must be >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError("label_smoothing must be in [0, 1)");
  }
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  c.steps = static_cast<int>(kv.get_int("steps", c.steps));
  c.batch = static_cast<int>(kv.get_int("batch", c.batch));
  c.lr = kv.get_double("lr", c.lr);
  c.halving_period = kv.get_int("halving_period", c.halving_period);
  c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
  c.label_smoothing = kv.get_double("label_smoothing", c.label_smoothing);
  c.eval_every = static_cast<int>(kv.get_int("eval_every", c.eval_every));
  c.seed = static_cast<std::uint64_t>(kv.get_int("train_seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("steps", std::to_string(steps));
  kv.set("batch", std::to_string(batch));
  auto exact = [](double x) {
    std::ostringstream o;
    o.precision(17);
    o << x;
    return o.str();
  };
  kv.set("lr", exact(lr));
  kv.set("halving_period", std::to_string(halving_period));
  kv.set("clip_norm", exact(clip_norm));
  kv.set("label_smoothing", exact(label_smoothing));
  kv.set("eval_every", std::to_string(eval_every));
  kv.set("train_seed", std::to_string(seed));
  return kv;
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.lr = lr;
  a.halving_period = halving_period;
  a.clip_norm = clip_norm;
  return a;
}

InputSet make_inputs(const std::vector<Utterance>& utts, const NBestStore* nbest,
                     const Model* first_pass, const std::vector<int>* videos) {
  InputSet set;
  const auto n = utts.size();
  if (videos && videos->size() != n) throw ShapeError("video assignment length differs from utterances");
  if (first_pass) {
    set.frozen.reserve(n);
    for (const auto& u : utts) {
      ModelInput in;
      in.audio = &u.audio;
      in.visual = &u.visual;
      set.frozen.push_back(first_pass->encode_audio_raw(in));
    }
  }
  set.inputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& in = set.inputs[i];
    const auto& u = utts[i];
    in.audio = &u.audio;
    in.visual = videos ? &utts[(*videos)[i]].visual : &u.visual;
    in.targets = u.token_ids;
    if (first_pass) in.frozen_audio = &set.frozen[i];
    if (nbest) {
      auto it = nbest->find(u.id);
      if (it == nbest->end()) throw InputError("no N-best hypotheses stored for " + u.id);
      in.nbest = &it->second;
    }
  }
  return set;
}

ModelConfig corpus_model_config(const Corpus& corpus, ModelKind kind, FusionMode fusion) {
  ModelConfig c;
  c.kind = kind;
  c.fusion = fusion;
  c.vocab = corpus.lexicon.vocab_size();
  c.d_audio = corpus.lexicon.d_audio();
  c.d_visual = corpus.lexicon.d_embed();
  return c;
}

double evaluate_loss(Model& model, std::span<const ModelInput> inputs, double label_smoothing) {
  constexpr std::size_t kEvalBatch = 32;
  double total = 0.0;
  double weight = 0.0;
  for (std::size_t i = 0; i < inputs.size(); i += kEvalBatch) {
    const auto batch = inputs.subspan(i, std::min(kEvalBatch, inputs.size() - i));
    double w = 0.0;
    for (const auto& in : batch) w += static_cast<double>(in.targets.size() + 1);
    total += w * model.loss(batch, label_smoothing, false);
    weight += w;
  }
  if (weight == 0.0) throw InputError("empty evaluation set");
  return total / weight;
}

TrainResult train_model(Model& model, std::span<const ModelInput> train,
                        std::span<const ModelInput> dev, const TrainConfig& config,
                        const ProgressFn& progress) {
  config.validate();
  if (train.empty()) throw InputError("empty training set");
  if (dev.empty()) throw InputError("empty development set");
  const auto t0 = std::chrono::steady_clock::now();
  const Model* first_pass = model.first_pass();
  const std::uint64_t frozen_before = first_pass ? first_pass->params().checksum() : 0;

  Adam adam(model.params().all(), config.adam());
  Rng rng = make_rng(config.seed, "batching");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  TrainResult result;
  result.best_dev_loss = evaluate_loss(model, dev, config.label_smoothing);
  result.best = model.checkpoint();
  result.dev_history.emplace_back(0, result.best_dev_loss);
  if (progress) progress("step 0 dev_loss " + std::to_string(result.best_dev_loss));

  std::vector<ModelInput> batch;
  for (int step = 1; step <= config.steps; ++step) {
    batch.clear();
    for (int i = 0; i < config.batch; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(train[order[cursor++]]);
    }
    const double loss = model.loss(batch, config.label_smoothing, true);
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite training loss at step " + std::to_string(step));
    }
    result.losses.push_back(loss);
    adam.step();
    if (step % config.eval_every == 0 || step == config.steps) {
      const double dev_loss = evaluate_loss(model, dev, config.label_smoothing);
      result.dev_history.emplace_back(step, dev_loss);
      if (dev_loss < result.best_dev_loss) {
        result.best_dev_loss = dev_loss;
        result.best_step = step;
        result.best = model.checkpoint();
      }
      if (progress) {
        progress("step " + std::to_string(step) + " loss " + std::to_string(loss) + " dev_loss " +
                 std::to_string(dev_loss) + " lr " + std::to_string(adam.effective_lr()));
      }
    }
  }
  if (first_pass && first_pass->params().checksum() != frozen_before) {
    throw Error("first-pass parameters changed during deliberation training");
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

TrainResult train_audio_only(const Corpus& corpus, const ModelConfig& model_config,
                             const TrainConfig& config, const ProgressFn& progress) {
  if (model_config.kind != ModelKind::AudioOnly) throw ConfigError("kind must be audio-only");
  Model model(model_config, derive_seed(config.seed, "init/audio-only"));
  const auto train = make_inputs(corpus.train);
  const auto dev = make_inputs(corpus.dev);
  return train_model(model, train.inputs, dev.inputs, config, progress);
}

TrainResult train_vat(const Corpus& corpus, const Checkpoint& audio_only, const TrainConfig& config,
                      const ProgressFn& progress) {
  ModelConfig mc = ModelConfig::from_text(audio_only.config);
  if (mc.kind != ModelKind::AudioOnly) throw ConfigError("vat starts from an audio-only checkpoint");
  mc.kind = ModelKind::Vat;
  mc.d_visual = corpus.lexicon.d_embed();
  Model model(mc, derive_seed(config.seed, "init/vat"));
  model.load_matching(audio_only);
  const auto train = make_inputs(corpus.train);
  const auto dev = make_inputs(corpus.dev);
  return train_model(model, train.inputs, dev.inputs, config, progress);
}

}  // namespace vcasr
