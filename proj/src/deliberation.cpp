#include "vcasr/deliberation.hpp"

#include <json.hpp>

#include <sstream>

namespace vcasr {

NBestStore precompute_nbest(const Model& first_pass, const Corpus& corpus, const BeamConfig& beam,
                            int threads) {
  if (first_pass.config().vocab != corpus.lexicon.vocab_size()) {
    throw ConfigError("vocab: first-pass checkpoint does not match the corpus lexicon");
  }
  DecodeOptions opt;
  opt.beam = beam;
  opt.threads = threads;
  NBestStore store;
  for (const auto& name : kSplits) {
    const auto& utts = corpus.split(name);
    auto lists = decode_corpus(first_pass, utts, opt);
    for (std::size_t i = 0; i < utts.size(); ++i) store[utts[i].id] = std::move(lists[i]);
  }
  return store;
}

std::string nbest_store_jsonl(const std::vector<Utterance>& utts, const NBestStore& store,
                              const Lexicon& lexicon) {
  std::vector<NBestList> lists;
  lists.reserve(utts.size());
  for (const auto& u : utts) {
    auto it = store.find(u.id);
    if (it == store.end()) throw InputError("no N-best hypotheses stored for " + u.id);
    lists.push_back(it->second);
  }
  return nbest_jsonl(utts, lists, lexicon, "hyps");
}

std::vector<Matrix> ground_hypotheses(const NBestList& nbest, const Matrix& visual,
                                      const JointEmbedding& joint, const Lexicon& lexicon) {
  std::vector<Matrix> out;
  for (const auto& h : nbest.hyps) {
    const auto words = hypothesis_word_strings(h, lexicon);
    if (words.empty()) {
      out.emplace_back(0, joint.d_visual());
      continue;
    }
    out.push_back(vg_context(joint, words, visual).context);
  }
  return out;
}

ModelConfig deliberation_config(const Corpus& corpus, const Model& first_pass, FusionMode fusion,
                                bool vg, bool visual_stream) {
  ModelConfig c = corpus_model_config(corpus, ModelKind::Deliberation, fusion);
  const auto& fp = first_pass.config();
  c.vg = vg;
  c.visual_stream = visual_stream;
  c.first_pass_audio_dim = 2 * fp.hidden;
  c.first_pass_embed_dim = fp.embed_dim;
  c.hidden = fp.hidden;
  c.d_model = fp.d_model;
  c.embed_dim = fp.embed_dim;
  return c;
}

void attach_grounding(Model& model, const Corpus& corpus) {
  if (!model.config().vg) return;
  const auto& lex = corpus.lexicon;
  auto joint = std::make_shared<JointEmbedding>(lex, corpus.config.window, corpus.config.stride);
  std::vector<std::string> words(lex.vocab_size());
  for (int id = kNumSpecial; id < lex.vocab_size(); ++id) words[id] = lex.token_word(id);
  model.set_grounding(std::move(joint), std::move(words));
}

TrainResult train_deliberation(std::shared_ptr<const Model> first_pass, const Corpus& corpus,
                               const NBestStore& nbest, const ModelConfig& model_config,
                               const TrainConfig& config, const ProgressFn& progress) {
  if (model_config.kind != ModelKind::Deliberation) throw ConfigError("kind must be deliberation");
  Model model(model_config, derive_seed(config.seed, "init/deliberation"), first_pass);
  attach_grounding(model, corpus);
  const auto train = make_inputs(corpus.train, &nbest, first_pass.get());
  const auto dev = make_inputs(corpus.dev, &nbest, first_pass.get());
  return train_model(model, train.inputs, dev.inputs, config, progress);
}

std::vector<NBestList> decode_deliberation(const Model& model, const std::vector<Utterance>& utts,
                                           const NBestStore& nbest, const DecodeOptions& options) {
  if (model.config().kind != ModelKind::Deliberation) throw ConfigError("not a deliberation model");
  return decode_corpus(model, utts, options, &nbest);
}

}  // namespace vcasr
