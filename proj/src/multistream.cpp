#include "vcasr/multistream.hpp"

#include <json.hpp>

#include <algorithm>
#include <sstream>
#include <thread>

namespace vcasr {

using nlohmann::json;

std::vector<int> derangement(int n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("misalign: need at least two utterances to permute videos");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng rng = make_rng(seed, "misalign");
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

std::vector<NBestList> decode_corpus(const Model& model, const std::vector<Utterance>& utts,
                                     const DecodeOptions& options, const NBestStore* nbest) {
  std::vector<int> videos;
  if (options.misalign_seed) videos = derangement(static_cast<int>(utts.size()), *options.misalign_seed);
  const InputSet set = make_inputs(utts, nbest, nullptr, options.misalign_seed ? &videos : nullptr);
  std::vector<NBestList> out(utts.size());
  if (options.batch < 1) throw ConfigError("decode batch must be >= 1");
  std::vector<std::size_t> order(utts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return utts[a].audio.rows() < utts[b].audio.rows();
  });
  const std::size_t chunk = static_cast<std::size_t>(options.batch);
  const std::size_t n_chunks = (order.size() + chunk - 1) / chunk;
  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(n_chunks)));
  auto work = [&](int worker) {
    for (std::size_t c = worker; c < n_chunks; c += threads) {
      std::vector<ModelInput> batch;
      const std::size_t end = std::min(order.size(), (c + 1) * chunk);
      for (std::size_t k = c * chunk; k < end; ++k) batch.push_back(set.inputs[order[k]]);
      auto lists = model.decode_batch(batch, options.beam);
      for (std::size_t k = c * chunk; k < end; ++k) out[order[k]] = std::move(lists[k - c * chunk]);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

TrainResult train_multistream(const Corpus& corpus, const ModelConfig& model_config,
                              const TrainConfig& config, const ProgressFn& progress) {
  if (model_config.kind != ModelKind::MultiStream) throw ConfigError("kind must be multistream");
  for (const auto& u : corpus.train) {
    if (u.visual.rows() == 0) throw ConfigError("multistream training needs visual features");
  }
  Model model(model_config, derive_seed(config.seed, "init/multistream"));
  const auto train = make_inputs(corpus.train);
  const auto dev = make_inputs(corpus.dev);
  return train_model(model, train.inputs, dev.inputs, config, progress);
}

std::vector<NBestList> decode_multistream(const Model& model, const std::vector<Utterance>& utts,
                                          const DecodeOptions& options) {
  if (!model.config().uses_video()) throw ConfigError("model has no video stream");
  return decode_corpus(model, utts, options);
}

std::vector<std::string> hypothesis_word_strings(const Hypothesis& h, const Lexicon& lexicon) {
  std::vector<std::string> words;
  for (int tok : h.tokens) {
    if (tok == kEosToken) break;
    words.push_back(lexicon.token_word(tok));
  }
  return words;
}

namespace {

json hyp_json(const Hypothesis& h, const Lexicon& lexicon) {
  json j;
  j["tokens"] = h.tokens;
  j["words"] = hypothesis_word_strings(h, lexicon);
  j["score"] = h.score;
  if (h.truncated) j["truncated"] = true;
  return j;
}

}  // namespace

std::string nbest_jsonl(const std::vector<Utterance>& utts, const std::vector<NBestList>& lists,
                        const Lexicon& lexicon, const char* list_key) {
  if (utts.size() != lists.size()) throw ShapeError("one N-best list per utterance expected");
  std::ostringstream os;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    json j;
    j["id"] = utts[i].id;
    j[list_key] = json::array();
    for (const auto& h : lists[i].hyps) j[list_key].push_back(hyp_json(h, lexicon));
    os << j.dump() << '\n';
  }
  return os.str();
}

NBestStore read_nbest_jsonl(const std::string& text) {
  NBestStore store;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const json& list = j.contains("hyps") ? j.at("hyps") : j.at("nbest");
      NBestList nb;
      for (const auto& h : list) {
        Hypothesis hyp;
        hyp.tokens = h.at("tokens").get<std::vector<int>>();
        hyp.score = h.at("score").get<double>();
        hyp.truncated = h.value("truncated", false);
        nb.hyps.push_back(std::move(hyp));
      }
      store[j.at("id").get<std::string>()] = std::move(nb);
    } catch (const json::exception& e) {
      throw FormatError("N-best line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return store;
}

}  // namespace vcasr
