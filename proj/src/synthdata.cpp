#include "vcasr/synthdata.hpp"

#include "vcasr/grounding.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace vcasr {

using nlohmann::json;

void SynthConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(n_function_words, "n_function_words");
  positive(n_content_words, "n_content_words");
  positive(n_homophone_pairs, "n_homophone_pairs");
  positive(sentence_len_min, "sentence_len_min");
  positive(sentence_len_max, "sentence_len_max");
  positive(d_audio, "d_audio");
  positive(d_raw_video, "d_raw_video");
  positive(d_embed, "d_embed");
  positive(frames_per_token_audio, "frames_per_token_audio");
  positive(frames_per_token_video, "frames_per_token_video");
  positive(window, "window");
  positive(stride, "stride");
  positive(n_train, "n_train");
  positive(n_dev, "n_dev");
  positive(n_test, "n_test");
  if (sentence_len_max < sentence_len_min) {
    throw ConfigError("sentence_len_max must be >= sentence_len_min");
  }
  if (!(p_content > 0.0 && p_content < 1.0)) throw ConfigError("p_content must lie in (0,1)");
  if (!(sigma_audio >= 0.0)) throw ConfigError("sigma_audio must be >= 0");
  if (!(sigma_video >= 0.0)) throw ConfigError("sigma_video must be >= 0");
  if (!(content_norm > 0.0)) throw ConfigError("content_norm must be > 0");
  if (!(function_norm > 0.0)) throw ConfigError("function_norm must be > 0");
  if (!(audio_proto_scale > 0.0)) throw ConfigError("audio_proto_scale must be > 0");
  if (!(background_norm >= 0.0)) throw ConfigError("background_norm must be >= 0");
  if (2 * n_homophone_pairs > n_content_words) {
    throw ConfigError("n_homophone_pairs: 2 * pairs exceeds n_content_words");
  }
  if (d_raw_video < d_embed) throw ConfigError("d_raw_video must be >= d_embed");
  if (stride > window) throw ConfigError("stride must be <= window");
  if (sentence_len_min * frames_per_token_video < window) {
    throw ConfigError("window: longer than the shortest sentence's video");
  }
}

SynthConfig SynthConfig::from_kv(const KeyValueConfig& kv) {
  SynthConfig c;
  auto geti = [&](const char* k, int& v) { v = static_cast<int>(kv.get_int(k, v)); };
  auto getd = [&](const char* k, double& v) { v = kv.get_double(k, v); };
  geti("n_function_words", c.n_function_words);
  geti("n_content_words", c.n_content_words);
  geti("n_homophone_pairs", c.n_homophone_pairs);
  geti("sentence_len_min", c.sentence_len_min);
  geti("sentence_len_max", c.sentence_len_max);
  getd("p_content", c.p_content);
  geti("d_audio", c.d_audio);
  geti("d_raw_video", c.d_raw_video);
  geti("d_embed", c.d_embed);
  geti("frames_per_token_audio", c.frames_per_token_audio);
  geti("frames_per_token_video", c.frames_per_token_video);
  getd("sigma_audio", c.sigma_audio);
  getd("sigma_video", c.sigma_video);
  getd("content_norm", c.content_norm);
  getd("function_norm", c.function_norm);
  getd("audio_proto_scale", c.audio_proto_scale);
  getd("background_norm", c.background_norm);
  geti("window", c.window);
  geti("stride", c.stride);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  geti("n_train", c.n_train);
  geti("n_dev", c.n_dev);
  geti("n_test", c.n_test);
  return c;
}

KeyValueConfig SynthConfig::to_kv() const {
  KeyValueConfig kv;
  auto d = [](double v) {
    json j = v;
    return j.dump();
  };
  kv.set("n_function_words", std::to_string(n_function_words));
  kv.set("n_content_words", std::to_string(n_content_words));
  kv.set("n_homophone_pairs", std::to_string(n_homophone_pairs));
  kv.set("sentence_len_min", std::to_string(sentence_len_min));
  kv.set("sentence_len_max", std::to_string(sentence_len_max));
  kv.set("p_content", d(p_content));
  kv.set("d_audio", std::to_string(d_audio));
  kv.set("d_raw_video", std::to_string(d_raw_video));
  kv.set("d_embed", std::to_string(d_embed));
  kv.set("frames_per_token_audio", std::to_string(frames_per_token_audio));
  kv.set("frames_per_token_video", std::to_string(frames_per_token_video));
  kv.set("sigma_audio", d(sigma_audio));
  kv.set("sigma_video", d(sigma_video));
  kv.set("content_norm", d(content_norm));
  kv.set("function_norm", d(function_norm));
  kv.set("audio_proto_scale", d(audio_proto_scale));
  kv.set("background_norm", d(background_norm));
  kv.set("window", std::to_string(window));
  kv.set("stride", std::to_string(stride));
  kv.set("seed", std::to_string(seed));
  kv.set("n_train", std::to_string(n_train));
  kv.set("n_dev", std::to_string(n_dev));
  kv.set("n_test", std::to_string(n_test));
  return kv;
}

Lexicon::Lexicon(std::vector<LexiconEntry> entries, Matrix video_projection, RowVector background)
    : entries_(std::move(entries)),
      video_projection_(std::move(video_projection)),
      background_(std::move(background)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].word, static_cast<int>(i)).second) {
      throw LexiconError("duplicate lexicon word " + entries_[i].word);
    }
  }
}

const LexiconEntry* Lexicon::find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

const LexiconEntry& Lexicon::entry(const std::string& word) const {
  const auto* e = find(word);
  if (!e) throw LexiconError("unknown word '" + word + "'");
  return *e;
}

int Lexicon::token_id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second + kNumSpecial;
}

std::string Lexicon::token_word(int id) const {
  switch (id) {
    case kPad: return "<pad>";
    case kSos: return "<sos>";
    case kEos: return "<eos>";
    case kUnk: return "<unk>";
    default: break;
  }
  const int i = id - kNumSpecial;
  if (i < 0 || i >= static_cast<int>(entries_.size())) return "<unk>";
  return entries_[i].word;
}

namespace {

json row_json(const RowVector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

RowVector row_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

RowVector gaussian_row(int n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  RowVector v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

}  // namespace

std::string Lexicon::to_json() const {
  json j;
  json proj = json::array();
  for (Eigen::Index r = 0; r < video_projection_.rows(); ++r) {
    proj.push_back(row_json(video_projection_.row(r)));
  }
  j["video_projection"] = proj;
  j["background"] = row_json(background_);
  json words = json::array();
  for (const auto& e : entries_) {
    words.push_back({{"word", e.word},
                     {"content", e.is_content},
                     {"group", e.homophone_group},
                     {"concept", row_json(e.embedding)},
                     {"audio", row_json(e.audio)}});
  }
  j["words"] = words;
  return j.dump(1);
}

Lexicon Lexicon::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    const auto& proj = j.at("video_projection");
    Matrix p(static_cast<Eigen::Index>(proj.size()),
             proj.empty() ? 0 : static_cast<Eigen::Index>(proj[0].size()));
    for (std::size_t r = 0; r < proj.size(); ++r) p.row(r) = row_from_json(proj[r]);
    std::vector<LexiconEntry> entries;
    for (const auto& w : j.at("words")) {
      LexiconEntry e;
      e.word = w.at("word").get<std::string>();
      e.is_content = w.at("content").get<bool>();
      e.homophone_group = w.at("group").get<int>();
      e.embedding = row_from_json(w.at("concept"));
      e.audio = row_from_json(w.at("audio"));
      entries.push_back(std::move(e));
    }
    return Lexicon(std::move(entries), std::move(p), row_from_json(j.at("background")));
  } catch (const json::exception& e) {
    throw FormatError(std::string("lexicon.json: ") + e.what());
  }
}

std::vector<Utterance>& Corpus::split(const std::string& name) {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw InputError("unknown split '" + name + "'");
}

const std::vector<Utterance>& Corpus::split(const std::string& name) const {
  return const_cast<Corpus*>(this)->split(name);
}

Lexicon generate_lexicon(const SynthConfig& config) {
  config.validate();
  auto rng = make_rng(config.seed, "lexicon");

  Matrix g(config.d_raw_video, config.d_embed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix projection = qr.householderQ() * Matrix::Identity(config.d_raw_video, config.d_embed);

  RowVector background = gaussian_row(config.d_raw_video, rng);
  background *= config.background_norm / background.norm();

  std::vector<LexiconEntry> entries;
  int group = 0;
  for (int i = 0; i < config.n_content_words; ++i) {
    LexiconEntry e;
    char name[16];
    std::snprintf(name, sizeof name, "c%02d", i);
    e.word = name;
    e.is_content = true;
    RowVector c = gaussian_row(config.d_embed, rng);
    const bool second_of_pair = i < 2 * config.n_homophone_pairs && i % 2 == 1;
    if (second_of_pair) {
      const RowVector& partner = entries.back().embedding;
      c -= (c.dot(partner) / partner.squaredNorm()) * partner;
      e.homophone_group = entries.back().homophone_group;
      e.audio = entries.back().audio;
    } else {
      e.homophone_group = group++;
      e.audio = gaussian_row(config.d_audio, rng) * config.audio_proto_scale;
    }
    e.embedding = c * (config.content_norm / c.norm());
    entries.push_back(std::move(e));
  }
  for (int i = 0; i < config.n_function_words; ++i) {
    LexiconEntry e;
    char name[16];
    std::snprintf(name, sizeof name, "f%02d", i);
    e.word = name;
    e.is_content = false;
    e.homophone_group = group++;
    RowVector c = gaussian_row(config.d_embed, rng);
    e.embedding = c * (config.function_norm / c.norm());
    e.audio = gaussian_row(config.d_audio, rng) * config.audio_proto_scale;
    entries.push_back(std::move(e));
  }
  return Lexicon(std::move(entries), std::move(projection), std::move(background));
}

Matrix render_audio(std::span<const std::string> words, const Lexicon& lexicon,
                    int frames_per_token, double sigma, Rng& rng) {
  const int d = lexicon.d_audio();
  Matrix out(static_cast<Eigen::Index>(words.size()) * frames_per_token, d);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& proto = lexicon.entry(words[w]).audio;
    for (int f = 0; f < frames_per_token; ++f) {
      auto row = out.row(static_cast<Eigen::Index>(w) * frames_per_token + f);
      for (int k = 0; k < d; ++k) row[k] = proto[k] + sigma * nd(rng);
    }
  }
  return out;
}

Matrix render_video(std::span<const std::string> words, const Lexicon& lexicon,
                    int frames_per_token, double sigma, Rng& rng) {
  const int d = lexicon.d_raw_video();
  Matrix out(static_cast<Eigen::Index>(words.size()) * frames_per_token, d);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& e = lexicon.entry(words[w]);
    const RowVector base = e.is_content
                               ? RowVector(e.embedding * lexicon.video_projection().transpose())
                               : lexicon.background();
    for (int f = 0; f < frames_per_token; ++f) {
      auto row = out.row(static_cast<Eigen::Index>(w) * frames_per_token + f);
      for (int k = 0; k < d; ++k) row[k] = base[k] + sigma * nd(rng);
    }
  }
  return out;
}

namespace {

std::vector<std::vector<std::string>> sample_sentences(const SynthConfig& c, const Lexicon& lex,
                                                       int count, Rng& rng) {
  std::vector<std::string> content, function;
  for (const auto& e : lex.entries()) (e.is_content ? content : function).push_back(e.word);
  std::uniform_int_distribution<int> len(c.sentence_len_min, c.sentence_len_max);
  std::uniform_int_distribution<std::size_t> pick_c(0, content.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_f(0, function.size() - 1);
  std::bernoulli_distribution is_content(c.p_content);
  std::vector<std::vector<std::string>> out(count);
  for (auto& s : out) {
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      s.push_back(is_content(rng) ? content[pick_c(rng)] : function[pick_f(rng)]);
    }
  }
  return out;
}

// Rewrites content tokens of over-represented words until every content word
// occurs at least `min_count` times. Deterministic scan order.
void ensure_content_coverage(std::vector<std::vector<std::string>>& sentences,
                             const Lexicon& lex, int min_count) {
  std::map<std::string, int> counts;
  for (const auto& e : lex.entries()) {
    if (e.is_content) counts[e.word] = 0;
  }
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      if (auto it = counts.find(w); it != counts.end()) ++it->second;
    }
  }
  for (auto& [word, count] : counts) {
    for (auto& s : sentences) {
      for (auto& w : s) {
        if (count >= min_count) break;
        auto it = counts.find(w);
        if (it == counts.end() || it->first == word || it->second <= min_count) continue;
        --it->second;
        w = word;
        ++count;
      }
      if (count >= min_count) break;
    }
    if (count < min_count) {
      throw ConfigError("n_train: too few content tokens to cover every content word " +
                        std::to_string(min_count) + " times");
    }
  }
}

}  // namespace

Corpus generate_corpus(const SynthConfig& config) {
  config.validate();
  Corpus corpus;
  corpus.config = config;
  corpus.lexicon = generate_lexicon(config);
  const JointEmbedding emb(corpus.lexicon, config.window, config.stride);

  const std::map<std::string, int> sizes = {
      {"train", config.n_train}, {"dev", config.n_dev}, {"test", config.n_test}};
  for (const auto& split : kSplits) {
    auto word_rng = make_rng(config.seed, "words/" + split);
    auto audio_rng = make_rng(config.seed, "audio/" + split);
    auto video_rng = make_rng(config.seed, "video/" + split);
    auto sentences = sample_sentences(config, corpus.lexicon, sizes.at(split), word_rng);
    if (split == "train") ensure_content_coverage(sentences, corpus.lexicon, 5);
    auto& utts = corpus.split(split);
    utts.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      Utterance u;
      char id[32];
      std::snprintf(id, sizeof id, "%s-%05zu", split.c_str(), i);
      u.id = id;
      u.words = std::move(sentences[i]);
      for (const auto& w : u.words) u.token_ids.push_back(corpus.lexicon.token_id(w));
      u.audio = render_audio(u.words, corpus.lexicon, config.frames_per_token_audio,
                             config.sigma_audio, audio_rng);
      u.raw_video = render_video(u.words, corpus.lexicon, config.frames_per_token_video,
                                 config.sigma_video, video_rng);
      quantize_f32(u.audio);
      quantize_f32(u.raw_video);
      u.visual = emb.extract_visual_features(u.raw_video);
      quantize_f32(u.visual);
      utts.push_back(std::move(u));
    }
  }
  return corpus;
}

namespace {

void check_candidates(const Utterance& utt, std::span<const MaskCandidate> candidates) {
  for (const auto& c : candidates) {
    if (c.word_index < 0 || c.word_index >= static_cast<int>(utt.words.size())) {
      throw InputError(utt.id + ": mask candidate index " + std::to_string(c.word_index) +
                       " out of range");
    }
  }
}

Utterance mask_words(const Utterance& utt, std::vector<int> word_indices, int frames_per_token,
                     Rng& rng) {
  Utterance out = utt;
  std::sort(word_indices.begin(), word_indices.end());
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int w : word_indices) {
    MaskSpan span{w, w * frames_per_token, (w + 1) * frames_per_token};
    if (span.frame_end > out.audio.rows()) {
      throw InputError(utt.id + ": mask span beyond audio");
    }
    for (int f = span.frame_begin; f < span.frame_end; ++f) {
      for (Eigen::Index k = 0; k < out.audio.cols(); ++k) {
        out.audio(f, k) = static_cast<double>(static_cast<float>(nd(rng)));
      }
    }
    out.mask_spans.push_back(span);
  }
  return out;
}

}  // namespace

Utterance apply_mask_training(const Utterance& utt, std::span<const MaskCandidate> candidates,
                              int frames_per_token, Rng& rng) {
  check_candidates(utt, candidates);
  const std::size_t limit = utt.words.size() / 10;
  const std::size_t k = std::min(candidates.size(), limit);
  std::vector<int> pool;
  for (const auto& c : candidates) pool.push_back(c.word_index);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return mask_words(utt, std::move(pool), frames_per_token, rng);
}

Utterance apply_mask_eval(const Utterance& utt, std::span<const MaskCandidate> candidates,
                          int frames_per_token, Rng& rng) {
  check_candidates(utt, candidates);
  if (candidates.empty()) return mask_words(utt, {}, frames_per_token, rng);
  std::vector<MaskCandidate> sorted(candidates.begin(), candidates.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.word_index < b.word_index;
  });
  const std::size_t k =
      std::min(sorted.size(), std::max<std::size_t>(1, utt.words.size() / 10));
  std::vector<int> chosen;
  for (std::size_t i = 0; i < k; ++i) chosen.push_back(sorted[i].word_index);
  return mask_words(utt, std::move(chosen), frames_per_token, rng);
}

}  // namespace vcasr
