#include "test_util.hpp"

#include "vcasr/corpus.hpp"

#include <filesystem>
#include <map>
#include <set>

using namespace vcasr;
using namespace vcasr::testing;

namespace {

Utterance make_utterance(const Lexicon& lex, int n_words, int fpt, Rng& rng) {
  Utterance u;
  u.id = "u";
  std::uniform_int_distribution<std::size_t> pick(0, lex.entries().size() - 1);
  for (int i = 0; i < n_words; ++i) u.words.push_back(lex.entries()[pick(rng)].word);
  for (const auto& w : u.words) u.token_ids.push_back(lex.token_id(w));
  u.audio = render_audio(u.words, lex, fpt, 0.3, rng);
  return u;
}

std::vector<MaskCandidate> candidates(std::initializer_list<std::pair<int, double>> c) {
  std::vector<MaskCandidate> out;
  for (auto [i, s] : c) out.push_back({i, s});
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vcasr_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("synth config validation names the field") {
  SynthConfig c = tiny_synth();
  CHECK_NOTHROW(c.validate());
  c.n_homophone_pairs = 4;  // 8 > 6 content words
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_synth();
  c.p_content = 1.0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("p_content") != std::string::npos);
  }
  c = tiny_synth();
  c.sigma_audio = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_synth();
  c.n_train = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("synth config key-value round trip") {
  SynthConfig c = tiny_synth(17);
  c.sigma_video = 0.25;
  const SynthConfig back = SynthConfig::from_kv(KeyValueConfig::parse(c.to_kv().to_string()));
  CHECK(back.to_kv().to_string() == c.to_kv().to_string());
  CHECK(back.seed == 17);
  CHECK(back.sigma_video == 0.25);
}

TEST_CASE("lexicon structure") {
  const SynthConfig c = SynthConfig{};
  const Lexicon lex = generate_lexicon(c);
  CHECK(lex.entries().size() == 80);
  CHECK(lex.vocab_size() == 84);
  std::map<int, std::vector<const LexiconEntry*>> groups;
  int content = 0;
  for (const auto& e : lex.entries()) {
    const double want = e.is_content ? c.content_norm : c.function_norm;
    CHECK(std::abs(e.embedding.norm() - want) < 1e-9);
    content += e.is_content ? 1 : 0;
    groups[e.homophone_group].push_back(&e);
  }
  CHECK(content == 40);
  int pairs = 0;
  for (const auto& [g, members] : groups) {
    REQUIRE(members.size() <= 2);
    if (members.size() == 2) {
      ++pairs;
      CHECK(members[0]->audio == members[1]->audio);
      CHECK(members[0]->embedding != members[1]->embedding);
      // Noiseless video frames of the two members tell them apart.
      const RowVector a = members[0]->embedding * lex.video_projection().transpose();
      const RowVector b = members[1]->embedding * lex.video_projection().transpose();
      CHECK(a.dot(b) / (a.norm() * b.norm()) < 0.5);
    }
  }
  CHECK(pairs == 10);
  for (auto it = groups.begin(); it != groups.end(); ++it) {
    for (auto jt = std::next(it); jt != groups.end(); ++jt) {
      CHECK(it->second[0]->audio != jt->second[0]->audio);
    }
  }
  CHECK(lex.token_word(lex.token_id(lex.entries()[5].word)) == lex.entries()[5].word);
  CHECK(lex.token_id("no-such-word") == kUnk);
  CHECK_THROWS_AS(lex.entry("no-such-word"), LexiconError);
  const Lexicon back = Lexicon::from_json(lex.to_json());
  CHECK(back.to_json() == lex.to_json());
}

TEST_CASE("render audio") {
  SynthConfig c = tiny_synth();
  const Lexicon lex = generate_lexicon(c);
  Rng rng(1);
  std::vector<std::string> words;
  for (int i = 0; i < 5; ++i) words.push_back(lex.entries()[i].word);
  CHECK(render_audio(words, lex, 4, 0.3, rng).rows() == 20);
  const Matrix exact = render_audio(words, lex, 4, 0.0, rng);
  for (int i = 0; i < 5; ++i) {
    for (int f = 0; f < 4; ++f) CHECK(exact.row(i * 4 + f) == lex.entries()[i].audio);
  }
  const std::vector<std::string> bad{"no-such-word"};
  CHECK_THROWS_AS(render_audio(bad, lex, 4, 0.3, rng), LexiconError);

  const std::vector<std::string> one{lex.entries()[3].word};
  const Matrix many = render_audio(one, lex, 10000, 0.3, rng);
  const RowVector mean = many.colwise().mean();
  CHECK((mean - lex.entries()[3].audio).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("render video") {
  SynthConfig c = tiny_synth();
  const Lexicon lex = generate_lexicon(c);
  Rng rng(2);
  std::vector<std::string> function_words, content_word;
  for (const auto& e : lex.entries()) {
    if (!e.is_content) function_words.push_back(e.word);
    if (e.is_content && content_word.empty()) content_word.push_back(e.word);
  }
  const Matrix bg = render_video(function_words, lex, 3, 0.1, rng);
  CHECK(bg.rows() == 3 * static_cast<int>(function_words.size()));
  for (Eigen::Index t = 0; t < bg.rows(); ++t) {
    CHECK((bg.row(t) - lex.background()).cwiseAbs().maxCoeff() < 0.1 * 6);
  }
  const Matrix exact = render_video(content_word, lex, 2, 0.0, rng);
  const RowVector want = lex.entry(content_word[0]).embedding * lex.video_projection().transpose();
  CHECK((exact.row(0) - want).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((exact.row(1) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("training masks follow the floor rule") {
  const Lexicon lex = generate_lexicon(tiny_synth());
  Rng rng(3);
  const Utterance eight = make_utterance(lex, 8, 2, rng);
  const auto none = apply_mask_training(eight, candidates({{0, 3.9}, {3, 3.8}}), 2, rng);
  CHECK(none.mask_spans.empty());
  CHECK(none.audio == eight.audio);

  const Utterance twenty = make_utterance(lex, 20, 2, rng);
  const auto five = candidates({{1, 3.6}, {4, 3.7}, {9, 3.8}, {12, 3.9}, {17, 3.6}});
  const auto masked = apply_mask_training(twenty, five, 2, rng);
  REQUIRE(masked.mask_spans.size() == 2);
  std::set<int> allowed{1, 4, 9, 12, 17};
  Matrix diff = masked.audio;
  for (const auto& s : masked.mask_spans) {
    CHECK(allowed.count(s.word_index) == 1);
    CHECK(s.frame_begin == 2 * s.word_index);
    CHECK(s.frame_end == 2 * s.word_index + 2);
    diff.middleRows(s.frame_begin, s.frame_end - s.frame_begin) =
        twenty.audio.middleRows(s.frame_begin, s.frame_end - s.frame_begin);
  }
  CHECK(diff == twenty.audio);
  CHECK(twenty.mask_spans.empty());
  CHECK_THROWS_AS(apply_mask_training(twenty, candidates({{20, 3.9}}), 2, rng), InputError);
}

TEST_CASE("masked regions are standard normal noise") {
  const Lexicon lex = generate_lexicon(tiny_synth());
  Rng rng(4);
  const Utterance u = make_utterance(lex, 1000, 4, rng);
  std::vector<MaskCandidate> all;
  for (int i = 0; i < 1000; ++i) all.push_back({i, 4.0});
  std::vector<double> values;
  while (values.size() < 10000 * 3) {
    const auto m = apply_mask_training(u, all, 4, rng);
    for (const auto& s : m.mask_spans) {
      for (int f = s.frame_begin; f < s.frame_end; ++f) {
        for (Eigen::Index k = 0; k < m.audio.cols(); ++k) values.push_back(m.audio(f, k));
      }
    }
  }
  double mean = 0.0, sq = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  for (double v : values) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(values.size()));
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sd - 1.0) < 0.05);
}

TEST_CASE("evaluation masks take the top candidates") {
  const Lexicon lex = generate_lexicon(tiny_synth());
  Rng rng(5);
  const Utterance twenty = make_utterance(lex, 20, 2, rng);
  const auto c = candidates({{3, 3.7}, {8, 3.9}, {15, 3.6}});
  const auto m = apply_mask_eval(twenty, c, 2, rng);
  REQUIRE(m.mask_spans.size() == 2);
  CHECK(m.mask_spans[0].word_index == 3);
  CHECK(m.mask_spans[1].word_index == 8);
  Rng other(99);
  CHECK(apply_mask_eval(twenty, c, 2, other).mask_spans == m.mask_spans);
  CHECK(apply_mask_eval(twenty, {}, 2, rng).mask_spans.empty());

  // Short utterances still get one mask; ties go to the earlier word.
  const Utterance five = make_utterance(lex, 5, 2, rng);
  const auto tie = apply_mask_eval(five, candidates({{1, 3.8}, {4, 3.8}}), 2, rng);
  REQUIRE(tie.mask_spans.size() == 1);
  CHECK(tie.mask_spans[0].word_index == 1);
}

TEST_CASE("corpus generation") {
  SynthConfig c = tiny_synth(7);
  const Corpus corpus = generate_corpus(c);
  CHECK(corpus.train.size() == 30);
  CHECK(corpus.dev.size() == 4);
  CHECK(corpus.test.size() == 4);
  std::map<std::string, int> counts;
  for (const auto& split : kSplits) {
    for (const auto& u : corpus.split(split)) {
      CHECK(u.audio.rows() == c.frames_per_token_audio * static_cast<int>(u.words.size()));
      CHECK(u.raw_video.rows() == c.frames_per_token_video * static_cast<int>(u.words.size()));
      CHECK(all_finite(u.audio));
      CHECK(all_finite(u.raw_video));
      CHECK(static_cast<int>(u.words.size()) >= c.sentence_len_min);
      CHECK(static_cast<int>(u.words.size()) <= c.sentence_len_max);
      if (split == "train") {
        for (const auto& w : u.words) ++counts[w];
      }
    }
  }
  for (const auto& e : corpus.lexicon.entries()) {
    if (e.is_content) CHECK(counts[e.word] >= 5);
  }
  CHECK_THROWS_AS(corpus.split("bogus"), InputError);
}

TEST_CASE("corpus files are a pure function of the config") {
  SynthConfig c = tiny_synth(8);
  const auto a = temp_dir("det_a"), b = temp_dir("det_b");
  write_corpus(a, generate_corpus(c), CorpusInfo{}, false);
  write_corpus(b, generate_corpus(c), CorpusInfo{}, false);
  CHECK(hash_directory(a) == hash_directory(b));
  c.seed = 9;
  const auto d = temp_dir("det_c");
  write_corpus(d, generate_corpus(c), CorpusInfo{}, false);
  CHECK(hash_directory(a) != hash_directory(d));
  CHECK_THROWS(write_corpus(a, generate_corpus(c), CorpusInfo{}, false));
  for (const auto& p : {a, b, d}) std::filesystem::remove_all(p);
}

TEST_CASE("corpus read back equals the generated corpus") {
  const Corpus corpus = mask_corpus(generate_corpus(tiny_synth(10)), kMaskThreshold, 10);
  const auto dir = temp_dir("roundtrip");
  CorpusInfo info;
  info.condition = "masked";
  info.mask_threshold = kMaskThreshold;
  info.mask_seed = 10;
  write_corpus(dir, corpus, info, false);
  CorpusInfo back_info;
  const Corpus back = read_corpus(dir, &back_info);
  CHECK(back_info.condition == "masked");
  CHECK(back_info.mask_seed == 10);
  CHECK(back.lexicon.to_json() == corpus.lexicon.to_json());
  for (const auto& split : kSplits) {
    REQUIRE(back.split(split).size() == corpus.split(split).size());
    for (std::size_t i = 0; i < corpus.split(split).size(); ++i) {
      const auto& x = corpus.split(split)[i];
      const auto& y = back.split(split)[i];
      CHECK(x.id == y.id);
      CHECK(x.words == y.words);
      CHECK(x.token_ids == y.token_ids);
      CHECK(x.audio == y.audio);
      CHECK(x.raw_video == y.raw_video);
      CHECK(x.visual == y.visual);
      CHECK(x.mask_spans == y.mask_spans);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("masked corpus respects the word budget") {
  SynthConfig c = tiny_synth(11);
  c.sentence_len_min = 6;
  c.sentence_len_max = 24;
  c.n_train = 60;
  const Corpus clean = generate_corpus(c);
  const Corpus masked = mask_corpus(clean, kMaskThreshold, 11);
  int total = 0;
  for (const auto& split : kSplits) {
    for (std::size_t i = 0; i < clean.split(split).size(); ++i) {
      const auto& u = masked.split(split)[i];
      const auto& orig = clean.split(split)[i];
      int frames = 0;
      Matrix restored = u.audio;
      for (const auto& s : u.mask_spans) {
        frames += s.frame_end - s.frame_begin;
        restored.middleRows(s.frame_begin, s.frame_end - s.frame_begin) =
            orig.audio.middleRows(s.frame_begin, s.frame_end - s.frame_begin);
      }
      const double n = static_cast<double>(u.words.size());
      CHECK(frames <= 0.1 * n * c.frames_per_token_audio + c.frames_per_token_audio);
      CHECK(restored == orig.audio);
      total += static_cast<int>(u.mask_spans.size());
    }
  }
  CHECK(total > 0);
}
