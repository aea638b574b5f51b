#include "test_util.hpp"

#include "oracles.hpp"

#include <limits>

using namespace vcasr;
using namespace vcasr::testing;

namespace {

// Two-dimensional lexicon with identity video projection.
Lexicon toy_lexicon() {
  std::vector<LexiconEntry> entries;
  auto add = [&](const std::string& w, double a, double b) {
    LexiconEntry e;
    e.word = w;
    e.embedding = RowVector(2);
    e.embedding << a, b;
    e.audio = RowVector::Zero(1);
    e.homophone_group = static_cast<int>(entries.size());
    entries.push_back(e);
  };
  add("east", 1.0, 0.0);
  add("west", -1.0, 0.0);
  add("none", 0.0, 0.0);
  return Lexicon(entries, Matrix::Identity(2, 2), RowVector::Zero(2));
}

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("word embeddings") {
  const SynthConfig c = tiny_synth();
  const Lexicon lex = generate_lexicon(c);
  const JointEmbedding emb(lex, 2, 1);
  for (const auto& e : lex.entries()) {
    if (e.is_content) {
      CHECK(emb.embed_word(e.word) == e.embedding);
      CHECK(std::abs(emb.embed_word(e.word).norm() - c.content_norm) < 1e-9);
    }
  }
  CHECK(emb.embed_word("zzz").isZero(0.0));
  CHECK(emb.embed_word(lex.entries()[0].word) == emb.embed_word(lex.entries()[0].word));
  CHECK_THROWS_AS(JointEmbedding(lex, 2, 3), ConfigError);
  CHECK_THROWS_AS(JointEmbedding(lex, 2, 0), ConfigError);
}

TEST_CASE("visual feature windows") {
  const Lexicon lex = toy_lexicon();
  Rng rng(1);
  CHECK(JointEmbedding(lex, 4, 2).extract_visual_features(random_matrix(10, 2, rng)).rows() == 4);
  CHECK(JointEmbedding(lex, 32, 16).extract_visual_features(random_matrix(32, 2, rng)).rows() == 1);
  CHECK(JointEmbedding(lex, 4, 2).extract_visual_features(random_matrix(11, 2, rng)).rows() == 4);
  CHECK_THROWS_AS(JointEmbedding(lex, 4, 2).extract_visual_features(random_matrix(3, 2, rng)),
                  ShapeError);

  Matrix constant(9, 2);
  constant.rowwise() = rows({{0.3, -0.7}}).row(0);
  const Matrix v = JointEmbedding(lex, 3, 2).extract_visual_features(constant);
  for (Eigen::Index t = 0; t < v.rows(); ++t) CHECK((v.row(t) - v.row(0)).isZero(1e-15));

  const Matrix raw = rows({{1, 0}, {3, 2}, {5, 4}, {7, 6}});
  const Matrix w = JointEmbedding(lex, 2, 2).extract_visual_features(raw);
  CHECK(w == rows({{2, 1}, {6, 5}}));
}

TEST_CASE("similarity matrix") {
  const Lexicon lex = toy_lexicon();
  const JointEmbedding emb(lex, 1, 1);
  const Matrix v = rows({{1, 0}});
  const std::vector<std::string> words{"east", "none", "west"};
  const Matrix s = similarity_matrix(emb, words, v);
  CHECK(s(0, 0) == 3.0);
  CHECK(s(1, 0) == 2.0);
  CHECK(s(2, 0) == 1.0);
  CHECK_THROWS_AS(similarity_matrix(emb, words, rows({{1, 0, 0}})), ShapeError);
  CHECK_THROWS_AS(similarity_matrix(emb, std::vector<std::string>{}, v), InputError);

  const std::string tsv = similarity_tsv(words, s);
  CHECK(tsv.find("east\t3.0000") != std::string::npos);
  CHECK(tsv.find("west\t1.0000") != std::string::npos);
}

TEST_CASE("similarity scales linearly with the embedding") {
  Rng rng(2);
  const Matrix v = random_matrix(5, 2, rng);
  for (double lambda : {0.5, 2.0, -3.0}) {
    std::vector<LexiconEntry> entries(2);
    entries[0].word = "a";
    entries[0].embedding = rows({{0.7, -0.2}}).row(0);
    entries[1].word = "b";
    entries[1].embedding = lambda * entries[0].embedding;
    for (auto& e : entries) e.audio = RowVector::Zero(1);
    const Lexicon lex(entries, Matrix::Identity(2, 2), RowVector::Zero(2));
    const JointEmbedding emb(lex, 1, 1);
    const Matrix s = similarity_matrix(emb, std::vector<std::string>{"a", "b"}, v);
    for (Eigen::Index j = 0; j < v.rows(); ++j) {
      CHECK(std::abs(s(1, j) - (lambda * (s(0, j) - 2.0) + 2.0)) < 1e-12);
    }
  }
}

TEST_CASE("grounded context vectors") {
  const Lexicon lex = toy_lexicon();
  const JointEmbedding emb(lex, 1, 1);
  SUBCASE("single window") {
    const Matrix v = rows({{0.4, -0.9}});
    const auto vg = vg_context(emb, std::vector<std::string>{"east", "none"}, v);
    CHECK(vg.alpha(0, 0) == 1.0);
    CHECK((vg.context.row(0) - v.row(0)).isZero(1e-15));
    CHECK((vg.context.row(1) - v.row(0)).isZero(1e-15));
  }
  SUBCASE("zero embedding is uniform") {
    const auto vg = vg_context(emb, std::vector<std::string>{"none"}, Matrix::Identity(2, 2));
    CHECK(vg.alpha(0, 0) == doctest::Approx(0.5));
    CHECK(vg.alpha(0, 1) == doctest::Approx(0.5));
    CHECK(vg.context(0, 0) == doctest::Approx(0.5));
    CHECK(vg.context(0, 1) == doctest::Approx(0.5));
  }
  SUBCASE("matched embedding") {
    const auto vg = vg_context(emb, std::vector<std::string>{"east"}, Matrix::Identity(2, 2));
    CHECK(vg.alpha(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(vg.alpha(0, 1) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(vg.context(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(vg.context(0, 1) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(vg.clamped == 0);
  }
  SUBCASE("non-positive similarities are clamped") {
    // west . (5, 0) + 2 = -3
    const auto vg = vg_context(emb, std::vector<std::string>{"west"}, rows({{5, 0}, {0, 1}}));
    CHECK(vg.clamped == 1);
    CHECK(vg.alpha(0, 0) >= 0.0);
    CHECK(std::abs(vg.alpha.row(0).sum() - 1.0) < 1e-9);
    CHECK(vg.alpha(0, 0) < 1e-6);
  }
}

TEST_CASE("grounded contexts match direct evaluation on random instances") {
  Rng rng(3);
  std::uniform_int_distribution<int> dim(1, 5), len(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim(rng), n = len(rng), m = len(rng);
    std::vector<LexiconEntry> entries(n);
    std::vector<std::string> words;
    std::vector<RowVector> e;
    for (int i = 0; i < n; ++i) {
      entries[i].word = "w" + std::to_string(i);
      entries[i].embedding = random_row(d, rng, 0.5);
      entries[i].audio = RowVector::Zero(1);
      words.push_back(entries[i].word);
      e.push_back(entries[i].embedding);
    }
    const Lexicon lex(entries, Matrix::Identity(d, d), RowVector::Zero(d));
    const JointEmbedding emb(lex, 1, 1);
    const Matrix v = random_matrix(m, d, rng, 0.5);
    const auto vg = vg_context(emb, words, v);
    REQUIRE(vg.clamped == 0);
    std::vector<std::vector<double>> ev, vv;
    for (const auto& r : e) ev.emplace_back(r.data(), r.data() + r.size());
    for (int j = 0; j < m; ++j) {
      vv.emplace_back();
      for (int k = 0; k < d; ++k) vv.back().push_back(v(j, k));
    }
    const auto want = oracle::vg_context(ev, vv);
    const auto s = oracle::similarity(ev, vv);
    const Matrix got_s = similarity_matrix(emb, words, v);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) CHECK(std::abs(vg.context(i, k) - want[i][k]) < 1e-10);
      for (int j = 0; j < m; ++j) CHECK(std::abs(got_s(i, j) - s[i][j]) < 1e-10);
    }
    for (int i = 0; i < n; ++i) {
      CHECK((vg.alpha.row(i).array() >= 0.0).all());
      CHECK(std::abs(vg.alpha.row(i).sum() - 1.0) < 1e-9);
      for (int k = 0; k < d; ++k) {
        CHECK(vg.context(i, k) >= v.col(k).minCoeff() - 1e-12);
        CHECK(vg.context(i, k) <= v.col(k).maxCoeff() + 1e-12);
      }
    }
  }
}

TEST_CASE("mask candidates") {
  SynthConfig c = tiny_synth();
  c.sigma_video = 0.0;
  const Lexicon lex = generate_lexicon(c);
  const JointEmbedding emb(lex, 2, 2);
  std::string content, function;
  for (const auto& e : lex.entries()) {
    if (e.is_content && content.empty()) content = e.word;
    if (!e.is_content && function.empty()) function = e.word;
  }
  const std::vector<std::string> words{function, content};
  Rng rng(4);
  const Matrix visual = emb.extract_visual_features(render_video(words, lex, 2, 0.0, rng));
  const auto cands = select_mask_candidates(emb, words, visual);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].word_index == 1);
  CHECK(cands[0].score == doctest::Approx(2.0 + c.content_norm * c.content_norm).epsilon(1e-9));
  CHECK(select_mask_candidates(emb, std::vector<std::string>{"zzz"}, visual).empty());
  CHECK(select_mask_candidates(emb, words, visual, std::numeric_limits<double>::infinity()).empty());
}
