#include "test_util.hpp"

#include "oracles.hpp"
#include "vcasr/metrics.hpp"

#include <sstream>

using namespace vcasr;

namespace {

Words split(const std::string& s) {
  std::istringstream in(s);
  Words w;
  std::string t;
  while (in >> t) w.push_back(t);
  return w;
}

std::vector<Words> all_sequences(int max_len, const Words& alphabet) {
  std::vector<Words> out{{}};
  std::size_t begin = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t k = begin; k < end; ++k) {
      if (static_cast<int>(out[k].size()) != len - 1) continue;
      for (const auto& a : alphabet) {
        Words w = out[k];
        w.push_back(a);
        out.push_back(w);
      }
    }
    begin = end;
  }
  return out;
}

void check_consistent(const Words& r, const Words& h, const Alignment& a) {
  std::size_t ri = 0, hi = 0;
  int cost = 0;
  for (const auto& p : a.ops) {
    switch (p.op) {
      case EditOp::Match:
        REQUIRE(r[p.ref] == h[p.hyp]);
        REQUIRE(p.ref == static_cast<int>(ri++));
        REQUIRE(p.hyp == static_cast<int>(hi++));
        break;
      case EditOp::Sub:
        ++cost;
        REQUIRE(p.ref == static_cast<int>(ri++));
        REQUIRE(p.hyp == static_cast<int>(hi++));
        break;
      case EditOp::Del:
        ++cost;
        REQUIRE(p.ref == static_cast<int>(ri++));
        break;
      case EditOp::Ins:
        ++cost;
        REQUIRE(p.hyp == static_cast<int>(hi++));
        break;
    }
  }
  REQUIRE(ri == r.size());
  REQUIRE(hi == h.size());
  REQUIRE(cost == a.cost);
  REQUIRE(a.subs + a.dels + a.ins == a.cost);
}

}  // namespace

TEST_CASE("edit alignment basics") {
  const Words abc = split("a b c");
  const auto same = edit_alignment(abc, abc);
  CHECK(same.cost == 0);
  CHECK(same.ops.size() == 3);
  const auto sub = edit_alignment(abc, split("a x c"));
  CHECK(sub.cost == 1);
  CHECK(sub.subs == 1);
  CHECK(sub.ops[1].op == EditOp::Sub);
  CHECK(edit_alignment(abc, Words{}).dels == 3);
  CHECK(edit_alignment(Words{}, abc).ins == 3);
  CHECK(edit_alignment(split("A b"), split(" a  B")).cost == 0);
}

TEST_CASE("edit alignment equals exhaustive enumeration up to length 4") {
  const Words alphabet{"x", "y", "z"};
  const auto seqs = all_sequences(4, alphabet);
  REQUIRE(seqs.size() == 121);
  for (const auto& r : seqs) {
    for (const auto& h : seqs) {
      const auto a = edit_alignment(r, h);
      REQUIRE(a.cost == oracle::edit_cost(r, h));
      check_consistent(r, h, a);
    }
  }
}

TEST_CASE("edit alignment equals exhaustive enumeration for random pairs up to length 6") {
  const Words alphabet{"x", "y", "z"};
  Rng rng(21);
  std::uniform_int_distribution<int> len(0, 6), sym(0, 2);
  for (int trial = 0; trial < 3000; ++trial) {
    Words r(len(rng)), h(len(rng));
    for (auto& w : r) w = alphabet[sym(rng)];
    for (auto& w : h) w = alphabet[sym(rng)];
    const auto a = edit_alignment(r, h);
    REQUIRE(a.cost == oracle::edit_cost(r, h));
    check_consistent(r, h, a);
  }
}

TEST_CASE("corpus word error rate") {
  const std::vector<Words> refs{split("a b c")};
  CHECK(wer(refs, refs).wer == 0.0);
  const std::vector<Words> one_sub{split("a x c")};
  CHECK(wer(refs, one_sub).wer == doctest::Approx(33.33).epsilon(1e-3));

  // Pooled: (1 sub + 1 ins) / (3 + 2) and (2 del) / 5 summed.
  const std::vector<Words> r2{split("a b c"), split("d e")};
  const std::vector<Words> h2{split("a q c z"), Words{}};
  const auto rep = wer(r2, h2);
  CHECK(rep.subs == 1);
  CHECK(rep.ins == 1);
  CHECK(rep.dels == 2);
  CHECK(rep.wer == doctest::Approx(100.0 * 4 / 5));

  const std::vector<Words> empty_ref{Words{}};
  CHECK_THROWS_AS(wer(empty_ref, empty_ref), InputError);
  CHECK_THROWS_AS(wer(refs, std::vector<Words>{}), InputError);
}

TEST_CASE("inserting k words into a perfect hypothesis raises cost by k") {
  const Words ref = split("p q r s");
  for (int k = 0; k <= 4; ++k) {
    Words hyp = ref;
    for (int i = 0; i < k; ++i) hyp.insert(hyp.begin() + i * 2, "zz");
    CHECK(edit_alignment(ref, hyp).cost == k);
  }
}

TEST_CASE("oracle word error rate") {
  const std::vector<Words> refs{split("a b c")};
  const std::vector<std::vector<Words>> lists{{split("a x y"), split("a b y")}};
  CHECK(oracle_wer(refs, lists) == doctest::Approx(100.0 / 3));
  const std::vector<std::vector<Words>> with_ref{{split("q"), split("a b c")}};
  CHECK(oracle_wer(refs, with_ref) == 0.0);
  const std::vector<std::vector<Words>> empty{{}};
  CHECK_THROWS_AS(oracle_wer(refs, empty), InputError);

  Rng rng(4);
  const Words alphabet{"x", "y", "z"};
  std::uniform_int_distribution<int> len(1, 5), sym(0, 2), n(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Words> rs(3), firsts(3);
    std::vector<std::vector<Words>> ls(3);
    for (int u = 0; u < 3; ++u) {
      rs[u].resize(len(rng));
      for (auto& w : rs[u]) w = alphabet[sym(rng)];
      const int m = n(rng);
      for (int k = 0; k < m; ++k) {
        Words h(len(rng));
        for (auto& w : h) w = alphabet[sym(rng)];
        ls[u].push_back(h);
      }
      firsts[u] = ls[u][0];
    }
    REQUIRE(oracle_wer(rs, ls) <= wer(rs, firsts).wer + 1e-12);
  }
}

TEST_CASE("recovery rate") {
  const std::vector<Words> refs{split("you need a lot of paint on your brush")};
  const std::vector<std::vector<int>> masked{{5, 8}};
  const std::vector<Words> wrong{split("you need a lot of pin on your project")};
  const std::vector<Words> right{split("you need a lot of paint on your brush")};
  CHECK(recovery_rate(refs, wrong, masked).rate == 0.0);
  CHECK(recovery_rate(refs, right, masked).rate == 100.0);
  const std::vector<Words> half{split("you need a lot of paint on your project")};
  const auto rep = recovery_rate(refs, half, masked);
  CHECK(rep.rate == 50.0);
  CHECK(rep.recovered == 1);
  CHECK(rep.masked == 2);

  // A repeated word elsewhere in the hypothesis does not count.
  const std::vector<Words> shifted{split("paint you need a lot of on your")};
  CHECK(recovery_rate(refs, shifted, std::vector<std::vector<int>>{{5}}).rate == 0.0);

  const std::vector<std::vector<int>> none{{}};
  CHECK_THROWS_AS(recovery_rate(refs, right, none), InputError);
  const std::vector<std::vector<int>> bad{{9}};
  CHECK_THROWS_AS(recovery_rate(refs, right, bad), InputError);

  const std::vector<std::vector<Words>> lists{{wrong[0], half[0]}};
  CHECK(recovery_rate_nbest(refs, lists, masked).rate == 50.0);
}

TEST_CASE("recovery rate does not drop when a masked word is fixed") {
  const std::vector<Words> refs{split("a b c d e f")};
  const std::vector<std::vector<int>> masked{{1, 3, 5}};
  Words hyp = split("a q c q e q");
  double last = recovery_rate(refs, std::vector<Words>{hyp}, masked).rate;
  for (int i : {3, 1, 5}) {
    hyp[i] = refs[0][i];
    const double now = recovery_rate(refs, std::vector<Words>{hyp}, masked).rate;
    CHECK(now >= last);
    last = now;
  }
  CHECK(last == 100.0);
}

TEST_CASE("relative improvement") {
  CHECK(relative_improvement(17.77, 16.7) == doctest::Approx(6.02).epsilon(1e-3));
  CHECK(relative_improvement(22.64, 20.65) == doctest::Approx(8.79).epsilon(1e-3));
  CHECK(relative_improvement_rr(22.29, 35.5) == doctest::Approx(59.26).epsilon(1e-3));
  CHECK_THROWS_AS(relative_improvement(0.0, 1.0), InputError);
  CHECK_THROWS_AS(relative_improvement_rr(-1.0, 1.0), InputError);
}
