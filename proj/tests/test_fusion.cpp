#include "test_util.hpp"

#include "oracles.hpp"

using namespace vcasr;
using namespace vcasr::testing;

namespace {

std::vector<double> row_vec(const Matrix& m, int r) {
  return std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols());
}

Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }

}  // namespace

TEST_CASE("concatenation fusion examples") {
  ParamStore store;
  Rng rng(1);
  Fusion f(store, "fusion", FusionMode::Cat, 2, 1, rng);
  const std::vector<Matrix> ctx{scalar(2.0), scalar(3.0)};
  f.cat_W->value << 1.0, 1.0;
  f.cat_b->value.setZero();
  CHECK(f.forward(ctx, scalar(1.0), nullptr)(0, 0) == 6.0);
  f.cat_W->value << 1.0, 0.0;
  CHECK(f.forward(ctx, scalar(1.0), nullptr)(0, 0) == 3.0);
  f.cat_W->value << 0.0, 1.0;
  CHECK(f.forward(ctx, scalar(1.0), nullptr)(0, 0) == 4.0);
  f.cat_W->value.setZero();
  CHECK(f.forward(ctx, scalar(-0.25), nullptr)(0, 0) == -0.25);
}

TEST_CASE("gated fusion examples") {
  ParamStore store;
  Rng rng(2);
  Fusion f(store, "fusion", FusionMode::Gate, 2, 3, rng);
  const std::vector<Matrix> ctx{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
  const Matrix dec = random_matrix(2, 3, rng);
  for (auto* p : store.all()) p->value.setZero();
  const Matrix half = f.forward(ctx, dec, nullptr);
  CHECK((half - (0.5 * (ctx[0] + ctx[1]) + dec)).cwiseAbs().maxCoeff() < 1e-15);
  for (auto* b : f.gate_b) b->value.setConstant(100.0);
  const Matrix full = f.forward(ctx, dec, nullptr);
  CHECK((full - (ctx[0] + ctx[1] + dec)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("single-context fusion with zero parameters") {
  ParamStore store;
  Rng rng(3);
  Fusion cat(store, "c", FusionMode::Cat, 1, 4, rng);
  Fusion gate(store, "g", FusionMode::Gate, 1, 4, rng);
  for (auto* p : store.all()) p->value.setZero();
  const std::vector<Matrix> ctx{random_matrix(3, 4, rng)};
  const Matrix dec = random_matrix(3, 4, rng);
  CHECK(cat.forward(ctx, dec, nullptr) == dec);
  CHECK(gate.forward(ctx, dec, nullptr) == Matrix(0.5 * ctx[0] + dec));
}

TEST_CASE("fusion shape errors") {
  ParamStore store;
  Rng rng(4);
  Fusion f(store, "fusion", FusionMode::Gate, 2, 3, rng);
  const Matrix dec = Matrix::Zero(1, 3);
  const std::vector<Matrix> one{Matrix::Zero(1, 3)};
  const std::vector<Matrix> narrow{Matrix::Zero(1, 3), Matrix::Zero(1, 2)};
  CHECK_THROWS_AS(f.forward(one, dec, nullptr), ShapeError);
  CHECK_THROWS_AS(f.forward(narrow, dec, nullptr), ShapeError);
  CHECK_THROWS_AS(f.forward(std::vector<Matrix>{dec, dec}, Matrix::Zero(1, 4), nullptr), ShapeError);
  CHECK_THROWS_AS(parse_fusion_mode("sum"), ConfigError);
  CHECK(parse_fusion_mode("gate") == FusionMode::Gate);
}

TEST_CASE("fusion matches direct evaluation on random instances") {
  Rng rng(5);
  std::uniform_int_distribution<int> kd(1, 3), dd(1, 4), bd(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = kd(rng), d = dd(rng), B = bd(rng);
    ParamStore store;
    Fusion cat(store, "c", FusionMode::Cat, k, d, rng);
    Fusion gate(store, "g", FusionMode::Gate, k, d, rng);
    randomize(store, rng, 1.0);
    std::vector<Matrix> ctx;
    for (int c = 0; c < k; ++c) ctx.push_back(random_matrix(B, d, rng));
    const Matrix dec = random_matrix(B, d, rng);
    const Matrix oc = cat.forward(ctx, dec, nullptr);
    const Matrix og = gate.forward(ctx, dec, nullptr);
    std::vector<Matrix> gw, gb;
    for (int c = 0; c < k; ++c) {
      gw.push_back(gate.gate_W[c]->value);
      gb.push_back(gate.gate_b[c]->value);
    }
    for (int r = 0; r < B; ++r) {
      std::vector<std::vector<double>> cv;
      for (const auto& c : ctx) cv.push_back(row_vec(c, r));
      const auto wc = oracle::fuse_cat(cv, row_vec(dec, r), cat.cat_W->value, cat.cat_b->value);
      const auto wg = oracle::fuse_gate(cv, row_vec(dec, r), gw, gb);
      for (int j = 0; j < d; ++j) {
        CHECK(std::abs(oc(r, j) - wc[j]) < 1e-10);
        CHECK(std::abs(og(r, j) - wg[j]) < 1e-10);
      }
    }
  }
}

TEST_CASE("gated contributions are bounded by their contexts") {
  Rng rng(6);
  ParamStore store;
  Fusion gate(store, "g", FusionMode::Gate, 3, 5, rng);
  randomize(store, rng, 2.0);
  std::vector<Matrix> ctx;
  for (int c = 0; c < 3; ++c) ctx.push_back(random_matrix(4, 5, rng, 3.0));
  const Matrix dec = random_matrix(4, 5, rng);
  Fusion::Cache cache;
  gate.forward(ctx, dec, &cache);
  for (int c = 0; c < 3; ++c) {
    const Matrix gated = (ctx[c].array() * cache.gates[c].array()).matrix();
    CHECK((gated.array().abs() <= ctx[c].array().abs()).all());
  }
}

TEST_CASE("concatenation fusion is linear in the contexts") {
  Rng rng(7);
  ParamStore store;
  Fusion cat(store, "c", FusionMode::Cat, 2, 3, rng);
  cat.cat_b->value.setZero();
  const std::vector<Matrix> ctx{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
  const Matrix dec = random_matrix(2, 3, rng);
  const Matrix base = cat.forward(ctx, dec, nullptr) - dec;
  const std::vector<Matrix> scaled{2.5 * ctx[0], 2.5 * ctx[1]};
  const Matrix got = cat.forward(scaled, dec, nullptr) - dec;
  CHECK((got - 2.5 * base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fusion gradients") {
  for (FusionMode mode : {FusionMode::Cat, FusionMode::Gate}) {
    for (int k : {1, 2, 3}) {
      ParamStore store;
      Rng rng(8 + k);
      Fusion f(store, "f", mode, k, 3, rng);
      randomize(store, rng);
      std::vector<Param*> inputs;
      std::vector<Matrix> ctx;
      for (int c = 0; c < k; ++c) inputs.push_back(store.add("ctx" + std::to_string(c), 2, 3));
      Param* dec = store.add("dec", 2, 3);
      for (auto* p : inputs) p->value = random_matrix(2, 3, rng);
      dec->value = random_matrix(2, 3, rng);
      const Matrix target = random_matrix(2, 3, rng);
      auto loss = [&](bool grad) {
        std::vector<Matrix> cs;
        for (auto* p : inputs) cs.push_back(p->value);
        Fusion::Cache cache;
        const Matrix out = f.forward(cs, dec->value, &cache);
        if (grad) {
          store.zero_grad();
          std::vector<Matrix> dctx;
          Matrix ddec;
          f.backward(cache, cs, out - target, dctx, ddec);
          for (int c = 0; c < k; ++c) inputs[c]->grad = dctx[c];
          dec->grad = ddec;
        }
        return 0.5 * (out - target).squaredNorm();
      };
      auto params = store.all();
      const auto rep = gradient_check(params, loss, 1e-4, 1e-3);
      INFO(to_string(mode) << " k=" << k << " " << rep.worst_param << " " << rep.max_rel_error);
      CHECK(rep.passed());
    }
  }
}

TEST_CASE("feature-level video adaptation") {
  ParamStore store;
  Rng rng(9);
  VatAdapter vat(store, "vat.proj", 2, 3, rng);
  const Matrix audio = random_matrix(5, 3, rng);
  const RowVector video = random_row(2, rng);
  const Matrix out = vat.adapt(audio, video);
  for (int i = 1; i < 5; ++i) {
    CHECK(((out.row(i) - out.row(0)) - (audio.row(i) - audio.row(0))).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (int j = 0; j < 3; ++j) {
    double shift = vat.proj.b->value(0, j);
    for (int i = 0; i < 2; ++i) shift += video[i] * vat.proj.W->value(i, j);
    CHECK(std::abs(out(2, j) - (audio(2, j) + shift)) < 1e-12);
  }
  for (auto* p : store.all()) p->value.setZero();
  CHECK(vat.adapt(audio, video) == audio);
  CHECK_THROWS_AS(vat.adapt(random_matrix(5, 4, rng), video), ShapeError);
  CHECK_THROWS_AS(vat.adapt(audio, random_row(3, rng)), ShapeError);
}
