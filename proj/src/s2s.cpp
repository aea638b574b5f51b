#include "vcasr/s2s.hpp"

#include <algorithm>
#include <cmath>

namespace vcasr {

int StreamBatch::valid_count(int b) const {
  int n = 0;
  for (int t = 0; t < T; ++t) n += mask[static_cast<std::size_t>(b) * T + t];
  return n;
}

LocationAttention::LocationAttention(ParamStore& store, const std::string& prefix, int d_query,
                                     int d_key, AttentionConfig config, Rng& rng)
    : config_(config) {
  if (config.dim < 1 || config.filters < 1 || config.kernel < 1) {
    throw ConfigError(prefix + ": attention dim/filters/kernel must be >= 1");
  }
  Wq = store.add(prefix + ".Wq", d_query, config.dim);
  Wk = store.add(prefix + ".Wk", d_key, config.dim);
  conv = store.add(prefix + ".conv", config.filters, config.kernel);
  U = store.add(prefix + ".U", config.filters, config.dim);
  b = store.add(prefix + ".b", 1, config.dim);
  w = store.add(prefix + ".w", config.dim, 1);
  init_xavier(*Wq, rng);
  init_xavier(*Wk, rng);
  init_xavier(*conv, rng);
  init_xavier(*U, rng);
  init_xavier(*w, rng);
}

Matrix LocationAttention::project_keys(const StreamBatch& s) const {
  if (s.values.cols() != Wk->value.rows()) throw ShapeError(Wk->name + ": key width mismatch");
  return s.values * Wk->value;
}

void LocationAttention::project_keys_backward(const StreamBatch& s, const Matrix& dproj,
                                              Matrix& dvalues) {
  Wk->grad.noalias() += s.values.transpose() * dproj;
  dvalues.noalias() += dproj * Wk->value.transpose();
}

RowVector LocationAttention::initial_weights(const StreamBatch& s, int b) const {
  RowVector a = RowVector::Zero(s.T);
  const int n = s.valid_count(b);
  if (n == 0) throw ShapeError("attention over a stream with no valid frames");
  for (int t = 0; t < s.T; ++t) {
    if (s.mask[static_cast<std::size_t>(b) * s.T + t]) a[t] = 1.0 / n;
  }
  return a;
}

Matrix LocationAttention::convolve(const RowVector& alpha) const {
  const int T = static_cast<int>(alpha.size());
  const int F = config_.filters, K = config_.kernel, P = K / 2;
  Matrix g = Matrix::Zero(T, F);
  const auto& f = conv->value;
  for (int j = 0; j < T; ++j) {
    for (int k = 0; k < K; ++k) {
      const int src = j + k - P;
      if (src < 0 || src >= T) continue;
      const double a = alpha[src];
      if (a == 0.0) continue;
      for (int c = 0; c < F; ++c) g(j, c) += f(c, k) * a;
    }
  }
  return g;
}

void LocationAttention::step(const Matrix& query, const StreamBatch& s, const Matrix& keys_proj,
                             std::span<const int> elem, std::span<const RowVector> prev,
                             Matrix& context, std::vector<RowVector>& weights,
                             std::vector<RowCache>* cache) const {
  const auto R = static_cast<int>(elem.size());
  const int T = s.T;
  Matrix qw = query * Wq->value;
  qw.rowwise() += b->value.row(0);
  context.resize(R, s.values.cols());
  weights.assign(R, RowVector());
  if (cache) cache->assign(R, {});
  for (int r = 0; r < R; ++r) {
    const int e = elem[r];
    if (prev[r].size() != T) throw ShapeError("previous attention weights have the wrong length");
    Matrix g = convolve(prev[r]);
    Matrix z = keys_proj.middleRows(static_cast<Eigen::Index>(e) * T, T);
    z.noalias() += g * U->value;
    z.rowwise() += qw.row(r);
    z = tanh_array(z.array()).matrix();
    const Vector scores = z * w->value;
    const std::uint8_t* m = s.mask.data() + static_cast<std::size_t>(e) * T;
    double mx = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < T; ++t) {
      if (m[t]) mx = std::max(mx, scores[t]);
    }
    RowVector a = RowVector::Zero(T);
    double sum = 0.0;
    for (int t = 0; t < T; ++t) {
      if (m[t]) {
        a[t] = std::exp(scores[t] - mx);
        sum += a[t];
      }
    }
    a /= sum;
    context.row(r).noalias() = a * s.block(e);
    if (cache) {
      (*cache)[r].conv = std::move(g);
      (*cache)[r].z = std::move(z);
      (*cache)[r].alpha = a;
    }
    weights[r] = std::move(a);
  }
}

void LocationAttention::step_backward(const Matrix& query, const StreamBatch& s,
                                      std::span<const int> elem, std::span<const RowVector> prev,
                                      const std::vector<RowCache>& cache,
                                      const Matrix& dcontext, std::vector<RowVector>& dprev_io,
                                      Matrix& dquery, Matrix& dkeys_proj, Matrix& dvalues) {
  const auto R = static_cast<int>(elem.size());
  const int T = s.T;
  const int F = config_.filters, K = config_.kernel, P = K / 2;
  Matrix dqw(R, config_.dim);
  const auto& f = conv->value;
  for (int r = 0; r < R; ++r) {
    const int e = elem[r];
    const auto& c = cache[r];
    const auto values = s.block(e);
    RowVector dalpha = (values * dcontext.row(r).transpose()).transpose();
    if (dprev_io[r].size() == T) dalpha += dprev_io[r];
    const double inner = c.alpha.dot(dalpha);
    const Vector de = (c.alpha.array() * (dalpha.array() - inner)).matrix().transpose();
    w->grad.noalias() += c.z.transpose() * de;
    const Matrix dpre =
        ((de * w->value.transpose()).array() * (1.0 - c.z.array().square())).matrix();
    dqw.row(r) = dpre.colwise().sum();
    dkeys_proj.middleRows(static_cast<Eigen::Index>(e) * T, T) += dpre;
    U->grad.noalias() += c.conv.transpose() * dpre;
    const Matrix dg = dpre * U->value.transpose();
    RowVector dprev = RowVector::Zero(T);
    for (int j = 0; j < T; ++j) {
      for (int k = 0; k < K; ++k) {
        const int src = j + k - P;
        if (src < 0 || src >= T) continue;
        double acc = 0.0;
        for (int ch = 0; ch < F; ++ch) {
          conv->grad(ch, k) += dg(j, ch) * prev[r][src];
          acc += dg(j, ch) * f(ch, k);
        }
        dprev[src] += acc;
      }
    }
    dvalues.middleRows(static_cast<Eigen::Index>(e) * T, T).noalias() +=
        c.alpha.transpose() * dcontext.row(r);
    dprev_io[r] = std::move(dprev);
  }
  b->grad += dqw.colwise().sum();
  Wq->grad.noalias() += query.transpose() * dqw;
  dquery = dqw * Wq->value.transpose();
}

AttentionDecoder::AttentionDecoder(ParamStore& store, const std::string& prefix, int vocab,
                                   int embed_dim, int d, int n_streams, FusionMode fusion,
                                   AttentionConfig attn, Rng& rng)
    : embed_dim_(embed_dim), d_(d) {
  embedding = store.add(prefix + ".embedding", vocab, embed_dim);
  init_xavier(*embedding, rng);
  gru1 = Gru(store, prefix + ".gru1", embed_dim + d, d, rng);
  gru2 = Gru(store, prefix + ".gru2", d, d, rng);
  for (int k = 0; k < n_streams; ++k) {
    heads_.emplace_back(store, prefix + ".att" + std::to_string(k), d, d, attn, rng);
  }
  fusion_ = Fusion(store, "fusion", fusion, n_streams, d, rng);
  out = Linear(store, prefix + ".out", d, vocab, rng);
}

EncodedStreams AttentionDecoder::prepare(std::vector<StreamBatch> streams) const {
  if (static_cast<int>(streams.size()) != n_streams()) {
    throw ShapeError("decoder expects " + std::to_string(n_streams()) + " streams, got " +
                     std::to_string(streams.size()));
  }
  EncodedStreams enc;
  enc.streams = std::move(streams);
  for (int k = 0; k < n_streams(); ++k) {
    enc.keys_proj.push_back(heads_[k].project_keys(enc.streams[k]));
  }
  return enc;
}

AttentionDecoder::State AttentionDecoder::initial_state(const EncodedStreams& enc,
                                                        std::span<const int> elem) const {
  const auto R = static_cast<Eigen::Index>(elem.size());
  State s;
  s.h1 = Matrix::Zero(R, d_);
  s.h2 = Matrix::Zero(R, d_);
  s.fused = Matrix::Zero(R, d_);
  s.alpha.resize(heads_.size());
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    for (int e : elem) s.alpha[k].push_back(heads_[k].initial_weights(enc.streams[k], e));
  }
  return s;
}

Matrix AttentionDecoder::step(const EncodedStreams& enc, std::span<const int> elem,
                              std::span<const int> tokens, const State& prev, State& next,
                              StepCache* cache) const {
  const auto R = static_cast<Eigen::Index>(elem.size());
  const int V = vocab();
  Matrix x(R, embed_dim_ + d_);
  for (Eigen::Index r = 0; r < R; ++r) {
    const int tok = tokens[r];
    if (tok < 0 || tok >= V) throw InputError("token id out of range in decoder step");
    x.row(r).head(embed_dim_) = embedding->value.row(tok);
  }
  x.rightCols(d_) = prev.fused;
  Gru::StepCache* c1 = cache ? &cache->g1 : nullptr;
  Gru::StepCache* c2 = cache ? &cache->g2 : nullptr;
  next.h1 = gru1.step(x, prev.h1, c1);
  next.h2 = gru2.step(next.h1, prev.h2, c2);
  std::vector<Matrix> contexts(heads_.size());
  next.alpha.assign(heads_.size(), {});
  if (cache) cache->attn.assign(heads_.size(), {});
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    heads_[k].step(next.h2, enc.streams[k], enc.keys_proj[k], elem, prev.alpha[k], contexts[k],
                   next.alpha[k], cache ? &cache->attn[k] : nullptr);
  }
  next.fused = fusion_.forward(contexts, next.h2, cache ? &cache->fusion : nullptr);
  Matrix logits = out.forward(next.fused);
  if (cache) {
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->x = std::move(x);
    cache->h2 = next.h2;
    cache->contexts = std::move(contexts);
    cache->alpha_prev = prev.alpha;
    cache->fused = next.fused;
  }
  return logits;
}

Matrix AttentionDecoder::teacher_forced(const EncodedStreams& enc, int U,
                                        std::span<const int> tokens, TeacherCache* cache) const {
  const int B = enc.streams.empty() ? 0 : enc.streams[0].B;
  if (static_cast<int>(tokens.size()) != U * B) throw ShapeError("teacher tokens must be U x B");
  std::vector<int> elem(B);
  for (int b = 0; b < B; ++b) elem[b] = b;
  State state = initial_state(enc, elem);
  Matrix logits(static_cast<Eigen::Index>(U) * B, vocab());
  if (cache) {
    cache->steps.assign(U, {});
    cache->elem = elem;
  }
  for (int t = 0; t < U; ++t) {
    State next;
    logits.middleRows(static_cast<Eigen::Index>(t) * B, B) =
        step(enc, elem, tokens.subspan(static_cast<std::size_t>(t) * B, B), state, next,
             cache ? &cache->steps[t] : nullptr);
    state = std::move(next);
  }
  return logits;
}

std::vector<Matrix> AttentionDecoder::backward(const EncodedStreams& enc,
                                               const TeacherCache& cache, const Matrix& dlogits) {
  const int U = static_cast<int>(cache.steps.size());
  const auto B = static_cast<Eigen::Index>(cache.elem.size());
  const auto K = heads_.size();
  std::vector<Matrix> dvalues, dkeys;
  for (std::size_t k = 0; k < K; ++k) {
    dvalues.push_back(Matrix::Zero(enc.streams[k].values.rows(), enc.streams[k].values.cols()));
    dkeys.push_back(Matrix::Zero(enc.keys_proj[k].rows(), enc.keys_proj[k].cols()));
  }
  Matrix dh1 = Matrix::Zero(B, d_), dh2 = Matrix::Zero(B, d_), dfused_carry = Matrix::Zero(B, d_);
  std::vector<std::vector<RowVector>> dalpha(K, std::vector<RowVector>(B));
  std::vector<Matrix> dctx;
  Matrix ddec, dq, dx2, dx1, dh2_prev, dh1_prev;
  for (int t = U - 1; t >= 0; --t) {
    const auto& sc = cache.steps[t];
    Matrix dfused = out.backward(sc.fused, dlogits.middleRows(static_cast<Eigen::Index>(t) * B, B));
    dfused += dfused_carry;
    fusion_.backward(sc.fusion, sc.contexts, dfused, dctx, ddec);
    Matrix dh2_total = ddec + dh2;
    for (std::size_t k = 0; k < K; ++k) {
      heads_[k].step_backward(sc.h2, enc.streams[k], cache.elem, sc.alpha_prev[k], sc.attn[k],
                              dctx[k], dalpha[k], dq, dkeys[k], dvalues[k]);
      dh2_total += dq;
    }
    gru2.step_backward(sc.g2, dh2_total, dx2, dh2_prev);
    dh2 = dh2_prev;
    Matrix dh1_total = dx2 + dh1;
    gru1.step_backward(sc.g1, dh1_total, dx1, dh1_prev);
    dh1 = dh1_prev;
    for (Eigen::Index r = 0; r < B; ++r) {
      embedding->grad.row(sc.tokens[r]) += dx1.row(r).head(embed_dim_);
    }
    dfused_carry = dx1.rightCols(d_);
  }
  for (std::size_t k = 0; k < K; ++k) {
    heads_[k].project_keys_backward(enc.streams[k], dkeys[k], dvalues[k]);
  }
  return dvalues;
}

std::vector<std::vector<RowVector>> AttentionDecoder::weights_at(const TeacherCache& c,
                                                                 int step) {
  std::vector<std::vector<RowVector>> out;
  for (const auto& head : c.steps[step].attn) {
    std::vector<RowVector> rows;
    for (const auto& rc : head) rows.push_back(rc.alpha);
    out.push_back(std::move(rows));
  }
  return out;
}

namespace {

AttentionDecoder::State gather(const AttentionDecoder::State& s, const std::vector<int>& rows) {
  AttentionDecoder::State out;
  const auto R = static_cast<Eigen::Index>(rows.size());
  out.h1.resize(R, s.h1.cols());
  out.h2.resize(R, s.h2.cols());
  out.fused.resize(R, s.fused.cols());
  for (Eigen::Index i = 0; i < R; ++i) {
    out.h1.row(i) = s.h1.row(rows[i]);
    out.h2.row(i) = s.h2.row(rows[i]);
    out.fused.row(i) = s.fused.row(rows[i]);
  }
  out.alpha.resize(s.alpha.size());
  for (std::size_t k = 0; k < s.alpha.size(); ++k) {
    for (int r : rows) out.alpha[k].push_back(s.alpha[k][r]);
  }
  return out;
}

bool expandable(int token) { return token != kPadToken && token != kSosToken; }

}  // namespace

std::vector<NBestList> beam_search_batch(const AttentionDecoder& dec, const EncodedStreams& enc,
                                         const BeamConfig& config) {
  if (config.n_best < 1 || config.beam < config.n_best) {
    throw ConfigError("beam: need beam >= n_best >= 1");
  }
  if (config.max_len < 1) throw ConfigError("max_len must be >= 1");
  struct Live {
    std::vector<int> tokens;
    double score = 0.0;
  };
  struct Candidate {
    double score;
    int row;
    int token;
  };
  const int B = enc.streams.empty() ? 0 : enc.streams[0].B;
  std::vector<std::vector<Live>> live(B, std::vector<Live>(1));
  std::vector<std::vector<Hypothesis>> finished(B);
  std::vector<int> active(B);
  for (int b = 0; b < B; ++b) active[b] = b;
  auto state = dec.initial_state(enc, active);
  const int V = dec.vocab();
  for (int step = 0; step < config.max_len && !active.empty(); ++step) {
    std::vector<int> tokens, row_elem;
    for (int e : active) {
      for (const auto& h : live[e]) {
        tokens.push_back(h.tokens.empty() ? kSosToken : h.tokens.back());
        row_elem.push_back(e);
      }
    }
    AttentionDecoder::State next;
    const Matrix logits = dec.step(enc, row_elem, tokens, state, next, nullptr);
    std::vector<int> still_active, rows;
    std::size_t base = 0;
    for (int e : active) {
      const std::size_t R = live[e].size();
      std::vector<Candidate> cands;
      cands.reserve(R * V);
      for (std::size_t r = 0; r < R; ++r) {
        const RowVector logp = log_softmax(logits.row(static_cast<Eigen::Index>(base + r)));
        for (int v = 0; v < V; ++v) {
          if (expandable(v)) cands.push_back({live[e][r].score + logp[v], static_cast<int>(r), v});
        }
      }
      const auto keep = std::min<std::size_t>(config.beam, cands.size());
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                        cands.end(), [](const Candidate& a, const Candidate& b) {
                          if (a.score != b.score) return a.score > b.score;
                          if (a.row != b.row) return a.row < b.row;
                          return a.token < b.token;
                        });
      std::vector<Live> next_live;
      std::vector<int> kept_rows;
      for (std::size_t k = 0; k < keep; ++k) {
        const auto& c = cands[k];
        auto tokens_c = live[e][c.row].tokens;
        tokens_c.push_back(c.token);
        if (c.token == kEosToken) {
          finished[e].push_back({std::move(tokens_c), c.score, false});
        } else {
          next_live.push_back({std::move(tokens_c), c.score});
          kept_rows.push_back(static_cast<int>(base) + c.row);
        }
      }
      base += R;
      if (static_cast<int>(finished[e].size()) >= config.beam || next_live.empty()) {
        live[e].clear();
        continue;
      }
      live[e] = std::move(next_live);
      rows.insert(rows.end(), kept_rows.begin(), kept_rows.end());
      still_active.push_back(e);
    }
    active = std::move(still_active);
    if (rows.empty()) break;
    state = gather(next, rows);
  }
  std::vector<NBestList> out(B);
  for (int e = 0; e < B; ++e) {
    auto& fin = finished[e];
    for (auto& h : live[e]) fin.push_back({std::move(h.tokens), h.score, true});
    std::stable_sort(fin.begin(), fin.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    if (static_cast<int>(fin.size()) > config.n_best) fin.resize(config.n_best);
    out[e].hyps = std::move(fin);
  }
  return out;
}

NBestList beam_search(const AttentionDecoder& dec, const EncodedStreams& enc,
                      const BeamConfig& config) {
  if (enc.streams.empty() || enc.streams[0].B != 1) {
    throw ShapeError("beam_search decodes a single element; use beam_search_batch");
  }
  return std::move(beam_search_batch(dec, enc, config)[0]);
}

Hypothesis greedy_decode(const AttentionDecoder& dec, const EncodedStreams& enc, int max_len) {
  std::vector<int> elem(1, 0);
  auto state = dec.initial_state(enc, elem);
  Hypothesis h;
  h.truncated = true;
  const int V = dec.vocab();
  for (int step = 0; step < max_len; ++step) {
    const int prev = h.tokens.empty() ? kSosToken : h.tokens.back();
    AttentionDecoder::State next;
    const Matrix logits = dec.step(enc, elem, std::span<const int>(&prev, 1), state, next, nullptr);
    const RowVector logp = log_softmax(logits.row(0));
    int best = -1;
    double best_score = 0.0;
    for (int v = 0; v < V; ++v) {
      if (!expandable(v)) continue;
      const double s = h.score + logp[v];
      if (best < 0 || s > best_score) {
        best = v;
        best_score = s;
      }
    }
    h.tokens.push_back(best);
    h.score = best_score;
    state = std::move(next);
    if (best == kEosToken) {
      h.truncated = false;
      break;
    }
  }
  return h;
}

double replay_score(const AttentionDecoder& dec, const EncodedStreams& enc,
                    std::span<const int> tokens) {
  std::vector<int> elem(1, 0);
  auto state = dec.initial_state(enc, elem);
  double score = 0.0;
  int prev = kSosToken;
  for (int tok : tokens) {
    AttentionDecoder::State next;
    const Matrix logits = dec.step(enc, elem, std::span<const int>(&prev, 1), state, next, nullptr);
    score += log_softmax(logits.row(0))[tok];
    state = std::move(next);
    prev = tok;
  }
  return score;
}

}  // namespace vcasr
