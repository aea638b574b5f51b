#include "vcasr/model.hpp"

#include "vcasr/io.hpp"

#include <algorithm>

namespace vcasr {

ModelKind parse_model_kind(const std::string& s) {
  if (s == "audio-only") return ModelKind::AudioOnly;
  if (s == "vat") return ModelKind::Vat;
  if (s == "multistream") return ModelKind::MultiStream;
  if (s == "deliberation") return ModelKind::Deliberation;
  throw ConfigError("kind: unknown model kind '" + s + "'");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::AudioOnly: return "audio-only";
    case ModelKind::Vat: return "vat";
    case ModelKind::MultiStream: return "multistream";
    case ModelKind::Deliberation: return "deliberation";
  }
  return "?";
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(vocab, "vocab");
  positive(hidden, "hidden");
  positive(d_model, "d_model");
  positive(embed_dim, "embed_dim");
  if (vocab <= kUnkToken) throw ConfigError("vocab must include the special tokens");
  if (kind == ModelKind::Deliberation) {
    positive(first_pass_audio_dim, "first_pass_audio_dim");
    positive(first_pass_embed_dim, "first_pass_embed_dim");
    positive(hyp_layers, "hyp_layers");
    positive(n_hyps, "n_hyps");
  } else {
    positive(d_audio, "d_audio");
    positive(audio_layers, "audio_layers");
    if (vg) throw ConfigError("vg requires the deliberation model");
  }
  if (uses_video()) {
    positive(d_visual, "d_visual");
    positive(video_layers, "video_layers");
  }
  if (kind == ModelKind::Vat) positive(d_visual, "d_visual");
  if (vg) positive(d_visual, "d_visual");
}

bool ModelConfig::uses_video() const {
  return kind == ModelKind::MultiStream || (kind == ModelKind::Deliberation && visual_stream);
}

int ModelConfig::n_streams() const {
  switch (kind) {
    case ModelKind::AudioOnly:
    case ModelKind::Vat: return 1;
    case ModelKind::MultiStream: return 2;
    case ModelKind::Deliberation: return visual_stream ? 3 : 2;
  }
  return 1;
}

std::string ModelConfig::to_text() const {
  KeyValueConfig kv;
  kv.set("kind", to_string(kind));
  kv.set("fusion", to_string(fusion));
  kv.set("vocab", std::to_string(vocab));
  kv.set("d_audio", std::to_string(d_audio));
  kv.set("d_visual", std::to_string(d_visual));
  kv.set("hidden", std::to_string(hidden));
  kv.set("d_model", std::to_string(d_model));
  kv.set("embed_dim", std::to_string(embed_dim));
  kv.set("audio_layers", std::to_string(audio_layers));
  kv.set("video_layers", std::to_string(video_layers));
  kv.set("hyp_layers", std::to_string(hyp_layers));
  kv.set("att_dim", std::to_string(attention.dim));
  kv.set("att_filters", std::to_string(attention.filters));
  kv.set("att_kernel", std::to_string(attention.kernel));
  kv.set("visual_stream", visual_stream ? "true" : "false");
  kv.set("vg", vg ? "true" : "false");
  kv.set("n_hyps", std::to_string(n_hyps));
  kv.set("first_pass_audio_dim", std::to_string(first_pass_audio_dim));
  kv.set("first_pass_embed_dim", std::to_string(first_pass_embed_dim));
  if (!first_pass_hash.empty()) kv.set("first_pass_hash", first_pass_hash);
  return kv.to_string();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  const auto kv = KeyValueConfig::parse(text);
  ModelConfig c;
  c.kind = parse_model_kind(kv.get("kind", "audio-only"));
  c.fusion = parse_fusion_mode(kv.get("fusion", "cat"));
  c.vocab = static_cast<int>(kv.get_int("vocab", 0));
  c.d_audio = static_cast<int>(kv.get_int("d_audio", 0));
  c.d_visual = static_cast<int>(kv.get_int("d_visual", 0));
  c.hidden = static_cast<int>(kv.get_int("hidden", c.hidden));
  c.d_model = static_cast<int>(kv.get_int("d_model", c.d_model));
  c.embed_dim = static_cast<int>(kv.get_int("embed_dim", c.embed_dim));
  c.audio_layers = static_cast<int>(kv.get_int("audio_layers", c.audio_layers));
  c.video_layers = static_cast<int>(kv.get_int("video_layers", c.video_layers));
  c.hyp_layers = static_cast<int>(kv.get_int("hyp_layers", c.hyp_layers));
  c.attention.dim = static_cast<int>(kv.get_int("att_dim", c.attention.dim));
  c.attention.filters = static_cast<int>(kv.get_int("att_filters", c.attention.filters));
  c.attention.kernel = static_cast<int>(kv.get_int("att_kernel", c.attention.kernel));
  c.visual_stream = kv.get_bool("visual_stream", c.visual_stream);
  c.vg = kv.get_bool("vg", c.vg);
  c.n_hyps = static_cast<int>(kv.get_int("n_hyps", c.n_hyps));
  c.first_pass_audio_dim = static_cast<int>(kv.get_int("first_pass_audio_dim", 0));
  c.first_pass_embed_dim = static_cast<int>(kv.get_int("first_pass_embed_dim", 0));
  c.first_pass_hash = kv.get("first_pass_hash", "");
  c.validate();
  return c;
}

Matrix pack_time_major(std::span<const Matrix* const> seqs, int& T, std::vector<int>& lengths) {
  if (seqs.empty()) throw InputError("empty batch");
  const auto B = static_cast<int>(seqs.size());
  const auto D = seqs[0]->cols();
  T = 0;
  lengths.assign(B, 0);
  for (int b = 0; b < B; ++b) {
    if (seqs[b]->cols() != D) throw ShapeError("batch elements differ in feature width");
    if (seqs[b]->rows() == 0) throw InputError("empty sequence in batch");
    lengths[b] = static_cast<int>(seqs[b]->rows());
    T = std::max(T, lengths[b]);
  }
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(T) * B, D);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < lengths[b]; ++t) x.row(static_cast<Eigen::Index>(t) * B + b) = seqs[b]->row(t);
  }
  return x;
}

TeacherTokens make_teacher_tokens(std::span<const ModelInput> batch) {
  TeacherTokens tt;
  const auto B = static_cast<int>(batch.size());
  int max_len = 0;
  for (const auto& in : batch) max_len = std::max(max_len, static_cast<int>(in.targets.size()));
  tt.U = max_len + 1;
  const auto n = static_cast<std::size_t>(tt.U) * B;
  tt.inputs.assign(n, kPadToken);
  tt.outputs.assign(n, kPadToken);
  tt.mask.assign(n, 0);
  for (int b = 0; b < B; ++b) {
    const auto& y = batch[b].targets;
    const int len = static_cast<int>(y.size());
    for (int t = 0; t <= len; ++t) {
      const auto i = static_cast<std::size_t>(t) * B + b;
      tt.inputs[i] = t == 0 ? kSosToken : y[t - 1];
      tt.outputs[i] = t < len ? y[t] : kEosToken;
      tt.mask[i] = 1;
    }
  }
  return tt;
}

namespace {

// (T*B) time-major <-> batch-major (row b*T + t).
Matrix time_to_batch(const Matrix& x, int T, int B) {
  Matrix y(x.rows(), x.cols());
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      y.row(static_cast<Eigen::Index>(b) * T + t) = x.row(static_cast<Eigen::Index>(t) * B + b);
    }
  }
  return y;
}

Matrix batch_to_time(const Matrix& y, int T, int B) {
  Matrix x(y.rows(), y.cols());
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      x.row(static_cast<Eigen::Index>(t) * B + b) = y.row(static_cast<Eigen::Index>(b) * T + t);
    }
  }
  return x;
}

std::vector<std::uint8_t> length_mask(int T, std::span<const int> lengths) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(T) * lengths.size(), 0);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    for (int t = 0; t < lengths[b]; ++t) m[b * T + t] = 1;
  }
  return m;
}

// Word part of a hypothesis: tokens up to the first EOS.
std::vector<int> hypothesis_words(const Hypothesis& h) {
  std::vector<int> w;
  for (int tok : h.tokens) {
    if (tok == kEosToken) break;
    w.push_back(tok);
  }
  return w;
}

}  // namespace

enum class StreamKind { Audio, FrozenAudio, Video, Hyps };

struct Model::StreamCache {
  StreamKind kind = StreamKind::Audio;
  int T = 0, B = 0;
  std::vector<int> lengths;
  EncoderStack::Cache enc;
  Matrix proj_in;  // time-major input of the stream projection
  std::vector<RowVector> vat_vectors;
};

struct Model::ForwardCache {
  std::vector<StreamCache> streams;
  AttentionDecoder::TeacherCache dec;
};

Model::Model(const ModelConfig& config, std::uint64_t seed, std::shared_ptr<const Model> first_pass)
    : config_(config), first_pass_(std::move(first_pass)) {
  config_.validate();
  Rng rng = make_rng(seed, "init");
  const int h2 = 2 * config_.hidden;
  if (config_.kind == ModelKind::Deliberation) {
    if (!first_pass_) throw ConfigError("deliberation requires a first-pass model");
    const auto& fp = first_pass_->config();
    if (fp.kind == ModelKind::Deliberation) throw ConfigError("first pass cannot be a deliberation model");
    if (fp.vocab != config_.vocab) throw ConfigError("vocab: first pass vocabulary differs");
    if (2 * fp.hidden != config_.first_pass_audio_dim || fp.embed_dim != config_.first_pass_embed_dim) {
      throw ConfigError("first_pass_audio_dim/first_pass_embed_dim do not match the first pass");
    }
    const std::string hash = hex64(first_pass_->checkpoint().hash());
    if (config_.first_pass_hash.empty()) {
      config_.first_pass_hash = hash;
    } else if (config_.first_pass_hash != hash) {
      throw ConfigError("first_pass_hash: supplied first pass is not the one this model was trained on");
    }
    audio_proj_.emplace(store_, "audio_proj", config_.first_pass_audio_dim, config_.d_model, rng);
  } else {
    if (first_pass_) throw ConfigError("only deliberation models take a first pass");
    audio_enc_.emplace(store_, "audio_enc", config_.audio_layers, config_.d_audio, config_.hidden, rng);
    audio_proj_.emplace(store_, "audio_proj", h2, config_.d_model, rng);
  }
  if (config_.uses_video()) {
    video_enc_.emplace(store_, "video_enc", config_.video_layers, config_.d_visual, config_.hidden, rng);
    video_proj_.emplace(store_, "video_proj", h2, config_.d_model, rng);
  }
  if (config_.kind == ModelKind::Deliberation) {
    const int width = config_.first_pass_embed_dim + (config_.vg ? config_.d_visual : 0);
    hyp_enc_.emplace(store_, "hyp_enc", config_.hyp_layers, width, config_.hidden, rng);
    hyp_proj_.emplace(store_, "hyp_proj", h2, config_.d_model, rng);
  }
  if (config_.kind == ModelKind::Vat) vat_.emplace(store_, "vat.proj", config_.d_visual, config_.d_audio, rng);
  decoder_ = AttentionDecoder(store_, "dec", config_.vocab, config_.embed_dim, config_.d_model,
                              config_.n_streams(), config_.fusion, config_.attention, rng);
  for (auto* p : store_.all()) quantize_f32(p->value);
}

Model Model::from_checkpoint(const Checkpoint& ckpt, std::shared_ptr<const Model> first_pass) {
  Model m(ModelConfig::from_text(ckpt.config), 0, std::move(first_pass));
  restore(m.store_, ckpt);
  return m;
}

void Model::set_grounding(std::shared_ptr<const JointEmbedding> joint,
                          std::vector<std::string> token_words) {
  if (joint && config_.vg && joint->d_visual() != config_.d_visual) {
    throw ShapeError("vg: joint embedding width does not match d_visual");
  }
  joint_ = std::move(joint);
  token_words_ = std::move(token_words);
}

Checkpoint Model::checkpoint() const { return snapshot(store_, config_.to_text()); }

int Model::load_matching(const Checkpoint& ckpt) {
  int n = 0;
  for (auto* p : store_.all()) {
    const Matrix* t = ckpt.tensor(p->name);
    if (t && t->rows() == p->value.rows() && t->cols() == p->value.cols()) {
      p->value = *t;
      ++n;
    }
  }
  return n;
}

Matrix Model::visual_vector(const ModelInput& in) const {
  if (!in.visual || in.visual->rows() == 0) throw InputError("vat: missing visual features");
  return in.visual->colwise().mean();
}

Matrix Model::encode_audio_raw(std::span<const ModelInput> batch, int& T,
                               std::vector<int>& lengths) const {
  if (!audio_enc_) throw ConfigError("model has no audio encoder");
  std::vector<Matrix> adapted;
  std::vector<const Matrix*> seqs;
  if (vat_) {
    adapted.reserve(batch.size());
    for (const auto& in : batch) adapted.push_back(vat_->adapt(*in.audio, visual_vector(in)));
    for (const auto& a : adapted) seqs.push_back(&a);
  } else {
    for (const auto& in : batch) {
      if (!in.audio) throw InputError("missing audio features");
      seqs.push_back(in.audio);
    }
  }
  const Matrix x = pack_time_major(seqs, T, lengths);
  return audio_enc_->forward(x, T, static_cast<int>(batch.size()), lengths, nullptr);
}

Matrix Model::encode_audio_raw(const ModelInput& input) const {
  int T = 0;
  std::vector<int> lengths;
  return encode_audio_raw(std::span<const ModelInput>(&input, 1), T, lengths);
}

Model::HypothesisBatch Model::hypothesis_batch(std::span<const ModelInput> batch) const {
  if (config_.kind != ModelKind::Deliberation) throw ConfigError("hypotheses need a deliberation model");
  const int N = config_.n_hyps;
  HypothesisBatch hb;
  hb.N = N;
  hb.B = static_cast<int>(batch.size());
  const int S = hb.B * N;
  std::vector<std::vector<int>> words(S);
  for (int b = 0; b < hb.B; ++b) {
    const NBestList* nb = batch[b].nbest;
    if (!nb || nb->hyps.empty()) throw InputError("deliberation input without N-best hypotheses");
    for (int n = 0; n < N; ++n) {
      const auto& h = nb->hyps[std::min<std::size_t>(n, nb->hyps.size() - 1)];
      words[b * N + n] = hypothesis_words(h);
    }
  }
  hb.lengths.resize(S);
  hb.L = 0;
  for (int s = 0; s < S; ++s) {
    hb.lengths[s] = static_cast<int>(words[s].size()) + 1;
    hb.L = std::max(hb.L, hb.lengths[s]);
  }
  const Matrix& table = first_pass_->decoder().embedding->value;
  const int E = config_.first_pass_embed_dim;
  const int width = E + (config_.vg ? config_.d_visual : 0);
  hb.inputs = Matrix::Zero(static_cast<Eigen::Index>(hb.L) * S, width);
  hb.tokens.assign(static_cast<std::size_t>(hb.L) * S, kEosToken);
  for (int s = 0; s < S; ++s) {
    const auto& w = words[s];
    Matrix ctx;
    if (config_.vg && !w.empty()) {
      if (!joint_) throw ConfigError("vg: grounding not attached");
      const ModelInput& in = batch[s / N];
      if (!in.visual) throw InputError("vg: missing visual features");
      std::vector<std::string> text;
      for (int tok : w) {
        text.push_back(tok >= 0 && tok < static_cast<int>(token_words_.size()) ? token_words_[tok] : "");
      }
      ctx = vg_context(*joint_, text, *in.visual).context;
      if (ctx.cols() != config_.d_visual) throw ShapeError("vg: context width mismatch");
    }
    for (int l = 0; l < hb.L; ++l) {
      const auto row = static_cast<Eigen::Index>(l) * S + s;
      const int tok = l < static_cast<int>(w.size()) ? w[l] : kEosToken;
      if (tok < 0 || tok >= table.rows()) throw InputError("hypothesis token out of range");
      hb.tokens[row] = tok;
      hb.inputs.row(row).head(E) = table.row(tok);
      if (ctx.size() > 0 && l < static_cast<int>(w.size())) hb.inputs.row(row).tail(config_.d_visual) = ctx.row(l);
    }
  }
  return hb;
}

EncodedStreams Model::encode_batch(std::span<const ModelInput> batch, ForwardCache* cache) const {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw InputError("empty batch");
  std::vector<StreamBatch> streams;
  auto finish = [&](StreamCache&& sc, const Linear& proj, const Matrix& enc_out, int T,
                    std::vector<std::uint8_t> mask) {
    StreamBatch sb;
    sb.B = sc.B;
    sb.T = T;
    sb.values = time_to_batch(proj.forward(enc_out), T, sc.B);
    sb.mask = std::move(mask);
    streams.push_back(std::move(sb));
    if (cache) {
      sc.proj_in = enc_out;
      cache->streams.push_back(std::move(sc));
    }
  };

  // Audio.
  {
    StreamCache sc;
    sc.B = B;
    Matrix enc_out;
    if (config_.kind == ModelKind::Deliberation) {
      sc.kind = StreamKind::FrozenAudio;
      std::vector<Matrix> computed;
      std::vector<const Matrix*> seqs;
      bool all_cached = true;
      for (const auto& in : batch) all_cached = all_cached && in.frozen_audio;
      if (all_cached) {
        for (const auto& in : batch) seqs.push_back(in.frozen_audio);
        enc_out = pack_time_major(seqs, sc.T, sc.lengths);
      } else {
        enc_out = first_pass_->encode_audio_raw(batch, sc.T, sc.lengths);
      }
      if (enc_out.cols() != config_.first_pass_audio_dim) throw ShapeError("frozen audio width mismatch");
    } else {
      sc.kind = StreamKind::Audio;
      std::vector<Matrix> adapted;
      std::vector<const Matrix*> seqs;
      for (const auto& in : batch) {
        if (!in.audio) throw InputError("missing audio features");
        if (in.audio->cols() != config_.d_audio) throw ShapeError("audio width does not match d_audio");
      }
      if (vat_) {
        for (const auto& in : batch) {
          sc.vat_vectors.push_back(visual_vector(in));
          adapted.push_back(vat_->adapt(*in.audio, sc.vat_vectors.back()));
        }
        for (const auto& a : adapted) seqs.push_back(&a);
      } else {
        for (const auto& in : batch) seqs.push_back(in.audio);
      }
      const Matrix x = pack_time_major(seqs, sc.T, sc.lengths);
      enc_out = audio_enc_->forward(x, sc.T, B, sc.lengths, cache ? &sc.enc : nullptr);
    }
    const int T = sc.T;
    auto mask = length_mask(T, sc.lengths);
    finish(std::move(sc), *audio_proj_, enc_out, T, std::move(mask));
  }

  // Video.
  if (video_enc_) {
    StreamCache sc;
    sc.kind = StreamKind::Video;
    sc.B = B;
    std::vector<const Matrix*> seqs;
    for (const auto& in : batch) {
      if (!in.visual) throw ConfigError("model needs a video stream but the input has none");
      if (in.visual->cols() != config_.d_visual) throw ShapeError("visual width does not match d_visual");
      seqs.push_back(in.visual);
    }
    const Matrix x = pack_time_major(seqs, sc.T, sc.lengths);
    const Matrix enc_out = video_enc_->forward(x, sc.T, B, sc.lengths, cache ? &sc.enc : nullptr);
    const int T = sc.T;
    auto mask = length_mask(T, sc.lengths);
    finish(std::move(sc), *video_proj_, enc_out, T, std::move(mask));
  }

  // Hypotheses: each encoded on its own, then concatenated along time.
  if (hyp_enc_) {
    const HypothesisBatch hb = hypothesis_batch(batch);
    const int S = hb.B * hb.N;
    StreamCache sc;
    sc.kind = StreamKind::Hyps;
    sc.B = S;
    sc.T = hb.L;
    sc.lengths = hb.lengths;
    const Matrix enc_out = hyp_enc_->forward(hb.inputs, hb.L, S, hb.lengths, cache ? &sc.enc : nullptr);
    // Sequence-major over (b, n, l) is exactly batch-major with T = N * L.
    auto mask = length_mask(hb.L, hb.lengths);
    StreamBatch sb;
    sb.B = B;
    sb.T = hb.N * hb.L;
    sb.values = time_to_batch(hyp_proj_->forward(enc_out), hb.L, S);
    sb.mask = std::move(mask);
    streams.push_back(std::move(sb));
    if (cache) {
      sc.proj_in = enc_out;
      cache->streams.push_back(std::move(sc));
    }
  }
  return decoder_.prepare(std::move(streams));
}

void Model::backward_streams(std::span<const ModelInput> batch, ForwardCache& cache,
                             const std::vector<Matrix>& dvalues) {
  for (std::size_t k = 0; k < cache.streams.size(); ++k) {
    auto& sc = cache.streams[k];
    const Matrix dproj = batch_to_time(dvalues[k], sc.T, sc.B);
    Linear* proj = nullptr;
    EncoderStack* enc = nullptr;
    switch (sc.kind) {
      case StreamKind::Audio: proj = &*audio_proj_; enc = &*audio_enc_; break;
      case StreamKind::FrozenAudio: proj = &*audio_proj_; break;
      case StreamKind::Video: proj = &*video_proj_; enc = &*video_enc_; break;
      case StreamKind::Hyps: proj = &*hyp_proj_; enc = &*hyp_enc_; break;
    }
    const Matrix denc = proj->backward(sc.proj_in, dproj);
    if (!enc) continue;
    const Matrix dx = enc->backward(sc.enc, denc);
    if (sc.kind == StreamKind::Audio && vat_) {
      for (int b = 0; b < sc.B; ++b) {
        Matrix da(sc.lengths[b], dx.cols());
        for (int t = 0; t < sc.lengths[b]; ++t) da.row(t) = dx.row(static_cast<Eigen::Index>(t) * sc.B + b);
        vat_->backward(sc.vat_vectors[b], da);
      }
    }
  }
  (void)batch;
}

double Model::loss(std::span<const ModelInput> batch, double label_smoothing, bool compute_grad) {
  const TeacherTokens tt = make_teacher_tokens(batch);
  ForwardCache cache;
  const EncodedStreams enc = encode_batch(batch, compute_grad ? &cache : nullptr);
  const Matrix logits = decoder_.teacher_forced(enc, tt.U, tt.inputs, compute_grad ? &cache.dec : nullptr);
  const LossResult res = label_smoothed_loss(logits, tt.outputs, tt.mask, label_smoothing);
  if (compute_grad) {
    store_.zero_grad();
    const auto dvalues = decoder_.backward(enc, cache.dec, res.dlogits);
    backward_streams(batch, cache, dvalues);
  }
  return res.loss;
}

Model::TeacherOutput Model::teacher_forced(std::span<const ModelInput> batch) const {
  const TeacherTokens tt = make_teacher_tokens(batch);
  const EncodedStreams enc = encode_batch(batch, nullptr);
  AttentionDecoder::TeacherCache tc;
  TeacherOutput out;
  out.U = tt.U;
  out.logits = decoder_.teacher_forced(enc, tt.U, tt.inputs, &tc);
  for (int t = 0; t < tt.U; ++t) out.weights.push_back(AttentionDecoder::weights_at(tc, t));
  return out;
}

EncodedStreams Model::encode(const ModelInput& input) const {
  return encode_batch(std::span<const ModelInput>(&input, 1), nullptr);
}

NBestList Model::decode(const ModelInput& input, const BeamConfig& beam) const {
  return beam_search(decoder_, encode(input), beam);
}

std::vector<NBestList> Model::decode_batch(std::span<const ModelInput> batch,
                                          const BeamConfig& beam) const {
  if (batch.empty()) return {};
  return beam_search_batch(decoder_, encode_batch(batch, nullptr), beam);
}

Hypothesis Model::greedy(const ModelInput& input, int max_len) const {
  return greedy_decode(decoder_, encode(input), max_len);
}

}  // namespace vcasr
