#include "vcasr/experiment.hpp"

#include "vcasr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace vcasr {

EvalResult evaluate_lists(const std::vector<Utterance>& utts, const std::vector<NBestList>& lists,
                          const Lexicon& lexicon) {
  if (utts.size() != lists.size()) throw ShapeError("decoded lists do not match the utterances");
  std::vector<Words> refs, hyps;
  std::vector<std::vector<Words>> nbests;
  std::vector<std::vector<int>> masked;
  long long n_masked = 0;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    if (lists[i].hyps.empty()) throw InputError("empty N-best list for " + utts[i].id);
    refs.push_back(utts[i].words);
    hyps.push_back(hypothesis_word_strings(lists[i].hyps[0], lexicon));
    std::vector<Words> nb;
    for (const auto& h : lists[i].hyps) nb.push_back(hypothesis_word_strings(h, lexicon));
    nbests.push_back(std::move(nb));
    std::vector<int> m;
    for (const auto& s : utts[i].mask_spans) m.push_back(s.word_index);
    n_masked += static_cast<long long>(m.size());
    masked.push_back(std::move(m));
  }
  EvalResult r;
  const auto w = wer(refs, hyps);
  r.wer = w.wer;
  r.subs = w.subs;
  r.dels = w.dels;
  r.ins = w.ins;
  r.n_ref = w.n_ref;
  r.oracle_wer = oracle_wer(refs, nbests);
  r.masked = n_masked;
  if (n_masked > 0) {
    r.rr = recovery_rate(refs, hyps, masked).rate;
    r.rr_nbest = recovery_rate_nbest(refs, nbests, masked).rate;
  }
  return r;
}

const std::vector<RowSpec>& grid_rows() {
  using K = ModelKind;
  using F = FusionMode;
  static const std::vector<RowSpec> rows = {
      {"A1", "clean", K::AudioOnly, F::Cat, "", true, false},
      {"VAT", "clean", K::Vat, F::Cat, "A1", true, false},
      {"AV1", "clean", K::MultiStream, F::Gate, "", true, false},
      {"AV1_Cat", "clean", K::MultiStream, F::Cat, "", true, false},
      {"DB", "clean", K::Deliberation, F::Cat, "A1", false, false},
      {"D1", "clean", K::Deliberation, F::Cat, "A1", true, false},
      {"D2", "clean", K::Deliberation, F::Cat, "A1", true, true},
      {"D3", "clean", K::Deliberation, F::Gate, "A1", true, false},
      {"D4", "clean", K::Deliberation, F::Gate, "A1", true, true},
      {"D5", "clean", K::Deliberation, F::Cat, "AV1", true, false},
      {"D6", "clean", K::Deliberation, F::Cat, "AV1", true, true},
      {"A2_M", "masked", K::AudioOnly, F::Cat, "", true, false},
      {"AV2_M", "masked", K::MultiStream, F::Gate, "", true, false},
      {"AV2_M_Cat", "masked", K::MultiStream, F::Cat, "", true, false},
      {"D1_M", "masked", K::Deliberation, F::Cat, "A2_M", true, false},
      {"D3_M", "masked", K::Deliberation, F::Gate, "A2_M", true, false},
      {"D4_M", "masked", K::Deliberation, F::Gate, "A2_M", true, true},
      {"D6_M", "masked", K::Deliberation, F::Gate, "AV2_M", true, true},
  };
  return rows;
}

const RowSpec& grid_row(const std::string& id) {
  for (const auto& r : grid_rows()) {
    if (r.id == id) return r;
  }
  throw ConfigError("rows: unknown row id '" + id + "'");
}

namespace {

bool row_sees_video(const RowSpec& r) {
  switch (r.kind) {
    case ModelKind::AudioOnly: return false;
    case ModelKind::Deliberation: return r.visual_stream || r.vg;
    default: return true;
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Keys under `prefix.` with the prefix removed.
KeyValueConfig section(const KeyValueConfig& kv, const std::string& prefix) {
  KeyValueConfig out;
  for (const auto& [k, v] : kv.values()) {
    if (k.rfind(prefix + ".", 0) == 0) out.set(k.substr(prefix.size() + 1), v);
  }
  return out;
}

void reject_unused(const KeyValueConfig& kv, const std::string& prefix) {
  const auto unused = kv.unused_keys();
  if (!unused.empty()) throw ConfigError("unknown config key '" + prefix + unused.front() + "'");
}

void merge(KeyValueConfig& into, const KeyValueConfig& from, const std::string& prefix) {
  for (const auto& [k, v] : from.values()) into.set(prefix + "." + k, v);
}

}  // namespace

GridConfig::GridConfig() {
  beam = BeamConfig{10, 10, 2 * synth.sentence_len_max + 10};
  mask_threshold = kMaskThreshold;
}

void GridConfig::validate() const {
  synth.validate();
  train.validate();
  delib_train.validate();
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  if (beam.beam < 1 || beam.n_best < 1 || beam.n_best > beam.beam || beam.max_len < 1) {
    throw ConfigError("beam: need 1 <= n_best <= beam and max_len >= 1");
  }
  if (nbest_beam < 1) throw ConfigError("nbest_beam must be >= 1");
  if (sizes.n_hyps < 1) throw ConfigError("model.n_hyps must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  for (const auto& r : rows) grid_row(r);
}

std::vector<std::string> GridConfig::resolved_rows() const {
  std::set<std::string> want(rows.begin(), rows.end());
  if (rows.empty()) {
    for (const auto& r : grid_rows()) want.insert(r.id);
  }
  for (const auto& r : grid_rows()) {
    if (want.count(r.id) && !r.first_pass.empty()) want.insert(r.first_pass);
  }
  std::vector<std::string> out;
  for (const auto& r : grid_rows()) {
    if (want.count(r.id)) out.push_back(r.id);
  }
  return out;
}

GridConfig GridConfig::from_kv(const KeyValueConfig& kv) {
  GridConfig g;
  const auto synth_kv = section(kv, "synth");
  g.synth = SynthConfig::from_kv(synth_kv);
  reject_unused(synth_kv, "synth.");
  const auto train_kv = section(kv, "train");
  g.train = TrainConfig::from_kv(train_kv);
  reject_unused(train_kv, "train.");
  g.delib_train = g.train;
  const auto delib_kv = section(kv, "delib");
  KeyValueConfig delib_merged = g.train.to_kv();
  for (const auto& [k, v] : delib_kv.values()) delib_merged.set(k, v);
  g.delib_train = TrainConfig::from_kv(delib_merged);
  for (const auto& [k, v] : delib_kv.values()) {
    if (!g.train.to_kv().has(k)) throw ConfigError("unknown config key 'delib." + k + "'");
  }

  const auto m = section(kv, "model");
  ModelConfig& s = g.sizes;
  s.hidden = static_cast<int>(m.get_int("hidden", s.hidden));
  s.d_model = static_cast<int>(m.get_int("d_model", s.d_model));
  s.embed_dim = static_cast<int>(m.get_int("embed_dim", s.embed_dim));
  s.audio_layers = static_cast<int>(m.get_int("audio_layers", s.audio_layers));
  s.video_layers = static_cast<int>(m.get_int("video_layers", s.video_layers));
  s.hyp_layers = static_cast<int>(m.get_int("hyp_layers", s.hyp_layers));
  s.attention.dim = static_cast<int>(m.get_int("att_dim", s.attention.dim));
  s.attention.filters = static_cast<int>(m.get_int("att_filters", s.attention.filters));
  s.attention.kernel = static_cast<int>(m.get_int("att_kernel", s.attention.kernel));
  s.n_hyps = static_cast<int>(m.get_int("n_hyps", s.n_hyps));
  reject_unused(m, "model.");

  KeyValueConfig top;
  for (const auto& [k, v] : kv.values()) {
    if (k.find('.') == std::string::npos) top.set(k, v);
  }
  std::vector<std::uint64_t> seeds;
  for (long long x : top.get_int_list("seeds", {1, 2, 3})) {
    if (x < 0) throw ConfigError("seeds: negative seed");
    seeds.push_back(static_cast<std::uint64_t>(x));
  }
  g.seeds = seeds;
  g.rows = split_list(top.get("rows", ""));
  g.beam.beam = static_cast<int>(top.get_int("beam", g.beam.beam));
  g.beam.n_best = static_cast<int>(top.get_int("n_best", g.beam.n_best));
  g.beam.max_len = static_cast<int>(top.get_int("max_len", 2 * g.synth.sentence_len_max + 10));
  g.nbest_beam = static_cast<int>(top.get_int("nbest_beam", g.nbest_beam));
  g.mask_threshold = top.get_double("mask_threshold", g.mask_threshold);
  g.threads = static_cast<int>(top.get_int("threads", env_threads()));
  reject_unused(top, "");
  for (const auto& [k, v] : kv.values()) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) continue;
    const auto p = k.substr(0, dot);
    if (p != "synth" && p != "train" && p != "delib" && p != "model") {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  g.validate();
  return g;
}

KeyValueConfig GridConfig::to_kv() const {
  KeyValueConfig kv;
  merge(kv, synth.to_kv(), "synth");
  merge(kv, train.to_kv(), "train");
  merge(kv, delib_train.to_kv(), "delib");
  kv.set("model.hidden", std::to_string(sizes.hidden));
  kv.set("model.d_model", std::to_string(sizes.d_model));
  kv.set("model.embed_dim", std::to_string(sizes.embed_dim));
  kv.set("model.audio_layers", std::to_string(sizes.audio_layers));
  kv.set("model.video_layers", std::to_string(sizes.video_layers));
  kv.set("model.hyp_layers", std::to_string(sizes.hyp_layers));
  kv.set("model.att_dim", std::to_string(sizes.attention.dim));
  kv.set("model.att_filters", std::to_string(sizes.attention.filters));
  kv.set("model.att_kernel", std::to_string(sizes.attention.kernel));
  kv.set("model.n_hyps", std::to_string(sizes.n_hyps));
  std::string s;
  for (auto x : seeds) s += (s.empty() ? "" : ",") + std::to_string(x);
  kv.set("seeds", s);
  std::string r;
  for (const auto& x : rows) r += (r.empty() ? "" : ",") + x;
  kv.set("rows", r);
  kv.set("beam", std::to_string(beam.beam));
  kv.set("n_best", std::to_string(beam.n_best));
  kv.set("max_len", std::to_string(beam.max_len));
  kv.set("nbest_beam", std::to_string(nbest_beam));
  std::ostringstream t;
  t << std::setprecision(17) << mask_threshold;
  kv.set("mask_threshold", t.str());
  kv.set("threads", std::to_string(threads));
  return kv;
}

const RowResult* SeedResult::find(const std::string& id) const {
  for (const auto& r : rows) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

ModelConfig grid_model_config(const GridConfig& g, const Corpus& c, ModelKind kind, FusionMode fusion) {
  ModelConfig mc = corpus_model_config(c, kind, fusion);
  mc.hidden = g.sizes.hidden;
  mc.d_model = g.sizes.d_model;
  mc.embed_dim = g.sizes.embed_dim;
  mc.audio_layers = g.sizes.audio_layers;
  mc.video_layers = g.sizes.video_layers;
  mc.hyp_layers = g.sizes.hyp_layers;
  mc.attention = g.sizes.attention;
  mc.n_hyps = g.sizes.n_hyps;
  return mc;
}

ModelConfig grid_deliberation_config(const GridConfig& g, const Corpus& c, const Model& first_pass,
                                     FusionMode fusion, bool vg, bool visual_stream) {
  ModelConfig mc = deliberation_config(c, first_pass, fusion, vg, visual_stream);
  mc.video_layers = g.sizes.video_layers;
  mc.hyp_layers = g.sizes.hyp_layers;
  mc.attention = g.sizes.attention;
  mc.n_hyps = g.sizes.n_hyps;
  return mc;
}

int env_threads() {
  if (const char* s = std::getenv("VCASR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct SeedState {
  std::uint64_t seed = 0;
  Corpus clean, masked;
  std::map<std::string, std::shared_ptr<const Model>> models;
  std::map<std::string, Checkpoint> checkpoints;
  std::map<std::string, NBestStore> stores;
};

struct Task {
  std::size_t seed_index = 0;
  std::string row;
  enum { Pending, Running, Done, Failed } state = Pending;
};

void write_lists(const std::filesystem::path& path, const std::vector<Utterance>& utts,
                 const std::vector<NBestList>& lists, const Lexicon& lex) {
  write_text(path, nbest_jsonl(utts, lists, lex));
}

}  // namespace

std::vector<SeedResult> run_grid(const GridConfig& config, const ProgressFn& progress,
                                 const std::filesystem::path* out_dir) {
  config.validate();
  const auto rows = config.resolved_rows();
  std::set<std::string> needs_store;
  for (const auto& id : rows) {
    const auto& r = grid_row(id);
    if (r.kind == ModelKind::Deliberation) needs_store.insert(r.first_pass);
  }

  std::vector<SeedState> states(config.seeds.size());
  std::vector<SeedResult> results(config.seeds.size());
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    states[s].seed = config.seeds[s];
    results[s].seed = config.seeds[s];
    for (const auto& id : rows) {
      tasks.push_back({s, id});
      RowResult rr;
      rr.id = id;
      results[s].rows.push_back(rr);
    }
  }

  std::mutex mu;
  std::condition_variable cv;
  auto log = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard<std::mutex> lock(mu);
    progress(msg);
  };

  // Corpora are shared by every row of a seed and built before any training.
  for (auto& st : states) {
    SynthConfig sc = config.synth;
    sc.seed = st.seed;
    st.clean = generate_corpus(sc);
    st.masked = mask_corpus(st.clean, config.mask_threshold, st.seed);
    if (out_dir) {
      const auto dir = *out_dir / ("seed" + std::to_string(st.seed));
      std::filesystem::create_directories(dir);
      CorpusInfo info;
      write_corpus(dir / "corpus_clean", st.clean, info, true);
      info.condition = "masked";
      info.mask_threshold = config.mask_threshold;
      info.mask_seed = st.seed;
      write_corpus(dir / "corpus_masked", st.masked, info, true);
    }
  }

  auto result_of = [&](const Task& t) -> RowResult& {
    for (auto& r : results[t.seed_index].rows) {
      if (r.id == t.row) return r;
    }
    throw Error("internal: missing row result");
  };

  auto run_task = [&](const Task& t) {
    SeedState& st = states[t.seed_index];
    const RowSpec& spec = grid_row(t.row);
    const Corpus& corpus = spec.condition == "masked" ? st.masked : st.clean;
    RowResult& out = result_of(t);
    const std::string tag = "seed " + std::to_string(st.seed) + " " + spec.id;
    auto row_progress = [&](const std::string& m) { log(tag + ": " + m); };

    TrainConfig tc = spec.kind == ModelKind::Deliberation ? config.delib_train : config.train;
    tc.seed = st.seed;
    std::shared_ptr<const Model> first_pass;
    if (!spec.first_pass.empty()) {
      std::lock_guard<std::mutex> lock(mu);
      first_pass = st.models.at(spec.first_pass);
    }
    const NBestStore* store = nullptr;
    if (spec.kind == ModelKind::Deliberation) {
      std::lock_guard<std::mutex> lock(mu);
      store = &st.stores.at(spec.first_pass);
    }

    TrainResult tr;
    switch (spec.kind) {
      case ModelKind::AudioOnly:
        tr = train_audio_only(corpus, grid_model_config(config, corpus, spec.kind, spec.fusion), tc, row_progress);
        break;
      case ModelKind::Vat: {
        Checkpoint init;
        {
          std::lock_guard<std::mutex> lock(mu);
          init = st.checkpoints.at(spec.first_pass);
        }
        tr = train_vat(corpus, init, tc, row_progress);
        break;
      }
      case ModelKind::MultiStream:
        tr = train_multistream(corpus, grid_model_config(config, corpus, spec.kind, spec.fusion), tc, row_progress);
        break;
      case ModelKind::Deliberation: {
        const ModelConfig mc =
            grid_deliberation_config(config, corpus, *first_pass, spec.fusion, spec.vg, spec.visual_stream);
        tr = train_deliberation(first_pass, corpus, *store, mc, tc, row_progress);
        break;
      }
    }
    auto model = std::make_shared<Model>(Model::from_checkpoint(tr.best, first_pass));
    attach_grounding(*model, corpus);

    DecodeOptions opt;
    opt.beam = config.beam;
    const auto lists = decode_corpus(*model, corpus.test, opt, store);
    out.test = evaluate_lists(corpus.test, lists, corpus.lexicon);
    std::vector<NBestList> mis;
    if (row_sees_video(spec)) {
      opt.misalign_seed = derive_seed(st.seed, "misalign");
      mis = decode_corpus(*model, corpus.test, opt, store);
      out.misaligned = evaluate_lists(corpus.test, mis, corpus.lexicon);
    }
    out.best_step = tr.best_step;
    out.train_seconds = tr.seconds;
    out.checkpoint_hash = hex64(tr.best.hash());
    out.losses = tr.losses;

    NBestStore own_store;
    if (needs_store.count(spec.id)) {
      row_progress("precomputing N-best store");
      const BeamConfig nb{config.nbest_beam, config.nbest_beam, config.beam.max_len};
      own_store = precompute_nbest(*model, corpus, nb);
    }
    if (out_dir) {
      const auto dir = *out_dir / ("seed" + std::to_string(st.seed)) / spec.id;
      std::filesystem::create_directories(dir);
      save_checkpoint(dir / "model.vckp", tr.best);
      write_lists(dir / "test.nbest.jsonl", corpus.test, lists, corpus.lexicon);
      if (!mis.empty()) write_lists(dir / "test.misaligned.jsonl", corpus.test, mis, corpus.lexicon);
      if (!own_store.empty()) {
        for (const auto& split : kSplits) {
          write_text(dir / ("nbest." + split + ".jsonl"),
                     nbest_store_jsonl(corpus.split(split), own_store, corpus.lexicon));
        }
      }
    }
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(2) << "wer " << out.test.wer << " oracle "
        << out.test.oracle_wer;
    if (!std::isnan(out.test.rr)) msg << " rr " << out.test.rr;
    if (out.misaligned) msg << " misaligned " << out.misaligned->wer;
    msg << " (" << std::setprecision(0) << tr.seconds << "s)";
    row_progress(msg.str());

    std::lock_guard<std::mutex> lock(mu);
    st.models[spec.id] = model;
    st.checkpoints[spec.id] = tr.best;
    if (needs_store.count(spec.id)) st.stores[spec.id] = std::move(own_store);
  };

  auto worker = [&]() {
    for (;;) {
      Task* next = nullptr;
      {
        std::unique_lock<std::mutex> lock(mu);
        for (;;) {
          bool pending = false;
          for (auto& t : tasks) {
            if (t.state != Task::Pending) continue;
            pending = true;
            const auto& spec = grid_row(t.row);
            if (spec.first_pass.empty()) {
              next = &t;
              break;
            }
            for (auto& d : tasks) {
              if (d.seed_index != t.seed_index || d.row != spec.first_pass) continue;
              if (d.state == Task::Done) next = &t;
              if (d.state == Task::Failed) {
                t.state = Task::Failed;
                result_of(t).error = "first pass " + spec.first_pass + " failed";
                cv.notify_all();
              }
            }
            if (next) break;
          }
          if (next) {
            next->state = Task::Running;
            break;
          }
          if (!pending) return;
          cv.wait(lock);
        }
      }
      bool ok = true;
      std::string error;
      try {
        run_task(*next);
      } catch (const std::exception& e) {
        ok = false;
        error = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        next->state = ok ? Task::Done : Task::Failed;
        RowResult& r = result_of(*next);
        r.ok = ok;
        r.error = error;
        if (!ok && progress) progress("seed " + std::to_string(states[next->seed_index].seed) + " " + next->row + " failed: " + error);
      }
      cv.notify_all();
    }
  };

  const int n = std::max(1, std::min<int>(config.threads, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

double seed_mean(const std::vector<SeedResult>& results, const std::string& row,
                 double (*field)(const RowResult&)) {
  if (results.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& s : results) {
    const RowResult* r = s.find(row);
    if (!r || !r->ok) return std::numeric_limits<double>::quiet_NaN();
    sum += field(*r);
  }
  return sum / static_cast<double>(results.size());
}

namespace {

// "mean ±half-range" over the seeds that produced the value.
std::string cell(const std::vector<SeedResult>& results, const std::string& row,
                 const std::function<std::optional<double>(const RowResult&)>& field) {
  std::vector<double> v;
  bool failed = false;
  bool present = false;
  for (const auto& s : results) {
    const RowResult* r = s.find(row);
    if (!r) continue;
    present = true;
    if (!r->ok) {
      failed = true;
      continue;
    }
    const auto x = field(*r);
    if (x && !std::isnan(*x)) v.push_back(*x);
  }
  if (!present) return "";
  if (failed) return "FAILED";
  if (v.empty()) return "--";
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << mean;
  if (v.size() > 1) o << " ±" << (*hi - *lo) / 2.0;
  return o.str();
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace

std::string grid_table(const std::vector<SeedResult>& results) {
  std::set<std::string> present;
  for (const auto& s : results) {
    for (const auto& r : s.rows) present.insert(r.id);
  }
  std::ostringstream out;
  out << "seeds:";
  for (const auto& s : results) out << ' ' << s.seed;
  out << "  (mean ±half-range over seeds)\n";

  auto wer = [](const RowResult& r) -> std::optional<double> { return r.test.wer; };
  auto orc = [](const RowResult& r) -> std::optional<double> { return r.test.oracle_wer; };
  auto rr = [](const RowResult& r) -> std::optional<double> { return r.test.rr; };
  auto mis = [](const RowResult& r) -> std::optional<double> {
    if (!r.misaligned) return std::nullopt;
    return r.misaligned->wer;
  };

  struct Block {
    const char* title;
    const char* condition;
    bool deliberation;
  };
  const Block blocks[] = {{"Clean: baselines and multi-stream", "clean", false},
                          {"Masked: audio-only and multi-stream", "masked", false},
                          {"Clean: deliberation", "clean", true},
                          {"Masked: deliberation", "masked", true}};
  for (const auto& b : blocks) {
    std::vector<const RowSpec*> specs;
    for (const auto& r : grid_rows()) {
      if (present.count(r.id) && r.condition == b.condition &&
          (r.kind == ModelKind::Deliberation) == b.deliberation) {
        specs.push_back(&r);
      }
    }
    if (specs.empty()) continue;
    const bool masked = std::string(b.condition) == "masked";
    out << '\n' << b.title << '\n';
    out << std::left << std::setw(11) << "ID" << std::setw(14) << "model";
    if (b.deliberation) out << std::setw(10) << "1st pass" << std::setw(8) << "visual" << std::setw(6) << "VG";
    out << std::setw(8) << "fusion" << std::setw(16) << "test WER" << std::setw(16) << "oracle WER";
    if (masked) out << std::setw(16) << "RR";
    out << "misaligned WER\n";
    for (const RowSpec* s : specs) {
      out << std::setw(11) << s->id << std::setw(14) << to_string(s->kind);
      if (b.deliberation) {
        out << std::setw(10) << s->first_pass << std::setw(8) << yes_no(s->visual_stream) << std::setw(6)
            << yes_no(s->vg);
      }
      const bool fused = s->kind == ModelKind::MultiStream || s->kind == ModelKind::Deliberation;
      out << std::setw(8) << (fused ? to_string(s->fusion) : "--");
      out << std::setw(16) << cell(results, s->id, wer) << std::setw(16) << cell(results, s->id, orc);
      if (masked) out << std::setw(16) << cell(results, s->id, rr);
      const std::string m = cell(results, s->id, mis);
      out << (m.empty() ? "--" : m) << '\n';
    }
  }
  return out.str();
}

std::string grid_tsv(const std::vector<SeedResult>& results) {
  std::ostringstream out;
  out << "seed\trow\tstatus\twer\toracle_wer\trr\trr_nbest\tmisaligned_wer\tbest_step\ttrain_seconds\t"
         "checkpoint_hash\n";
  out << std::fixed << std::setprecision(4);
  auto num = [](double x) {
    if (std::isnan(x)) return std::string("NA");
    std::ostringstream o;
    o << std::fixed << std::setprecision(4) << x;
    return o.str();
  };
  for (const auto& s : results) {
    for (const auto& r : s.rows) {
      out << s.seed << '\t' << r.id << '\t' << (r.ok ? "ok" : "failed") << '\t';
      if (r.ok) {
        out << num(r.test.wer) << '\t' << num(r.test.oracle_wer) << '\t' << num(r.test.rr) << '\t'
            << num(r.test.rr_nbest) << '\t' << (r.misaligned ? num(r.misaligned->wer) : "NA") << '\t'
            << r.best_step << '\t' << num(r.train_seconds) << '\t' << r.checkpoint_hash << '\n';
      } else {
        out << "NA\tNA\tNA\tNA\tNA\tNA\tNA\t" << r.error << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace vcasr
