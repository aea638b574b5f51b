// vcasr: corpus synthesis, training, decoding, evaluation and the results grid.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include "vcasr/experiment.hpp"
#include "vcasr/metrics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vcasr;

namespace {

struct Run {
  std::string command;
  std::vector<std::string> argv;
  std::string config_path;
  std::vector<std::string> sets;
};

GridConfig load_config(const Run& run) {
  KeyValueConfig kv;
  if (!run.config_path.empty()) kv = KeyValueConfig::load(run.config_path);
  for (const auto& s : run.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return GridConfig::from_kv(kv);
}

std::string file_hash(const fs::path& p) {
  const auto bytes = read_file(p);
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

std::string corpus_hash(const fs::path& p) { return hex64(hash_directory(p)); }

// Everything needed to rerun a command: argv, the resolved config and the
// hashes of what it read and wrote.
void write_metadata(const fs::path& path, const Run& run, const GridConfig* config, const json& inputs,
                    const json& outputs, const json& extra = json::object()) {
  json j;
  j["command"] = run.command;
  j["argv"] = run.argv;
  if (config) j["config"] = config->to_kv().to_string();
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["checkpoint_version"] = kCheckpointVersion;
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_text(path, j.dump(2) + "\n");
}

void prepare_dir(const fs::path& dir, const std::string& marker, bool force) {
  if (fs::exists(dir / marker) && !force) {
    throw ConfigError(dir.string() + " already holds " + marker + " (use --force to overwrite)");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

const std::vector<Utterance>& split_of(const Corpus& c, const std::string& name) {
  if (name != "train" && name != "dev" && name != "test") {
    throw ConfigError("split: expected train, dev or test, got '" + name + "'");
  }
  return c.split(name);
}

std::shared_ptr<const Model> load_model(const fs::path& path, const Corpus& corpus,
                                        std::shared_ptr<const Model> first_pass = nullptr) {
  auto m = std::make_shared<Model>(Model::from_checkpoint(load_checkpoint(path), std::move(first_pass)));
  if (m->config().vocab != corpus.lexicon.vocab_size()) {
    throw ConfigError(path.string() + ": vocabulary does not match the corpus lexicon");
  }
  attach_grounding(*m, corpus);
  return m;
}

NBestStore read_store(const fs::path& dir, const std::vector<std::string>& splits) {
  NBestStore store;
  for (const auto& s : splits) {
    const auto path = dir / ("nbest." + s + ".jsonl");
    if (!fs::exists(path)) throw FormatError("missing N-best store " + path.string());
    for (auto& [id, list] : read_nbest_jsonl(read_text(path))) store[id] = std::move(list);
  }
  return store;
}

void write_losses(const fs::path& dir, const TrainResult& tr) {
  std::ostringstream l;
  l << "step\tloss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < tr.losses.size(); ++i) l << i << '\t' << tr.losses[i] << '\n';
  write_text(dir / "losses.tsv", l.str());
  std::ostringstream d;
  d << "step\tdev_loss\n" << std::setprecision(17);
  for (const auto& [step, loss] : tr.dev_history) d << step << '\t' << loss << '\n';
  write_text(dir / "dev.tsv", d.str());
}

json train_outputs(const fs::path& dir, const TrainResult& tr) {
  return {{"model.vckp", hex64(tr.best.hash())},
          {"losses.tsv", file_hash(dir / "losses.tsv")},
          {"best_step", tr.best_step},
          {"best_dev_loss", tr.best_dev_loss}};
}

// synth ----------------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void cmd_synth(const Run& run, const SynthArgs& a) {
  GridConfig g = load_config(run);
  if (a.seed) g.synth.seed = *a.seed;
  g.synth.validate();
  const Corpus c = generate_corpus(g.synth);
  write_corpus(a.out, c, CorpusInfo{}, a.force);
  write_metadata(a.out / "run.json", run, &g, json::object(), {{"corpus", corpus_hash(a.out)}},
                 {{"seed", g.synth.seed}});
  std::cout << "train " << c.train.size() << " dev " << c.dev.size() << " test " << c.test.size()
            << " vocab " << c.lexicon.vocab_size() << " -> " << a.out.string() << "\n";
}

// mask -----------------------------------------------------------------------

struct MaskArgs {
  fs::path corpus, out;
  std::optional<double> threshold;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void cmd_mask(const Run& run, const MaskArgs& a) {
  const GridConfig g = load_config(run);
  CorpusInfo in_info;
  const Corpus clean = read_corpus(a.corpus, &in_info);
  if (in_info.condition != "clean") throw ConfigError(a.corpus.string() + " is already masked");
  CorpusInfo info;
  info.condition = "masked";
  info.mask_threshold = a.threshold.value_or(g.mask_threshold);
  info.mask_seed = a.seed.value_or(clean.config.seed);
  const Corpus masked = mask_corpus(clean, info.mask_threshold, info.mask_seed);
  write_corpus(a.out, masked, info, a.force);
  long long spans = 0;
  for (const auto& s : kSplits) {
    for (const auto& u : masked.split(s)) spans += static_cast<long long>(u.mask_spans.size());
  }
  write_metadata(a.out / "run.json", run, &g, {{"corpus", corpus_hash(a.corpus)}},
                 {{"corpus", corpus_hash(a.out)}},
                 {{"mask_seed", info.mask_seed}, {"mask_threshold", info.mask_threshold}});
  std::cout << "masked " << spans << " words -> " << a.out.string() << "\n";
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  fs::path corpus, out, init;
  std::string kind = "audio-only";
  std::string fusion;  // gate for multistream, cat otherwise
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void cmd_train(const Run& run, const TrainArgs& a) {
  const GridConfig g = load_config(run);
  const ModelKind kind = parse_model_kind(a.kind);
  const FusionMode fusion = a.fusion.empty()
                                ? (kind == ModelKind::MultiStream ? FusionMode::Gate : FusionMode::Cat)
                                : parse_fusion_mode(a.fusion);
  if (kind == ModelKind::Deliberation) throw ConfigError("kind: use train-delib for deliberation models");
  if (kind == ModelKind::Vat && a.init.empty()) throw ConfigError("--init: vat starts from an audio-only checkpoint");
  const Corpus c = read_corpus(a.corpus);
  prepare_dir(a.out, "model.vckp", a.force);
  TrainConfig tc = g.train;
  tc.seed = a.seed.value_or(c.config.seed);
  json inputs = {{"corpus", corpus_hash(a.corpus)}};
  TrainResult tr;
  switch (kind) {
    case ModelKind::AudioOnly:
      tr = train_audio_only(c, grid_model_config(g, c, kind, fusion), tc, log_line);
      break;
    case ModelKind::Vat: {
      const Checkpoint init = load_checkpoint(a.init);
      inputs["init"] = hex64(init.hash());
      tr = train_vat(c, init, tc, log_line);
      break;
    }
    default:
      tr = train_multistream(c, grid_model_config(g, c, kind, fusion), tc, log_line);
      break;
  }
  save_checkpoint(a.out / "model.vckp", tr.best);
  write_losses(a.out, tr);
  write_metadata(a.out / "run.json", run, &g, inputs, train_outputs(a.out, tr),
                 {{"seed", tc.seed}, {"kind", to_string(kind)}, {"fusion", to_string(fusion)}});
  std::cout << "best step " << tr.best_step << " dev loss " << std::fixed << std::setprecision(4)
            << tr.best_dev_loss << " -> " << (a.out / "model.vckp").string() << "\n";
}

// train-delib ----------------------------------------------------------------

struct DelibArgs {
  fs::path corpus, out, first_pass, nbest_dir;
  std::string fusion = "cat";
  bool vg = false;
  bool no_visual = false;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void cmd_train_delib(const Run& run, const DelibArgs& a) {
  const GridConfig g = load_config(run);
  const FusionMode fusion = parse_fusion_mode(a.fusion);
  const Corpus c = read_corpus(a.corpus);
  prepare_dir(a.out, "model.vckp", a.force);
  auto first = load_model(a.first_pass, c);
  if (first->config().kind == ModelKind::Deliberation) {
    throw ConfigError(a.first_pass.string() + ": first pass must not be a deliberation model");
  }
  json inputs = {{"corpus", corpus_hash(a.corpus)}, {"first_pass", hex64(first->checkpoint().hash())}};
  NBestStore store;
  if (!a.nbest_dir.empty()) {
    store = read_store(a.nbest_dir, kSplits);
    for (const auto& s : kSplits) inputs["nbest." + s] = file_hash(a.nbest_dir / ("nbest." + s + ".jsonl"));
  } else {
    log_line("precomputing N-best store");
    store = precompute_nbest(*first, c, BeamConfig{g.nbest_beam, g.nbest_beam, g.beam.max_len}, env_threads());
    for (const auto& s : kSplits) {
      write_text(a.out / ("nbest." + s + ".jsonl"), nbest_store_jsonl(c.split(s), store, c.lexicon));
    }
  }
  TrainConfig tc = g.delib_train;
  tc.seed = a.seed.value_or(c.config.seed);
  const ModelConfig mc = grid_deliberation_config(g, c, *first, fusion, a.vg, !a.no_visual);
  const TrainResult tr = train_deliberation(first, c, store, mc, tc, log_line);
  save_checkpoint(a.out / "model.vckp", tr.best);
  write_losses(a.out, tr);
  write_metadata(a.out / "run.json", run, &g, inputs, train_outputs(a.out, tr),
                 {{"seed", tc.seed}, {"fusion", to_string(fusion)}, {"vg", a.vg}, {"visual_stream", !a.no_visual}});
  std::cout << "best step " << tr.best_step << " dev loss " << std::fixed << std::setprecision(4)
            << tr.best_dev_loss << " -> " << (a.out / "model.vckp").string() << "\n";
}

// decode ---------------------------------------------------------------------

struct DecodeArgs {
  fs::path corpus, model, first_pass, nbest_dir, out;
  std::string split = "test";
  std::optional<int> beam, n_best, max_len;
  std::optional<std::uint64_t> misalign;
};

void cmd_decode(const Run& run, const DecodeArgs& a) {
  const GridConfig g = load_config(run);
  const Corpus c = read_corpus(a.corpus);
  const auto& utts = split_of(c, a.split);
  const Checkpoint ckpt = load_checkpoint(a.model);
  const bool delib = ModelConfig::from_text(ckpt.config).kind == ModelKind::Deliberation;
  json inputs = {{"corpus", corpus_hash(a.corpus)}, {"model", hex64(ckpt.hash())}};

  std::shared_ptr<const Model> first;
  NBestStore store;
  if (delib) {
    if (a.first_pass.empty()) throw ConfigError("--first-pass: required for a deliberation model");
    first = load_model(a.first_pass, c);
    inputs["first_pass"] = hex64(first->checkpoint().hash());
    if (!a.nbest_dir.empty()) {
      store = read_store(a.nbest_dir, {a.split});
      inputs["nbest"] = file_hash(a.nbest_dir / ("nbest." + a.split + ".jsonl"));
    } else {
      DecodeOptions fo;
      fo.beam = BeamConfig{g.nbest_beam, g.nbest_beam, g.beam.max_len};
      fo.threads = env_threads();
      auto lists = decode_corpus(*first, utts, fo);
      for (std::size_t i = 0; i < utts.size(); ++i) store[utts[i].id] = std::move(lists[i]);
    }
  }
  auto model = std::make_shared<Model>(Model::from_checkpoint(ckpt, first));
  attach_grounding(*model, c);

  DecodeOptions opt;
  opt.beam = g.beam;
  if (a.beam) opt.beam.beam = *a.beam;
  if (a.n_best) opt.beam.n_best = *a.n_best;
  if (a.max_len) opt.beam.max_len = *a.max_len;
  if (a.n_best && !a.beam && opt.beam.n_best > opt.beam.beam) opt.beam.beam = opt.beam.n_best;
  if (a.beam && !a.n_best) opt.beam.n_best = std::min(opt.beam.n_best, opt.beam.beam);
  if (opt.beam.beam < 1 || opt.beam.n_best < 1 || opt.beam.n_best > opt.beam.beam || opt.beam.max_len < 1) {
    throw ConfigError("beam: need 1 <= n_best <= beam and max_len >= 1");
  }
  if (a.misalign) opt.misalign_seed = derive_seed(*a.misalign, "misalign");
  opt.threads = env_threads();
  const auto lists = decode_corpus(*model, utts, opt, delib ? &store : nullptr);
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  write_text(a.out, nbest_jsonl(utts, lists, c.lexicon));
  json extra = {{"split", a.split}, {"beam", opt.beam.beam}, {"n_best", opt.beam.n_best},
                {"max_len", opt.beam.max_len}};
  if (a.misalign) extra["misalign"] = *a.misalign;
  write_metadata(a.out.string() + ".run.json", run, &g, inputs, {{a.out.filename().string(), file_hash(a.out)}},
                 extra);
  const auto r = evaluate_lists(utts, lists, c.lexicon);
  std::cout << utts.size() << " utterances, WER " << std::fixed << std::setprecision(2) << r.wer << " -> "
            << a.out.string() << "\n";
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  fs::path corpus, out;
  std::vector<std::string> decoded;
  std::string baseline;
  std::string split = "test";
  bool rr_nbest = false;
};

std::string cell(double x) {
  if (std::isnan(x)) return "-";
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << x;
  return o.str();
}

void cmd_eval(const Run& run, const EvalArgs& a) {
  const Corpus c = read_corpus(a.corpus);
  const auto& utts = split_of(c, a.split);
  std::vector<std::pair<std::string, EvalResult>> rows;
  json inputs = {{"corpus", corpus_hash(a.corpus)}};
  for (const auto& d : a.decoded) {
    const auto eq = d.find('=');
    const std::string name = eq == std::string::npos ? fs::path(d).stem().string() : d.substr(0, eq);
    const fs::path file = eq == std::string::npos ? fs::path(d) : fs::path(d.substr(eq + 1));
    if (!fs::exists(file)) throw FormatError("missing decode output " + file.string());
    const NBestStore store = read_nbest_jsonl(read_text(file));
    std::vector<NBestList> lists;
    for (const auto& u : utts) {
      auto it = store.find(u.id);
      if (it == store.end()) throw InputError(file.string() + ": no hypotheses for " + u.id);
      lists.push_back(it->second);
    }
    rows.emplace_back(name, evaluate_lists(utts, lists, c.lexicon));
    inputs[name] = file_hash(file);
  }
  const EvalResult* base = nullptr;
  if (!a.baseline.empty()) {
    for (const auto& [n, r] : rows) {
      if (n == a.baseline) base = &r;
    }
    if (!base) throw ConfigError("--baseline: no decoded row named '" + a.baseline + "'");
  }
  std::ostringstream t;
  t << "model\tWER\tS\tD\tI\tN\toracleWER\tRR";
  if (a.rr_nbest) t << "\tRR_nbest(any-hyp)";
  if (base) t << "\trelWER_vs_" << a.baseline << "\trelRR_vs_" << a.baseline;
  t << "\n";
  for (const auto& [n, r] : rows) {
    t << n << '\t' << cell(r.wer) << '\t' << r.subs << '\t' << r.dels << '\t' << r.ins << '\t' << r.n_ref << '\t'
      << cell(r.oracle_wer) << '\t' << cell(r.rr);
    if (a.rr_nbest) t << '\t' << cell(r.rr_nbest);
    if (base) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      t << '\t' << cell(base->wer > 0 ? relative_improvement(base->wer, r.wer) : nan) << '\t'
        << cell(base->rr > 0 ? relative_improvement_rr(base->rr, r.rr) : nan);
    }
    t << "\n";
  }
  if (a.out.empty()) {
    std::cout << t.str();
  } else {
    if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
    write_text(a.out, t.str());
    write_metadata(a.out.string() + ".run.json", run, nullptr, inputs,
                   {{a.out.filename().string(), file_hash(a.out)}}, {{"split", a.split}});
    std::cout << t.str();
  }
}

// ground ---------------------------------------------------------------------

struct GroundArgs {
  fs::path corpus, out;
  std::string utt;
  std::string words;
};

void cmd_ground(const Run& run, const GroundArgs& a) {
  const Corpus c = read_corpus(a.corpus);
  const Utterance* u = nullptr;
  for (const auto& s : kSplits) {
    for (const auto& x : c.split(s)) {
      if (x.id == a.utt) u = &x;
    }
  }
  if (!u) throw InputError("no utterance with id '" + a.utt + "'");
  Words words = u->words;
  if (!a.words.empty()) {
    words.clear();
    std::istringstream in(a.words);
    for (std::string w; in >> w;) words.push_back(normalize_word(w));
  }
  const JointEmbedding emb(c.lexicon, c.config.window, c.config.stride);
  const std::string tsv = similarity_tsv(words, similarity_matrix(emb, words, u->visual));
  if (a.out.empty()) {
    std::cout << tsv;
    return;
  }
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
  write_text(a.out, tsv);
  write_metadata(a.out.string() + ".run.json", run, nullptr, {{"corpus", corpus_hash(a.corpus)}},
                 {{a.out.filename().string(), file_hash(a.out)}}, {{"utt", a.utt}});
  std::cerr << words.size() << " words x " << u->visual.rows() << " windows -> " << a.out.string() << "\n";
}

// reproduce ------------------------------------------------------------------

struct ReproduceArgs {
  fs::path out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> rows;
  std::optional<int> threads;
  bool force = false;
};

int cmd_reproduce(const Run& run, const ReproduceArgs& a) {
  GridConfig g = load_config(run);
  if (!a.seeds.empty()) g.seeds = a.seeds;
  if (!a.rows.empty()) g.rows = a.rows;
  if (a.threads) g.threads = *a.threads;
  g.validate();
  prepare_dir(a.out, "results.tsv", a.force);
  write_text(a.out / "grid.cfg", g.to_kv().to_string());
  const auto results = run_grid(g, [](const std::string& m) {
    if (m.find(": step ") == std::string::npos) log_line(m);
  }, &a.out);
  const std::string table = grid_table(results);
  write_text(a.out / "results.txt", table);
  write_text(a.out / "results.tsv", grid_tsv(results));
  json outputs = {{"results.tsv", file_hash(a.out / "results.tsv")}};
  bool failed = false;
  for (const auto& s : results) {
    for (const auto& r : s.rows) {
      if (!r.ok) failed = true;
      if (r.ok) outputs["seed" + std::to_string(s.seed) + "/" + r.id] = r.checkpoint_hash;
    }
  }
  write_metadata(a.out / "run.json", run, &g, json::object(), outputs);
  std::cout << table;
  if (failed) {
    std::cerr << "vcasr: some grid rows failed; see FAILED cells\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vcasr: visual-context-aware ASR lab"};
  app.require_subcommand(1);
  Run run;
  for (int i = 0; i < argc; ++i) run.argv.emplace_back(argv[i]);

  auto add_config = [&](CLI::App* s) {
    s->add_option("--config", run.config_path, "key = value config file")->check(CLI::ExistingFile);
    s->add_option("--set", run.sets, "override a config key (key=value)");
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_config(s_synth);
  s_synth->add_option("--out", synth.out, "corpus directory")->required();
  s_synth->add_option("--seed", synth.seed, "override synth.seed");
  s_synth->add_flag("--force", synth.force, "overwrite an existing corpus");

  MaskArgs mask;
  auto* s_mask = app.add_subcommand("mask", "mask visually grounded words of a clean corpus");
  add_config(s_mask);
  s_mask->add_option("--corpus", mask.corpus, "clean corpus directory")->required();
  s_mask->add_option("--out", mask.out, "masked corpus directory")->required();
  s_mask->add_option("--threshold", mask.threshold, "similarity threshold for candidates");
  s_mask->add_option("--seed", mask.seed, "mask seed (default: the corpus seed)");
  s_mask->add_flag("--force", mask.force, "overwrite an existing corpus");

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "train an audio-only, vat or multi-stream model");
  add_config(s_train);
  s_train->add_option("--corpus", train.corpus, "corpus directory")->required();
  s_train->add_option("--out", train.out, "output directory")->required();
  s_train->add_option("--kind", train.kind, "audio-only | vat | multistream")->capture_default_str();
  s_train->add_option("--fusion", train.fusion, "cat | gate (default: gate for multistream, else cat)");
  s_train->add_option("--init", train.init, "audio-only checkpoint (vat)");
  s_train->add_option("--seed", train.seed, "training seed (default: the corpus seed)");
  s_train->add_flag("--force", train.force, "overwrite existing outputs");

  DelibArgs delib;
  auto* s_delib = app.add_subcommand("train-delib", "train a deliberation model on a frozen first pass");
  add_config(s_delib);
  s_delib->add_option("--corpus", delib.corpus, "corpus directory")->required();
  s_delib->add_option("--out", delib.out, "output directory")->required();
  s_delib->add_option("--first-pass", delib.first_pass, "first-pass checkpoint")->required();
  s_delib->add_option("--nbest-dir", delib.nbest_dir, "reuse nbest.{train,dev,test}.jsonl from here");
  s_delib->add_option("--fusion", delib.fusion, "cat | gate")->capture_default_str();
  s_delib->add_flag("--vg", delib.vg, "visually grounded hypotheses");
  s_delib->add_flag("--no-visual", delib.no_visual, "drop the video stream");
  s_delib->add_option("--seed", delib.seed, "training seed (default: the corpus seed)");
  s_delib->add_flag("--force", delib.force, "overwrite existing outputs");

  DecodeArgs decode;
  auto* s_decode = app.add_subcommand("decode", "beam-search one split");
  add_config(s_decode);
  s_decode->add_option("--corpus", decode.corpus, "corpus directory")->required();
  s_decode->add_option("--model", decode.model, "checkpoint")->required();
  s_decode->add_option("--out", decode.out, "output .jsonl")->required();
  s_decode->add_option("--first-pass", decode.first_pass, "first-pass checkpoint (deliberation)");
  s_decode->add_option("--nbest-dir", decode.nbest_dir, "stored first-pass N-best (deliberation)");
  s_decode->add_option("--split", decode.split, "train | dev | test")->capture_default_str();
  s_decode->add_option("--beam", decode.beam, "beam width");
  s_decode->add_option("--nbest", decode.n_best, "hypotheses kept");
  s_decode->add_option("--max-len", decode.max_len, "maximum output tokens");
  s_decode->add_option("--misalign", decode.misalign, "pair each utterance with another's video (root seed)");

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "score decode outputs");
  s_eval->add_option("--corpus", eval.corpus, "corpus directory")->required();
  s_eval->add_option("--decoded", eval.decoded, "name=file.jsonl, repeatable")->required();
  s_eval->add_option("--baseline", eval.baseline, "row for relative-improvement columns");
  s_eval->add_option("--split", eval.split, "train | dev | test")->capture_default_str();
  s_eval->add_option("--out", eval.out, "report .tsv (default: stdout only)");
  s_eval->add_flag("--rr-nbest", eval.rr_nbest, "also report recovery anywhere in the N-best");

  GroundArgs ground;
  auto* s_ground = app.add_subcommand("ground", "word x window similarity matrix of one utterance");
  s_ground->add_option("--corpus", ground.corpus, "corpus directory")->required();
  s_ground->add_option("--utt", ground.utt, "utterance id")->required();
  s_ground->add_option("--words", ground.words, "score these words instead of the reference");
  s_ground->add_option("--out", ground.out, "output .tsv (default: stdout)");

  ReproduceArgs repro;
  auto* s_repro = app.add_subcommand("reproduce", "run the results grid");
  add_config(s_repro);
  s_repro->add_option("--out", repro.out, "output directory")->required();
  s_repro->add_option("--seeds", repro.seeds, "override seeds")->delimiter(',');
  s_repro->add_option("--rows", repro.rows, "override rows")->delimiter(',');
  s_repro->add_option("--threads", repro.threads, "parallel rows (default VCASR_THREADS)");
  s_repro->add_flag("--force", repro.force, "overwrite existing results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*s_synth) {
      run.command = "synth";
      cmd_synth(run, synth);
    } else if (*s_mask) {
      run.command = "mask";
      cmd_mask(run, mask);
    } else if (*s_train) {
      run.command = "train";
      cmd_train(run, train);
    } else if (*s_delib) {
      run.command = "train-delib";
      cmd_train_delib(run, delib);
    } else if (*s_decode) {
      run.command = "decode";
      cmd_decode(run, decode);
    } else if (*s_eval) {
      run.command = "eval";
      cmd_eval(run, eval);
    } else if (*s_ground) {
      run.command = "ground";
      cmd_ground(run, ground);
    } else if (*s_repro) {
      run.command = "reproduce";
      return cmd_reproduce(run, repro);
    }
  } catch (const ConfigError& e) {
    std::cerr << "vcasr: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "vcasr: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
