#include "vcasr/corpus.hpp"

#include "vcasr/grounding.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace vcasr {

namespace fs = std::filesystem;
using nlohmann::json;

void write_corpus(const fs::path& dir, const Corpus& corpus, const CorpusInfo& info, bool force) {
  if (fs::exists(dir / "corpus.json") && !force) {
    throw ConfigError(dir.string() + " already holds a corpus (use --force to overwrite)");
  }
  std::error_code ec;
  fs::create_directories(dir / "feats", ec);
  if (ec) throw FormatError("cannot create " + (dir / "feats").string() + ": " + ec.message());

  json meta;
  meta["synth"] = corpus.config.to_kv().values();
  meta["condition"] = info.condition;
  meta["mask_threshold"] = info.mask_threshold;
  meta["mask_seed"] = info.mask_seed;
  write_text(dir / "corpus.json", meta.dump(1) + "\n");
  write_text(dir / "lexicon.json", corpus.lexicon.to_json() + "\n");

  for (const auto& split : kSplits) {
    std::string manifest;
    for (const auto& u : corpus.split(split)) {
      const std::string stem = "feats/" + u.id;
      json rec;
      rec["id"] = u.id;
      rec["words"] = u.words;
      rec["token_ids"] = u.token_ids;
      rec["audio"] = stem + ".audio.vcft";
      rec["video"] = stem + ".video.vcft";
      rec["visual"] = stem + ".visual.vcft";
      json spans = json::array();
      for (const auto& s : u.mask_spans) {
        spans.push_back({{"word_index", s.word_index},
                         {"frame_range", {s.frame_begin, s.frame_end}}});
      }
      rec["mask_spans"] = spans;
      manifest += rec.dump() + "\n";
      write_vcft(dir / (stem + ".audio.vcft"), u.audio);
      write_vcft(dir / (stem + ".video.vcft"), u.raw_video);
      write_vcft(dir / (stem + ".visual.vcft"), u.visual);
    }
    write_text(dir / ("manifest." + split + ".jsonl"), manifest);
  }
}

Corpus read_corpus(const fs::path& dir, CorpusInfo* info) {
  if (!fs::exists(dir / "corpus.json")) {
    throw FormatError(dir.string() + ": not a corpus directory (corpus.json missing)");
  }
  Corpus corpus;
  try {
    const json meta = json::parse(read_text(dir / "corpus.json"));
    KeyValueConfig kv;
    for (const auto& [k, v] : meta.at("synth").items()) kv.set(k, v.get<std::string>());
    corpus.config = SynthConfig::from_kv(kv);
    if (info) {
      info->condition = meta.value("condition", "clean");
      info->mask_threshold = meta.value("mask_threshold", 0.0);
      info->mask_seed = meta.value("mask_seed", std::uint64_t{0});
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "corpus.json").string() + ": " + e.what());
  }
  corpus.lexicon = Lexicon::from_json(read_text(dir / "lexicon.json"));

  for (const auto& split : kSplits) {
    std::ifstream in(dir / ("manifest." + split + ".jsonl"));
    if (!in) throw FormatError("missing manifest." + split + ".jsonl in " + dir.string());
    std::string line;
    auto& utts = corpus.split(split);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const json rec = json::parse(line);
        Utterance u;
        u.id = rec.at("id").get<std::string>();
        u.words = rec.at("words").get<std::vector<std::string>>();
        u.token_ids = rec.at("token_ids").get<std::vector<int>>();
        u.audio = read_vcft(dir / rec.at("audio").get<std::string>());
        u.raw_video = read_vcft(dir / rec.at("video").get<std::string>());
        u.visual = read_vcft(dir / rec.at("visual").get<std::string>());
        for (const auto& s : rec.at("mask_spans")) {
          const auto range = s.at("frame_range").get<std::vector<int>>();
          if (range.size() != 2) throw FormatError(u.id + ": bad frame_range");
          u.mask_spans.push_back({s.at("word_index").get<int>(), range[0], range[1]});
        }
        utts.push_back(std::move(u));
      } catch (const json::exception& e) {
        throw FormatError("manifest." + split + ".jsonl: " + e.what());
      }
    }
  }
  return corpus;
}

Corpus mask_corpus(const Corpus& clean, double threshold, std::uint64_t seed) {
  Corpus out;
  out.config = clean.config;
  out.lexicon = clean.lexicon;
  const JointEmbedding emb(clean.lexicon, clean.config.window, clean.config.stride);
  const int fpt = clean.config.frames_per_token_audio;
  for (const auto& split : kSplits) {
    for (const auto& u : clean.split(split)) {
      const auto candidates = select_mask_candidates(emb, u.words, u.visual, threshold);
      auto rng = make_rng(seed, "mask/" + u.id);
      out.split(split).push_back(split == "train"
                                     ? apply_mask_training(u, candidates, fpt, rng)
                                     : apply_mask_eval(u, candidates, fpt, rng));
    }
  }
  return out;
}

std::uint64_t hash_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "run.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : files) {
    const auto rel = fs::relative(f, dir).generic_string();
    h = fnv1a(rel.data(), rel.size(), h);
    const auto bytes = read_file(f);
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  return h;
}

}  // namespace vcasr
