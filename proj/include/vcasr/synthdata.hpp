#pragma once

#include "vcasr/common.hpp"
#include "vcasr/io.hpp"

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vcasr {

struct SynthConfig {
  int n_function_words = 40;
  int n_content_words = 40;
  int n_homophone_pairs = 10;
  int sentence_len_min = 6;
  int sentence_len_max = 12;
  double p_content = 0.4;
  int d_audio = 12;
  int d_raw_video = 16;
  int d_embed = 16;
  int frames_per_token_audio = 4;
  int frames_per_token_video = 4;
  double sigma_audio = 0.3;
  double sigma_video = 0.1;
  double content_norm = 1.4;
  double function_norm = 0.5;
  double audio_proto_scale = 1.0;  // per-entry std of audio prototypes
  double background_norm = 0.3;    // raw-video vector emitted for function words
  int window = 4;                  // visual feature window (frames)
  int stride = 2;
  std::uint64_t seed = 1;
  int n_train = 4000;
  int n_dev = 300;
  int n_test = 300;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  static SynthConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

struct LexiconEntry {
  std::string word;
  RowVector embedding;  // d_embed; text embedding and video emission
  RowVector audio;    // d_audio prototype
  int homophone_group = 0;
  bool is_content = false;
};

/// Word-level token ids: specials first, then lexicon words in order.
enum SpecialToken : int { kPad = kPadToken, kSos = kSosToken, kEos = kEosToken, kUnk = kUnkToken };
inline constexpr int kNumSpecial = 4;

class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(std::vector<LexiconEntry> entries, Matrix video_projection, RowVector background);

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  const LexiconEntry& entry(const std::string& word) const;  // throws LexiconError
  const LexiconEntry* find(const std::string& word) const;
  int token_id(const std::string& word) const;  // kUnk if unknown
  std::string token_word(int id) const;
  int vocab_size() const { return static_cast<int>(entries_.size()) + kNumSpecial; }
  int d_embed() const { return static_cast<int>(video_projection_.cols()); }
  int d_audio() const { return entries_.empty() ? 0 : static_cast<int>(entries_[0].audio.size()); }
  int d_raw_video() const { return static_cast<int>(video_projection_.rows()); }

  /// d_raw_video x d_embed with orthonormal columns; raw = P * concept.
  const Matrix& video_projection() const { return video_projection_; }
  const RowVector& background() const { return background_; }

  std::string to_json() const;
  static Lexicon from_json(const std::string& text);

 private:
  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, int> index_;
  Matrix video_projection_;
  RowVector background_;
};

struct MaskSpan {
  int word_index = 0;
  int frame_begin = 0;  // audio frames, half-open
  int frame_end = 0;
  bool operator==(const MaskSpan&) const = default;
};

struct Utterance {
  std::string id;
  std::vector<std::string> words;
  std::vector<int> token_ids;
  Matrix audio;      // T_a x d_audio
  Matrix raw_video;  // T_r x d_raw_video
  Matrix visual;     // T_v x d_visual, filled by grounding
  std::vector<MaskSpan> mask_spans;
};

struct MaskCandidate {
  int word_index = 0;
  double score = 0.0;  // max similarity over visual windows
};

struct Corpus {
  SynthConfig config;
  Lexicon lexicon;
  std::vector<Utterance> train, dev, test;

  std::vector<Utterance>& split(const std::string& name);
  const std::vector<Utterance>& split(const std::string& name) const;
};

inline const std::vector<std::string> kSplits = {"train", "dev", "test"};

Lexicon generate_lexicon(const SynthConfig& config);

/// Deterministic in `config`; also fills visual features with the default
/// joint embedding. Matrices are rounded through float32 so the in-memory
/// corpus equals what is read back from disk.
Corpus generate_corpus(const SynthConfig& config);

Matrix render_audio(std::span<const std::string> words, const Lexicon& lexicon,
                    int frames_per_token, double sigma, Rng& rng);
Matrix render_video(std::span<const std::string> words, const Lexicon& lexicon,
                    int frames_per_token, double sigma, Rng& rng);

/// Masks a uniform random subset of `candidates` of size
/// min(|candidates|, floor(0.1 * |words|)) with N(0,1) noise.
Utterance apply_mask_training(const Utterance& utt, std::span<const MaskCandidate> candidates,
                              int frames_per_token, Rng& rng);

/// Masks the top-k candidates by score, k = max(1, floor(0.1 * |words|))
/// clipped to |candidates|; ties go to the earlier word.
Utterance apply_mask_eval(const Utterance& utt, std::span<const MaskCandidate> candidates,
                          int frames_per_token, Rng& rng);

}  // namespace vcasr
