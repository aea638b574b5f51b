#pragma once

#include "vcasr/corpus.hpp"
#include "vcasr/deliberation.hpp"

#include <filesystem>
#include <limits>
#include <optional>

namespace vcasr {

struct EvalResult {
  double wer = 0.0;
  double oracle_wer = 0.0;
  // Percent; NaN when the split has no masked words.
  double rr = std::numeric_limits<double>::quiet_NaN();
  double rr_nbest = std::numeric_limits<double>::quiet_NaN();
  long long subs = 0, dels = 0, ins = 0, n_ref = 0;
  long long masked = 0;
};

/// Scores decoded lists against the split they were decoded from.
EvalResult evaluate_lists(const std::vector<Utterance>& utts, const std::vector<NBestList>& lists,
                          const Lexicon& lexicon);

/// One cell of the results grid. Deliberation rows name the row whose
/// checkpoint is their first pass.
struct RowSpec {
  std::string id;
  std::string condition;  // clean | masked
  ModelKind kind = ModelKind::AudioOnly;
  FusionMode fusion = FusionMode::Cat;
  std::string first_pass;
  bool visual_stream = true;
  bool vg = false;
};

/// Every row of the grid, first passes before their dependents.
const std::vector<RowSpec>& grid_rows();
const RowSpec& grid_row(const std::string& id);

/// Rows needed by the trend checks.
inline const std::vector<std::string> kTrendRows = {"A1", "AV1", "D1", "A2_M", "AV2_M", "D6_M"};

struct GridConfig {
  SynthConfig synth;
  TrainConfig train;
  TrainConfig delib_train;
  ModelConfig sizes;  // widths, depths, attention, n_hyps
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<std::string> rows;  // empty selects every row
  BeamConfig beam;
  int nbest_beam = 4;  // first-pass beam for the deliberation N-best store
  double mask_threshold = 0.0;
  int threads = 1;

  GridConfig();
  void validate() const;
  /// Rows to run including the first passes they depend on, in grid order.
  std::vector<std::string> resolved_rows() const;
  static GridConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

struct RowResult {
  std::string id;
  bool ok = false;
  std::string error;
  EvalResult test;
  std::optional<EvalResult> misaligned;
  long long best_step = 0;
  double train_seconds = 0.0;
  std::string checkpoint_hash;
  std::vector<double> losses;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<RowResult> rows;
  const RowResult* find(const std::string& id) const;
};

/// Runs the grid. Rows of all seeds are scheduled on `config.threads`
/// workers; a row starts once its first pass has finished. With `out_dir`
/// each row writes its checkpoint and decoded test lists under
/// <out_dir>/seed<k>/<row>/.
std::vector<SeedResult> run_grid(const GridConfig& config, const ProgressFn& progress = {},
                                 const std::filesystem::path* out_dir = nullptr);

/// Mean and range over seeds, one block per condition and model family.
std::string grid_table(const std::vector<SeedResult>& results);
/// Per seed, per row values; one line per (seed, row).
std::string grid_tsv(const std::vector<SeedResult>& results);

/// Mean over seeds of one field; NaN if any seed lacks the row.
double seed_mean(const std::vector<SeedResult>& results, const std::string& row,
                 double (*field)(const RowResult&));

/// Corpus-derived config with the grid's widths, depths and attention.
ModelConfig grid_model_config(const GridConfig& g, const Corpus& c, ModelKind kind, FusionMode fusion);
ModelConfig grid_deliberation_config(const GridConfig& g, const Corpus& c, const Model& first_pass,
                                     FusionMode fusion, bool vg, bool visual_stream);

/// VCASR_THREADS if set and positive, otherwise the hardware concurrency.
int env_threads();

}  // namespace vcasr
