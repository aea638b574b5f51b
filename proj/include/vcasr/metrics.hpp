#pragma once

#include <span>
#include <string>
#include <vector>

namespace vcasr {

enum class EditOp { Match, Sub, Del, Ins };

struct AlignedPair {
  EditOp op = EditOp::Match;
  int ref = -1;  // reference position, -1 for insertions
  int hyp = -1;  // hypothesis position, -1 for deletions
};

struct Alignment {
  std::vector<AlignedPair> ops;  // in sequence order
  int cost = 0;
  int subs = 0, dels = 0, ins = 0;
};

/// Lowercased, surrounding whitespace removed.
std::string normalize_word(const std::string& w);

/// Unit-cost Levenshtein alignment. Backtrace prefers match, then
/// substitution, deletion, insertion.
Alignment edit_alignment(std::span<const std::string> ref, std::span<const std::string> hyp);

using Words = std::vector<std::string>;

struct WerReport {
  double wer = 0.0;  // percent
  long long subs = 0, dels = 0, ins = 0, n_ref = 0;
};

/// Corpus-level WER pooled over reference words.
WerReport wer(std::span<const Words> refs, std::span<const Words> hyps);

/// Per utterance the best hypothesis by edit cost, pooled over reference words.
double oracle_wer(std::span<const Words> refs, std::span<const std::vector<Words>> nbests);

struct RecoveryReport {
  double rate = 0.0;  // percent
  long long recovered = 0, masked = 0;
};

/// A masked reference word counts as recovered when the alignment matches it.
RecoveryReport recovery_rate(std::span<const Words> refs, std::span<const Words> hyps,
                             std::span<const std::vector<int>> masked);

/// Recovered if any hypothesis of the N-best recovers it. Not the 1-best
/// definition; reported separately.
RecoveryReport recovery_rate_nbest(std::span<const Words> refs,
                                   std::span<const std::vector<Words>> nbests,
                                   std::span<const std::vector<int>> masked);

/// 100 (baseline - improved) / baseline for error rates.
double relative_improvement(double baseline, double improved);
/// 100 (improved - baseline) / baseline for rates where higher is better.
double relative_improvement_rr(double baseline, double improved);

}  // namespace vcasr
