#include "vcasr/metrics.hpp"

#include "vcasr/common.hpp"

#include <algorithm>
#include <cctype>

namespace vcasr {

std::string normalize_word(const std::string& w) {
  std::size_t b = 0, e = w.size();
  while (b < e && std::isspace(static_cast<unsigned char>(w[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(w[e - 1]))) --e;
  std::string out = w.substr(b, e - b);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Alignment edit_alignment(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  std::vector<std::string> r(n), h(m);
  for (int i = 0; i < n; ++i) r[i] = normalize_word(ref[i]);
  for (int j = 0; j < m; ++j) h[j] = normalize_word(hyp[j]);
  std::vector<int> d(static_cast<std::size_t>(n + 1) * (m + 1));
  auto at = [&](int i, int j) -> int& { return d[static_cast<std::size_t>(i) * (m + 1) + j]; };
  for (int i = 0; i <= n; ++i) at(i, 0) = i;
  for (int j = 0; j <= m; ++j) at(0, j) = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const int diag = at(i - 1, j - 1) + (r[i - 1] == h[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  Alignment a;
  a.cost = at(n, m);
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && r[i - 1] == h[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      a.ops.push_back({EditOp::Match, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      a.ops.push_back({EditOp::Sub, i - 1, j - 1});
      ++a.subs;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      a.ops.push_back({EditOp::Del, i - 1, -1});
      ++a.dels;
      --i;
    } else {
      a.ops.push_back({EditOp::Ins, -1, j - 1});
      ++a.ins;
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

WerReport wer(std::span<const Words> refs, std::span<const Words> hyps) {
  if (refs.size() != hyps.size()) throw InputError("wer: reference and hypothesis counts differ");
  WerReport rep;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    const auto a = edit_alignment(refs[u], hyps[u]);
    rep.subs += a.subs;
    rep.dels += a.dels;
    rep.ins += a.ins;
    rep.n_ref += static_cast<long long>(refs[u].size());
  }
  if (rep.n_ref == 0) throw InputError("wer: empty reference corpus");
  rep.wer = 100.0 * static_cast<double>(rep.subs + rep.dels + rep.ins) / static_cast<double>(rep.n_ref);
  return rep;
}

double oracle_wer(std::span<const Words> refs, std::span<const std::vector<Words>> nbests) {
  if (refs.size() != nbests.size()) throw InputError("oracle_wer: reference and list counts differ");
  long long cost = 0, n_ref = 0;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    if (nbests[u].empty()) throw InputError("oracle_wer: empty N-best list");
    int best = -1;
    for (const auto& h : nbests[u]) {
      const int c = edit_alignment(refs[u], h).cost;
      if (best < 0 || c < best) best = c;
    }
    cost += best;
    n_ref += static_cast<long long>(refs[u].size());
  }
  if (n_ref == 0) throw InputError("oracle_wer: empty reference corpus");
  return 100.0 * static_cast<double>(cost) / static_cast<double>(n_ref);
}

namespace {

std::vector<bool> matched_refs(const Words& ref, const Words& hyp) {
  std::vector<bool> ok(ref.size(), false);
  for (const auto& p : edit_alignment(ref, hyp).ops) {
    if (p.op == EditOp::Match) ok[p.ref] = true;
  }
  return ok;
}

void check_masks(const Words& ref, const std::vector<int>& masked) {
  for (int i : masked) {
    if (i < 0 || i >= static_cast<int>(ref.size())) {
      throw InputError("recovery_rate: masked index outside the reference");
    }
  }
}

}  // namespace

RecoveryReport recovery_rate(std::span<const Words> refs, std::span<const Words> hyps,
                             std::span<const std::vector<int>> masked) {
  if (refs.size() != hyps.size() || refs.size() != masked.size()) {
    throw InputError("recovery_rate: argument counts differ");
  }
  RecoveryReport rep;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    check_masks(refs[u], masked[u]);
    if (masked[u].empty()) continue;
    const auto ok = matched_refs(refs[u], hyps[u]);
    for (int i : masked[u]) {
      ++rep.masked;
      if (ok[i]) ++rep.recovered;
    }
  }
  if (rep.masked == 0) throw InputError("recovery_rate: no masked words in the corpus");
  rep.rate = 100.0 * static_cast<double>(rep.recovered) / static_cast<double>(rep.masked);
  return rep;
}

RecoveryReport recovery_rate_nbest(std::span<const Words> refs,
                                   std::span<const std::vector<Words>> nbests,
                                   std::span<const std::vector<int>> masked) {
  if (refs.size() != nbests.size() || refs.size() != masked.size()) {
    throw InputError("recovery_rate: argument counts differ");
  }
  RecoveryReport rep;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    check_masks(refs[u], masked[u]);
    if (masked[u].empty()) continue;
    std::vector<bool> any(refs[u].size(), false);
    for (const auto& h : nbests[u]) {
      const auto ok = matched_refs(refs[u], h);
      for (std::size_t i = 0; i < ok.size(); ++i) any[i] = any[i] || ok[i];
    }
    for (int i : masked[u]) {
      ++rep.masked;
      if (any[i]) ++rep.recovered;
    }
  }
  if (rep.masked == 0) throw InputError("recovery_rate: no masked words in the corpus");
  rep.rate = 100.0 * static_cast<double>(rep.recovered) / static_cast<double>(rep.masked);
  return rep;
}

double relative_improvement(double baseline, double improved) {
  if (!(baseline > 0.0)) throw InputError("relative_improvement: baseline must be > 0");
  return 100.0 * (baseline - improved) / baseline;
}

double relative_improvement_rr(double baseline, double improved) {
  if (!(baseline > 0.0)) throw InputError("relative_improvement: baseline must be > 0");
  return 100.0 * (improved - baseline) / baseline;
}

}  // namespace vcasr
