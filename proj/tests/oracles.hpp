#pragma once

// Independent reference evaluations written with plain loops. They share no
// code with the library beyond the container types.

#include "vcasr/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace vcasr::oracle {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// out_j = sum_i concat(c)_i W_ij + b_j + dec_j
inline std::vector<double> fuse_cat(const std::vector<std::vector<double>>& contexts,
                                    const std::vector<double>& dec, const Matrix& W,
                                    const Matrix& b) {
  std::vector<double> in;
  for (const auto& c : contexts) in.insert(in.end(), c.begin(), c.end());
  std::vector<double> out(dec.size());
  for (std::size_t j = 0; j < dec.size(); ++j) {
    double s = b(0, static_cast<Eigen::Index>(j)) + dec[j];
    for (std::size_t i = 0; i < in.size(); ++i) {
      s += in[i] * W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    out[j] = s;
  }
  return out;
}

/// out = dec + sum_c c_c * logistic(concat(c_1..c_k, dec) W_c + b_c)
inline std::vector<double> fuse_gate(const std::vector<std::vector<double>>& contexts,
                                     const std::vector<double>& dec,
                                     const std::vector<Matrix>& W, const std::vector<Matrix>& b) {
  std::vector<double> in;
  for (const auto& c : contexts) in.insert(in.end(), c.begin(), c.end());
  in.insert(in.end(), dec.begin(), dec.end());
  std::vector<double> out = dec;
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    for (std::size_t j = 0; j < dec.size(); ++j) {
      double s = b[c](0, static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < in.size(); ++i) {
        s += in[i] * W[c](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      out[j] += contexts[c][j] * logistic(s);
    }
  }
  return out;
}

/// S_ij = e_i . v_j + 2
inline std::vector<std::vector<double>> similarity(const std::vector<std::vector<double>>& e,
                                                   const std::vector<std::vector<double>>& v) {
  std::vector<std::vector<double>> s(e.size(), std::vector<double>(v.size()));
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < v[j].size(); ++k) dot += e[i][k] * v[j][k];
      s[i][j] = dot + 2.0;
    }
  }
  return s;
}

/// c_i = sum_j (S_ij / sum_l S_il) v_j
inline std::vector<std::vector<double>> vg_context(const std::vector<std::vector<double>>& e,
                                                   const std::vector<std::vector<double>>& v) {
  const auto s = similarity(e, v);
  std::vector<std::vector<double>> c(e.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < e.size(); ++i) {
    double total = 0.0;
    for (double x : s[i]) total += x;
    for (std::size_t j = 0; j < v.size(); ++j) {
      for (std::size_t k = 0; k < v[j].size(); ++k) c[i][k] += s[i][j] / total * v[j][k];
    }
  }
  return c;
}

namespace detail {

// True if some edit script turning r[i..] into h[j..] costs at most `budget`.
// Exhaustive depth-first search; the only pruning is the length difference,
// which every script must pay.
inline bool reachable(const std::vector<int>& r, const std::vector<int>& h, std::size_t i,
                      std::size_t j, int budget) {
  const int rest = std::abs(static_cast<int>(r.size() - i) - static_cast<int>(h.size() - j));
  if (budget < rest) return false;
  if (i == r.size() || j == h.size()) return true;
  if (reachable(r, h, i + 1, j + 1, budget - (r[i] == h[j] ? 0 : 1))) return true;
  if (budget == 0) return false;
  return reachable(r, h, i + 1, j, budget - 1) || reachable(r, h, i, j + 1, budget - 1);
}

}  // namespace detail

/// Smallest number of unit-cost edits, found by searching all edit scripts
/// with increasing budget.
inline int edit_cost(const std::vector<int>& r, const std::vector<int>& h) {
  int budget = 0;
  while (!detail::reachable(r, h, 0, 0, budget)) ++budget;
  return budget;
}

inline int edit_cost(const std::vector<std::string>& r, const std::vector<std::string>& h) {
  std::vector<std::string> symbols;
  auto code = [&](const std::string& w) {
    auto it = std::find(symbols.begin(), symbols.end(), w);
    if (it == symbols.end()) {
      symbols.push_back(w);
      return static_cast<int>(symbols.size()) - 1;
    }
    return static_cast<int>(it - symbols.begin());
  };
  std::vector<int> a, b;
  for (const auto& w : r) a.push_back(code(w));
  for (const auto& w : h) b.push_back(code(w));
  return edit_cost(a, b);
}

}  // namespace vcasr::oracle
