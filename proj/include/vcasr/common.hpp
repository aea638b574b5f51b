#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vcasr {

// Row-major so that a (T*B) x D sequence block is contiguous per frame.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

// Reserved token ids; lexicon words follow.
inline constexpr int kPadToken = 0;
inline constexpr int kSosToken = 1;
inline constexpr int kEosToken = 2;
inline constexpr int kUnkToken = 3;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class LexiconError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed artifact on disk.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Expands a root seed into an independent stream seed for `label`.
/// splitmix64 over (root ^ fnv1a(label)).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

inline Rng make_rng(std::uint64_t root, std::string_view label) {
  return Rng(derive_seed(root, label));
}

/// Rounds every entry through float32; parameters stored this way survive
/// a float32 checkpoint bit-exactly.
inline void quantize_f32(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

bool all_finite(const Matrix& m);

/// FNV-1a 64 over raw bytes, used for artifact hashes in run metadata.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace vcasr
