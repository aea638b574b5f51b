#pragma once

#include "vcasr/common.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vcasr {

// .vcft layout: "VCFT", u32 rows, u32 cols, rows*cols little-endian float32.
void write_vcft(const std::filesystem::path& path, const Matrix& m);
Matrix read_vcft(const std::filesystem::path& path);
std::vector<char> encode_vcft(const Matrix& m);
Matrix decode_vcft(const std::vector<char>& bytes);

// Little-endian primitive writers shared by the binary formats.
void put_u32(std::vector<char>& out, std::uint32_t v);
void put_f32(std::vector<char>& out, float v);
void put_string(std::vector<char>& out, const std::string& s);

class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& bytes) : bytes_(bytes) {}
  std::uint32_t u32();
  float f32();
  std::string string();
  void expect_magic(const char (&magic)[5]);
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const;
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<char>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Flat `key = value` configuration. `#` starts a comment; later keys win.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  std::string get(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long long> get_int_list(const std::string& key, std::vector<long long> fallback) const;

  /// Keys that were read through a getter; used to reject typos.
  std::vector<std::string> unused_keys() const;
  std::string to_string() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

}  // namespace vcasr
