#include "test_util.hpp"

#include <cstring>

using namespace vcasr;
using namespace vcasr::testing;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vcasr_test_" + name);
}

}  // namespace

TEST_CASE("vcft layout") {
  Matrix m(2, 3);
  m << 1.0, -2.5, 0.125, 3.0, 1e-3, -0.0;
  const auto bytes = encode_vcft(m);
  REQUIRE(bytes.size() == 4 + 4 + 4 + 6 * 4);
  CHECK(std::string(bytes.data(), 4) == "VCFT");
  std::uint32_t rows = 0, cols = 0;
  std::memcpy(&rows, bytes.data() + 4, 4);
  std::memcpy(&cols, bytes.data() + 8, 4);
  CHECK(rows == 2);
  CHECK(cols == 3);
  float second = 0.0f;
  std::memcpy(&second, bytes.data() + 16, 4);
  CHECK(second == -2.5f);
  float fifth = 0.0f;
  std::memcpy(&fifth, bytes.data() + 12 + 4 * 4, 4);
  CHECK(fifth == 1e-3f);
}

TEST_CASE("vcft round trip is bit exact") {
  Rng rng(1);
  Matrix m = random_matrix(7, 5, rng, 10.0);
  quantize_f32(m);
  const auto path = temp_path("rt.vcft");
  write_vcft(path, m);
  const Matrix r = read_vcft(path);
  CHECK(r.rows() == 7);
  CHECK(r.cols() == 5);
  CHECK(std::memcmp(r.data(), m.data(), sizeof(double) * 35) == 0);
  CHECK(encode_vcft(r) == read_file(path));
  std::filesystem::remove(path);

  CHECK(decode_vcft(encode_vcft(Matrix(0, 4))).cols() == 4);
}

TEST_CASE("malformed binary data") {
  Rng rng(2);
  auto bytes = encode_vcft(random_matrix(3, 3, rng));
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_vcft(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_vcft(trailing), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_vcft(magic), FormatError);
  CHECK_THROWS_AS(read_vcft(temp_path("does_not_exist.vcft")), FormatError);

  std::vector<char> out;
  put_u32(out, 7);
  put_string(out, "abc");
  put_f32(out, 0.5f);
  ByteReader r(out);
  CHECK(r.u32() == 7);
  CHECK(r.string() == "abc");
  CHECK(r.f32() == 0.5f);
  CHECK(r.done());
  CHECK_THROWS_AS(r.u32(), FormatError);
}

TEST_CASE("key value configuration") {
  const auto kv = KeyValueConfig::parse(
      "# comment\n"
      "steps = 10\n"
      "lr = 4e-4   # trailing comment\n"
      "\n"
      "name =  masked run \n"
      "steps = 20\n"
      "vg = true\n"
      "seeds = 1, 2,3\n");
  CHECK(kv.get_int("steps", 0) == 20);
  CHECK(kv.get_double("lr", 0.0) == 4e-4);
  CHECK(kv.get("name", "") == "masked run");
  CHECK(kv.get_bool("vg", false));
  CHECK(kv.get_int_list("seeds", {}) == std::vector<long long>{1, 2, 3});
  CHECK(kv.get_int("missing", 5) == 5);
  CHECK(kv.unused_keys().empty());

  const auto typo = KeyValueConfig::parse("stpes = 3\nsteps = 4\n");
  typo.get_int("steps", 0);
  CHECK(typo.unused_keys() == std::vector<std::string>{"stpes"});

  const auto bad = KeyValueConfig::parse("steps = ten\nflag = maybe\nlist = 1,x\n");
  CHECK_THROWS_AS(bad.get_int("steps", 0), ConfigError);
  CHECK_THROWS_AS(bad.get_double("steps", 0.0), ConfigError);
  CHECK_THROWS_AS(bad.get_bool("flag", false), ConfigError);
  CHECK_THROWS_AS(bad.get_int_list("list", {}), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse(" = 3\n"), ConfigError);

  const auto again = KeyValueConfig::parse(kv.to_string());
  CHECK(again.values() == kv.values());
}

TEST_CASE("train config round trip") {
  TrainConfig tc;
  tc.steps = 123;
  tc.lr = 1e-3;
  tc.seed = 9;
  const TrainConfig r = TrainConfig::from_kv(tc.to_kv());
  CHECK(r.steps == 123);
  CHECK(r.lr == 1e-3);
  CHECK(r.seed == 9);
  tc.label_smoothing = 1.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc.label_smoothing = 0.2;
  tc.batch = 0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}
