#include "vcasr/checkpoint.hpp"

#include "vcasr/io.hpp"

namespace vcasr {

const Matrix* Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

std::uint64_t Checkpoint::hash() const {
  const auto bytes = encode_checkpoint(*this);
  return fnv1a(bytes.data(), bytes.size());
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<char> out = {'V', 'C', 'K', 'P'};
  put_u32(out, kCheckpointVersion);
  put_string(out, ckpt.config);
  for (const auto& [name, m] : ckpt.tensors) {
    put_string(out, name);
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f32(out, static_cast<float>(m.data()[i]));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  ByteReader r(bytes);
  r.expect_magic("VCKP");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (want " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.config = r.string();
  while (!r.done()) {
    auto name = r.string();
    const auto rank = r.u32();
    if (rank < 1 || rank > 2) throw FormatError(name + ": unsupported tensor rank");
    const auto rows = rank == 2 ? r.u32() : 1u;
    const auto cols = r.u32();
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f32();
    ckpt.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Checkpoint snapshot(const ParamStore& store, std::string config) {
  Checkpoint ckpt;
  ckpt.config = std::move(config);
  for (const auto* p : store.all()) {
    Matrix m = p->value;
    quantize_f32(m);
    ckpt.tensors.emplace_back(p->name, std::move(m));
  }
  return ckpt;
}

void restore(ParamStore& store, const Checkpoint& ckpt) {
  for (auto* p : store.all()) {
    const Matrix* m = ckpt.tensor(p->name);
    if (!m) throw FormatError("checkpoint lacks tensor " + p->name);
    if (m->rows() != p->value.rows() || m->cols() != p->value.cols()) {
      throw FormatError("checkpoint tensor " + p->name + " has the wrong shape");
    }
    p->value = *m;
  }
}

}  // namespace vcasr
