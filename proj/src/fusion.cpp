#include "vcasr/fusion.hpp"

namespace vcasr {

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "cat" || s == "Cat") return FusionMode::Cat;
  if (s == "gate" || s == "Gate") return FusionMode::Gate;
  throw ConfigError("fusion: expected cat or gate, got '" + s + "'");
}

std::string to_string(FusionMode m) { return m == FusionMode::Cat ? "cat" : "gate"; }

Fusion::Fusion(ParamStore& store, const std::string& prefix, FusionMode mode, int k, int d,
               Rng& rng)
    : mode_(mode), k_(k), d_(d) {
  if (k < 1 || d < 1) throw ConfigError(prefix + ": fusion needs k >= 1 and d >= 1");
  if (mode == FusionMode::Cat) {
    cat_W = store.add(prefix + ".cat.W", k * d, d);
    cat_b = store.add(prefix + ".cat.b", 1, d);
    init_xavier(*cat_W, rng);
  } else {
    for (int c = 0; c < k; ++c) {
      const std::string p = prefix + ".gate." + std::to_string(c);
      gate_W.push_back(store.add(p + ".W", (k + 1) * d, d));
      gate_b.push_back(store.add(p + ".b", 1, d));
      init_xavier(*gate_W.back(), rng);
    }
  }
}

void Fusion::check(std::span<const Matrix> contexts, const Matrix& dec) const {
  if (static_cast<int>(contexts.size()) != k_) {
    throw ShapeError("fusion expects " + std::to_string(k_) + " contexts, got " +
                     std::to_string(contexts.size()));
  }
  if (dec.cols() != d_) throw ShapeError("fusion decoder output has the wrong width");
  for (const auto& c : contexts) {
    if (c.cols() != d_ || c.rows() != dec.rows()) {
      throw ShapeError("fusion context has the wrong shape");
    }
  }
}

Matrix Fusion::forward(std::span<const Matrix> contexts, const Matrix& dec, Cache* cache) const {
  check(contexts, dec);
  const auto B = dec.rows();
  const int width = mode_ == FusionMode::Cat ? k_ * d_ : (k_ + 1) * d_;
  Matrix input(B, width);
  for (int c = 0; c < k_; ++c) input.middleCols(c * d_, d_) = contexts[c];
  if (mode_ == FusionMode::Gate) input.rightCols(d_) = dec;

  Matrix out = dec;
  if (mode_ == FusionMode::Cat) {
    out.noalias() += input * cat_W->value;
    out.rowwise() += cat_b->value.row(0);
  } else {
    if (cache) cache->gates.resize(k_);
    for (int c = 0; c < k_; ++c) {
      Matrix pre = input * gate_W[c]->value;
      pre.rowwise() += gate_b[c]->value.row(0);
      Matrix gate = (1.0 + (-pre.array()).exp()).inverse().matrix();
      out.array() += contexts[c].array() * gate.array();
      if (cache) cache->gates[c] = std::move(gate);
    }
  }
  if (cache) cache->input = std::move(input);
  return out;
}

void Fusion::backward(const Cache& c, std::span<const Matrix> contexts, const Matrix& dout,
                      std::vector<Matrix>& dcontexts, Matrix& ddec) {
  Matrix dinput;
  if (mode_ == FusionMode::Cat) {
    cat_W->grad.noalias() += c.input.transpose() * dout;
    cat_b->grad += dout.colwise().sum();
    dinput = dout * cat_W->value.transpose();
  } else {
    dinput = Matrix::Zero(dout.rows(), (k_ + 1) * d_);
  }
  dcontexts.assign(k_, Matrix());
  for (int k = 0; k < k_; ++k) dcontexts[k] = dinput.middleCols(k * d_, d_);
  ddec = dout;
  if (mode_ == FusionMode::Gate) {
    for (int k = 0; k < k_; ++k) {
      const auto& g = c.gates[k].array();
      dcontexts[k].array() += dout.array() * g;
      const Matrix dpre = (dout.array() * contexts[k].array() * g * (1.0 - g)).matrix();
      gate_W[k]->grad.noalias() += c.input.transpose() * dpre;
      gate_b[k]->grad += dpre.colwise().sum();
      dinput.noalias() += dpre * gate_W[k]->value.transpose();
    }
    for (int k = 0; k < k_; ++k) dcontexts[k] += dinput.middleCols(k * d_, d_);
    ddec += dinput.rightCols(d_);
  }
}

VatAdapter::VatAdapter(ParamStore& store, const std::string& prefix, int d_visual, int d_audio,
                       Rng& rng)
    : proj(store, prefix, d_visual, d_audio, rng) {}

Matrix vat_adapt(const Matrix& audio, const RowVector& video_vector, const Linear& proj) {
  if (audio.cols() != proj.out() || video_vector.size() != proj.in()) {
    throw ShapeError("vat: audio or video width does not match the projection");
  }
  const Matrix shift = proj.forward(Matrix(video_vector));
  Matrix out = audio;
  out.rowwise() += shift.row(0);
  return out;
}

Matrix VatAdapter::adapt(const Matrix& audio, const RowVector& video_vector) const {
  return vat_adapt(audio, video_vector, proj);
}

void VatAdapter::backward(const RowVector& video_vector, const Matrix& dadapted) {
  const Matrix dshift = dadapted.colwise().sum();
  proj.backward(Matrix(video_vector), dshift);
}

}  // namespace vcasr
