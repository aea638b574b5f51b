#include "vcasr/modelkit.hpp"

#include <cmath>
#include <limits>

namespace vcasr {

namespace {

Eigen::ArrayXXd sigmoid_array(const Eigen::ArrayXXd& x) {
  return (1.0 + (-x).exp()).inverse();
}

void add_row_bias(Matrix& m, const Matrix& bias) {
  m.rowwise() += bias.row(0);
}

}  // namespace

Param* ParamStore::add(const std::string& name, int rows, int cols) {
  if (find(name)) throw ConfigError("duplicate parameter " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.back().get();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  return const_cast<ParamStore*>(this)->find(name);
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

long long ParamStore::num_values() const {
  long long n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a(p->name.data(), p->name.size(), h);
    h = fnv1a(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()), h);
  }
  return h;
}

void init_xavier(Param& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = u(rng);
}

Linear::Linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng) {
  W = store.add(prefix + ".W", in, out);
  b = store.add(prefix + ".b", 1, out);
  init_xavier(*W, rng);
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.cols() != W->value.rows()) {
    throw ShapeError(W->name + ": input width " + std::to_string(x.cols()) + " != " +
                     std::to_string(W->value.rows()));
  }
  Matrix y = x * W->value;
  add_row_bias(y, b->value);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
  W->grad.noalias() += x.transpose() * dy;
  b->grad += dy.colwise().sum();
  return dy * W->value.transpose();
}

Gru::Gru(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng)
    : in_(in), hidden_(hidden) {
  Wx = store.add(prefix + ".Wx", in, 3 * hidden);
  bx = store.add(prefix + ".bx", 1, 3 * hidden);
  Wh = store.add(prefix + ".Wh", hidden, 3 * hidden);
  bh = store.add(prefix + ".bh", 1, 3 * hidden);
  init_xavier(*Wx, rng);
  init_xavier(*Wh, rng);
}

Matrix Gru::step(const Matrix& x, const Matrix& h_prev, StepCache* cache) const {
  const int H = hidden_;
  if (x.cols() != in_ || h_prev.cols() != H || x.rows() != h_prev.rows()) {
    throw ShapeError(Wx->name + ": GRU step shape mismatch");
  }
  Matrix gx = x * Wx->value;
  add_row_bias(gx, bx->value);
  Matrix gh = h_prev * Wh->value;
  add_row_bias(gh, bh->value);
  const Eigen::ArrayXXd r = sigmoid_array(gx.leftCols(H).array() + gh.leftCols(H).array());
  const Eigen::ArrayXXd z = sigmoid_array(gx.middleCols(H, H).array() + gh.middleCols(H, H).array());
  const Eigen::ArrayXXd ghn = gh.rightCols(H).array();
  const Eigen::ArrayXXd n = tanh_array(gx.rightCols(H).array() + r * ghn);
  Matrix h = ((1.0 - z) * n + z * h_prev.array()).matrix();
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = r.matrix();
    cache->z = z.matrix();
    cache->n = n.matrix();
    cache->ghn = ghn.matrix();
  }
  return h;
}

void Gru::step_backward(const StepCache& c, const Matrix& dh, Matrix& dx, Matrix& dh_prev) {
  const int H = hidden_;
  const auto r = c.r.array();
  const auto z = c.z.array();
  const auto n = c.n.array();
  const auto d = dh.array();
  const Eigen::ArrayXXd dnp = d * (1.0 - z) * (1.0 - n * n);
  const Eigen::ArrayXXd dzp = d * (c.h_prev.array() - n) * z * (1.0 - z);
  const Eigen::ArrayXXd drp = dnp * c.ghn.array() * r * (1.0 - r);
  Matrix dgx(dh.rows(), 3 * H), dgh(dh.rows(), 3 * H);
  dgx.leftCols(H) = drp.matrix();
  dgx.middleCols(H, H) = dzp.matrix();
  dgx.rightCols(H) = dnp.matrix();
  dgh.leftCols(H) = drp.matrix();
  dgh.middleCols(H, H) = dzp.matrix();
  dgh.rightCols(H) = (dnp * r).matrix();
  Wx->grad.noalias() += c.x.transpose() * dgx;
  bx->grad += dgx.colwise().sum();
  Wh->grad.noalias() += c.h_prev.transpose() * dgh;
  bh->grad += dgh.colwise().sum();
  dx = dgx * Wx->value.transpose();
  dh_prev = (d * z).matrix();
  dh_prev.noalias() += dgh * Wh->value.transpose();
}

Matrix Gru::forward_seq(const Matrix& x, int T, int B, std::span<const int> lengths,
                        bool reverse, SeqCache* cache) const {
  const int H = hidden_;
  if (x.rows() != static_cast<Eigen::Index>(T) * B || x.cols() != in_) {
    throw ShapeError(Wx->name + ": sequence input shape mismatch");
  }
  Matrix gx = x * Wx->value;
  add_row_bias(gx, bx->value);
  Matrix out(x.rows(), H);
  if (cache) {
    cache->T = T;
    cache->B = B;
    cache->reverse = reverse;
    cache->x = x;
    cache->h_prev.resize(x.rows(), H);
    cache->r.resize(x.rows(), H);
    cache->z.resize(x.rows(), H);
    cache->n.resize(x.rows(), H);
    cache->ghn.resize(x.rows(), H);
    cache->valid.assign(x.rows(), 0.0);
  }
  Matrix h = Matrix::Zero(B, H);
  Matrix gh(B, 3 * H);
  for (int s = 0; s < T; ++s) {
    const int t = reverse ? T - 1 - s : s;
    const Eigen::Index row0 = static_cast<Eigen::Index>(t) * B;
    gh.noalias() = h * Wh->value;
    add_row_bias(gh, bh->value);
    const auto gxt = gx.middleRows(row0, B);
    const Eigen::ArrayXXd r = sigmoid_array(gxt.leftCols(H).array() + gh.leftCols(H).array());
    const Eigen::ArrayXXd z =
        sigmoid_array(gxt.middleCols(H, H).array() + gh.middleCols(H, H).array());
    const Eigen::ArrayXXd ghn = gh.rightCols(H).array();
    const Eigen::ArrayXXd n = tanh_array(gxt.rightCols(H).array() + r * ghn);
    if (cache) {
      cache->h_prev.middleRows(row0, B) = h;
      cache->r.middleRows(row0, B) = r.matrix();
      cache->z.middleRows(row0, B) = z.matrix();
      cache->n.middleRows(row0, B) = n.matrix();
      cache->ghn.middleRows(row0, B) = ghn.matrix();
    }
    const Eigen::ArrayXXd hnew = (1.0 - z) * n + z * h.array();
    for (int b = 0; b < B; ++b) {
      if (t < lengths[b]) {
        h.row(b) = hnew.row(b).matrix();
        if (cache) cache->valid[row0 + b] = 1.0;
      }
    }
    out.middleRows(row0, B) = h;
  }
  return out;
}

Matrix Gru::backward_seq(const SeqCache& c, const Matrix& dout) {
  const int H = hidden_;
  const int T = c.T, B = c.B;
  Matrix dgx = Matrix::Zero(c.x.rows(), 3 * H);
  Matrix dgh = Matrix::Zero(c.x.rows(), 3 * H);
  Matrix carry = Matrix::Zero(B, H);
  for (int s = T - 1; s >= 0; --s) {
    const int t = c.reverse ? T - 1 - s : s;
    const Eigen::Index row0 = static_cast<Eigen::Index>(t) * B;
    Matrix total = dout.middleRows(row0, B) + carry;
    Matrix dh = total;
    for (int b = 0; b < B; ++b) {
      if (c.valid[row0 + b] == 0.0) {
        dh.row(b).setZero();
      } else {
        total.row(b).setZero();
      }
    }
    // `total` now holds the pass-through gradient of carried rows.
    const auto r = c.r.middleRows(row0, B).array();
    const auto z = c.z.middleRows(row0, B).array();
    const auto n = c.n.middleRows(row0, B).array();
    const auto d = dh.array();
    const Eigen::ArrayXXd dnp = d * (1.0 - z) * (1.0 - n * n);
    const Eigen::ArrayXXd dzp = d * (c.h_prev.middleRows(row0, B).array() - n) * z * (1.0 - z);
    const Eigen::ArrayXXd drp = dnp * c.ghn.middleRows(row0, B).array() * r * (1.0 - r);
    auto gx = dgx.middleRows(row0, B);
    auto gh = dgh.middleRows(row0, B);
    gx.leftCols(H) = drp.matrix();
    gx.middleCols(H, H) = dzp.matrix();
    gx.rightCols(H) = dnp.matrix();
    gh.leftCols(H) = drp.matrix();
    gh.middleCols(H, H) = dzp.matrix();
    gh.rightCols(H) = (dnp * r).matrix();
    carry = total + (d * z).matrix();
    carry.noalias() += gh * Wh->value.transpose();
  }
  Wx->grad.noalias() += c.x.transpose() * dgx;
  bx->grad += dgx.colwise().sum();
  Wh->grad.noalias() += c.h_prev.transpose() * dgh;
  bh->grad += dgh.colwise().sum();
  return dgx * Wx->value.transpose();
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, int dim) {
  gain = store.add(prefix + ".gain", 1, dim);
  bias = store.add(prefix + ".bias", 1, dim);
  gain->value.setOnes();
}

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
  const auto D = static_cast<double>(x.cols());
  Matrix xhat(x.rows(), x.cols());
  Vector inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / D;
    const double var = (x.row(i).array() - mean).square().sum() / D;
    inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * inv_std[i];
  }
  Matrix y = (xhat.array().rowwise() * gain->value.row(0).array()).matrix();
  y.rowwise() += bias->value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const Cache& c, const Matrix& dy) {
  gain->grad += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  bias->grad += dy.colwise().sum();
  const Matrix dxhat = (dy.array().rowwise() * gain->value.row(0).array()).matrix();
  const auto D = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / D;
    const double mean_dx = dxhat.row(i).dot(c.xhat.row(i)) / D;
    dx.row(i) = c.inv_std[i] * (dxhat.row(i).array() - mean_d - c.xhat.row(i).array() * mean_dx);
  }
  return dx;
}

EncoderStack::EncoderStack(ParamStore& store, const std::string& prefix, int n_layers, int in,
                           int hidden, Rng& rng)
    : in_(in), hidden_(hidden) {
  if (n_layers < 1) throw ConfigError(prefix + ": need at least one encoder layer");
  int width = in;
  for (int l = 0; l < n_layers; ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    Layer layer;
    layer.fwd = Gru(store, p + ".fwd", width, hidden, rng);
    layer.bwd = Gru(store, p + ".bwd", width, hidden, rng);
    layer.norm = LayerNorm(store, p + ".norm", 2 * hidden);
    layers_.push_back(layer);
    width = 2 * hidden;
  }
}

Matrix EncoderStack::forward(const Matrix& x, int T, int B, std::span<const int> lengths,
                             Cache* cache) const {
  if (T < 1) throw ShapeError("encoder input needs at least one frame");
  if (x.cols() != in_) {
    throw ShapeError("encoder input width " + std::to_string(x.cols()) + " != " +
                     std::to_string(in_));
  }
  if (!all_finite(x)) throw NumericError("non-finite encoder input");
  if (cache) {
    cache->T = T;
    cache->B = B;
    cache->layers.assign(layers_.size(), {});
  }
  Matrix h = x;
  Matrix cat(x.rows(), 2 * hidden_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto* lc = cache ? &cache->layers[l] : nullptr;
    cat.leftCols(hidden_) =
        layers_[l].fwd.forward_seq(h, T, B, lengths, false, lc ? &lc->fwd : nullptr);
    cat.rightCols(hidden_) =
        layers_[l].bwd.forward_seq(h, T, B, lengths, true, lc ? &lc->bwd : nullptr);
    h = layers_[l].norm.forward(cat, lc ? &lc->norm : nullptr);
  }
  return h;
}

Matrix EncoderStack::backward(const Cache& c, const Matrix& dout) {
  Matrix d = dout;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    auto& layer = layers_[l];
    const Matrix dcat = layer.norm.backward(c.layers[l].norm, d);
    Matrix dx = layer.fwd.backward_seq(c.layers[l].fwd, dcat.leftCols(hidden_));
    dx += layer.bwd.backward_seq(c.layers[l].bwd, dcat.rightCols(hidden_));
    d = std::move(dx);
  }
  return d;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

RowVector log_softmax(const RowVector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

LossResult label_smoothed_loss(const Matrix& logits, std::span<const int> targets,
                               std::span<const std::uint8_t> mask, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InputError("label smoothing must lie in [0,1)");
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows() ||
      mask.size() != targets.size()) {
    throw ShapeError("loss: targets/mask do not match logits rows");
  }
  const auto V = logits.cols();
  LossResult out;
  out.dlogits = Matrix::Zero(logits.rows(), V);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (mask[i]) ++out.count;
  }
  if (out.count == 0) throw InputError("loss over an empty set of positions");
  const double inv = 1.0 / out.count;
  const double off = epsilon / static_cast<double>(V);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    const int t = targets[i];
    if (t < 0 || t >= V) throw InputError("target id " + std::to_string(t) + " out of range");
    const RowVector logp = log_softmax(logits.row(i));
    out.loss -= ((1.0 - epsilon) * logp[t] + off * logp.sum()) * inv;
    auto d = out.dlogits.row(i);
    d = logp.array().exp().matrix();
    d.array() -= off;
    d[t] -= 1.0 - epsilon;
    d *= inv;
  }
  return out;
}

Adam::Adam(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

double Adam::effective_lr(const AdamConfig& c, long long step) {
  return std::ldexp(c.lr, -static_cast<int>(step / c.halving_period));
}

double Adam::effective_lr() const { return effective_lr(config_, step_); }

double Adam::step() {
  double sq = 0.0;
  for (auto* p : params_) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw NumericError("non-finite gradient norm at optimizer step " + std::to_string(step_));
  }
  const double scale = norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
  const double lr = effective_lr();
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto g = (params_[i]->grad * scale).array();
    m_[i].array() = config_.beta1 * m_[i].array() + (1.0 - config_.beta1) * g;
    v_[i].array() = config_.beta2 * v_[i].array() + (1.0 - config_.beta2) * g.square();
    params_[i]->value.array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
  return norm;
}

GradCheckReport gradient_check(std::span<Param* const> params,
                               const std::function<double(bool)>& loss_fn, double h,
                               double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  loss_fn(true);
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param* p = params[k];
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + h;
      const double lp = loss_fn(false);
      v = saved - h;
      const double lm = loss_fn(false);
      v = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[k].data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (!(rel <= report.max_rel_error)) {
        report.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        report.worst_param = p->name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace vcasr
