#include <fmt/format.h>

#include <Eigen/Dense>
#include <cmath>

#include "train_loop.hpp"
#include "vrh/common.hpp"
#include "vrh/probes.hpp"
#include "vrh/rng.hpp"

namespace vrh {

namespace {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CRow = Eigen::Map<const RowVec>;
using MRow = Eigen::Map<RowVec>;

constexpr double kLnEps = 1e-6;
constexpr double kInitStd = 0.02;

struct Slot {
  std::size_t off = 0;
  int rows = 0;
  int cols = 0;
};

struct BlockSlots {
  Slot ln1_g, ln1_b, wq, bq, wkv, bkv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

CMap mat(const double* p, const Slot& s) { return CMap(p + s.off, s.rows, s.cols); }
MMap mat(double* p, const Slot& s) { return MMap(p + s.off, s.rows, s.cols); }
CRow row(const double* p, const Slot& s) { return CRow(p + s.off, s.cols); }
MRow row(double* p, const Slot& s) { return MRow(p + s.off, s.cols); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

struct LnCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

struct AttnCache {
  Mat qin, kvin, q, k, v, o;
  std::vector<Mat> p;
};

struct MlpCache {
  Mat in, pre, act;
};

struct BlockCache {
  LnCache ln1;
  Mat h;
  AttnCache attn;
  LnCache ln2;
  MlpCache mlp;
};

}  // namespace

struct AttentiveProbe::Impl {
  int d = 0;
  int heads = 0;
  int hidden = 0;
  int classes = 0;
  std::vector<BlockSlots> self_blocks;
  BlockSlots cross;
  Slot query, wc, bc;
  std::size_t total = 0;

  enum class Init { Zero, One, Normal };
  std::vector<std::pair<Slot, Init>> init_plan;
  std::vector<char> decay;

  Slot alloc(int rows, int cols, Init init, bool decayed) {
    Slot s{total, rows, cols};
    total += static_cast<std::size_t>(rows) * cols;
    init_plan.emplace_back(s, init);
    decay.resize(total, 0);
    if (decayed) std::fill(decay.begin() + static_cast<std::ptrdiff_t>(s.off), decay.end(), 1);
    return s;
  }

  BlockSlots alloc_block() {
    BlockSlots b;
    b.ln1_g = alloc(1, d, Init::One, false);
    b.ln1_b = alloc(1, d, Init::Zero, false);
    b.wq = alloc(d, d, Init::Normal, true);
    b.bq = alloc(1, d, Init::Zero, false);
    b.wkv = alloc(d, 2 * d, Init::Normal, true);
    b.bkv = alloc(1, 2 * d, Init::Zero, false);
    b.wo = alloc(d, d, Init::Normal, true);
    b.bo = alloc(1, d, Init::Zero, false);
    b.ln2_g = alloc(1, d, Init::One, false);
    b.ln2_b = alloc(1, d, Init::Zero, false);
    b.w1 = alloc(d, hidden, Init::Normal, true);
    b.b1 = alloc(1, hidden, Init::Zero, false);
    b.w2 = alloc(hidden, d, Init::Normal, true);
    b.b2 = alloc(1, d, Init::Zero, false);
    return b;
  }

  Impl(int dim, int n_heads, double mlp_ratio, int depth, int n_classes)
      : d(dim), heads(n_heads), hidden(std::max(1, static_cast<int>(dim * mlp_ratio))), classes(n_classes) {
    for (int i = 0; i + 1 < depth; ++i) self_blocks.push_back(alloc_block());
    query = alloc(1, d, Init::Normal, false);
    cross = alloc_block();
    wc = alloc(d, classes, Init::Normal, true);
    bc = alloc(1, classes, Init::Zero, false);
  }

  // ---- layer norm over rows

  Mat ln_forward(const Mat& x, const double* p, const Slot& g, const Slot& b, LnCache& c) const {
    const auto n = x.rows();
    c.xhat.resize(n, d);
    c.rstd.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = x.row(i).mean();
      const RowVec xc = x.row(i).array() - mu;
      const double var = xc.squaredNorm() / d;
      c.rstd(i) = 1.0 / std::sqrt(var + kLnEps);
      c.xhat.row(i) = xc * c.rstd(i);
    }
    Mat y = c.xhat.array().rowwise() * row(p, g).array();
    y.rowwise() += row(p, b);
    return y;
  }

  Mat ln_backward(const Mat& dy, const double* p, double* gr, const Slot& g, const Slot& b, const LnCache& c) const {
    row(gr, g) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    row(gr, b) += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * row(p, g).array();
    Mat dx(dy.rows(), d);
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const double m1 = dxhat.row(i).mean();
      const double m2 = dxhat.row(i).dot(c.xhat.row(i)) / d;
      dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2).matrix();
    }
    return dx;
  }

  // ---- multi-head attention: queries from qin, keys/values from kvin

  Mat attn_forward(const Mat& qin, const Mat& kvin, const double* p, const BlockSlots& s, AttnCache& c) const {
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    c.qin = qin;
    c.kvin = kvin;
    c.q = qin * mat(p, s.wq);
    c.q.rowwise() += row(p, s.bq);
    Mat kv = kvin * mat(p, s.wkv);
    kv.rowwise() += row(p, s.bkv);
    c.k = kv.leftCols(d);
    c.v = kv.rightCols(d);
    c.o.resize(qin.rows(), d);
    c.p.assign(heads, Mat());
    for (int h = 0; h < heads; ++h) {
      Mat sc = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
      for (Eigen::Index i = 0; i < sc.rows(); ++i) {
        const double m = sc.row(i).maxCoeff();
        sc.row(i) = (sc.row(i).array() - m).exp().matrix();
        sc.row(i) /= sc.row(i).sum();
      }
      c.o.middleCols(h * dh, dh) = sc * c.v.middleCols(h * dh, dh);
      c.p[h] = std::move(sc);
    }
    Mat out = c.o * mat(p, s.wo);
    out.rowwise() += row(p, s.bo);
    return out;
  }

  void attn_backward(const Mat& dout, const double* p, double* gr, const BlockSlots& s, const AttnCache& c, Mat& dqin,
                     Mat& dkvin) const {
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    mat(gr, s.wo) += c.o.transpose() * dout;
    row(gr, s.bo) += dout.colwise().sum();
    const Mat d_o = dout * mat(p, s.wo).transpose();
    Mat dq(c.q.rows(), d), dk(c.k.rows(), d), dv(c.v.rows(), d);
    for (int h = 0; h < heads; ++h) {
      const auto doh = d_o.middleCols(h * dh, dh);
      const Mat& ph = c.p[h];
      dv.middleCols(h * dh, dh) = ph.transpose() * doh;
      const Mat dp = doh * c.v.middleCols(h * dh, dh).transpose();
      const Eigen::VectorXd rs = (dp.array() * ph.array()).rowwise().sum();
      const Mat ds = (ph.array() * (dp.array().colwise() - rs.array())).matrix() * scale;
      dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    mat(gr, s.wq) += c.qin.transpose() * dq;
    row(gr, s.bq) += dq.colwise().sum();
    dqin = dq * mat(p, s.wq).transpose();
    Mat dkv(c.kvin.rows(), 2 * d);
    dkv.leftCols(d) = dk;
    dkv.rightCols(d) = dv;
    mat(gr, s.wkv) += c.kvin.transpose() * dkv;
    row(gr, s.bkv) += dkv.colwise().sum();
    dkvin = dkv * mat(p, s.wkv).transpose();
  }

  // ---- MLP

  Mat mlp_forward(const Mat& in, const double* p, const BlockSlots& s, MlpCache& c) const {
    c.in = in;
    c.pre = in * mat(p, s.w1);
    c.pre.rowwise() += row(p, s.b1);
    c.act = c.pre.unaryExpr([](double x) { return gelu(x); });
    Mat out = c.act * mat(p, s.w2);
    out.rowwise() += row(p, s.b2);
    return out;
  }

  Mat mlp_backward(const Mat& dout, const double* p, double* gr, const BlockSlots& s, const MlpCache& c) const {
    mat(gr, s.w2) += c.act.transpose() * dout;
    row(gr, s.b2) += dout.colwise().sum();
    const Mat dact = dout * mat(p, s.w2).transpose();
    const Mat dpre = dact.cwiseProduct(c.pre.unaryExpr([](double x) { return gelu_grad(x); }));
    mat(gr, s.w1) += c.in.transpose() * dpre;
    row(gr, s.b1) += dpre.colwise().sum();
    return dpre * mat(p, s.w1).transpose();
  }

  // ---- blocks

  Mat self_forward(const Mat& x, const double* p, const BlockSlots& s, BlockCache& c) const {
    c.h = ln_forward(x, p, s.ln1_g, s.ln1_b, c.ln1);
    const Mat x1 = x + attn_forward(c.h, c.h, p, s, c.attn);
    const Mat h2 = ln_forward(x1, p, s.ln2_g, s.ln2_b, c.ln2);
    return x1 + mlp_forward(h2, p, s, c.mlp);
  }

  Mat self_backward(const Mat& dout, const double* p, double* gr, const BlockSlots& s, const BlockCache& c) const {
    const Mat dx1 = dout + ln_backward(mlp_backward(dout, p, gr, s, c.mlp), p, gr, s.ln2_g, s.ln2_b, c.ln2);
    Mat dq, dkv;
    attn_backward(dx1, p, gr, s, c.attn, dq, dkv);
    return dx1 + ln_backward(dq + dkv, p, gr, s.ln1_g, s.ln1_b, c.ln1);
  }

  Mat cross_forward(const Mat& q, const Mat& x, const double* p, const BlockSlots& s, BlockCache& c) const {
    c.h = ln_forward(x, p, s.ln1_g, s.ln1_b, c.ln1);
    const Mat q1 = q + attn_forward(q, c.h, p, s, c.attn);
    const Mat h2 = ln_forward(q1, p, s.ln2_g, s.ln2_b, c.ln2);
    return q1 + mlp_forward(h2, p, s, c.mlp);
  }

  // Returns d(loss)/dq; the token gradient is discarded (features are frozen).
  Mat cross_backward(const Mat& dout, const double* p, double* gr, const BlockSlots& s, const BlockCache& c,
                     Mat& dx) const {
    const Mat dq1 = dout + ln_backward(mlp_backward(dout, p, gr, s, c.mlp), p, gr, s.ln2_g, s.ln2_b, c.ln2);
    Mat dq, dh;
    attn_backward(dq1, p, gr, s, c.attn, dq, dh);
    dx = ln_backward(dh, p, gr, s.ln1_g, s.ln1_b, c.ln1);
    return dq1 + dq;
  }

  // Cross-entropy of one sample. With `gr`, adds `weight` * gradient into it.
  double sample(const double* p, const Mat& tokens, int label, double* gr, double weight,
                std::vector<double>* logits_out) const {
    std::vector<BlockCache> caches(self_blocks.size());
    Mat x = tokens;
    for (std::size_t i = 0; i < self_blocks.size(); ++i) x = self_forward(x, p, self_blocks[i], caches[i]);
    BlockCache cc;
    const Mat q0 = row(p, query);
    const Mat q = cross_forward(q0, x, p, cross, cc);
    RowVec lg = q * mat(p, wc);
    lg += row(p, bc);
    if (logits_out) logits_out->assign(lg.data(), lg.data() + lg.size());
    if (label < 0) return 0.0;
    const double m = lg.maxCoeff();
    const RowVec e = (lg.array() - m).exp().matrix();
    const double z = e.sum();
    const double loss = -(lg(label) - m - std::log(z));
    if (!gr) return loss;

    RowVec dl = e / z;
    dl(label) -= 1.0;
    dl *= weight;
    mat(gr, wc) += q.transpose() * dl;
    row(gr, bc) += dl;
    const Mat dq = dl * mat(p, wc).transpose();
    Mat dx;
    row(gr, query) += cross_backward(dq, p, gr, cross, cc, dx);
    for (std::size_t i = self_blocks.size(); i-- > 0;) dx = self_backward(dx, p, gr, self_blocks[i], caches[i]);
    return loss;
  }
};

namespace {

Mat token_matrix(const EmbeddingRecord& rec, const Standardizer& st) {
  if (!rec.has_tokens()) {
    throw DataError(fmt::format("attentive probe needs token features; clip {} has only a pooled vector", rec.clip_id));
  }
  Mat x(rec.n_tokens, rec.dim());
  for (int t = 0; t < rec.n_tokens; ++t) {
    const float* r = rec.token(t);
    for (int j = 0; j < rec.dim(); ++j) x(t, j) = (r[j] - st.mean[j]) / st.scale[j];
  }
  return x;
}

}  // namespace

AttentiveProbe::AttentiveProbe(ProbeConfig cfg, int num_classes, int input_dim)
    : Probe(std::move(cfg), num_classes, input_dim) {
  config.kind = ProbeKind::Attentive;
  config.validate();
  if (input_dim % config.heads != 0) {
    throw ConfigError(fmt::format("attentive probe: dim {} is not divisible by {} heads", input_dim, config.heads));
  }
  auto impl = std::make_shared<Impl>(input_dim, config.heads, config.mlp_ratio, config.depth, num_classes);
  params_.assign(impl->total, 0.0);
  Rng rng(mix_seed(config.seed, fnv1a("attentive-init")));
  for (const auto& [slot, init] : impl->init_plan) {
    double* p = params_.data() + slot.off;
    const std::size_t n = static_cast<std::size_t>(slot.rows) * slot.cols;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = init == Impl::Init::One ? 1.0 : init == Impl::Init::Normal ? rng.normal() * kInitStd : 0.0;
    }
  }
  decay_mask_ = impl->decay;
  standardizer.mean.assign(input_dim, 0.0);
  standardizer.scale.assign(input_dim, 1.0);
  impl_ = std::move(impl);
}

std::vector<double> AttentiveProbe::logits(const EmbeddingRecord& rec) const {
  check_input(rec);
  std::vector<double> out;
  impl_->sample(params_.data(), token_matrix(rec, standardizer), -1, nullptr, 0.0, &out);
  return out;
}

double AttentiveProbe::loss_and_gradient(const std::vector<const EmbeddingRecord*>& batch,
                                         const std::vector<int>& labels, std::vector<double>* grad) const {
  if (batch.empty() || batch.size() != labels.size()) throw DataError("attentive probe batch/labels mismatch");
  if (grad) grad->assign(params_.size(), 0.0);
  const double w = 1.0 / static_cast<double>(batch.size());
  CompensatedSum loss;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_input(*batch[i]);
    if (labels[i] < 0 || labels[i] >= classes_) throw DataError("label outside the probe classes");
    loss.add(impl_->sample(params_.data(), token_matrix(*batch[i], standardizer), labels[i], grad ? grad->data() : nullptr, w,
                           nullptr));
  }
  return loss.value() * w;
}

std::string AttentiveProbe::state_bytes() const {
  return detail::doubles_to_bytes(standardizer.mean) + detail::doubles_to_bytes(standardizer.scale) +
         detail::doubles_to_bytes(params_);
}

void AttentiveProbe::load_state(std::string_view bytes) {
  auto v = detail::bytes_to_doubles(bytes);
  const std::size_t d = dim_;
  if (v.size() != 2 * d + params_.size()) throw DataError("attentive probe state has the wrong size");
  standardizer.mean.assign(v.begin(), v.begin() + d);
  standardizer.scale.assign(v.begin() + d, v.begin() + 2 * d);
  params_.assign(v.begin() + 2 * d, v.end());
}

std::unique_ptr<AttentiveProbe> train_attentive_probe(const std::vector<EmbeddingRecord>& features,
                                                      const std::vector<int>& labels, int num_classes,
                                                      const ProbeConfig& config) {
  detail::check_training_inputs(features, labels, num_classes);
  auto probe = std::make_unique<AttentiveProbe>(config, num_classes, features.front().dim());
  if (config.standardize) {
    std::vector<std::vector<float>> rows;
    for (const auto& f : features) {
      if (!f.has_tokens()) break;
      for (int t = 0; t < f.n_tokens; ++t) rows.emplace_back(f.token(t), f.token(t) + f.dim());
    }
    std::vector<const std::vector<float>*> ptrs;
    for (const auto& r : rows) ptrs.push_back(&r);
    if (!ptrs.empty()) probe->standardizer = Standardizer::fit(ptrs, true);
  }
  std::vector<Mat> tokens;
  tokens.reserve(features.size());
  for (const auto& f : features) tokens.push_back(token_matrix(f, probe->standardizer));
  const AttentiveProbe::Impl& impl = *probe->impl_;
  auto& params = probe->params();

  auto batch_fn = [&](const std::vector<std::size_t>& batch, std::vector<double>& grad) {
    const double w = 1.0 / static_cast<double>(batch.size());
    CompensatedSum loss;
    for (auto i : batch) loss.add(impl.sample(params.data(), tokens[i], labels[i], grad.data(), w, nullptr));
    return loss.value() * w;
  };
  auto eval_fn = [&]() {
    CompensatedSum loss;
    std::size_t correct = 0;
    std::vector<double> lg;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      loss.add(impl.sample(params.data(), tokens[i], labels[i], nullptr, 0.0, &lg));
      if (make_prediction("", lg, 1).predicted == labels[i]) ++correct;
    }
    const double n = static_cast<double>(tokens.size());
    return std::pair{loss.value() / n, static_cast<double>(correct) / n};
  };
  probe->curve = detail::run_rmsprop(params, probe->decay_mask(), tokens.size(), probe->config, batch_fn, eval_fn);
  return probe;
}

}  // namespace vrh
