#include "softaug/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace softaug {

namespace {

Vector sigmoid(const Vector& a) {
  return a.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

// dL/dx for y = tanh(x), given y and dL/dy.
Vector tanh_grad(const Vector& y, const Vector& dy) {
  return dy.cwiseProduct((1.0 - y.array().square()).matrix());
}

void fill_uniform(double* data, Eigen::Index n, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.uniform(-scale, scale);
}

void scatter_rows(const MixedToken& input, const Vector& grad, Matrix& embedding_grad) {
  for (const auto& [id, w] : input.terms) embedding_grad.row(id) += w * grad.transpose();
}

}  // namespace

void ModelDims::validate() const {
  if (vocab < kNumReserved + 1) throw ConfigError("vocabulary too small for a model");
  if (embed < 1) throw ConfigError("embedding dimension must be >= 1");
  if (hidden < 1) throw ConfigError("hidden dimension must be >= 1");
}

GruWeights GruWeights::zeros(int in, int hidden) {
  return {Matrix::Zero(3 * hidden, in), Matrix::Zero(3 * hidden, hidden), Vector::Zero(3 * hidden),
          Vector::Zero(3 * hidden)};
}

const std::array<std::string_view, Seq2SeqParams::kNumBlocks>& Seq2SeqParams::block_names() {
  static const std::array<std::string_view, kNumBlocks> names = {
      "embedding",   "enc_fwd.wx", "enc_fwd.wh", "enc_fwd.bx", "enc_fwd.bh", "enc_bwd.wx", "enc_bwd.wh",
      "enc_bwd.bx",  "enc_bwd.bh", "bridge.w",   "bridge.b",   "att.state",  "att.annot",  "att.v",
      "dec.wx",      "dec.wh",     "dec.bx",     "dec.bh",     "out.w",      "out.b"};
  return names;
}

Seq2SeqParams Seq2SeqParams::zeros(const ModelDims& dims) {
  dims.validate();
  const int v = dims.vocab;
  const int d = dims.embed;
  const int h = dims.hidden;
  Seq2SeqParams p;
  p.dims = dims;
  p.embedding = Matrix::Zero(v, d);
  p.enc_fwd = GruWeights::zeros(d, h);
  p.enc_bwd = GruWeights::zeros(d, h);
  p.bridge_w = Matrix::Zero(h, 2 * h);
  p.bridge_b = Vector::Zero(h);
  p.att_state = Matrix::Zero(h, h);
  p.att_annot = Matrix::Zero(h, 2 * h);
  p.att_v = Vector::Zero(h);
  p.dec = GruWeights::zeros(d + 2 * h, h);
  p.out_w = Matrix::Zero(v, h);
  p.out_b = Vector::Zero(v);
  return p;
}

Seq2SeqParams Seq2SeqParams::random(const ModelDims& dims, Rng& rng, double scale) {
  Seq2SeqParams p = zeros(dims);
  p.for_each_block([&](std::string_view, auto& block) { fill_uniform(block.data(), block.size(), rng, scale); });
  return p;
}

void Seq2SeqParams::set_zero() {
  for_each_block([](std::string_view, auto& block) { block.setZero(); });
}

bool Seq2SeqParams::all_finite() const {
  bool ok = true;
  for_each_block([&](std::string_view, const auto& block) { ok = ok && block.allFinite(); });
  return ok;
}

std::size_t Seq2SeqParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](std::string_view, const auto& block) { n += static_cast<std::size_t>(block.size()); });
  return n;
}

MixedToken MixedToken::from_set(const SoftWordSet& set) {
  MixedToken m;
  const auto p = set.distribution();
  m.terms.reserve(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) m.terms.emplace_back(set.entries[j].token, p[j]);
  return m;
}

Vector embed(const MixedToken& input, const Matrix& embedding) {
  // Same accumulation order as fuse_embedding.
  Vector out = input.terms[0].second * embedding.row(input.terms[0].first).transpose();
  for (std::size_t j = 1; j < input.terms.size(); ++j) {
    out += input.terms[j].second * embedding.row(input.terms[j].first).transpose();
  }
  return out;
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Vector log_softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

namespace {

// GRU step with the input projection wx * x + bx already applied.
void gru_forward_projected(const GruWeights& w, const Vector& ax, const Vector& x, const Vector& h_prev,
                           GruStepCache& c) {
  const Eigen::Index h = h_prev.size();
  const Vector ah = w.wh * h_prev + w.bh;
  c.x = x;
  c.h_prev = h_prev;
  c.r = sigmoid(ax.segment(0, h) + ah.segment(0, h));
  c.z = sigmoid(ax.segment(h, h) + ah.segment(h, h));
  c.hn = ah.segment(2 * h, h);
  c.n = (ax.segment(2 * h, h) + c.r.cwiseProduct(c.hn)).array().tanh().matrix();
  c.h = (1.0 - c.z.array()).matrix().cwiseProduct(c.n) + c.z.cwiseProduct(h_prev);
}

// Gate gradients of one step. Weight gradients are left to the caller, which
// batches them over the sequence: d wx += dax x^T, d wh += dah h_prev^T.
void gru_step_gradients(const GruWeights& w, const GruStepCache& c, const Vector& dh, Vector& dax, Vector& dah,
                        Vector& dx, Vector& dh_prev) {
  const Eigen::Index h = c.h.size();
  const Vector dn = dh.cwiseProduct((1.0 - c.z.array()).matrix());
  const Vector dz = dh.cwiseProduct(c.h_prev - c.n);
  const Vector da_n = tanh_grad(c.n, dn);
  const Vector dr = da_n.cwiseProduct(c.hn);
  const Vector da_z = dz.cwiseProduct(c.z.cwiseProduct((1.0 - c.z.array()).matrix()));
  const Vector da_r = dr.cwiseProduct(c.r.cwiseProduct((1.0 - c.r.array()).matrix()));

  dax.resize(3 * h);
  dax << da_r, da_z, da_n;
  dah.resize(3 * h);
  dah << da_r, da_z, da_n.cwiseProduct(c.r);
  dx.noalias() = w.wx.transpose() * dax;
  dh_prev = dh.cwiseProduct(c.z);
  dh_prev.noalias() += w.wh.transpose() * dah;
}

// Per-step gate gradients and inputs of one GRU over a sequence, folded into
// the weight gradients with two matrix products.
struct GruGradBatch {
  Matrix dax, dah, x, h_prev;  // one row per step

  GruGradBatch(Eigen::Index steps, Eigen::Index in, Eigen::Index hidden)
      : dax(steps, 3 * hidden), dah(steps, 3 * hidden), x(steps, in), h_prev(steps, hidden) {}

  void record(Eigen::Index row, const GruStepCache& c, const Vector& ax, const Vector& ah) {
    dax.row(row) = ax.transpose();
    dah.row(row) = ah.transpose();
    x.row(row) = c.x.transpose();
    h_prev.row(row) = c.h_prev.transpose();
  }

  void flush(GruWeights& grad) const {
    grad.wx.noalias() += dax.transpose() * x;
    grad.wh.noalias() += dah.transpose() * h_prev;
    grad.bx += dax.colwise().sum().transpose();
    grad.bh += dah.colwise().sum().transpose();
  }
};

}  // namespace

void gru_forward(const GruWeights& w, const Vector& x, const Vector& h_prev, GruStepCache& c) {
  gru_forward_projected(w, w.wx * x + w.bx, x, h_prev, c);
}

void gru_backward(const GruWeights& w, const GruStepCache& c, const Vector& dh, GruWeights& grad, Vector& dx,
                  Vector& dh_prev) {
  Vector dax, dah;
  gru_step_gradients(w, c, dh, dax, dah, dx, dh_prev);
  grad.wx.noalias() += dax * c.x.transpose();
  grad.bx += dax;
  grad.wh.noalias() += dah * c.h_prev.transpose();
  grad.bh += dah;
}

EncoderOutput encode(const Seq2SeqParams& params, const Matrix& inputs) {
  const Eigen::Index n = inputs.rows();
  if (n < 1) throw std::invalid_argument("encode needs at least one history position");
  const int h = params.dims.hidden;

  EncoderOutput out;
  out.fwd.resize(static_cast<std::size_t>(n));
  out.bwd.resize(static_cast<std::size_t>(n));
  out.annotations.resize(n, 2 * h);

  const Matrix ax_fwd = inputs * params.enc_fwd.wx.transpose();
  const Matrix ax_bwd = inputs * params.enc_bwd.wx.transpose();

  Vector state = Vector::Zero(h);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& c = out.fwd[static_cast<std::size_t>(i)];
    gru_forward_projected(params.enc_fwd, ax_fwd.row(i).transpose() + params.enc_fwd.bx, inputs.row(i).transpose(),
                          state, c);
    state = c.h;
    out.annotations.row(i).head(h) = c.h.transpose();
  }
  state = Vector::Zero(h);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    auto& c = out.bwd[static_cast<std::size_t>(i)];
    gru_forward_projected(params.enc_bwd, ax_bwd.row(i).transpose() + params.enc_bwd.bx, inputs.row(i).transpose(),
                          state, c);
    state = c.h;
    out.annotations.row(i).tail(h) = c.h.transpose();
  }

  out.keys = out.annotations * params.att_annot.transpose();
  Vector summary(2 * h);
  summary << out.fwd.back().h, out.bwd.front().h;
  out.init_state = (params.bridge_w * summary + params.bridge_b).array().tanh().matrix();
  return out;
}

StepOutput decode_step(const Seq2SeqParams& params, const Vector& prev_embedding, const Vector& state,
                       const EncoderOutput& encoder, DecodeStepCache* cache) {
  const Vector query = params.att_state * state;
  Matrix hidden = encoder.keys;
  hidden.rowwise() += query.transpose();
  hidden = hidden.array().tanh().matrix();
  const Vector scores = hidden * params.att_v;
  const Vector attention = softmax(scores);
  const Vector context = encoder.annotations.transpose() * attention;

  Vector x(prev_embedding.size() + context.size());
  x << prev_embedding, context;
  GruStepCache gru;
  gru_forward(params.dec, x, state, gru);

  StepOutput out;
  out.logits = params.out_w * gru.h + params.out_b;
  out.probs = softmax(out.logits);
  out.log_probs = log_softmax(out.logits);
  out.state = gru.h;
  out.attention = attention;

  if (cache) {
    cache->state_prev = state;
    cache->att_hidden = std::move(hidden);
    cache->attention = attention;
    cache->context = context;
    cache->gru = std::move(gru);
  }
  return out;
}

ModelInputs teacher_forced_inputs(const DialogueSample& sample, const AugmentationPlan& plan) {
  if (sample.history.empty()) throw std::invalid_argument("empty history");
  if (sample.response.empty()) throw std::invalid_argument("empty response");
  ModelInputs in;
  in.encoder.reserve(sample.history.size());
  for (TokenId t : sample.history) in.encoder.push_back(MixedToken::plain(t));
  for (const auto& t : plan.history_targets) in.encoder.at(t.position) = MixedToken::from_set(t.set);

  std::vector<MixedToken> response;
  response.reserve(sample.response.size());
  for (TokenId t : sample.response) response.push_back(MixedToken::plain(t));
  for (const auto& t : plan.response_targets) response.at(t.position) = MixedToken::from_set(t.set);

  in.decoder.reserve(sample.response.size());
  in.decoder.push_back(MixedToken::plain(kBos));
  for (std::size_t i = 0; i + 1 < response.size(); ++i) in.decoder.push_back(std::move(response[i]));
  return in;
}

ForwardTrace forward(const Seq2SeqParams& params, ModelInputs inputs) {
  ForwardTrace t;
  t.inputs = std::move(inputs);
  const auto n = static_cast<Eigen::Index>(t.inputs.encoder.size());
  const auto m = static_cast<Eigen::Index>(t.inputs.decoder.size());
  const int d = params.dims.embed;

  t.encoder_embeddings.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    t.encoder_embeddings.row(i) = embed(t.inputs.encoder[static_cast<std::size_t>(i)], params.embedding).transpose();
  }
  t.decoder_embeddings.resize(m, d);
  for (Eigen::Index j = 0; j < m; ++j) {
    t.decoder_embeddings.row(j) = embed(t.inputs.decoder[static_cast<std::size_t>(j)], params.embedding).transpose();
  }

  t.encoder = encode(params, t.encoder_embeddings);
  t.steps.resize(static_cast<std::size_t>(m));
  t.outputs.reserve(static_cast<std::size_t>(m));
  Vector state = t.encoder.init_state;
  for (Eigen::Index j = 0; j < m; ++j) {
    t.outputs.push_back(decode_step(params, t.decoder_embeddings.row(j).transpose(), state, t.encoder,
                                    &t.steps[static_cast<std::size_t>(j)]));
    state = t.outputs.back().state;
  }
  return t;
}

ForwardTrace forward(const Seq2SeqParams& params, const DialogueSample& sample, const AugmentationPlan& plan) {
  return forward(params, teacher_forced_inputs(sample, plan));
}

void backward(const Seq2SeqParams& params, const ForwardTrace& trace, const std::vector<Vector>& logit_grads,
              Seq2SeqParams& grad) {
  const std::size_t m = trace.outputs.size();
  if (logit_grads.size() != m) throw std::invalid_argument("one logit gradient per decoder step expected");
  const int d = params.dims.embed;
  const int h = params.dims.hidden;
  const EncoderOutput& enc = trace.encoder;
  const Eigen::Index n = enc.annotations.rows();

  Matrix d_annotations = Matrix::Zero(n, 2 * h);
  Matrix d_keys = Matrix::Zero(n, h);
  Vector d_state = Vector::Zero(h);
  Vector dx, dh_prev, dax, dah;

  const auto steps = static_cast<Eigen::Index>(m);
  GruGradBatch dec(steps, params.dec.wx.cols(), h);
  Matrix d_logits(steps, params.dims.vocab);
  Matrix states(steps, h);
  Matrix d_queries(steps, h);
  Matrix prev_states(steps, h);
  Matrix attentions(steps, n);
  Matrix d_contexts(steps, 2 * h);

  for (std::size_t jj = m; jj-- > 0;) {
    const auto row = static_cast<Eigen::Index>(jj);
    const DecodeStepCache& c = trace.steps[jj];
    const Vector& dz = logit_grads[jj];

    d_logits.row(row) = dz.transpose();
    states.row(row) = c.gru.h.transpose();
    d_state.noalias() += params.out_w.transpose() * dz;

    gru_step_gradients(params.dec, c.gru, d_state, dax, dah, dx, dh_prev);
    dec.record(row, c.gru, dax, dah);
    d_state = dh_prev;

    scatter_rows(trace.inputs.decoder[jj], dx.head(d), grad.embedding);
    const Vector d_context = dx.tail(2 * h);

    // context = sum_i a_i * annotation_i
    attentions.row(row) = c.attention.transpose();
    d_contexts.row(row) = d_context.transpose();
    const Vector d_alpha = enc.annotations * d_context;
    const double mean = c.attention.dot(d_alpha);
    const Vector d_scores = c.attention.cwiseProduct((d_alpha.array() - mean).matrix());

    // scores_i = v . tanh(query + key_i)
    grad.att_v.noalias() += c.att_hidden.transpose() * d_scores;
    Matrix d_pre = d_scores * params.att_v.transpose();
    d_pre = d_pre.cwiseProduct((1.0 - c.att_hidden.array().square()).matrix());
    d_keys += d_pre;
    const Vector d_query = d_pre.colwise().sum().transpose();
    d_queries.row(row) = d_query.transpose();
    prev_states.row(row) = c.state_prev.transpose();
    d_state.noalias() += params.att_state.transpose() * d_query;
  }
  grad.out_w.noalias() += d_logits.transpose() * states;
  grad.out_b += d_logits.colwise().sum().transpose();
  grad.att_state.noalias() += d_queries.transpose() * prev_states;
  dec.flush(grad.dec);
  d_annotations.noalias() += attentions.transpose() * d_contexts;

  // keys = annotations * att_annot^T
  grad.att_annot.noalias() += d_keys.transpose() * enc.annotations;
  d_annotations.noalias() += d_keys * params.att_annot;

  // init_state = tanh(bridge_w [fwd_N ; bwd_1] + bridge_b)
  const Vector d_pre_bridge = tanh_grad(enc.init_state, d_state);
  Vector summary(2 * h);
  summary << enc.fwd.back().h, enc.bwd.front().h;
  grad.bridge_w.noalias() += d_pre_bridge * summary.transpose();
  grad.bridge_b += d_pre_bridge;
  const Vector d_summary = params.bridge_w.transpose() * d_pre_bridge;

  Matrix d_inputs = Matrix::Zero(n, d);
  GruGradBatch fwd(n, d, h);
  Vector carry = d_summary.head(h);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto& c = enc.fwd[static_cast<std::size_t>(i)];
    const Vector dh = carry + d_annotations.row(i).head(h).transpose();
    gru_step_gradients(params.enc_fwd, c, dh, dax, dah, dx, dh_prev);
    fwd.record(i, c, dax, dah);
    d_inputs.row(i) += dx.transpose();
    carry = dh_prev;
  }
  fwd.flush(grad.enc_fwd);

  GruGradBatch bwd(n, d, h);
  carry = d_summary.tail(h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = enc.bwd[static_cast<std::size_t>(i)];
    const Vector dh = carry + d_annotations.row(i).tail(h).transpose();
    gru_step_gradients(params.enc_bwd, c, dh, dax, dah, dx, dh_prev);
    bwd.record(i, c, dax, dah);
    d_inputs.row(i) += dx.transpose();
    carry = dh_prev;
  }
  bwd.flush(grad.enc_bwd);

  for (Eigen::Index i = 0; i < n; ++i) {
    scatter_rows(trace.inputs.encoder[static_cast<std::size_t>(i)], d_inputs.row(i).transpose(), grad.embedding);
  }
}

namespace {

struct Hypothesis {
  TokenSeq tokens;
  double score;
  Vector state;
};

// Higher score first, then lexicographically smaller sequence.
bool ranks_before(double sa, const TokenSeq& a, double sb, const TokenSeq& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

}  // namespace

BeamResult beam_search(const Seq2SeqParams& params, const TokenSeq& history, int beam_size, int max_len) {
  if (beam_size < 1) throw std::invalid_argument("beam_size must be >= 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (history.empty()) throw std::invalid_argument("empty history");

  Matrix inputs(static_cast<Eigen::Index>(history.size()), params.dims.embed);
  for (std::size_t i = 0; i < history.size(); ++i) {
    inputs.row(static_cast<Eigen::Index>(i)) = params.embedding.row(history[i]);
  }
  const EncoderOutput enc = encode(params, inputs);
  const auto vocab = static_cast<TokenId>(params.dims.vocab);

  std::vector<Hypothesis> live{{{}, 0.0, enc.init_state}};
  std::vector<BeamResult> completed;

  struct Candidate {
    std::size_t parent;
    TokenId token;
    double score;
    TokenSeq tokens;
  };

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Candidate> candidates;
    std::vector<Vector> next_states(live.size());
    candidates.reserve(live.size() * static_cast<std::size_t>(vocab));
    for (std::size_t p = 0; p < live.size(); ++p) {
      const TokenId prev = live[p].tokens.empty() ? kBos : live[p].tokens.back();
      StepOutput out = decode_step(params, embed(prev, params.embedding), live[p].state, enc);
      next_states[p] = std::move(out.state);
      for (TokenId t = 0; t < vocab; ++t) {
        TokenSeq seq = live[p].tokens;
        seq.push_back(t);
        candidates.push_back({p, t, live[p].score + out.log_probs[t], std::move(seq)});
      }
    }
    const auto keep = std::min(candidates.size(), static_cast<std::size_t>(beam_size));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        return ranks_before(a.score, a.tokens, b.score, b.tokens);
                      });
    candidates.resize(keep);

    std::vector<Hypothesis> next;
    for (auto& c : candidates) {
      if (c.token == kEos) {
        c.tokens.pop_back();
        completed.push_back({std::move(c.tokens), c.score, true});
      } else {
        next.push_back({std::move(c.tokens), c.score, next_states[c.parent]});
      }
    }
    live = std::move(next);

    // Extensions only lower a score, so a strictly better finished
    // hypothesis cannot be overtaken.
    if (!completed.empty() && !live.empty()) {
      double best_done = -std::numeric_limits<double>::infinity();
      for (const auto& c : completed) best_done = std::max(best_done, c.score);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) best_live = std::max(best_live, l.score);
      if (best_done > best_live) break;
    }
  }

  auto better = [](const BeamResult& a, const BeamResult& b) {
    return ranks_before(a.score, a.tokens, b.score, b.tokens);
  };
  if (!completed.empty()) return *std::min_element(completed.begin(), completed.end(), better);

  BeamResult best{live.front().tokens, live.front().score, false};
  for (const auto& l : live) {
    BeamResult r{l.tokens, l.score, false};
    if (better(r, best)) best = std::move(r);
  }
  return best;
}

}  // namespace softaug
