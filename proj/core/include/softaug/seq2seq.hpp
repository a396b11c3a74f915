#pragma once

#include <array>
#include <string_view>
#include <utility>
#include <vector>

#include "softaug/augment.hpp"
#include "softaug/corpus.hpp"
#include "softaug/rng.hpp"
#include "softaug/types.hpp"

namespace softaug {

struct ModelDims {
  int vocab = 0;
  int embed = 300;
  int hidden = 300;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

// Gate rows are stacked [reset; update; candidate]:
//   r = s(Wx_r x + bx_r + Wh_r h + bh_r)
//   z = s(Wx_z x + bx_z + Wh_z h + bh_z)
//   n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))
//   h' = (1 - z) * n + z * h
struct GruWeights {
  Matrix wx;  // 3h x in
  Matrix wh;  // 3h x h
  Vector bx;  // 3h
  Vector bh;  // 3h

  static GruWeights zeros(int in, int hidden);
};

// Embedding, bidirectional GRU encoder, tanh bridge to the decoder state,
// additive attention, GRU decoder over [embedding; context], output
// projection. Also used as the gradient container.
struct Seq2SeqParams {
  ModelDims dims;
  Matrix embedding;   // V x d
  GruWeights enc_fwd;  // in = d
  GruWeights enc_bwd;  // in = d
  Matrix bridge_w;    // h x 2h
  Vector bridge_b;    // h
  Matrix att_state;   // h x h   (query side)
  Matrix att_annot;   // h x 2h  (key side)
  Vector att_v;       // h
  GruWeights dec;      // in = d + 2h
  Matrix out_w;       // V x h
  Vector out_b;       // V

  static constexpr std::size_t kNumBlocks = 20;
  static const std::array<std::string_view, kNumBlocks>& block_names();

  static Seq2SeqParams zeros(const ModelDims& dims);
  // Every entry uniform(-scale, scale), drawn block by block in block order.
  static Seq2SeqParams random(const ModelDims& dims, Rng& rng, double scale = 0.08);

  // f(name, block) for each of the 20 blocks; block is a Matrix& or Vector&.
  template <typename F>
  void for_each_block(F&& f) {
    visit(*this, std::forward<F>(f));
  }
  template <typename F>
  void for_each_block(F&& f) const {
    visit(*this, std::forward<F>(f));
  }

  void set_zero();
  bool all_finite() const;
  std::size_t parameter_count() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& p, F&& f) {
    const auto& n = block_names();
    std::size_t i = 0;
    f(n[i++], p.embedding);
    for (auto* g : {&p.enc_fwd, &p.enc_bwd}) {
      f(n[i++], g->wx);
      f(n[i++], g->wh);
      f(n[i++], g->bx);
      f(n[i++], g->bh);
    }
    f(n[i++], p.bridge_w);
    f(n[i++], p.bridge_b);
    f(n[i++], p.att_state);
    f(n[i++], p.att_annot);
    f(n[i++], p.att_v);
    f(n[i++], p.dec.wx);
    f(n[i++], p.dec.wh);
    f(n[i++], p.dec.bx);
    f(n[i++], p.dec.bh);
    f(n[i++], p.out_w);
    f(n[i++], p.out_b);
  }
};

// Convex mixture over embedding rows. A plain token is the single term
// (t, 1.0) and embeds to exactly E.row(t). Also serves as a label
// distribution.
struct MixedToken {
  std::vector<std::pair<TokenId, double>> terms;

  static MixedToken plain(TokenId token) { return MixedToken{{{token, 1.0}}}; }
  static MixedToken from_set(const SoftWordSet& set);

  bool operator==(const MixedToken&) const = default;
};

Vector embed(const MixedToken& input, const Matrix& embedding);
inline Vector embed(TokenId token, const Matrix& embedding) { return embedding.row(token).transpose(); }

struct GruStepCache {
  Vector x;
  Vector h_prev;
  Vector r;
  Vector z;
  Vector n;
  Vector hn;  // Wh_n h + bh_n
  Vector h;
};

void gru_forward(const GruWeights& w, const Vector& x, const Vector& h_prev, GruStepCache& cache);
// Accumulates parameter gradients into `grad`; returns dL/dx and dL/dh_prev.
void gru_backward(const GruWeights& w, const GruStepCache& cache, const Vector& dh, GruWeights& grad,
                  Vector& dx, Vector& dh_prev);

struct EncoderOutput {
  Matrix annotations;  // N x 2h, row i = [fwd_i ; bwd_i]
  Matrix keys;         // N x h,  row i = att_annot * annotation_i
  Vector init_state;   // tanh(bridge_w [fwd_N ; bwd_1] + bridge_b)
  std::vector<GruStepCache> fwd;  // index i = position i
  std::vector<GruStepCache> bwd;
};

// `inputs` is N x d (one embedded history position per row), N >= 1.
EncoderOutput encode(const Seq2SeqParams& params, const Matrix& inputs);

struct StepOutput {
  Vector logits;
  Vector probs;      // softmax(logits)
  Vector log_probs;  // log-softmax(logits), computed stably
  Vector state;      // new decoder state
  Vector attention;  // weights over history positions
};

struct DecodeStepCache {
  Vector state_prev;
  Matrix att_hidden;  // N x h, tanh(query + key_i)
  Vector attention;
  Vector context;
  GruStepCache gru;
};

StepOutput decode_step(const Seq2SeqParams& params, const Vector& prev_embedding, const Vector& state,
                       const EncoderOutput& encoder, DecodeStepCache* cache = nullptr);

// Teacher-forced inputs for one sample: history positions and decoder inputs
// (BOS followed by response[0..M-2]), each possibly a mixture.
struct ModelInputs {
  std::vector<MixedToken> encoder;
  std::vector<MixedToken> decoder;
};

// Plain inputs, with soft sets substituted at the plan's target positions.
ModelInputs teacher_forced_inputs(const DialogueSample& sample, const AugmentationPlan& plan);

struct ForwardTrace {
  ModelInputs inputs;
  Matrix encoder_embeddings;  // N x d
  Matrix decoder_embeddings;  // M x d
  EncoderOutput encoder;
  std::vector<DecodeStepCache> steps;
  std::vector<StepOutput> outputs;
};

ForwardTrace forward(const Seq2SeqParams& params, ModelInputs inputs);
ForwardTrace forward(const Seq2SeqParams& params, const DialogueSample& sample,
                     const AugmentationPlan& plan = {});

// Backpropagates per-step logit gradients dL/dz_j through the whole network
// and adds the result to `grad`. Embedding rows reached through mixtures
// receive p-weighted shares.
void backward(const Seq2SeqParams& params, const ForwardTrace& trace, const std::vector<Vector>& logit_grads,
              Seq2SeqParams& grad);

Vector softmax(const Vector& logits);
Vector log_softmax(const Vector& logits);

struct BeamResult {
  TokenSeq tokens;  // without the final EOS
  double score = 0.0;  // sum of log-probabilities, EOS included when completed
  bool completed = false;
};

// Length-capped beam search (max_len counts the EOS step). Hypotheses that
// emit EOS retire. The best completed hypothesis wins, ties going to the
// lexicographically smallest token sequence; without any completed one the
// best live hypothesis is returned.
BeamResult beam_search(const Seq2SeqParams& params, const TokenSeq& history, int beam_size, int max_len);

}  // namespace softaug
