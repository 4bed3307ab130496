// mfae/model.h

// Copyright 2026  The mfae authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// The three networks: utterance embedder (TDNN stack -> stats pooling ->
// feed-forward -> mu/sigma^2 heads), frame tokenizer (TDNN stack ->
// feed-forward -> softmax logits) and frame decoder (TDNN input layer over
// the mixture indicators + feed-forward stack, with the sequence vector
// concatenated to the input of every layer).

#ifndef MFAE_MODEL_H_
#define MFAE_MODEL_H_

#include <string>
#include <utility>
#include <vector>

#include "mfae/array.h"
#include "mfae/autodiff.h"
#include "mfae/common.h"
#include "mfae/rng.h"

namespace mfae {

constexpr float kBnEps = 1e-5f;
constexpr float kBnMomentum = 0.1f;
constexpr float kPoolEps = 1e-10f;
constexpr float kSigma2Floor = 1e-8f;

enum class Mode { kTrain, kInfer };

struct ArchConfig {
  int feat_dim = 30;
  int n_mixtures = 256;
  int embed_dim = 600;
  int tdnn_hidden = 512;
  int ff_hidden = 512;
  int decoder_hidden = 512;
  // Shared by embedder and tokenizer (one TDNN layer per entry).
  std::vector<std::vector<int>> encoder_contexts = {
      {-2, -1, 0, 1, 2}, {-2, 0, 2}, {-3, 0, 3}, {0}};
  std::vector<int> decoder_context = {-1, 0, 1};

  void Check() const;
  std::string ContextsToString() const;  // e.g. "-2,-1,0,1,2;-2,0,2;..."
  static std::vector<std::vector<int>> ParseContexts(const std::string &s);
};

struct LayerSpec {
  std::vector<int> context;  // empty: plain feed-forward
  int in_dim = 0;            // per-frame input before splice/concat
  int extra_in = 0;          // appended sequence-vector width (decoder)
  int out_dim = 0;
  bool relu_bn = false;
  int WeightRows() const {
    int c = context.empty() ? 1 : static_cast<int>(context.size());
    return in_dim * c + extra_in;
  }
};

struct ParamSlots {
  int w = -1, b = -1, gamma = -1, beta = -1, rmean = -1, rvar = -1;
};

// Deterministic flattening of all parameter arrays; the checkpoint blob
// order and the gradient vector order both follow `shapes`.
struct Layout {
  std::vector<LayerSpec> embedder;   // 4 TDNN, 2 FF, mu head, sigma head
  std::vector<LayerSpec> tokenizer;  // 4 TDNN, 2 FF, logit head
  std::vector<LayerSpec> decoder;    // TDNN input + 3 hidden FF + output

  std::vector<std::pair<int, int>> shapes;  // rows, cols per array
  std::vector<std::string> names;
  std::vector<bool> trainable;  // false for batch-norm running stats

  std::vector<ParamSlots> embedder_slots, tokenizer_slots, decoder_slots;

  static Layout Build(const ArchConfig &cfg);
  int NumArrays() const { return static_cast<int>(shapes.size()); }
};

struct ModelParams {
  ArchConfig config;
  Layout layout;
  std::vector<Array2> arrays;
  int64_t step = 0;
};

struct UtteranceEmbedding {
  std::vector<float> mu_omega;
  std::vector<float> sigma2_omega;
};

struct MixturePosterior {
  Array2 logits;  // T x K
  Array2 probs;   // T x K, softmax of logits
};

ModelParams InitParams(const ArchConfig &config, uint64_t seed);

void SaveModel(const std::string &path, const ModelParams &params);
ModelParams LoadModel(const std::string &path);

// ---------------------------------------------------------------------------
// Graph building (templated so gradient checks can run in double).

template <typename Real>
struct BnUpdate {
  int rmean_idx = -1, rvar_idx = -1;
  ArrayT<Real> mean, var;
};

template <typename Real>
struct GraphCtx {
  Tape<Real> *tape = nullptr;
  const Layout *layout = nullptr;
  std::vector<int> pnodes;  // tape node per parameter array
  Mode mode = Mode::kInfer;
  // Frame counts of the utterances stacked row-wise in the frame-level
  // input; empty means a single utterance.  Splicing and pooling respect
  // these boundaries while batch norm runs over all stacked rows, so in
  // train mode the normalization statistics come from the whole minibatch.
  std::vector<int> segments;
  std::vector<BnUpdate<Real>> bn_updates;  // filled in train mode
};

template <typename Real>
GraphCtx<Real> MakeGraphCtx(Tape<Real> &tape, const Layout &layout,
                            const std::vector<ArrayT<Real>> &arrays,
                            Mode mode, std::vector<int> segments = {}) {
  GraphCtx<Real> ctx;
  ctx.tape = &tape;
  ctx.layout = &layout;
  ctx.mode = mode;
  ctx.segments = std::move(segments);
  ctx.pnodes.reserve(arrays.size());
  for (int i = 0; i < static_cast<int>(arrays.size()); ++i)
    ctx.pnodes.push_back(tape.Leaf(arrays[i], layout.trainable[i]));
  return ctx;
}

template <typename Real>
int RunLayer(GraphCtx<Real> &c, const LayerSpec &spec, const ParamSlots &ps,
             int x, int extra_node, const std::vector<ArrayT<Real>> &arrays) {
  Tape<Real> &t = *c.tape;
  if (!spec.context.empty() &&
      !(spec.context.size() == 1 && spec.context[0] == 0))
    x = t.Splice(x, spec.context, c.segments);
  if (spec.extra_in > 0) {
    MFAE_CHECK(extra_node >= 0, "layer expects a sequence vector");
    x = t.ConcatCols(x, c.segments.empty()
                            ? t.BroadcastRows(extra_node, t.Value(x).rows)
                            : t.RepeatRows(extra_node, c.segments));
  }
  x = t.Affine(x, c.pnodes[ps.w], c.pnodes[ps.b]);
  if (spec.relu_bn) {
    x = t.Relu(x);
    if (c.mode == Mode::kTrain) {
      BnUpdate<Real> u;
      u.rmean_idx = ps.rmean;
      u.rvar_idx = ps.rvar;
      x = t.BatchNormTrain(x, c.pnodes[ps.gamma], c.pnodes[ps.beta],
                           Real(kBnEps), &u.mean, &u.var);
      c.bn_updates.push_back(std::move(u));
    } else {
      x = t.BatchNormInfer(x, c.pnodes[ps.gamma], c.pnodes[ps.beta],
                           arrays[ps.rmean], arrays[ps.rvar], Real(kBnEps));
    }
  }
  return x;
}

// Returns {mu_node (B x E), sigma2_node (B x E)}, one row per utterance
// in c.segments (B = 1 for a single utterance).  The feed-forward layers
// after pooling see one row per utterance, so their batch norm normalizes
// across the utterances of the minibatch.
template <typename Real>
std::pair<int, int> EmbedderForward(GraphCtx<Real> &c, int input,
                                    const std::vector<ArrayT<Real>> &arrays) {
  const Layout &L = *c.layout;
  int x = input;
  for (int i = 0; i < 4; ++i)
    x = RunLayer(c, L.embedder[i], L.embedder_slots[i], x, -1, arrays);
  // From here on the rows are per-utterance pooled vectors; the remaining
  // layers are plain feed-forward, so the segments are not consulted.
  x = c.tape->StatsPool(x, Real(kPoolEps), c.segments);
  for (int i = 4; i < 6; ++i)
    x = RunLayer(c, L.embedder[i], L.embedder_slots[i], x, -1, arrays);
  int mu = RunLayer(c, L.embedder[6], L.embedder_slots[6], x, -1, arrays);
  int sig = RunLayer(c, L.embedder[7], L.embedder_slots[7], x, -1, arrays);
  // Softplus keeps sigma^2 positive; the floor guards float underflow.
  int sigma2 = c.tape->AddScalar(c.tape->Softplus(sig), Real(kSigma2Floor));
  return {mu, sigma2};
}

// Returns the T x K logit node (softmax applied by callers as needed).
template <typename Real>
int TokenizerForward(GraphCtx<Real> &c, int input,
                     const std::vector<ArrayT<Real>> &arrays) {
  const Layout &L = *c.layout;
  int x = input;
  for (int i = 0; i < static_cast<int>(L.tokenizer.size()); ++i)
    x = RunLayer(c, L.tokenizer[i], L.tokenizer_slots[i], x, -1, arrays);
  return x;
}

// y: T x K mixture indicators (soft or one-hot), omega: one row per
// utterance in c.segments (1 x E for a single utterance). -> T x D.
template <typename Real>
int DecoderForward(GraphCtx<Real> &c, int y, int omega,
                   const std::vector<ArrayT<Real>> &arrays) {
  const Layout &L = *c.layout;
  int x = y;
  for (int i = 0; i < static_cast<int>(L.decoder.size()); ++i)
    x = RunLayer(c, L.decoder[i], L.decoder_slots[i], x, omega, arrays);
  return x;
}

// EMA update of batch-norm running stats; applied in deterministic order.
template <typename Real>
void ApplyBnUpdates(const std::vector<BnUpdate<Real>> &updates,
                    std::vector<ArrayT<Real>> &arrays) {
  for (const auto &u : updates) {
    ArrayT<Real> &rm = arrays[u.rmean_idx];
    ArrayT<Real> &rv = arrays[u.rvar_idx];
    for (size_t i = 0; i < rm.v.size(); ++i) {
      rm.v[i] = (Real(1) - Real(kBnMomentum)) * rm.v[i] +
                Real(kBnMomentum) * u.mean.v[i];
      rv.v[i] = (Real(1) - Real(kBnMomentum)) * rv.v[i] +
                Real(kBnMomentum) * u.var.v[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Non-graph convenience entry points (float path).

struct FeatureSequence;  // data.h

UtteranceEmbedding EmbedUtterance(ModelParams &params, const Array2 &frames,
                                  Mode mode);
MixturePosterior TokenizeFrames(ModelParams &params, const Array2 &frames,
                                Mode mode);
Array2 DecodeFrames(ModelParams &params, const std::vector<float> &seq_vec,
                    const Array2 &y_seq, Mode mode);

}  // namespace mfae

#endif  // MFAE_MODEL_H_
