// mfae/losses.h

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

// Batch losses.  The mFVAE loss is the negative variational lower bound
// (reconstruction + beta-weighted KL terms, Gaussian-likelihood constant
// dropped); the mFAE loss keeps only the reconstruction term, feeds the
// decoder the embedder mean directly and a Gumbel-Softmax relaxed sample
// of the mixture indicator.

#ifndef MFAE_LOSSES_H_
#define MFAE_LOSSES_H_

#include <cmath>
#include <span>
#include <vector>

#include "mfae/model.h"
#include "mfae/sampling.h"

namespace mfae {

struct LossBreakdown {
  double reconstruction = 0;
  double kl_omega = 0;
  double kl_y = 0;
  double total = 0;
  double beta_omega = 0;
  double beta_y = 0;
};

// 1/2 sum_d (sigma2 + mu^2 - 1 - log sigma2); KL(N(mu, diag sigma2) || N(0, I)).
double KlGaussianStd(std::span<const double> mu, std::span<const double> sigma2);

// log K - H(pi) = sum_k pi_k log(pi_k K), 0 log 0 := 0; KL(Cat(pi) || Cat(1/K)).
double KlCategoricalUniform(std::span<const double> pi);

enum class Variant { kMfae, kMfvae };

template <typename Real>
struct BatchLossResult {
  LossBreakdown breakdown;
  // Per parameter array, aligned with Layout::shapes; empty for
  // non-trainable arrays or when gradients were not requested.
  std::vector<ArrayT<Real>> grads;
};

// Batch loss over trimmed segments.  All utterances are stacked row-wise
// into one graph whose splicing and pooling respect utterance boundaries,
// so every batch-norm layer normalizes over the whole minibatch (all
// frames at the frame level, one pooled row per utterance after pooling)
// exactly as it does at inference through the running statistics.  In
// train mode the running stats get one EMA update per layer per batch.
//
// Per-utterance noise comes from a stream keyed by (noise_seed, utterance
// index) and the graph is evaluated single-threaded, so the result does
// not depend on `workers` (accepted for interface stability).
template <typename Real>
BatchLossResult<Real> BatchLoss(const ArchConfig &cfg, const Layout &layout,
                                std::vector<ArrayT<Real>> &arrays,
                                const std::vector<Array2> &batch,
                                Variant variant, Real beta_omega, Real beta_y,
                                Real tau, uint64_t noise_seed, Mode mode,
                                bool want_grads, int workers = 1) {
  MFAE_CHECK(!batch.empty(), "empty batch");
  MFAE_CHECK(beta_omega >= 0 && beta_y >= 0, "betas must be >= 0");
  MFAE_CHECK(tau > 0, "tau must be positive");
  (void)workers;
  const int B = static_cast<int>(batch.size());
  const int K = cfg.n_mixtures, E = cfg.embed_dim;
  std::vector<int> segments;
  int rows = 0;
  for (const auto &f : batch) {
    MFAE_CHECK(f.rows >= 1, "empty utterance");
    MFAE_CHECK(f.cols == cfg.feat_dim, "feature dim mismatch");
    segments.push_back(f.rows);
    rows += f.rows;
  }

  ArrayT<Real> input_stack(rows, cfg.feat_dim);
  ArrayT<Real> gumbel_stack(rows, K);
  ArrayT<Real> eps_stack(B, E);
  int at = 0;
  for (int i = 0; i < B; ++i) {
    Rng rng(MixSeed(noise_seed, i));
    ArrayT<Real> g = SampleGumbelNoise<Real>(batch[i].rows, K, rng);
    for (int t = 0; t < batch[i].rows; ++t) {
      for (int d = 0; d < cfg.feat_dim; ++d)
        input_stack(at + t, d) = static_cast<Real>(batch[i](t, d));
      for (int k = 0; k < K; ++k) gumbel_stack(at + t, k) = g(t, k);
    }
    at += batch[i].rows;
    if (variant == Variant::kMfvae)
      for (int j = 0; j < E; ++j)
        eps_stack(i, j) = static_cast<Real>(rng.Gauss());
  }

  Tape<Real> tape;
  auto ctx = MakeGraphCtx(tape, layout, arrays, mode, segments);
  int input = tape.Constant(std::move(input_stack));

  int logits = TokenizerForward(ctx, input, arrays);
  int y_hat = tape.SoftmaxRows(tape.Scale(
      tape.Add(logits, tape.Constant(std::move(gumbel_stack))), Real(1) / tau));

  auto [mu, sigma2] = EmbedderForward(ctx, input, arrays);
  int omega = mu;
  if (variant == Variant::kMfvae)
    omega = tape.Add(mu, tape.Mul(tape.Sqrt(sigma2),
                                  tape.Constant(std::move(eps_stack))));

  int recon = DecoderForward(ctx, y_hat, omega, arrays);
  int rec_loss = tape.HalfSumSqDiff(recon, input);

  int total = rec_loss;
  int klo_node = -1, kly_node = -1;
  if (variant == Variant::kMfvae) {
    // KL(q(omega|O) || N(0,I)) in closed form, summed over the batch.
    int term = tape.Sub(tape.Add(sigma2, tape.Mul(mu, mu)),
                        tape.AddScalar(tape.Log(sigma2), Real(1)));
    klo_node = tape.Scale(tape.SumAll(term), Real(0.5));
    // Sum_t KL(Cat(pi_t) || uniform) from the logits, over all frames.
    int probs = tape.SoftmaxRows(logits);
    int logp = tape.SubColVec(logits, tape.LogSumExpRows(logits));
    kly_node = tape.AddScalar(tape.SumAll(tape.Mul(probs, logp)),
                              Real(rows) * std::log(Real(K)));
    total = tape.Add(rec_loss,
                     tape.Add(tape.Scale(klo_node, beta_omega),
                              tape.Scale(kly_node, beta_y)));
  }

  BatchLossResult<Real> out;
  out.breakdown.beta_omega = beta_omega;
  out.breakdown.beta_y = beta_y;
  out.breakdown.reconstruction = static_cast<double>(tape.Value(rec_loss)(0, 0));
  if (klo_node >= 0)
    out.breakdown.kl_omega = static_cast<double>(tape.Value(klo_node)(0, 0));
  if (kly_node >= 0)
    out.breakdown.kl_y = static_cast<double>(tape.Value(kly_node)(0, 0));
  out.breakdown.total = static_cast<double>(tape.Value(total)(0, 0));
  if (!std::isfinite(out.breakdown.total))
    throw DivergenceError("non-finite loss");

  if (want_grads) {
    tape.Backward(total);
    out.grads.resize(arrays.size());
    for (size_t i = 0; i < arrays.size(); ++i)
      if (layout.trainable[i]) out.grads[i] = tape.Grad(ctx.pnodes[i]);
  }
  if (mode == Mode::kTrain) ApplyBnUpdates(ctx.bn_updates, arrays);
  return out;
}

// Top-level entry points (float path over ModelParams).
BatchLossResult<float> MfaeLoss(ModelParams &params,
                                const std::vector<Array2> &batch, float tau,
                                uint64_t noise_seed, Mode mode = Mode::kTrain,
                                bool want_grads = true, int workers = 1);
BatchLossResult<float> MfvaeLoss(ModelParams &params,
                                 const std::vector<Array2> &batch,
                                 float beta_omega, float beta_y, float tau,
                                 uint64_t noise_seed, Mode mode = Mode::kTrain,
                                 bool want_grads = true, int workers = 1);

// Exact marginalization of the reconstruction loss over the mixture
// indicators (infer-mode batch norm, so frames decouple except through the
// decoder's splice context, which is enumerated jointly).  Tractable for
// small K only.
double ExactExpectedReconstruction(const ModelParams &params,
                                   const Array2 &frames,
                                   const std::vector<float> &mu_omega);

}  // namespace mfae

#endif  // MFAE_LOSSES_H_
