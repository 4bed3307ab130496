// mfae/losses.cc

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

#include "mfae/losses.h"

#include <algorithm>
#include <cmath>

namespace mfae {

double KlGaussianStd(std::span<const double> mu,
                     std::span<const double> sigma2) {
  MFAE_CHECK(mu.size() == sigma2.size(), "kl_gaussian_std dim mismatch");
  double kl = 0;
  for (size_t d = 0; d < mu.size(); ++d) {
    MFAE_CHECK(sigma2[d] > 0, "non-positive variance: ", sigma2[d]);
    kl += sigma2[d] + mu[d] * mu[d] - 1.0 - std::log(sigma2[d]);
  }
  return 0.5 * kl;
}

double KlCategoricalUniform(std::span<const double> pi) {
  MFAE_CHECK(!pi.empty(), "empty probability vector");
  double sum = 0;
  for (double p : pi) {
    MFAE_CHECK(p >= 0, "negative probability: ", p);
    sum += p;
  }
  MFAE_CHECK(std::abs(sum - 1.0) <= 1e-5, "row sum off simplex: ", sum);
  double k = static_cast<double>(pi.size());
  double kl = 0;
  for (double p : pi)
    if (p > 0) kl += p * std::log(p * k);
  return kl;
}

BatchLossResult<float> MfaeLoss(ModelParams &params,
                                const std::vector<Array2> &batch, float tau,
                                uint64_t noise_seed, Mode mode,
                                bool want_grads, int workers) {
  return BatchLoss<float>(params.config, params.layout, params.arrays, batch,
                          Variant::kMfae, 0.0f, 0.0f, tau, noise_seed, mode,
                          want_grads, workers);
}

BatchLossResult<float> MfvaeLoss(ModelParams &params,
                                 const std::vector<Array2> &batch,
                                 float beta_omega, float beta_y, float tau,
                                 uint64_t noise_seed, Mode mode,
                                 bool want_grads, int workers) {
  return BatchLoss<float>(params.config, params.layout, params.arrays, batch,
                          Variant::kMfvae, beta_omega, beta_y, tau, noise_seed,
                          mode, want_grads, workers);
}

namespace {

// Frame-local decoder evaluation in infer mode: the spliced mixture row is
// assembled by the caller, so a single output frame can be computed for a
// given assignment of labels to its context window.
std::vector<double> DecodeRowInfer(const Layout &layout,
                                   const std::vector<ArrayT<double>> &arrays,
                                   const std::vector<double> &spliced_y,
                                   const std::vector<double> &omega) {
  std::vector<double> h = spliced_y;
  for (size_t li = 0; li < layout.decoder.size(); ++li) {
    const LayerSpec &spec = layout.decoder[li];
    const ParamSlots &ps = layout.decoder_slots[li];
    std::vector<double> in = h;
    in.insert(in.end(), omega.begin(), omega.end());
    MFAE_CHECK(static_cast<int>(in.size()) == spec.WeightRows(),
               "decoder row width mismatch");
    const auto &W = arrays[ps.w];
    const auto &b = arrays[ps.b];
    std::vector<double> out(spec.out_dim);
    for (int j = 0; j < spec.out_dim; ++j) {
      double s = b(0, j);
      for (int i = 0; i < W.rows; ++i) s += in[i] * W(i, j);
      out[j] = s;
    }
    if (spec.relu_bn) {
      const auto &g = arrays[ps.gamma], &bt = arrays[ps.beta];
      const auto &rm = arrays[ps.rmean], &rv = arrays[ps.rvar];
      for (int j = 0; j < spec.out_dim; ++j) {
        double x = std::max(out[j], 0.0);
        out[j] = g(0, j) * (x - rm(0, j)) / std::sqrt(rv(0, j) + kBnEps) +
                 bt(0, j);
      }
    }
    h = std::move(out);
  }
  return h;
}

}  // namespace

double ExactExpectedReconstruction(const ModelParams &params,
                                   const Array2 &frames,
                                   const std::vector<float> &mu_omega) {
  const ArchConfig &cfg = params.config;
  const int T = frames.rows, D = frames.cols, K = cfg.n_mixtures;
  MFAE_CHECK(D == cfg.feat_dim, "feature dim mismatch");
  MFAE_CHECK(static_cast<int>(mu_omega.size()) == cfg.embed_dim,
             "sequence vector dim mismatch");

  std::vector<ArrayT<double>> arrays = CastArrays(params.arrays);
  std::vector<double> omega(mu_omega.begin(), mu_omega.end());

  // Tokenizer posterior in infer mode (double path).
  Tape<double> tape;
  auto ctx = MakeGraphCtx(tape, params.layout, arrays, Mode::kInfer);
  int input = tape.Constant(frames.Cast<double>());
  int probs_node = tape.SoftmaxRows(TokenizerForward(ctx, input, arrays));
  const ArrayT<double> &pi = tape.Value(probs_node);

  const std::vector<int> &dctx = cfg.decoder_context;
  const int C = static_cast<int>(dctx.size());

  double expected = 0;
  std::vector<int> uniq;        // distinct clamped context frame indices
  std::vector<int> slot_of(C);  // context slot -> position in uniq
  std::vector<int> assign;      // label per distinct frame
  for (int t = 0; t < T; ++t) {
    uniq.clear();
    for (int j = 0; j < C; ++j) {
      int src = std::clamp(t + dctx[j], 0, T - 1);
      auto it = std::find(uniq.begin(), uniq.end(), src);
      if (it == uniq.end()) {
        slot_of[j] = static_cast<int>(uniq.size());
        uniq.push_back(src);
      } else {
        slot_of[j] = static_cast<int>(it - uniq.begin());
      }
    }
    const int M = static_cast<int>(uniq.size());
    // Enumerate joint label assignments over the distinct context frames.
    assign.assign(M, 0);
    std::vector<double> spliced(static_cast<size_t>(C) * K);
    while (true) {
      double w = 1.0;
      for (int m = 0; m < M; ++m) w *= pi(uniq[m], assign[m]);
      if (w > 0) {
        std::fill(spliced.begin(), spliced.end(), 0.0);
        for (int j = 0; j < C; ++j)
          spliced[static_cast<size_t>(j) * K + assign[slot_of[j]]] = 1.0;
        std::vector<double> rec = DecodeRowInfer(params.layout, arrays,
                                                 spliced, omega);
        double err = 0;
        for (int d = 0; d < D; ++d) {
          double diff = static_cast<double>(frames(t, d)) - rec[d];
          err += diff * diff;
        }
        expected += w * 0.5 * err;
      }
      int m = 0;
      while (m < M && ++assign[m] == K) assign[m++] = 0;
      if (m == M) break;
    }
  }
  return expected;
}

}  // namespace mfae
