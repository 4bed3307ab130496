// mfae/selfcheck.cc

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

#include "mfae/selfcheck.h"

#include <cmath>
#include <functional>
#include <sstream>

#include "mfae/autodiff.h"
#include "mfae/gradcheck.h"
#include "mfae/losses.h"
#include "mfae/model.h"
#include "mfae/sampling.h"

namespace mfae {

namespace {

using DArr = ArrayT<double>;

DArr RandArr(int r, int c, Rng &rng, double lo = -1.0, double hi = 1.0) {
  DArr a(r, c);
  for (auto &e : a.v) e = lo + (hi - lo) * rng.Uniform();
  return a;
}

// Keeps |x| >= 0.1 so kinked / singular primitives stay smooth around the
// finite-difference probes.
DArr RandArrAwayFromZero(int r, int c, Rng &rng) {
  DArr a(r, c);
  for (auto &e : a.v) {
    double m = 0.1 + 0.9 * rng.Uniform();
    e = rng.Uniform() < 0.5 ? -m : m;
  }
  return a;
}

// Reduces an arbitrary output node to a scalar via a fixed random linear
// functional, so every output entry influences the check.
int ReduceWith(Tape<double> &t, int out, const DArr &w) {
  return t.SumAll(t.Mul(out, t.Constant(w)));
}

struct PrimCase {
  std::string name;
  std::vector<DArr> inputs;
  // Builds the graph over leaves and returns the pre-reduction node.
  std::function<int(Tape<double> &, const std::vector<int> &)> build;
  std::pair<int, int> out_shape;
};

double RunPrimCase(const PrimCase &pc, uint64_t seed) {
  Rng wrng(MixSeed(seed, 0xABCDu));
  DArr w = RandArr(pc.out_shape.first, pc.out_shape.second, wrng);
  GradCheckFn fn = [&](const std::vector<DArr> &params,
                       bool) -> GradCheckEval {
    Tape<double> tape;
    std::vector<int> leaves;
    for (const auto &p : params) leaves.push_back(tape.Leaf(p));
    int out = pc.build(tape, leaves);
    int scalar = ReduceWith(tape, out, w);
    tape.Backward(scalar);
    GradCheckEval ev;
    ev.value = tape.Value(scalar)(0, 0);
    for (int l : leaves) ev.grads.push_back(tape.Grad(l));
    return ev;
  };
  GradCheckOptions opts;
  opts.max_probes = 60;
  return CheckGradients(fn, pc.inputs, MixSeed(seed, 0x9999u), opts);
}

// Composed loss with frozen noise (fixed utterance seed), tiny model.
double ComposedLossMaxRel(uint64_t seed, Variant variant) {
  ArchConfig cfg;
  cfg.feat_dim = 5;
  cfg.n_mixtures = 3;
  cfg.embed_dim = 4;
  cfg.tdnn_hidden = 6;
  cfg.ff_hidden = 6;
  cfg.decoder_hidden = 6;
  cfg.encoder_contexts = {{-1, 0, 1}, {0}, {-1, 1}, {0}};
  ModelParams params = InitParams(cfg, MixSeed(seed, 0x11u));
  std::vector<DArr> dparams = CastArrays(params.arrays);

  // A few utterances of different lengths, so the utterance-level batch
  // norm normalizes across a real (if tiny) batch.
  Rng frng(MixSeed(seed, 0x12u));
  std::vector<Array2> batch;
  for (int rows : {7, 5, 9}) {
    Array2 frames(rows, cfg.feat_dim);
    for (auto &e : frames.v) e = static_cast<float>(frng.Gauss());
    batch.push_back(std::move(frames));
  }
  const uint64_t noise_seed = MixSeed(seed, 0x13u);

  GradCheckFn fn = [&](const std::vector<DArr> &p, bool want) -> GradCheckEval {
    // BatchLoss updates batch-norm running stats in place; train-mode
    // forward never reads them, so a scratch copy keeps `p` intact
    // without perturbing the checked values.
    std::vector<DArr> scratch = p;
    auto r = BatchLoss<double>(cfg, params.layout, scratch, batch, variant,
                               0.5, 0.5, 0.2, noise_seed, Mode::kTrain, want);
    GradCheckEval ev;
    ev.value = r.breakdown.total;
    if (want) {
      ev.grads = std::move(r.grads);
    } else {
      ev.grads.resize(p.size());
    }
    return ev;
  };
  GradCheckOptions opts;
  opts.max_probes = 120;
  // A smaller step keeps the probe interval from straddling ReLU kinks;
  // 64-bit precision leaves ample headroom below it.
  opts.step = 1e-7;
  // The loss is locally invariant to the frame-stage bn_beta parameters
  // (they shift every pooled row equally and the utterance-level batch
  // norm removes the shift), so those probes compare a true zero against
  // finite-difference rounding noise.
  opts.noise_tol = 2e-5;
  return CheckGradients(fn, dparams, MixSeed(seed, 0x14u), opts);
}

int SampleCategorical(std::span<const double> pi, Rng &rng) {
  double u = rng.Uniform(), c = 0;
  for (size_t k = 0; k < pi.size(); ++k) {
    c += pi[k];
    if (u < c) return static_cast<int>(k);
  }
  return static_cast<int>(pi.size()) - 1;
}

}  // namespace

SuiteResult CheckGradientSuite(uint64_t seed) {
  Rng rng(MixSeed(seed, 0x47u));
  std::vector<PrimCase> cases;

  {
    PrimCase c{"affine",
               {RandArr(4, 3, rng), RandArr(3, 5, rng), RandArr(1, 5, rng)},
               [](Tape<double> &t, const std::vector<int> &l) {
                 return t.Affine(l[0], l[1], l[2]);
               },
               {4, 5}};
    cases.push_back(std::move(c));
  }
  cases.push_back({"relu",
                   {RandArrAwayFromZero(4, 5, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.Relu(l[0]);
                   },
                   {4, 5}});
  cases.push_back({"batchnorm_train",
                   {RandArr(6, 4, rng), RandArr(1, 4, rng, 0.5, 1.5),
                    RandArr(1, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.BatchNormTrain(l[0], l[1], l[2], 1e-5);
                   },
                   {6, 4}});
  {
    DArr rm = RandArr(1, 4, rng), rv = RandArr(1, 4, rng, 0.5, 2.0);
    cases.push_back({"batchnorm_infer",
                     {RandArr(6, 4, rng), RandArr(1, 4, rng, 0.5, 1.5),
                      RandArr(1, 4, rng)},
                     [rm, rv](Tape<double> &t, const std::vector<int> &l) {
                       return t.BatchNormInfer(l[0], l[1], l[2], rm, rv, 1e-5);
                     },
                     {6, 4}});
  }
  cases.push_back({"softmax_rows",
                   {RandArr(5, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.SoftmaxRows(l[0]);
                   },
                   {5, 4}});
  cases.push_back({"softplus",
                   {RandArr(4, 4, rng, -3.0, 3.0)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.Softplus(l[0]);
                   },
                   {4, 4}});
  cases.push_back({"concat_cols",
                   {RandArr(4, 3, rng), RandArr(4, 2, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.ConcatCols(l[0], l[1]);
                   },
                   {4, 5}});
  cases.push_back({"add_sub_mul",
                   {RandArr(3, 4, rng), RandArr(3, 4, rng), RandArr(3, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.Mul(t.Sub(t.Add(l[0], l[1]), l[2]), l[1]);
                   },
                   {3, 4}});
  cases.push_back({"scale_add_scalar",
                   {RandArr(3, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.AddScalar(t.Scale(l[0], -1.7), 0.3);
                   },
                   {3, 4}});
  cases.push_back({"sqrt_log",
                   {RandArr(3, 4, rng, 0.5, 2.0)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.Log(t.Sqrt(l[0]));
                   },
                   {3, 4}});
  cases.push_back({"splice",
                   {RandArr(6, 3, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.Splice(l[0], {-2, 0, 1});
                   },
                   {6, 9}});
  cases.push_back({"splice_segments",
                   {RandArr(9, 3, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.Splice(l[0], {-2, 0, 1}, {4, 2, 3});
                   },
                   {9, 9}});
  cases.push_back({"stats_pool",
                   {RandArr(7, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.StatsPool(l[0], 1e-10);
                   },
                   {1, 8}});
  cases.push_back({"stats_pool_segments",
                   {RandArr(9, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.StatsPool(l[0], 1e-10, {3, 5, 1});
                   },
                   {3, 8}});
  cases.push_back({"repeat_rows",
                   {RandArr(3, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.RepeatRows(l[0], {2, 4, 1});
                   },
                   {7, 4}});
  cases.push_back({"broadcast_rows",
                   {RandArr(1, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.BroadcastRows(l[0], 5);
                   },
                   {5, 4}});
  cases.push_back({"sub_colvec_lse",
                   {RandArr(5, 4, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.SubColVec(l[0], t.LogSumExpRows(l[0]));
                   },
                   {5, 4}});
  cases.push_back({"sum_all",
                   {RandArr(4, 3, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.SumAll(t.Mul(l[0], l[0]));
                   },
                   {1, 1}});
  cases.push_back({"half_sum_sq_diff",
                   {RandArr(4, 3, rng), RandArr(4, 3, rng)},
                   [](Tape<double> &t, const std::vector<int> &l) {
                     return t.HalfSumSqDiff(l[0], l[1]);
                   },
                   {1, 1}});

  SuiteResult r;
  r.name = "gradients";
  double worst_prim = 0;
  std::string worst_name;
  for (const auto &pc : cases) {
    double e = RunPrimCase(pc, MixSeed(seed, std::hash<std::string>{}(pc.name)));
    if (e > worst_prim) {
      worst_prim = e;
      worst_name = pc.name;
    }
  }
  double mfae_err = ComposedLossMaxRel(seed, Variant::kMfae);
  double mfvae_err = ComposedLossMaxRel(MixSeed(seed, 0x77u), Variant::kMfvae);
  double worst_comp = std::max(mfae_err, mfvae_err);

  r.passed = worst_prim < 1e-4 && worst_comp < 1e-3;
  std::ostringstream os;
  os << "max primitive rel err " << worst_prim << " (" << worst_name
     << "), composed " << worst_comp;
  r.detail = os.str();
  return r;
}

SuiteResult CheckKlSuite(uint64_t seed) {
  SuiteResult r;
  r.name = "kl_closed_form";
  double worst = 0;
  bool anchors_ok = true;

  // Analytic anchors.
  {
    std::vector<double> mu0 = {0, 0, 0}, s1 = {1, 1, 1};
    anchors_ok &= std::abs(KlGaussianStd(mu0, s1)) < 1e-12;
    std::vector<double> mu1 = {1.0}, s11 = {1.0};
    anchors_ok &= std::abs(KlGaussianStd(mu1, s11) - 0.5) < 1e-12;
    std::vector<double> onehot = {0, 0, 1, 0};
    anchors_ok &= std::abs(KlCategoricalUniform(onehot) - std::log(4.0)) < 1e-12;
    std::vector<double> unif(8, 0.125);
    anchors_ok &= std::abs(KlCategoricalUniform(unif)) < 1e-12;
  }

  const int kSamples = 1000000;
  Rng rng(MixSeed(seed, 0x55u));
  for (int trial = 0; trial < 20; ++trial) {
    // Gaussian case, 3 dims; redraw until KL is well away from zero so the
    // 1% relative tolerance is meaningful.
    std::vector<double> mu(3), s2(3);
    double exact = 0;
    do {
      for (int d = 0; d < 3; ++d) {
        mu[d] = rng.Gauss();
        s2[d] = std::exp(0.5 * rng.Gauss());
      }
      exact = KlGaussianStd(mu, s2);
    } while (exact < 0.1);
    double acc = 0;
    for (int i = 0; i < kSamples; ++i) {
      double term = 0;
      for (int d = 0; d < 3; ++d) {
        double eps = rng.Gauss();
        double z = mu[d] + std::sqrt(s2[d]) * eps;
        term += -0.5 * (std::log(s2[d]) + eps * eps) + 0.5 * z * z;
      }
      acc += term;
    }
    worst = std::max(worst, std::abs(acc / kSamples - exact) / exact);
  }
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 8;
    std::vector<double> pi(K);
    double exact = 0;
    do {
      double s = 0;
      for (int k = 0; k < K; ++k) {
        pi[k] = std::exp(rng.Gauss());
        s += pi[k];
      }
      for (int k = 0; k < K; ++k) pi[k] /= s;
      exact = KlCategoricalUniform(pi);
    } while (exact < 0.1);
    double acc = 0;
    for (int i = 0; i < kSamples; ++i) {
      int k = SampleCategorical(pi, rng);
      acc += std::log(pi[k] * K);
    }
    worst = std::max(worst, std::abs(acc / kSamples - exact) / exact);
  }

  r.passed = anchors_ok && worst < 0.01;
  std::ostringstream os;
  os << "anchors " << (anchors_ok ? "ok" : "FAIL") << ", max MC rel err "
     << worst;
  r.detail = os.str();
  return r;
}

SuiteResult CheckSamplerSuite(uint64_t seed) {
  SuiteResult r;
  r.name = "samplers";
  const int K = 8, N = 100000;
  Rng prng(MixSeed(seed, 0x61u));
  std::vector<float> logits(K);
  std::vector<double> pi(K);
  double s = 0;
  for (int k = 0; k < K; ++k) {
    logits[k] = static_cast<float>(prng.Gauss());
    pi[k] = std::exp(logits[k]);
    s += pi[k];
  }
  for (int k = 0; k < K; ++k) pi[k] /= s;

  // Gumbel-Max frequencies within 3 sigma of pi.
  Rng rng1(MixSeed(seed, 0x62u));
  std::vector<int> gm_counts(K, 0);
  for (int i = 0; i < N; ++i) {
    auto one_hot = GumbelMaxSample(logits, rng1);
    for (int k = 0; k < K; ++k)
      if (one_hot[k] == 1.0f) gm_counts[k]++;
  }
  bool freq_ok = true;
  double worst_sigma = 0;
  for (int k = 0; k < K; ++k) {
    double sd = std::sqrt(pi[k] * (1 - pi[k]) / N);
    double dev = std::abs(static_cast<double>(gm_counts[k]) / N - pi[k]) / sd;
    worst_sigma = std::max(worst_sigma, dev);
    if (dev > 3.0) freq_ok = false;
  }

  // Gumbel-Softmax argmax counts vs Gumbel-Max counts, two-sample chi^2
  // with K-1 = 7 dof; critical value 18.475 at alpha = 0.01.
  Rng rng2(MixSeed(seed, 0x63u));
  std::vector<int> gs_counts(K, 0);
  for (int i = 0; i < N; ++i) {
    auto soft = GumbelSoftmaxSample(logits, 0.1, rng2);
    int arg = 0;
    for (int k = 1; k < K; ++k)
      if (soft[k] > soft[arg]) arg = k;
    gs_counts[arg]++;
  }
  double chi2 = 0;
  for (int k = 0; k < K; ++k) {
    double a = gm_counts[k], b = gs_counts[k];
    if (a + b > 0) chi2 += (a - b) * (a - b) / (a + b);
  }
  bool chi2_ok = chi2 <= 18.475;

  // Sharpness at tau = 0.01.  Needs logits whose top-2 gap is rarely
  // below tau * ln 99 after Gumbel perturbation, i.e. well separated;
  // near-tied logits produce soft samples at any temperature.
  std::vector<float> sep_logits(K);
  for (int k = 0; k < K; ++k)
    sep_logits[k] = 6.0f * k + 0.5f * static_cast<float>(prng.Gauss());
  Rng rng3(MixSeed(seed, 0x64u));
  int sharp = 0;
  const int M = 10000;
  for (int i = 0; i < M; ++i) {
    auto soft = GumbelSoftmaxSample(sep_logits, 0.01, rng3);
    float mx = soft[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, soft[k]);
    if (mx > 0.99f) sharp++;
  }
  bool sharp_ok = sharp >= static_cast<int>(0.99 * M);

  r.passed = freq_ok && chi2_ok && sharp_ok;
  std::ostringstream os;
  os << "max freq dev " << worst_sigma << " sigma, chi2 " << chi2
     << ", sharp frac " << static_cast<double>(sharp) / M;
  r.detail = os.str();
  return r;
}

SuiteResult CheckKlJensenSuite(uint64_t seed) {
  SuiteResult r;
  r.name = "kl_jensen";
  Rng rng(MixSeed(seed, 0x71u));
  const int T = 16, K = 8;
  bool ok = true;
  double min_gap = 1e300;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> rows(T, std::vector<double>(K));
    std::vector<double> mean_pi(K, 0.0);
    double mean_kl = 0;
    for (int t = 0; t < T; ++t) {
      double s = 0;
      for (int k = 0; k < K; ++k) {
        rows[t][k] = std::exp(rng.Gauss());
        s += rows[t][k];
      }
      for (int k = 0; k < K; ++k) {
        rows[t][k] /= s;
        mean_pi[k] += rows[t][k] / T;
      }
      mean_kl += KlCategoricalUniform(rows[t]) / T;
    }
    double gap = mean_kl - KlCategoricalUniform(mean_pi);
    min_gap = std::min(min_gap, gap);
    if (gap <= 0) ok = false;
  }
  // Equality case: with identical rows, the average of per-frame KLs and
  // the KL of the averaged posterior coincide.
  std::vector<double> row(K);
  double s = 0;
  for (int k = 0; k < K; ++k) {
    row[k] = std::exp(rng.Gauss());
    s += row[k];
  }
  for (int k = 0; k < K; ++k) row[k] /= s;
  double mean_of_kls = 0;
  std::vector<double> avg(K, 0.0);
  for (int t = 0; t < T; ++t) {
    mean_of_kls += KlCategoricalUniform(row) / T;
    for (int k = 0; k < K; ++k) avg[k] += row[k] / T;
  }
  bool eq_ok = std::abs(mean_of_kls - KlCategoricalUniform(avg)) < 1e-9;

  r.passed = ok && eq_ok;
  std::ostringstream os;
  os << "min strict gap " << min_gap << ", equality case "
     << (eq_ok ? "ok" : "FAIL");
  r.detail = os.str();
  return r;
}

std::vector<SuiteResult> RunSelfcheck(uint64_t seed) {
  return {CheckGradientSuite(seed), CheckKlSuite(seed),
          CheckSamplerSuite(seed), CheckKlJensenSuite(seed)};
}

}  // namespace mfae
