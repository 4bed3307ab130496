// tests/acceptance.cc

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

// End-to-end acceptance gate: one pass/fail line per criterion, nonzero
// exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfae/eval.h"
#include "mfae/losses.h"
#include "mfae/selfcheck.h"
#include "mfae/training.h"

using namespace mfae;

namespace {

bool g_all_ok = true;

void Report(int index, const std::string &name, bool ok,
            const std::string &detail) {
  std::printf("criterion %d %s: %s%s%s\n", index, name.c_str(),
              ok ? "pass" : "FAIL", detail.empty() ? "" : " ", detail.c_str());
  std::fflush(stdout);
  g_all_ok = g_all_ok && ok;
}

std::string ReadBytes(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// --------------------------------------------------------------------------
// Criterion 4: Monte-Carlo estimate of the expected reconstruction loss
// under hard mixture sampling vs the exact marginalization.

void Criterion4() {
  ArchConfig arch;
  arch.feat_dim = 8;
  arch.n_mixtures = 4;
  arch.embed_dim = 6;
  arch.tdnn_hidden = 8;
  arch.ff_hidden = 8;
  arch.decoder_hidden = 8;
  arch.encoder_contexts = {{-1, 0, 1}, {0}, {-1, 1}, {0}};
  ModelParams params = InitParams(arch, 99);
  const int T = 16, K = 4;
  Rng data_rng(100);
  Array2 frames(T, arch.feat_dim);
  for (auto &e : frames.v) e = static_cast<float>(data_rng.Gauss());

  std::vector<float> mu =
      EmbedUtterance(params, frames, Mode::kInfer).mu_omega;
  double exact = ExactExpectedReconstruction(params, frames, mu);

  MixturePosterior post = TokenizeFrames(params, frames, Mode::kInfer);
  Rng rng(MixSeed(4242, 4));
  const int draws = 10000;
  double sum = 0;
  for (int n = 0; n < draws; ++n) {
    Array2 y(T, K);
    for (int t = 0; t < T; ++t) {
      std::vector<float> row(post.logits.Row(t), post.logits.Row(t) + K);
      std::vector<float> s = GumbelMaxSample(row, rng);
      std::copy(s.begin(), s.end(), y.Row(t));
    }
    Array2 rec = DecodeFrames(params, mu, y, Mode::kInfer);
    double loss = 0;
    for (size_t i = 0; i < rec.v.size(); ++i) {
      double d = static_cast<double>(rec.v[i]) - frames.v[i];
      loss += 0.5 * d * d;
    }
    sum += loss;
  }
  double mc = sum / draws;
  double rel = std::abs(mc - exact) / std::abs(exact);
  Report(4, "mc_expectation", rel < 0.01,
         StrCat("(exact ", exact, " mc ", mc, " rel ", rel, ")"));
}

// --------------------------------------------------------------------------
// Criteria 6/7/9/10 share training helpers.

struct EvalOut {
  double eer = 0;
  double nmi = 0;
};

EvalOut EvalModel(ModelParams &params, const SynthDataset &data,
                  const std::vector<Trial> &trials) {
  std::map<std::string, std::vector<float>> emb;
  std::vector<int> hyp, ref;
  for (size_t i = 0; i < data.utterances.size(); ++i) {
    const auto &u = data.utterances[i];
    emb[u.utt_id] = EmbedUtterance(params, u.frames, Mode::kInfer).mu_omega;
    MixturePosterior post = TokenizeFrames(params, u.frames, Mode::kInfer);
    for (int t = 0; t < post.probs.rows; ++t) {
      int a = 0;
      for (int k = 1; k < post.probs.cols; ++k)
        if (post.probs(t, k) > post.probs(t, a)) a = k;
      hyp.push_back(a);
      ref.push_back(data.oracle.mixture_labels[i][t]);
    }
  }
  std::vector<double> tgt, non;
  for (const auto &t : trials) {
    double s = CosineScore(emb.at(t.enroll_id), emb.at(t.test_id));
    (t.target ? tgt : non).push_back(s);
  }
  EvalOut out;
  out.eer = ComputeEer(tgt, non);
  out.nmi = ClusteringNmi(ref, hyp);
  return out;
}

SynthDataset g_c6_data;
ModelParams g_c6_model;
bool g_c6_trained = false;

void Criterion6() {
  auto t0 = std::chrono::steady_clock::now();
  g_c6_data = SynthGenerate(8, 20, 30, 200, 20, 0.3f, 606);
  ArchConfig arch;
  arch.feat_dim = 20;
  arch.n_mixtures = 8;
  arch.embed_dim = 32;
  arch.tdnn_hidden = 64;
  arch.ff_hidden = 64;
  arch.decoder_hidden = 64;
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.segment_frames = 200;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.tau = 0.1;
  cfg.grad_clip = 5;
  cfg.variant = Variant::kMfae;
  cfg.seed = 608;
  cfg.workers = 4;
  TrainResult res = Train(cfg, arch, g_c6_data.utterances);
  g_c6_model = std::move(res.params);
  g_c6_trained = true;

  Rng trial_rng(608);
  auto trials = MakeTrials(g_c6_data.utterances, 2000, trial_rng);
  EvalOut out = EvalModel(g_c6_model, g_c6_data, trials);
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0).count();
  Report(6, "synthetic_recovery", out.nmi >= 0.5 && out.eer <= 0.15,
         StrCat("(nmi ", out.nmi, " eer ", out.eer, " ", secs, "s)"));
}

double MfvaeEer(const SynthDataset &data, const std::vector<Trial> &trials,
                double beta_omega, uint64_t seed) {
  ArchConfig arch;
  arch.feat_dim = 16;
  arch.n_mixtures = 8;
  arch.embed_dim = 16;
  arch.tdnn_hidden = 48;
  arch.ff_hidden = 48;
  arch.decoder_hidden = 48;
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.segment_frames = 20;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 2e-4;
  cfg.tau = 0.1;
  cfg.grad_clip = 5;
  cfg.variant = Variant::kMfvae;
  cfg.beta_omega = beta_omega;
  cfg.beta_y = 0;
  cfg.seed = seed;
  cfg.workers = 4;
  TrainResult res = Train(cfg, arch, data.utterances);
  return EvalModel(res.params, data, trials).eer;
}

void Criterion7() {
  auto t0 = std::chrono::steady_clock::now();
  SynthDataset data = SynthGenerate(6, 12, 16, 20, 16, 0.3f, 707);
  Rng trial_rng(708);
  auto trials = MakeTrials(data.utterances, 600, trial_rng);
  double strong = 0, weak = 0;
  std::string detail;
  for (uint64_t s = 0; s < 3; ++s) {
    double e_strong = MfvaeEer(data, trials, 3.0, 710 + s);
    double e_weak = MfvaeEer(data, trials, 0.01, 710 + s);
    strong += e_strong / 3;
    weak += e_weak / 3;
    detail += StrCat(" seed", s, "=", e_strong, "/", e_weak);
  }
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0).count();
  Report(7, "kl_weight_tradeoff", strong > weak,
         StrCat("(mean eer beta3 ", strong, " beta0.01 ", weak, detail, " ",
                secs, "s)"));
}

void Criterion9() {
  SynthDataset data = SynthGenerate(4, 4, 6, 60, 8, 0.3f, 909);
  ArchConfig arch;
  arch.feat_dim = 8;
  arch.n_mixtures = 4;
  arch.embed_dim = 8;
  arch.tdnn_hidden = 12;
  arch.ff_hidden = 12;
  arch.decoder_hidden = 12;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.segment_frames = 50;
  cfg.tau = 0.5;
  cfg.seed = 910;
  auto d1 = std::filesystem::temp_directory_path() / "mfae_acc_det_a";
  auto d2 = std::filesystem::temp_directory_path() / "mfae_acc_det_b";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  Train(cfg, arch, data.utterances, d1.string());
  Train(cfg, arch, data.utterances, d2.string());
  bool logs_equal =
      ReadBytes(d1.string() + "/loss.log") ==
      ReadBytes(d2.string() + "/loss.log");
  bool ckpt_equal =
      ReadBytes(d1.string() + "/checkpoint_final.mfae") ==
      ReadBytes(d2.string() + "/checkpoint_final.mfae");
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  Report(9, "bitwise_determinism", logs_equal && ckpt_equal,
         StrCat("(logs ", logs_equal ? "equal" : "differ", " checkpoints ",
                ckpt_equal ? "equal" : "differ", ")"));
}

void Criterion10() {
  if (!g_c6_trained) {
    Report(10, "reconstruction_settings", false, "(no trained model)");
    return;
  }
  ModelParams &params = g_c6_model;
  // Single-utterance corpus: the unified embedding is the utterance's own,
  // so both settings must coincide exactly.
  std::vector<FeatureSequence> one(g_c6_data.utterances.begin(),
                                   g_c6_data.utterances.begin() + 1);
  auto pu1 = Reconstruct(params, one, ReconSetting::kPerUtt);
  auto un1 = Reconstruct(params, one, ReconSetting::kUnified, &one);
  bool single_ok = pu1[0].frames.v == un1[0].frames.v;

  // Cross-class probe: with a shared sequence vector, reconstructions of
  // utterances from different classes should be closer in per-dimension
  // mean than with per-utterance embeddings.
  std::vector<FeatureSequence> probe;
  const int upc = 30;
  for (int c = 0; c < 6; ++c) probe.push_back(g_c6_data.utterances[c * upc]);
  auto pu = Reconstruct(params, probe, ReconSetting::kPerUtt);
  auto un = Reconstruct(params, probe, ReconSetting::kUnified,
                        &g_c6_data.utterances);
  auto mean_gap = [&](const std::vector<FeatureSequence> &recons) {
    const int d = recons[0].frames.cols;
    double gap = 0;
    int pairs = 0;
    std::vector<std::vector<double>> means;
    for (const auto &r : recons) {
      std::vector<double> m(d, 0.0);
      for (int t = 0; t < r.frames.rows; ++t)
        for (int j = 0; j < d; ++j) m[j] += r.frames(t, j);
      for (auto &e : m) e /= r.frames.rows;
      means.push_back(std::move(m));
    }
    for (size_t i = 0; i < means.size(); ++i)
      for (size_t j = i + 1; j < means.size(); ++j) {
        double s = 0;
        for (int k = 0; k < d; ++k)
          s += (means[i][k] - means[j][k]) * (means[i][k] - means[j][k]);
        gap += std::sqrt(s);
        pairs++;
      }
    return gap / pairs;
  };
  double gap_pu = mean_gap(pu), gap_un = mean_gap(un);
  Report(10, "reconstruction_settings", single_ok && gap_un < gap_pu,
         StrCat("(single ", single_ok ? "exact" : "mismatch", " gap per_utt ",
                gap_pu, " unified ", gap_un, ")"));
}

// --------------------------------------------------------------------------
// Criterion 8: detection metrics and DTW vs exhaustive oracles.

struct Pt {
  double far, frr;
};

Pt RocOracle(const std::vector<double> &tgt, const std::vector<double> &non,
             double theta) {
  int fa = 0, fr = 0;
  for (double s : non)
    if (s >= theta) fa++;
  for (double s : tgt)
    if (s < theta) fr++;
  return {static_cast<double>(fa) / non.size(),
          static_cast<double>(fr) / tgt.size()};
}

std::vector<double> UniqueSorted(const std::vector<double> &tgt,
                                 const std::vector<double> &non) {
  std::set<double> s(tgt.begin(), tgt.end());
  s.insert(non.begin(), non.end());
  return {s.begin(), s.end()};
}

double EerOracle(const std::vector<double> &tgt,
                 const std::vector<double> &non) {
  std::vector<double> thr = UniqueSorted(tgt, non);
  Pt prev = {1.0, 0.0};
  for (size_t i = 0; i <= thr.size(); ++i) {
    Pt cur = (i < thr.size()) ? RocOracle(tgt, non, thr[i]) : Pt{0.0, 1.0};
    double d_prev = prev.far - prev.frr;
    double d_cur = cur.far - cur.frr;
    if (d_prev == 0.0) return prev.far;
    if (d_cur == 0.0 && i == thr.size()) return cur.far;
    if (d_prev > 0.0 && d_cur <= 0.0)
      return prev.far + d_prev / (d_prev - d_cur) * (cur.far - prev.far);
    prev = cur;
  }
  return prev.far;
}

double MdcfOracle(const std::vector<double> &tgt,
                  const std::vector<double> &non, double p) {
  double norm = std::min(p, 1.0 - p);
  double best = p / norm;
  for (double theta : UniqueSorted(tgt, non)) {
    Pt r = RocOracle(tgt, non, theta);
    best = std::min(best, (p * r.frr + (1.0 - p) * r.far) / norm);
  }
  return best;
}

struct PathBest {
  double cost = 1e300;
  int len = 0;
};

void DtwEnumerate(const Array2 &a, const Array2 &b, int i, int j, double cost,
                  int len, PathBest &best) {
  double c = cost + AngularCosineDistance(
                        {a.Row(i), static_cast<size_t>(a.cols)},
                        {b.Row(j), static_cast<size_t>(b.cols)});
  if (i == a.rows - 1 && j == b.rows - 1) {
    if (c < best.cost || (c == best.cost && len + 1 < best.len))
      best = {c, len + 1};
    return;
  }
  if (i + 1 < a.rows) DtwEnumerate(a, b, i + 1, j, c, len + 1, best);
  if (j + 1 < b.rows) DtwEnumerate(a, b, i, j + 1, c, len + 1, best);
  if (i + 1 < a.rows && j + 1 < b.rows)
    DtwEnumerate(a, b, i + 1, j + 1, c, len + 1, best);
}

void Criterion8() {
  Rng rng(808);
  double max_err = 0;
  for (int trial = 0; trial < 50; ++trial) {
    int nt = 5 + rng.UniformInt(30), nn = 5 + rng.UniformInt(30);
    std::vector<double> tgt(nt), non(nn);
    bool gridded = trial % 2 == 0;
    for (auto &s : tgt) s = gridded ? rng.UniformInt(8) : rng.Gauss() + 0.8;
    for (auto &s : non) s = gridded ? rng.UniformInt(8) : rng.Gauss();
    max_err = std::max(max_err,
                       std::abs(ComputeEer(tgt, non) - EerOracle(tgt, non)));
    for (double p : {0.01, 0.1, 0.5})
      max_err = std::max(max_err, std::abs(ComputeMdcf(tgt, non, p) -
                                           MdcfOracle(tgt, non, p)));
  }
  double dtw_err = 0;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 1 + rng.UniformInt(5), m = 1 + rng.UniformInt(5);
    Array2 a(n, 3), b(m, 3);
    for (auto &e : a.v) e = static_cast<float>(rng.Gauss());
    for (auto &e : b.v) e = static_cast<float>(rng.Gauss());
    PathBest best;
    DtwEnumerate(a, b, 0, 0, 0.0, 0, best);
    dtw_err = std::max(
        dtw_err, std::abs(DtwDistance(a, b) - best.cost / best.len));
  }
  Report(8, "metric_oracles", max_err < 1e-12 && dtw_err < 1e-12,
         StrCat("(max detection err ", max_err, " max dtw err ", dtw_err,
                ")"));
}

void SuiteCriterion(int index, const std::string &name, SuiteResult r) {
  Report(index, name, r.passed, "(" + r.detail + ")");
}

}  // namespace

int main() {
  try {
    SuiteCriterion(1, "gradient_checks", CheckGradientSuite(0));
    SuiteCriterion(2, "kl_closed_form", CheckKlSuite(0));
    SuiteCriterion(3, "sampler_distributions", CheckSamplerSuite(0));
    Criterion4();
    SuiteCriterion(5, "kl_jensen", CheckKlJensenSuite(0));
    Criterion6();
    Criterion7();
    Criterion8();
    Criterion9();
    Criterion10();
  } catch (const std::exception &e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  return g_all_ok ? 0 : 1;
}
