// tests/test_data.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mfae/data.h"

using namespace mfae;

namespace {

std::string TempPath(const std::string &name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Array2 RandFrames(int t, int d, uint64_t seed) {
  Rng rng(seed);
  Array2 f(t, d);
  for (auto &e : f.v) e = static_cast<float>(rng.Gauss());
  return f;
}

}  // namespace

TEST_CASE("feature archive round-trip is bit exact") {
  std::vector<FeatureSequence> seqs;
  seqs.push_back({"utt_a", "spkX", RandFrames(7, 4, 1)});
  seqs.push_back({"utt_b", std::nullopt, RandFrames(3, 4, 2)});
  std::string path = TempPath("mfae_feats_test.bin");
  SaveFeatures(path, seqs);
  auto got = LoadFeatures(path);
  REQUIRE(got.size() == 2);
  CHECK(got[0].utt_id == "utt_a");
  REQUIRE(got[0].spk_id.has_value());
  CHECK(*got[0].spk_id == "spkX");
  CHECK(!got[1].spk_id.has_value());
  for (size_t i = 0; i < 2; ++i) {
    CHECK(got[i].frames.rows == seqs[i].frames.rows);
    CHECK(got[i].frames.v == seqs[i].frames.v);
  }
  std::remove(path.c_str());
}

TEST_CASE("feature archive loader rejects corrupt files") {
  std::string path = TempPath("mfae_feats_bad.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "WRONGMAG";
  }
  CHECK_THROWS_AS(LoadFeatures(path), IoError);
  {
    // Valid header claiming one utterance, payload missing.
    std::ofstream os(path, std::ios::binary);
    os << "FEAT0001";
    uint32_t one = 1;
    os.write(reinterpret_cast<const char *>(&one), 4);
  }
  CHECK_THROWS_AS(LoadFeatures(path), IoError);
  // Mixed dimensions within one archive are rejected on load.
  {
    std::vector<FeatureSequence> seqs;
    seqs.push_back({"a", std::nullopt, RandFrames(2, 3, 1)});
    SaveFeatures(path, seqs);
    std::ofstream os(path, std::ios::binary | std::ios::in);
    // Patch the count to 2 and append a 4-dim utterance.
    os.seekp(8);
    uint32_t two = 2;
    os.write(reinterpret_cast<const char *>(&two), 4);
    os.seekp(0, std::ios::end);
    uint32_t len = 1, t = 1, d = 4;
    os.write(reinterpret_cast<const char *>(&len), 4);
    os << "b";
    uint32_t zero = 0;
    os.write(reinterpret_cast<const char *>(&zero), 4);
    os.write(reinterpret_cast<const char *>(&t), 4);
    os.write(reinterpret_cast<const char *>(&d), 4);
    float row[4] = {0, 0, 0, 0};
    os.write(reinterpret_cast<const char *>(row), 16);
  }
  CHECK_THROWS_AS(LoadFeatures(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("gmvn normalizes corpus statistics to zero mean unit variance") {
  std::vector<FeatureSequence> corpus;
  Rng rng(7);
  for (int i = 0; i < 5; ++i) {
    Array2 f(40, 3);
    for (int t = 0; t < 40; ++t)
      for (int d = 0; d < 3; ++d)
        f(t, d) = static_cast<float>(2.5 * rng.Gauss() + d - 1.0);
    corpus.push_back({StrCat("u", i), std::nullopt, std::move(f)});
  }
  GmvnStats st = GmvnFit(corpus);
  for (auto &s : corpus) GmvnApply(st, &s);
  // Two-pass oracle over the normalized corpus.
  for (int d = 0; d < 3; ++d) {
    double sum = 0;
    int64_t n = 0;
    for (const auto &s : corpus)
      for (int t = 0; t < s.frames.rows; ++t) {
        sum += s.frames(t, d);
        ++n;
      }
    double mean = sum / n;
    double var = 0;
    for (const auto &s : corpus)
      for (int t = 0; t < s.frames.rows; ++t)
        var += (s.frames(t, d) - mean) * (s.frames(t, d) - mean);
    var /= n;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  // Round-trip of the stats file.
  std::string path = TempPath("mfae_gmvn_test.txt");
  SaveGmvn(path, st);
  GmvnStats st2 = LoadGmvn(path);
  for (size_t d = 0; d < st.mean.size(); ++d) {
    CHECK(st2.mean[d] == doctest::Approx(st.mean[d]).epsilon(1e-5));
    CHECK(st2.var[d] == doctest::Approx(st.var[d]).epsilon(1e-5));
  }
  std::remove(path.c_str());
}

TEST_CASE("sliding cmn matches a brute-force windowed mean") {
  Array2 f = RandFrames(500, 13, 11);
  const int win = 31, half = win / 2;
  Array2 got = SlidingCmn(f, win);
  for (int t = 0; t < 500; ++t) {
    int lo = std::max(0, t - half), hi = std::min(499, t + half);
    for (int d = 0; d < 13; ++d) {
      double m = 0;
      for (int u = lo; u <= hi; ++u) m += f(u, d);
      m /= (hi - lo + 1);
      CHECK(std::abs(got(t, d) - (f(t, d) - m)) < 1e-6);
    }
  }
}

TEST_CASE("sliding cmn of a constant signal is identically zero") {
  Array2 f(50, 4);
  std::fill(f.v.begin(), f.v.end(), 3.25f);
  Array2 got = SlidingCmn(f, 11);
  for (float e : got.v) CHECK(e == doctest::Approx(0.0f).epsilon(1e-7));
  CHECK_THROWS_AS(SlidingCmn(f, 10), Error);  // even window
}

TEST_CASE("trim segment length and padding rules") {
  Array2 f = RandFrames(20, 3, 12);
  Rng rng(5);
  // T == segment: identity.
  Array2 a = TrimSegment(f, 20, rng);
  CHECK(a.v == f.v);
  // T > segment: a contiguous window, deterministic per seed.
  Rng r1(6), r2(6);
  Array2 b1 = TrimSegment(f, 8, r1);
  Array2 b2 = TrimSegment(f, 8, r2);
  CHECK(b1.v == b2.v);
  REQUIRE(b1.rows == 8);
  bool found = false;
  for (int start = 0; start + 8 <= 20 && !found; ++start) {
    bool match = true;
    for (int t = 0; t < 8 && match; ++t)
      for (int d = 0; d < 3; ++d)
        if (b1(t, d) != f(start + t, d)) {
          match = false;
          break;
        }
    found = match;
  }
  CHECK(found);
  // T < segment: cyclic repetition.
  Array2 small = RandFrames(5, 3, 13);
  Array2 c = TrimSegment(small, 10, rng);
  REQUIRE(c.rows == 10);
  for (int t = 0; t < 10; ++t)
    for (int d = 0; d < 3; ++d) CHECK(c(t, d) == small(t % 5, d));
}

TEST_CASE("synthetic data with zero noise equals the generator output") {
  SynthDataset data = SynthGenerate(3, 2, 2, 15, 6, 0.0f, 99);
  REQUIRE(data.utterances.size() == 4);
  REQUIRE(data.oracle.mixture_labels.size() == 4);
  int upc = 2;
  for (size_t i = 0; i < data.utterances.size(); ++i) {
    int cls = static_cast<int>(i) / upc;
    const auto &seq = data.utterances[i];
    REQUIRE(seq.spk_id.has_value());
    CHECK(*seq.spk_id == StrCat("class", cls));
    for (int t = 0; t < seq.frames.rows; ++t) {
      auto mu = data.oracle.MuStar(data.oracle.sequence_vectors[cls],
                                   data.oracle.mixture_labels[i][t]);
      for (int d = 0; d < 6; ++d)
        CHECK(seq.frames(t, d) == doctest::Approx(mu[d]).epsilon(1e-6));
    }
  }
}

TEST_CASE("synthetic labels are uniform and residuals are standard normal") {
  const int k_true = 4;
  SynthDataset data = SynthGenerate(k_true, 5, 10, 2000, 4, 0.5f, 123);
  int64_t counts[k_true] = {0, 0, 0, 0};
  int64_t total = 0;
  double res_sum = 0, res_sumsq = 0;
  int64_t res_n = 0;
  for (size_t i = 0; i < data.utterances.size(); ++i) {
    int cls = static_cast<int>(i) / 10;
    const auto &seq = data.utterances[i];
    for (int t = 0; t < seq.frames.rows; ++t) {
      int l = data.oracle.mixture_labels[i][t];
      counts[l]++;
      total++;
      auto mu = data.oracle.MuStar(data.oracle.sequence_vectors[cls], l);
      for (int d = 0; d < 4; ++d) {
        double r = (seq.frames(t, d) - mu[d]) / 0.5;
        res_sum += r;
        res_sumsq += r * r;
        res_n++;
      }
    }
  }
  REQUIRE(total == 100000);
  for (int k = 0; k < k_true; ++k) {
    double p = 1.0 / k_true;
    double sd = std::sqrt(p * (1 - p) / total);
    CHECK(std::abs(static_cast<double>(counts[k]) / total - p) < 3 * sd);
  }
  double mean = res_sum / res_n;
  double var = res_sumsq / res_n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var > 0.95);
  CHECK(var < 1.05);
}

TEST_CASE("oracle centroids cluster the noisy frames") {
  const int k_true = 2, feat_dim = 8;
  SynthDataset data = SynthGenerate(k_true, 2, 5, 100, feat_dim, 0.1f, 321);
  int correct = 0, total = 0;
  for (size_t i = 0; i < data.utterances.size(); ++i) {
    int cls = static_cast<int>(i) / 5;
    const auto &seq = data.utterances[i];
    std::vector<std::vector<float>> centroids;
    for (int k = 0; k < k_true; ++k)
      centroids.push_back(
          data.oracle.MuStar(data.oracle.sequence_vectors[cls], k));
    for (int t = 0; t < seq.frames.rows; ++t) {
      int best = 0;
      double best_d = 1e300;
      for (int k = 0; k < k_true; ++k) {
        double d2 = 0;
        for (int d = 0; d < feat_dim; ++d) {
          double diff = seq.frames(t, d) - centroids[k][d];
          d2 += diff * diff;
        }
        if (d2 < best_d) {
          best_d = d2;
          best = k;
        }
      }
      if (best == data.oracle.mixture_labels[i][t]) correct++;
      total++;
    }
  }
  CHECK(static_cast<double>(correct) / total > 0.9);
}

TEST_CASE("synthetic generation is deterministic per seed") {
  SynthDataset a = SynthGenerate(3, 2, 2, 10, 4, 0.3f, 7);
  SynthDataset b = SynthGenerate(3, 2, 2, 10, 4, 0.3f, 7);
  SynthDataset c = SynthGenerate(3, 2, 2, 10, 4, 0.3f, 8);
  CHECK(a.utterances[0].frames.v == b.utterances[0].frames.v);
  CHECK(a.utterances[0].frames.v != c.utterances[0].frames.v);
  CHECK(a.oracle.mixture_labels == b.oracle.mixture_labels);
}

TEST_CASE("trials are half targets and round-trip through text") {
  SynthDataset data = SynthGenerate(2, 4, 3, 5, 3, 0.1f, 42);
  Rng rng(17);
  auto trials = MakeTrials(data.utterances, 200, rng);
  REQUIRE(trials.size() == 200);
  std::map<std::string, std::string> spk;
  for (const auto &u : data.utterances) spk[u.utt_id] = *u.spk_id;
  int targets = 0;
  for (const auto &t : trials) {
    bool same = spk.at(t.enroll_id) == spk.at(t.test_id);
    CHECK(same == t.target);
    targets += t.target ? 1 : 0;
  }
  CHECK(targets == 100);

  std::string path = TempPath("mfae_trials_test.txt");
  SaveTrials(path, trials);
  auto got = LoadTrials(path);
  REQUIRE(got.size() == trials.size());
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].enroll_id == trials[i].enroll_id);
    CHECK(got[i].test_id == trials[i].test_id);
    CHECK(got[i].target == trials[i].target);
  }
  {
    std::ofstream os(path);
    os << "a b maybe\n";
  }
  CHECK_THROWS_AS(LoadTrials(path), IoError);
  std::remove(path.c_str());
}

TEST_CASE("synthetic label sidecar format") {
  SynthDataset data = SynthGenerate(3, 2, 1, 4, 3, 0.1f, 8);
  std::string path = TempPath("mfae_labels_test.txt");
  SaveSynthLabels(path, data);
  std::ifstream is(path);
  std::string utt;
  int cls;
  std::vector<int> labels(4);
  is >> utt >> cls >> labels[0] >> labels[1] >> labels[2] >> labels[3];
  CHECK(utt == "synth_c0_u0");
  CHECK(cls == 0);
  CHECK(labels == data.oracle.mixture_labels[0]);
  std::remove(path.c_str());
}
