// mfae/data.cc

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

#include "mfae/data.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mfae {

namespace {

void WriteU32(std::ostream &os, uint32_t v) {
  os.write(reinterpret_cast<const char *>(&v), 4);
}

uint32_t ReadU32(std::istream &is, const std::string &path) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char *>(&v), 4);
  if (!is) throw IoError("truncated archive: " + path);
  return v;
}

void WriteStr(std::ostream &os, const std::string &s) {
  WriteU32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string ReadStr(std::istream &is, const std::string &path) {
  uint32_t n = ReadU32(is, path);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("truncated archive: " + path);
  return s;
}

}  // namespace

void SaveFeatures(const std::string &path,
                  const std::vector<FeatureSequence> &seqs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write("FEAT0001", 8);
  WriteU32(os, static_cast<uint32_t>(seqs.size()));
  for (const auto &s : seqs) {
    WriteStr(os, s.utt_id);
    WriteStr(os, s.spk_id ? *s.spk_id : std::string());
    WriteU32(os, static_cast<uint32_t>(s.frames.rows));
    WriteU32(os, static_cast<uint32_t>(s.frames.cols));
    os.write(reinterpret_cast<const char *>(s.frames.Data()),
             static_cast<std::streamsize>(s.frames.Size() * sizeof(float)));
  }
  if (!os) throw IoError("write failed: " + path);
}

std::vector<FeatureSequence> LoadFeatures(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "FEAT0001", 8) != 0)
    throw IoError("bad magic in " + path);
  uint32_t count = ReadU32(is, path);
  std::vector<FeatureSequence> out;
  out.reserve(count);
  int dim = -1;
  for (uint32_t i = 0; i < count; ++i) {
    FeatureSequence s;
    s.utt_id = ReadStr(is, path);
    std::string spk = ReadStr(is, path);
    if (!spk.empty()) s.spk_id = spk;
    uint32_t t = ReadU32(is, path), d = ReadU32(is, path);
    if (dim < 0) dim = static_cast<int>(d);
    else if (dim != static_cast<int>(d))
      throw IoError("dim mismatch within archive: " + path);
    s.frames = Array2(static_cast<int>(t), static_cast<int>(d));
    is.read(reinterpret_cast<char *>(s.frames.Data()),
            static_cast<std::streamsize>(s.frames.Size() * sizeof(float)));
    if (!is) throw IoError("truncated archive: " + path);
    out.push_back(std::move(s));
  }
  return out;
}

GmvnStats GmvnFit(const std::vector<FeatureSequence> &corpus) {
  MFAE_CHECK(!corpus.empty(), "gmvn_fit: empty corpus");
  int dim = corpus[0].frames.cols;
  std::vector<double> sum(dim, 0.0), sumsq(dim, 0.0);
  int64_t n = 0;
  for (const auto &s : corpus) {
    for (int t = 0; t < s.frames.rows; ++t)
      for (int d = 0; d < dim; ++d) {
        double x = s.frames(t, d);
        sum[d] += x;
        sumsq[d] += x * x;
      }
    n += s.frames.rows;
  }
  GmvnStats st;
  st.mean.resize(dim);
  st.var.resize(dim);
  for (int d = 0; d < dim; ++d) {
    double m = sum[d] / n;
    double v = sumsq[d] / n - m * m;
    st.mean[d] = static_cast<float>(m);
    st.var[d] = static_cast<float>(std::max(v, 1e-8));
  }
  return st;
}

void GmvnApply(const GmvnStats &stats, FeatureSequence *seq) {
  int dim = seq->frames.cols;
  MFAE_CHECK(static_cast<int>(stats.mean.size()) == dim, "gmvn dim mismatch");
  for (int d = 0; d < dim; ++d) {
    float scale = 1.0f / std::sqrt(stats.var[d]);
    for (int t = 0; t < seq->frames.rows; ++t)
      seq->frames(t, d) = (seq->frames(t, d) - stats.mean[d]) * scale;
  }
}

void SaveGmvn(const std::string &path, const GmvnStats &stats) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "GMVN0001 " << stats.mean.size() << "\n";
  for (float m : stats.mean) os << m << " ";
  os << "\n";
  for (float v : stats.var) os << v << " ";
  os << "\n";
}

GmvnStats LoadGmvn(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string magic;
  size_t n;
  is >> magic >> n;
  if (!is || magic != "GMVN0001") throw IoError("bad magic in " + path);
  GmvnStats st;
  st.mean.resize(n);
  st.var.resize(n);
  for (auto &x : st.mean) is >> x;
  for (auto &x : st.var) is >> x;
  if (!is) throw IoError("truncated gmvn stats: " + path);
  return st;
}

Array2 SlidingCmn(const Array2 &frames, int window_frames) {
  MFAE_CHECK(window_frames >= 1 && window_frames % 2 == 1,
             "cmn window must be odd and >= 1");
  int T = frames.rows, D = frames.cols, half = window_frames / 2;
  // Prefix sums in double keep the windowed means stable.
  std::vector<double> prefix(static_cast<size_t>(T + 1) * D, 0.0);
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < D; ++d)
      prefix[static_cast<size_t>(t + 1) * D + d] =
          prefix[static_cast<size_t>(t) * D + d] + frames(t, d);
  Array2 out(T, D);
  for (int t = 0; t < T; ++t) {
    int lo = std::max(0, t - half), hi = std::min(T - 1, t + half);
    double inv = 1.0 / (hi - lo + 1);
    for (int d = 0; d < D; ++d) {
      double mean = (prefix[static_cast<size_t>(hi + 1) * D + d] -
                     prefix[static_cast<size_t>(lo) * D + d]) * inv;
      out(t, d) = static_cast<float>(frames(t, d) - mean);
    }
  }
  return out;
}

Array2 TrimSegment(const Array2 &frames, int segment_frames, Rng &rng) {
  MFAE_CHECK(segment_frames >= 1, "segment_frames must be >= 1");
  int T = frames.rows, D = frames.cols;
  Array2 out(segment_frames, D);
  if (T >= segment_frames) {
    int start = (T == segment_frames) ? 0 : rng.UniformInt(T - segment_frames + 1);
    for (int t = 0; t < segment_frames; ++t)
      std::copy(frames.Row(start + t), frames.Row(start + t) + D, out.Row(t));
  } else {
    for (int t = 0; t < segment_frames; ++t)
      std::copy(frames.Row(t % T), frames.Row(t % T) + D, out.Row(t));
  }
  return out;
}

namespace {
constexpr int kGenHidden = 64;
constexpr int kOmegaDim = 10;
// Input gains: the mixture indicator dominates frame variation (so the
// frame factor is recoverable above the noise) while omega enters the tanh
// net gently and additionally through a direct linear projection. The
// linear term shifts every frame of an utterance by a constant offset, so
// it is invisible to within-utterance clustering but easy to detect after
// pooling many frames.
constexpr float kMixGain = 8.0f;
constexpr float kOmegaGain = 1.0f;
constexpr float kOmegaLinear = 0.1f;
}  // namespace

std::vector<float> SynthOracle::MuStar(const std::vector<float> &omega,
                                       int k) const {
  std::vector<float> in(omega_dim + k_true, 0.0f);
  for (int i = 0; i < omega_dim; ++i) in[i] = kOmegaGain * omega[i];
  in[omega_dim + k] = kMixGain;
  std::vector<float> h(kGenHidden), h2(kGenHidden);
  for (int j = 0; j < kGenHidden; ++j) {
    float s = gen[1](0, j);
    for (int i = 0; i < static_cast<int>(in.size()); ++i)
      s += in[i] * gen[0](i, j);
    h[j] = std::tanh(s);
  }
  for (int j = 0; j < kGenHidden; ++j) {
    float s = gen[3](0, j);
    for (int i = 0; i < kGenHidden; ++i) s += h[i] * gen[2](i, j);
    h2[j] = std::tanh(s);
  }
  std::vector<float> out(feat_dim);
  for (int j = 0; j < feat_dim; ++j) {
    float s = gen[5](0, j);
    for (int i = 0; i < kGenHidden; ++i) s += h2[i] * gen[4](i, j);
    for (int i = 0; i < omega_dim; ++i)
      s += kOmegaLinear * omega[i] * gen[6](i, j);
    out[j] = s;
  }
  return out;
}

SynthDataset SynthGenerate(int k_true, int n_classes, int utts_per_class,
                           int frames_per_utt, int feat_dim, float noise_scale,
                           uint64_t seed) {
  MFAE_CHECK(k_true >= 1 && n_classes >= 1 && utts_per_class >= 1 &&
                 frames_per_utt >= 1 && feat_dim >= 1,
             "synth_generate: all counts must be >= 1");
  SynthDataset data;
  SynthOracle &oracle = data.oracle;
  oracle.k_true = k_true;
  oracle.n_classes = n_classes;
  oracle.omega_dim = kOmegaDim;
  oracle.feat_dim = feat_dim;
  oracle.noise_scale = noise_scale;

  Rng gen_rng(MixSeed(seed, 1));
  auto make_weight = [&](int r, int c) {
    Array2 w(r, c);
    float scale = 1.0f / std::sqrt(static_cast<float>(r));
    for (float &e : w.v) e = scale * static_cast<float>(gen_rng.Gauss());
    return w;
  };
  oracle.gen.push_back(make_weight(kOmegaDim + k_true, kGenHidden));
  oracle.gen.push_back(Array2(1, kGenHidden));
  oracle.gen.push_back(make_weight(kGenHidden, kGenHidden));
  oracle.gen.push_back(Array2(1, kGenHidden));
  oracle.gen.push_back(make_weight(kGenHidden, feat_dim));
  oracle.gen.push_back(Array2(1, feat_dim));
  oracle.gen.push_back(make_weight(kOmegaDim, feat_dim));

  Rng omega_rng(MixSeed(seed, 2));
  for (int c = 0; c < n_classes; ++c) {
    std::vector<float> omega(kOmegaDim);
    for (float &e : omega) e = static_cast<float>(omega_rng.Gauss());
    oracle.sequence_vectors.push_back(std::move(omega));
  }

  Rng frame_rng(MixSeed(seed, 3));
  for (int c = 0; c < n_classes; ++c) {
    for (int u = 0; u < utts_per_class; ++u) {
      FeatureSequence seq;
      seq.utt_id = StrCat("synth_c", c, "_u", u);
      seq.spk_id = StrCat("class", c);
      seq.frames = Array2(frames_per_utt, feat_dim);
      std::vector<int> labels(frames_per_utt);
      for (int t = 0; t < frames_per_utt; ++t) {
        int k = frame_rng.UniformInt(k_true);
        labels[t] = k;
        std::vector<float> mu = oracle.MuStar(oracle.sequence_vectors[c], k);
        for (int d = 0; d < feat_dim; ++d)
          seq.frames(t, d) =
              mu[d] + noise_scale * static_cast<float>(frame_rng.Gauss());
      }
      oracle.mixture_labels.push_back(std::move(labels));
      data.utterances.push_back(std::move(seq));
    }
  }
  return data;
}

void SaveSynthLabels(const std::string &path, const SynthDataset &data) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  int upc = static_cast<int>(data.utterances.size()) / data.oracle.n_classes;
  for (size_t i = 0; i < data.utterances.size(); ++i) {
    int cls = static_cast<int>(i) / upc;
    os << data.utterances[i].utt_id << " " << cls;
    for (int l : data.oracle.mixture_labels[i]) os << " " << l;
    os << "\n";
  }
}

std::vector<Trial> MakeTrials(const std::vector<FeatureSequence> &corpus,
                              int n_trials, Rng &rng) {
  MFAE_CHECK(corpus.size() >= 2, "need at least two utterances for trials");
  std::vector<Trial> trials;
  trials.reserve(n_trials);
  int n = static_cast<int>(corpus.size());
  for (int i = 0; i < n_trials; ++i) {
    bool want_target = (i % 2 == 0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      int a = rng.UniformInt(n), b = rng.UniformInt(n);
      if (a == b) continue;
      bool same = corpus[a].spk_id && corpus[b].spk_id &&
                  *corpus[a].spk_id == *corpus[b].spk_id;
      if (same != want_target) continue;
      trials.push_back({corpus[a].utt_id, corpus[b].utt_id, same});
      break;
    }
  }
  return trials;
}

void SaveTrials(const std::string &path, const std::vector<Trial> &trials) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (const auto &t : trials)
    os << t.enroll_id << " " << t.test_id << " "
       << (t.target ? "target" : "nontarget") << "\n";
}

std::vector<Trial> LoadTrials(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<Trial> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Trial t;
    std::string label;
    ls >> t.enroll_id >> t.test_id >> label;
    if (!ls || (label != "target" && label != "nontarget"))
      throw IoError("bad trial line: " + line);
    t.target = (label == "target");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace mfae
