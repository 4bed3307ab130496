// mfae/data.h

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

#ifndef MFAE_DATA_H_
#define MFAE_DATA_H_

#include <optional>
#include <string>
#include <vector>

#include "mfae/array.h"
#include "mfae/common.h"
#include "mfae/rng.h"

namespace mfae {

struct FeatureSequence {
  std::string utt_id;
  std::optional<std::string> spk_id;
  Array2 frames;  // T x D
};

// Binary feature archive: magic "FEAT0001"; uint32 count; per utterance:
// uint32 id length + bytes, uint32 spk length + bytes (0 = absent),
// uint32 T, uint32 D, then T*D little-endian float32 row-major.
void SaveFeatures(const std::string &path,
                  const std::vector<FeatureSequence> &seqs);
std::vector<FeatureSequence> LoadFeatures(const std::string &path);

struct GmvnStats {
  std::vector<float> mean;
  std::vector<float> var;  // floored at 1e-8
};

GmvnStats GmvnFit(const std::vector<FeatureSequence> &corpus);
void GmvnApply(const GmvnStats &stats, FeatureSequence *seq);
void SaveGmvn(const std::string &path, const GmvnStats &stats);
GmvnStats LoadGmvn(const std::string &path);

// Centered sliding-window mean subtraction; the window is truncated at
// utterance edges, so short utterances get full-utterance mean removal.
Array2 SlidingCmn(const Array2 &frames, int window_frames = 301);

// Random segment of exactly segment_frames frames: uniform start when the
// utterance is long enough, cyclic repetition otherwise.
Array2 TrimSegment(const Array2 &frames, int segment_frames, Rng &rng);

// Fixed randomly-initialized generator network mapping (omega, one-hot y)
// to a frame mean; tanh hidden layers, so recovery by the ReLU model is
// not a parameter-copy artifact.
struct SynthOracle {
  int k_true = 0;
  int n_classes = 0;
  int omega_dim = 0;
  int feat_dim = 0;
  float noise_scale = 0;
  std::vector<std::vector<float>> sequence_vectors;  // per class
  std::vector<std::vector<int>> mixture_labels;      // per utterance
  // Generator weights: W1 (omega_dim+k_true x H), b1, W2 (H x H), b2,
  // W3 (H x feat_dim), b3.
  std::vector<Array2> gen;

  // Noise-free generator output for (class omega, mixture k).
  std::vector<float> MuStar(const std::vector<float> &omega, int k) const;
};

struct SynthDataset {
  std::vector<FeatureSequence> utterances;
  SynthOracle oracle;
};

SynthDataset SynthGenerate(int k_true, int n_classes, int utts_per_class,
                           int frames_per_utt, int feat_dim, float noise_scale,
                           uint64_t seed);

// Sidecar with ground-truth labels: "utt_id class_id l_1 ... l_T" lines.
void SaveSynthLabels(const std::string &path, const SynthDataset &data);

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool target = false;
};

// Random same/different-speaker trials (speaker = spk_id), half targets.
std::vector<Trial> MakeTrials(const std::vector<FeatureSequence> &corpus,
                              int n_trials, Rng &rng);
void SaveTrials(const std::string &path, const std::vector<Trial> &trials);
std::vector<Trial> LoadTrials(const std::string &path);

}  // namespace mfae

#endif  // MFAE_DATA_H_
