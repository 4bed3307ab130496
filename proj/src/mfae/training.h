// mfae/training.h

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

// ADAM optimization with a per-epoch exponential learning-rate schedule,
// randomly trimmed fixed-length segments, checkpointing and exact resume.

#ifndef MFAE_TRAINING_H_
#define MFAE_TRAINING_H_

#include <string>
#include <vector>

#include "mfae/data.h"
#include "mfae/losses.h"
#include "mfae/model.h"

namespace mfae {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  int segment_frames = 300;  // 3 s at a 10 ms hop
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  double tau = 0.1;
  double beta_omega = 0;
  double beta_y = 0;
  Variant variant = Variant::kMfae;
  uint64_t seed = 0;
  int workers = 1;
  double grad_clip = 0;  // max-norm per array; 0 disables

  void Check() const;
};

struct AdamState {
  std::vector<Array2> m, v;  // moments, aligned with parameter arrays
  int64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState ForParams(const ModelParams &params);
};

// lr_start * (lr_end/lr_start)^(e/(epochs-1)); both endpoints exact.
double LrAtEpoch(const TrainConfig &config, int epoch);

// Standard bias-corrected ADAM update; throws on non-finite gradients.
void AdamStep(ModelParams &params, const std::vector<Array2> &grads,
              AdamState &state, double lr);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  // Per-frame means over the epoch.
  double reconstruction = 0, kl_omega = 0, kl_y = 0, total = 0;
};

std::string FormatEpochLog(const EpochLog &log);

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

// Trains from `params` (epoch `start_epoch` onward).  When out_dir is
// non-empty, writes checkpoint_e<N>.mfae / .state each epoch plus a
// loss.log, and on divergence keeps the last good checkpoint.  All
// randomness derives statelessly from (config.seed, epoch, index), so a
// resumed run replays the identical stream.
TrainResult Train(const TrainConfig &config, ModelParams params,
                  const std::vector<FeatureSequence> &dataset,
                  const std::string &out_dir = "", int start_epoch = 0,
                  AdamState *resume_state = nullptr);

TrainResult Train(const TrainConfig &config, const ArchConfig &arch,
                  const std::vector<FeatureSequence> &dataset,
                  const std::string &out_dir = "");

void SaveAdamState(const std::string &path, const AdamState &state,
                   int next_epoch);
AdamState LoadAdamState(const std::string &path, const ModelParams &params,
                        int *next_epoch);

}  // namespace mfae

#endif  // MFAE_TRAINING_H_
