// mfae/training.cc

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

#include "mfae/training.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace mfae {

void TrainConfig::Check() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (segment_frames < 1) throw ConfigError("segment_frames must be >= 1");
  if (!(lr_end > 0 && lr_end <= lr_start))
    throw ConfigError("need 0 < lr_end <= lr_start");
  if (tau <= 0) throw ConfigError("tau must be positive");
  if (beta_omega < 0 || beta_y < 0) throw ConfigError("betas must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

AdamState AdamState::ForParams(const ModelParams &params) {
  AdamState s;
  s.m.reserve(params.arrays.size());
  s.v.reserve(params.arrays.size());
  for (size_t i = 0; i < params.arrays.size(); ++i) {
    if (params.layout.trainable[i]) {
      s.m.emplace_back(params.arrays[i].rows, params.arrays[i].cols);
      s.v.emplace_back(params.arrays[i].rows, params.arrays[i].cols);
    } else {
      s.m.emplace_back();
      s.v.emplace_back();
    }
  }
  return s;
}

double LrAtEpoch(const TrainConfig &config, int epoch) {
  MFAE_CHECK(epoch >= 0 && epoch < config.epochs, "epoch out of range: ", epoch);
  if (config.epochs == 1) return config.lr_start;
  double frac = static_cast<double>(epoch) / (config.epochs - 1);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, frac);
}

void AdamStep(ModelParams &params, const std::vector<Array2> &grads,
              AdamState &state, double lr) {
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t a = 0; a < params.arrays.size(); ++a) {
    if (!params.layout.trainable[a]) continue;
    const Array2 &g = grads[a];
    if (g.Size() == 0) continue;
    MFAE_CHECK(g.SameShape(params.arrays[a]), "gradient shape mismatch");
    if (!g.AllFinite()) throw DivergenceError("non-finite gradient");
    Array2 &m = state.m[a];
    Array2 &v = state.v[a];
    Array2 &p = params.arrays[a];
    float b1 = static_cast<float>(state.beta1);
    float b2 = static_cast<float>(state.beta2);
    for (size_t i = 0; i < p.v.size(); ++i) {
      m.v[i] = b1 * m.v[i] + (1.0f - b1) * g.v[i];
      v.v[i] = b2 * v.v[i] + (1.0f - b2) * g.v[i] * g.v[i];
      double mh = m.v[i] / bc1;
      double vh = v.v[i] / bc2;
      p.v[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + state.eps));
    }
  }
  params.step += 1;
}

std::string FormatEpochLog(const EpochLog &log) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%d %.9e %.9e %.9e %.9e %.9e", log.epoch,
                log.lr, log.reconstruction, log.kl_omega, log.kl_y, log.total);
  return buf;
}

namespace {

void ClipGrads(std::vector<Array2> &grads, double max_norm) {
  if (max_norm <= 0) return;
  for (auto &g : grads) {
    if (g.Size() == 0) continue;
    double nsq = 0;
    for (float e : g.v) nsq += static_cast<double>(e) * e;
    double n = std::sqrt(nsq);
    if (n > max_norm) {
      float s = static_cast<float>(max_norm / n);
      for (float &e : g.v) e *= s;
    }
  }
}

}  // namespace

TrainResult Train(const TrainConfig &config, ModelParams params,
                  const std::vector<FeatureSequence> &dataset,
                  const std::string &out_dir, int start_epoch,
                  AdamState *resume_state) {
  config.Check();
  MFAE_CHECK(!dataset.empty(), "empty dataset");
  const int n = static_cast<int>(dataset.size());
  AdamState adam =
      resume_state ? *resume_state : AdamState::ForParams(params);

  std::ofstream log_os;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log_os.open(out_dir + "/loss.log",
                start_epoch > 0 ? std::ios::app : std::ios::out);
    if (!log_os) throw IoError("cannot open loss log in " + out_dir);
  }

  TrainResult result;
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    double lr = LrAtEpoch(config, epoch);

    // Seeded shuffle, independent of any earlier stream consumption.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(MixSeed(config.seed, 0x5u, epoch));
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.UniformInt(i + 1)]);

    EpochLog elog;
    elog.epoch = epoch;
    elog.lr = lr;
    int64_t epoch_frames = 0;
    int batch_index = 0;
    try {
      for (int begin = 0; begin < n; begin += config.batch_size, ++batch_index) {
        int end = std::min(begin + config.batch_size, n);
        std::vector<Array2> batch;
        batch.reserve(end - begin);
        for (int i = begin; i < end; ++i) {
          Rng trim_rng(MixSeed(config.seed, 0x7u,
                               static_cast<uint64_t>(epoch) * n + order[i]));
          batch.push_back(TrimSegment(dataset[order[i]].frames,
                                      config.segment_frames, trim_rng));
        }
        uint64_t noise_seed = MixSeed(config.seed, 0x9u,
                                      static_cast<uint64_t>(epoch) * 1000003u +
                                          batch_index);
        auto res = BatchLoss<float>(
            params.config, params.layout, params.arrays, batch, config.variant,
            static_cast<float>(config.beta_omega),
            static_cast<float>(config.beta_y), static_cast<float>(config.tau),
            noise_seed, Mode::kTrain, /*want_grads=*/true, config.workers);
        ClipGrads(res.grads, config.grad_clip);
        AdamStep(params, res.grads, adam, lr);
        elog.reconstruction += res.breakdown.reconstruction;
        elog.kl_omega += res.breakdown.kl_omega;
        elog.kl_y += res.breakdown.kl_y;
        elog.total += res.breakdown.total;
        epoch_frames +=
            static_cast<int64_t>(batch.size()) * config.segment_frames;
      }
    } catch (const DivergenceError &) {
      // Keep the last good checkpoint (already on disk) and re-raise.
      throw;
    }
    elog.reconstruction /= epoch_frames;
    elog.kl_omega /= epoch_frames;
    elog.kl_y /= epoch_frames;
    elog.total /= epoch_frames;
    result.log.push_back(elog);
    if (!out_dir.empty()) {
      std::string ckpt = out_dir + "/checkpoint_e" + std::to_string(epoch);
      SaveModel(ckpt + ".mfae", params);
      SaveAdamState(ckpt + ".state", adam, epoch + 1);
      log_os << FormatEpochLog(elog) << "\n";
      log_os.flush();
    }
  }
  if (!out_dir.empty()) SaveModel(out_dir + "/checkpoint_final.mfae", params);
  result.params = std::move(params);
  return result;
}

TrainResult Train(const TrainConfig &config, const ArchConfig &arch,
                  const std::vector<FeatureSequence> &dataset,
                  const std::string &out_dir) {
  return Train(config, InitParams(arch, config.seed), dataset, out_dir);
}

void SaveAdamState(const std::string &path, const AdamState &state,
                   int next_epoch) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "MFAETRN1\n";
  os << "next_epoch " << next_epoch << "\n";
  os << "step " << state.step << "\n";
  os << "<moments>\n";
  for (const auto &arrs : {&state.m, &state.v})
    for (const Array2 &a : *arrs)
      os.write(reinterpret_cast<const char *>(a.Data()),
               static_cast<std::streamsize>(a.Size() * sizeof(float)));
  if (!os) throw IoError("write failed: " + path);
}

AdamState LoadAdamState(const std::string &path, const ModelParams &params,
                        int *next_epoch) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "MFAETRN1")
    throw IoError("bad magic in " + path);
  AdamState state = AdamState::ForParams(params);
  while (std::getline(is, line) && line != "<moments>") {
    auto sp = line.find(' ');
    if (sp == std::string::npos) throw IoError("bad state line: " + line);
    std::string key = line.substr(0, sp), val = line.substr(sp + 1);
    if (key == "next_epoch") *next_epoch = std::stoi(val);
    else if (key == "step") state.step = std::stoll(val);
    else throw IoError("unknown state key: " + key);
  }
  for (auto *arrs : {&state.m, &state.v})
    for (Array2 &a : *arrs) {
      is.read(reinterpret_cast<char *>(a.Data()),
              static_cast<std::streamsize>(a.Size() * sizeof(float)));
      if (!is && a.Size() > 0) throw IoError("truncated state: " + path);
    }
  return state;
}

}  // namespace mfae
