// tools/mfae-main.cc

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

// mfae <command> [options]
//
// Commands: gen-synth, train, extract-embeddings, tokenize, reconstruct,
// eval-sv, eval-abx, selfcheck.  Exit codes: 0 success, 64 unknown
// command, 65 bad config, 66 I/O failure, 70 divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfae/data.h"
#include "mfae/eval.h"
#include "mfae/losses.h"
#include "mfae/model.h"
#include "mfae/selfcheck.h"
#include "mfae/training.h"

namespace mfae {
namespace {

constexpr int kExitUnknownCommand = 64;
constexpr int kExitBadConfig = 65;
constexpr int kExitIo = 66;
constexpr int kExitDivergence = 70;

const char kUsage[] =
    "usage: mfae <command> [options]\n"
    "commands:\n"
    "  gen-synth           synthesize a labeled dataset from the generative model\n"
    "  train               train an mFAE/mFVAE model\n"
    "  extract-embeddings  write utterance embeddings (mu of the embedder)\n"
    "  tokenize            write per-frame argmax mixture labels\n"
    "  reconstruct         decode features in the per_utt or unified setting\n"
    "  eval-sv             score trials and report EER / mDCF\n"
    "  eval-abx            DTW-based ABX error rate per condition\n"
    "  selfcheck           run built-in invariant suites\n"
    "common flags: --config FILE --seed N --workers N\n";

// ---------------------------------------------------------------------------
// key=value config files with '#' comments; unknown keys rejected.

using KvConfig = std::map<std::string, std::string>;

KvConfig LoadKvConfig(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  KvConfig kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(StrCat("config line ", lineno, ": expected key=value"));
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    key = strip(key);
    val = strip(val);
    if (key.empty()) throw ConfigError(StrCat("config line ", lineno, ": empty key"));
    if (kv.count(key)) throw ConfigError("duplicate config key: " + key);
    kv[key] = val;
  }
  return kv;
}

uint64_t ConfigHash(const KvConfig &kv) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&h](const std::string &s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto &[k, v] : kv) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  return h;
}

int ParseInt(const std::string &key, const std::string &val) {
  try {
    size_t pos = 0;
    int x = std::stoi(val, &pos);
    if (pos != val.size()) throw std::invalid_argument(val);
    return x;
  } catch (const std::exception &) {
    throw ConfigError(StrCat("bad integer for ", key, ": ", val));
  }
}

double ParseDouble(const std::string &key, const std::string &val) {
  try {
    size_t pos = 0;
    double x = std::stod(val, &pos);
    if (pos != val.size()) throw std::invalid_argument(val);
    return x;
  } catch (const std::exception &) {
    throw ConfigError(StrCat("bad number for ", key, ": ", val));
  }
}

// Consumes recognized keys from `kv`; leftovers are reported as unknown.
void ApplyTrainConfig(KvConfig &kv, TrainConfig *train, ArchConfig *arch) {
  auto take = [&kv](const std::string &key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("variant")) {
    if (*v == "mfae") train->variant = Variant::kMfae;
    else if (*v == "mfvae") train->variant = Variant::kMfvae;
    else throw ConfigError("variant must be mfae or mfvae, got " + *v);
  }
  if (auto v = take("epochs")) train->epochs = ParseInt("epochs", *v);
  if (auto v = take("batch_size")) train->batch_size = ParseInt("batch_size", *v);
  if (auto v = take("segment_frames"))
    train->segment_frames = ParseInt("segment_frames", *v);
  if (auto v = take("lr_start")) train->lr_start = ParseDouble("lr_start", *v);
  if (auto v = take("lr_end")) train->lr_end = ParseDouble("lr_end", *v);
  if (auto v = take("tau")) train->tau = ParseDouble("tau", *v);
  if (auto v = take("beta_omega")) train->beta_omega = ParseDouble("beta_omega", *v);
  if (auto v = take("beta_y")) train->beta_y = ParseDouble("beta_y", *v);
  if (auto v = take("grad_clip")) train->grad_clip = ParseDouble("grad_clip", *v);
  if (auto v = take("n_mixtures")) arch->n_mixtures = ParseInt("n_mixtures", *v);
  if (auto v = take("embed_dim")) arch->embed_dim = ParseInt("embed_dim", *v);
  if (auto v = take("tdnn_hidden")) arch->tdnn_hidden = ParseInt("tdnn_hidden", *v);
  if (auto v = take("ff_hidden")) arch->ff_hidden = ParseInt("ff_hidden", *v);
  if (auto v = take("decoder_hidden"))
    arch->decoder_hidden = ParseInt("decoder_hidden", *v);
  if (auto v = take("encoder_contexts"))
    arch->encoder_contexts = ArchConfig::ParseContexts(*v);
  if (auto v = take("decoder_context")) {
    auto lists = ArchConfig::ParseContexts(*v);
    if (lists.size() != 1) throw ConfigError("decoder_context takes one list");
    arch->decoder_context = lists[0];
  }
  if (!kv.empty()) throw ConfigError("unknown config key: " + kv.begin()->first);
}

// ---------------------------------------------------------------------------
// Embedding text files: "utt_id spk_or_dash v_1 ... v_E".

struct EmbeddingRecord {
  std::string utt_id;
  std::optional<std::string> spk_id;
  Eigen::VectorXd vec;
};

void SaveEmbeddings(const std::string &path,
                    const std::vector<EmbeddingRecord> &recs) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.precision(9);
  for (const auto &r : recs) {
    os << r.utt_id << " " << (r.spk_id ? *r.spk_id : "-");
    for (int i = 0; i < r.vec.size(); ++i) os << " " << r.vec[i];
    os << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

std::vector<EmbeddingRecord> LoadEmbeddings(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<EmbeddingRecord> recs;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EmbeddingRecord r;
    std::string spk;
    ls >> r.utt_id >> spk;
    if (!ls) throw IoError("bad embedding line: " + line);
    if (spk != "-") r.spk_id = spk;
    std::vector<double> vals;
    double x;
    while (ls >> x) vals.push_back(x);
    r.vec = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
    recs.push_back(std::move(r));
  }
  return recs;
}

// ---------------------------------------------------------------------------
// Commands.

int CmdGenSynth(std::vector<std::string> args) {
  CLI::App app{"synthesize a labeled dataset"};
  int k_true = 8, n_classes = 20, utts_per_class = 30, frames_per_utt = 200,
      feat_dim = 20, n_trials = 0;
  double noise_scale = 0.3;
  uint64_t seed = 0;
  std::string out, labels_out, trials_out;
  app.add_option("--k-true", k_true);
  app.add_option("--n-classes", n_classes);
  app.add_option("--utts-per-class", utts_per_class);
  app.add_option("--frames-per-utt", frames_per_utt);
  app.add_option("--feat-dim", feat_dim);
  app.add_option("--noise-scale", noise_scale);
  app.add_option("--seed", seed);
  app.add_option("--out", out)->required();
  app.add_option("--labels-out", labels_out);
  app.add_option("--trials-out", trials_out);
  app.add_option("--n-trials", n_trials);
  std::reverse(args.begin(), args.end());
  app.parse(args);

  SynthDataset data = SynthGenerate(k_true, n_classes, utts_per_class,
                                    frames_per_utt, feat_dim,
                                    static_cast<float>(noise_scale), seed);
  SaveFeatures(out, data.utterances);
  if (!labels_out.empty()) SaveSynthLabels(labels_out, data);
  if (n_trials > 0) {
    if (trials_out.empty()) throw ConfigError("--n-trials needs --trials-out");
    Rng rng(MixSeed(seed, 0x7261u));
    SaveTrials(trials_out, MakeTrials(data.utterances, n_trials, rng));
  }
  std::cout << "wrote " << data.utterances.size() << " utterances to " << out
            << "\n";
  return 0;
}

int CmdTrain(std::vector<std::string> args) {
  CLI::App app{"train a model"};
  std::string config_path, features_path, out_dir;
  uint64_t seed = 0;
  int workers = 1;
  bool resume = false;
  app.add_option("--config", config_path);
  app.add_option("--features", features_path)->required();
  app.add_option("--out", out_dir)->required();
  app.add_option("--seed", seed);
  app.add_option("--workers", workers);
  app.add_flag("--resume", resume);
  std::reverse(args.begin(), args.end());
  app.parse(args);

  KvConfig kv;
  if (!config_path.empty()) kv = LoadKvConfig(config_path);
  std::cout << "config_hash " << std::hex << ConfigHash(kv) << std::dec << "\n";

  TrainConfig train;
  ArchConfig arch;
  ApplyTrainConfig(kv, &train, &arch);
  train.seed = seed;
  train.workers = workers;

  auto dataset = LoadFeatures(features_path);
  if (dataset.empty()) throw IoError("no utterances in " + features_path);
  arch.feat_dim = dataset[0].frames.cols;
  train.Check();
  arch.Check();

  ModelParams params = InitParams(arch, seed);
  int start_epoch = 0;
  AdamState state = AdamState::ForParams(params);
  AdamState *state_ptr = nullptr;
  if (resume) {
    // Resume from the newest checkpoint pair in out_dir.
    int best = -1;
    for (int e = 0; e < train.epochs; ++e)
      if (std::filesystem::exists(out_dir + "/checkpoint_e" +
                                  std::to_string(e) + ".state"))
        best = e;
    if (best >= 0) {
      std::string base = out_dir + "/checkpoint_e" + std::to_string(best);
      params = LoadModel(base + ".mfae");
      state = LoadAdamState(base + ".state", params, &start_epoch);
      state_ptr = &state;
      std::cout << "resuming at epoch " << start_epoch << "\n";
    }
  }
  TrainResult result =
      Train(train, std::move(params), dataset, out_dir, start_epoch, state_ptr);
  if (!result.log.empty())
    std::cout << "final " << FormatEpochLog(result.log.back()) << "\n";
  return 0;
}

int CmdExtractEmbeddings(std::vector<std::string> args) {
  CLI::App app{"write utterance embeddings"};
  std::string model_path, features_path, out;
  app.add_option("--model", model_path)->required();
  app.add_option("--features", features_path)->required();
  app.add_option("--out", out)->required();
  std::reverse(args.begin(), args.end());
  app.parse(args);

  ModelParams params = LoadModel(model_path);
  auto dataset = LoadFeatures(features_path);
  std::vector<EmbeddingRecord> recs;
  recs.reserve(dataset.size());
  for (const auto &seq : dataset) {
    auto e = EmbedUtterance(params, seq.frames, Mode::kInfer);
    EmbeddingRecord r;
    r.utt_id = seq.utt_id;
    r.spk_id = seq.spk_id;
    r.vec = Eigen::VectorXd(e.mu_omega.size());
    for (size_t i = 0; i < e.mu_omega.size(); ++i) r.vec[i] = e.mu_omega[i];
    recs.push_back(std::move(r));
  }
  SaveEmbeddings(out, recs);
  std::cout << "wrote " << recs.size() << " embeddings to " << out << "\n";
  return 0;
}

int CmdTokenize(std::vector<std::string> args) {
  CLI::App app{"write per-frame argmax mixture labels"};
  std::string model_path, features_path, out;
  app.add_option("--model", model_path)->required();
  app.add_option("--features", features_path)->required();
  app.add_option("--out", out)->required();
  std::reverse(args.begin(), args.end());
  app.parse(args);

  ModelParams params = LoadModel(model_path);
  auto dataset = LoadFeatures(features_path);
  std::ofstream os(out);
  if (!os) throw IoError("cannot open for writing: " + out);
  for (const auto &seq : dataset) {
    MixturePosterior post = TokenizeFrames(params, seq.frames, Mode::kInfer);
    os << seq.utt_id;
    for (int t = 0; t < post.probs.rows; ++t) {
      int arg = 0;
      for (int k = 1; k < post.probs.cols; ++k)
        if (post.probs(t, k) > post.probs(t, arg)) arg = k;
      os << " " << arg;
    }
    os << "\n";
  }
  if (!os) throw IoError("write failed: " + out);
  std::cout << "wrote labels for " << dataset.size() << " utterances to "
            << out << "\n";
  return 0;
}

int CmdReconstruct(std::vector<std::string> args) {
  CLI::App app{"decode features in the per_utt or unified setting"};
  std::string model_path, features_path, out, setting = "per_utt",
              train_features;
  app.add_option("--model", model_path)->required();
  app.add_option("--features", features_path)->required();
  app.add_option("--out", out)->required();
  app.add_option("--setting", setting)->check(CLI::IsMember({"per_utt", "unified"}));
  app.add_option("--train-features", train_features);
  std::reverse(args.begin(), args.end());
  app.parse(args);

  ModelParams params = LoadModel(model_path);
  auto dataset = LoadFeatures(features_path);
  std::vector<FeatureSequence> train_corpus;
  ReconSetting rs =
      setting == "per_utt" ? ReconSetting::kPerUtt : ReconSetting::kUnified;
  if (rs == ReconSetting::kUnified) {
    if (train_features.empty())
      throw ConfigError("unified setting needs --train-features");
    train_corpus = LoadFeatures(train_features);
  }
  auto recon = Reconstruct(params, dataset, rs,
                           rs == ReconSetting::kUnified ? &train_corpus
                                                        : nullptr);
  SaveFeatures(out, recon);
  std::cout << "wrote " << recon.size() << " reconstructions to " << out << "\n";
  return 0;
}

int CmdEvalSv(std::vector<std::string> args) {
  CLI::App app{"score trials and report EER / mDCF"};
  std::string emb_path, trials_path, out, backend = "cosine", scores_out;
  int lda_dim = 150;
  app.add_option("--embeddings", emb_path)->required();
  app.add_option("--trials", trials_path)->required();
  app.add_option("--out", out)->required();
  app.add_option("--backend", backend)->check(CLI::IsMember({"cosine", "plda"}));
  app.add_option("--lda-dim", lda_dim);
  app.add_option("--scores-out", scores_out);
  std::reverse(args.begin(), args.end());
  app.parse(args);

  auto recs = LoadEmbeddings(emb_path);
  std::map<std::string, const EmbeddingRecord *> by_id;
  for (const auto &r : recs) by_id[r.utt_id] = &r;
  auto trials = LoadTrials(trials_path);
  if (trials.empty()) throw IoError("no trials in " + trials_path);

  BackendModel model;
  if (backend == "plda") {
    std::vector<std::pair<std::string, Eigen::VectorXd>> labeled;
    for (const auto &r : recs)
      if (r.spk_id) labeled.emplace_back(*r.spk_id, r.vec);
    model = BackendFit(labeled, lda_dim);
  }

  std::vector<double> tgt, non;
  std::ofstream score_os;
  if (!scores_out.empty()) {
    score_os.open(scores_out);
    if (!score_os) throw IoError("cannot open for writing: " + scores_out);
    score_os.precision(9);
  }
  for (const auto &t : trials) {
    auto a = by_id.find(t.enroll_id);
    auto b = by_id.find(t.test_id);
    if (a == by_id.end() || b == by_id.end())
      throw IoError("trial references unknown utterance: " + t.enroll_id + " " +
                    t.test_id);
    double s;
    if (backend == "plda") {
      s = BackendScore(model, a->second->vec, b->second->vec);
    } else {
      std::vector<float> va(a->second->vec.size()), vb(b->second->vec.size());
      for (int i = 0; i < a->second->vec.size(); ++i) {
        va[i] = static_cast<float>(a->second->vec[i]);
        vb[i] = static_cast<float>(b->second->vec[i]);
      }
      s = CosineScore(va, vb);
    }
    (t.target ? tgt : non).push_back(s);
    if (score_os) score_os << t.enroll_id << " " << t.test_id << " " << s << "\n";
  }
  double eer = ComputeEer(tgt, non);
  double mdcf = ComputeMdcf(tgt, non);
  std::ofstream os(out);
  if (!os) throw IoError("cannot open for writing: " + out);
  os.precision(9);
  os << "eer " << eer << "\nmdcf " << mdcf << "\n";
  std::cout << "eer " << eer << " mdcf " << mdcf << "\n";
  return 0;
}

int CmdEvalAbx(std::vector<std::string> args) {
  CLI::App app{"ABX error rate over DTW distances"};
  std::string features_path, task_path, out;
  app.add_option("--features", features_path)->required();
  app.add_option("--task", task_path)->required();
  app.add_option("--out", out)->required();
  std::reverse(args.begin(), args.end());
  app.parse(args);

  auto dataset = LoadFeatures(features_path);
  std::map<std::string, Array2> reps;
  for (auto &seq : dataset) reps[seq.utt_id] = std::move(seq.frames);

  std::ifstream is(task_path);
  if (!is) throw IoError("cannot open: " + task_path);
  std::vector<AbxTriple> triples;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    AbxTriple t;
    ls >> t.a >> t.b >> t.x >> t.condition;
    if (!ls) throw IoError("bad task line: " + line);
    triples.push_back(std::move(t));
  }
  auto rates = AbxErrorRate(triples, reps);
  std::ofstream os(out);
  if (!os) throw IoError("cannot open for writing: " + out);
  os.precision(9);
  for (const auto &[cond, rate] : rates) {
    os << "abx_" << cond << " " << rate << "\n";
    std::cout << "abx_" << cond << " " << rate << "\n";
  }
  return 0;
}

int CmdSelfcheck(std::vector<std::string> args) {
  CLI::App app{"run built-in invariant suites"};
  uint64_t seed = 0;
  app.add_option("--seed", seed);
  std::reverse(args.begin(), args.end());
  app.parse(args);

  bool all_ok = true;
  for (const auto &suite : RunSelfcheck(seed)) {
    std::cout << suite.name << " " << (suite.passed ? "pass" : "fail") << " ("
              << suite.detail << ")\n";
    all_ok &= suite.passed;
  }
  return all_ok ? 0 : 1;
}

int Run(int argc, char **argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return kExitUnknownCommand;
  }
  std::string cmd = argv[1];
  std::vector<std::string> args(argv + 2, argv + argc);
  try {
    if (cmd == "gen-synth") return CmdGenSynth(std::move(args));
    if (cmd == "train") return CmdTrain(std::move(args));
    if (cmd == "extract-embeddings") return CmdExtractEmbeddings(std::move(args));
    if (cmd == "tokenize") return CmdTokenize(std::move(args));
    if (cmd == "reconstruct") return CmdReconstruct(std::move(args));
    if (cmd == "eval-sv") return CmdEvalSv(std::move(args));
    if (cmd == "eval-abx") return CmdEvalAbx(std::move(args));
    if (cmd == "selfcheck") return CmdSelfcheck(std::move(args));
  } catch (const CLI::ParseError &e) {
    std::cerr << "error code=" << kExitBadConfig << " msg=\"" << e.what()
              << "\"\n";
    return kExitBadConfig;
  } catch (const ConfigError &e) {
    std::cerr << "error code=" << kExitBadConfig << " msg=\"" << e.what()
              << "\"\n";
    return kExitBadConfig;
  } catch (const DivergenceError &e) {
    std::cerr << "error code=" << kExitDivergence << " msg=\"" << e.what()
              << "\"\n";
    return kExitDivergence;
  } catch (const IoError &e) {
    std::cerr << "error code=" << kExitIo << " msg=\"" << e.what() << "\"\n";
    return kExitIo;
  } catch (const std::exception &e) {
    std::cerr << "error code=1 msg=\"" << e.what() << "\"\n";
    return 1;
  }
  std::cerr << "unknown command: " << cmd << "\n" << kUsage;
  return kExitUnknownCommand;
}

}  // namespace
}  // namespace mfae

int main(int argc, char **argv) { return mfae::Run(argc, argv); }
