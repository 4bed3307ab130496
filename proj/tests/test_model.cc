// tests/test_model.cc

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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mfae/model.h"

using namespace mfae;

namespace {

ArchConfig TinyArch() {
  ArchConfig cfg;
  cfg.feat_dim = 6;
  cfg.n_mixtures = 4;
  cfg.embed_dim = 5;
  cfg.tdnn_hidden = 8;
  cfg.ff_hidden = 8;
  cfg.decoder_hidden = 8;
  return cfg;
}

Array2 RandFrames(int t, int d, uint64_t seed) {
  Rng rng(seed);
  Array2 f(t, d);
  for (auto &e : f.v) e = static_cast<float>(rng.Gauss());
  return f;
}

std::string TempPath(const std::string &name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("layout shapes follow the splice and concat widths") {
  ArchConfig cfg = TinyArch();
  Layout L = Layout::Build(cfg);
  REQUIRE(L.embedder.size() == 8);   // 4 TDNN + 2 FF + mu + sigma2
  REQUIRE(L.tokenizer.size() == 7);  // 4 TDNN + 2 FF + logits
  REQUIRE(L.decoder.size() == 5);    // TDNN in + 3 hidden + out

  // First TDNN layer: 5-frame context over feat_dim inputs.
  auto [r0, c0] = L.shapes[L.embedder_slots[0].w];
  CHECK(r0 == cfg.feat_dim * 5);
  CHECK(c0 == cfg.tdnn_hidden);
  // Second TDNN layer: 3 offsets over tdnn_hidden.
  auto [r1, c1] = L.shapes[L.embedder_slots[1].w];
  CHECK(r1 == cfg.tdnn_hidden * 3);
  CHECK(c1 == cfg.tdnn_hidden);
  // First FF after pooling consumes mean+std.
  auto [r4, c4] = L.shapes[L.embedder_slots[4].w];
  CHECK(r4 == 2 * cfg.tdnn_hidden);
  CHECK(c4 == cfg.ff_hidden);
  // Heads are linear to embed_dim.
  CHECK(L.shapes[L.embedder_slots[6].w].second == cfg.embed_dim);
  CHECK(L.shapes[L.embedder_slots[7].w].second == cfg.embed_dim);
  // Tokenizer head to n_mixtures.
  CHECK(L.shapes[L.tokenizer_slots[6].w].second == cfg.n_mixtures);
  // Decoder input: |context| * K plus the sequence vector.
  auto [rd, cd] = L.shapes[L.decoder_slots[0].w];
  CHECK(rd == 3 * cfg.n_mixtures + cfg.embed_dim);
  CHECK(cd == cfg.decoder_hidden);
  // Every decoder layer sees omega appended.
  for (int i = 1; i < 5; ++i)
    CHECK(L.shapes[L.decoder_slots[i].w].first ==
          cfg.decoder_hidden + cfg.embed_dim);
  CHECK(L.shapes[L.decoder_slots[4].w].second == cfg.feat_dim);

  // Running stats are the only non-trainable arrays.
  for (int i = 0; i < L.NumArrays(); ++i) {
    bool is_stat = L.names[i].ends_with("bn_rmean") ||
                   L.names[i].ends_with("bn_rvar");
    CHECK(L.trainable[i] == !is_stat);
  }
}

TEST_CASE("initialization bounds and constants") {
  ArchConfig cfg = TinyArch();
  ModelParams p = InitParams(cfg, 42);
  for (int i = 0; i < p.layout.NumArrays(); ++i) {
    const std::string &name = p.layout.names[i];
    const Array2 &a = p.arrays[i];
    if (name.ends_with(".w")) {
      float bound = 1.0f / std::sqrt(static_cast<float>(a.rows));
      bool nonzero = false;
      for (float e : a.v) {
        CHECK(std::abs(e) <= bound);
        nonzero |= (e != 0.0f);
      }
      CHECK(nonzero);
    } else if (name.ends_with("bn_gamma") || name.ends_with("bn_rvar")) {
      for (float e : a.v) CHECK(e == 1.0f);
    } else {
      for (float e : a.v) CHECK(e == 0.0f);
    }
  }
  // Same seed, same init; different seed, different init.
  ModelParams q = InitParams(cfg, 42);
  ModelParams r = InitParams(cfg, 43);
  CHECK(p.arrays[0].v == q.arrays[0].v);
  CHECK(p.arrays[0].v != r.arrays[0].v);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  ArchConfig cfg = TinyArch();
  cfg.encoder_contexts = {{-2, -1, 0, 1, 2}, {-2, 0, 2}, {-3, 0, 3}, {0}};
  ModelParams p = InitParams(cfg, 7);
  p.step = 123;
  std::string path = TempPath("mfae_test_ckpt.bin");
  SaveModel(path, p);
  ModelParams q = LoadModel(path);
  CHECK(q.step == 123);
  CHECK(q.config.feat_dim == cfg.feat_dim);
  CHECK(q.config.n_mixtures == cfg.n_mixtures);
  CHECK(q.config.encoder_contexts == cfg.encoder_contexts);
  CHECK(q.config.decoder_context == cfg.decoder_context);
  REQUIRE(q.arrays.size() == p.arrays.size());
  for (size_t i = 0; i < p.arrays.size(); ++i) CHECK(q.arrays[i].v == p.arrays[i].v);

  // Saving the loaded model reproduces the file byte for byte.
  std::string path2 = TempPath("mfae_test_ckpt2.bin");
  SaveModel(path2, q);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader rejects bad and truncated files") {
  std::string path = TempPath("mfae_test_bad.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTMAGIC\n";
  }
  CHECK_THROWS_AS(LoadModel(path), IoError);
  {
    std::ofstream os(path, std::ios::binary);
    os << "MFAE0001\nfeat_dim 6\n<params>\n";  // payload missing
  }
  CHECK_THROWS_AS(LoadModel(path), IoError);
  CHECK_THROWS_AS(LoadModel(TempPath("mfae_no_such_file.bin")), IoError);
  std::remove(path.c_str());
}

TEST_CASE("context string round-trip") {
  ArchConfig cfg;
  cfg.encoder_contexts = {{-2, -1, 0, 1, 2}, {-2, 0, 2}, {-3, 0, 3}, {0}};
  std::string s = cfg.ContextsToString();
  CHECK(s == "-2,-1,0,1,2;-2,0,2;-3,0,3;0");
  CHECK(ArchConfig::ParseContexts(s) == cfg.encoder_contexts);
  CHECK_THROWS_AS(ArchConfig::ParseContexts(";"), ConfigError);
}

TEST_CASE("config validation") {
  ArchConfig cfg = TinyArch();
  cfg.n_mixtures = 1;
  CHECK_THROWS_AS(cfg.Check(), ConfigError);
  cfg = TinyArch();
  cfg.encoder_contexts = {{0, 0}, {0}, {0}, {0}};  // not strictly ascending
  CHECK_THROWS_AS(cfg.Check(), ConfigError);
  cfg = TinyArch();
  cfg.encoder_contexts.pop_back();
  CHECK_THROWS_AS(cfg.Check(), ConfigError);
}

TEST_CASE("embedder output shapes and positive variances") {
  ArchConfig cfg = TinyArch();
  ModelParams p = InitParams(cfg, 3);
  Array2 frames = RandFrames(20, cfg.feat_dim, 9);
  auto e = EmbedUtterance(p, frames, Mode::kInfer);
  REQUIRE(static_cast<int>(e.mu_omega.size()) == cfg.embed_dim);
  REQUIRE(static_cast<int>(e.sigma2_omega.size()) == cfg.embed_dim);
  for (float s2 : e.sigma2_omega) CHECK(s2 >= kSigma2Floor);
  // Infer mode is pure: repeated calls agree bit for bit.
  auto e2 = EmbedUtterance(p, frames, Mode::kInfer);
  CHECK(e.mu_omega == e2.mu_omega);
  CHECK(e.sigma2_omega == e2.sigma2_omega);
}

TEST_CASE("tokenizer rows are probability vectors") {
  ArchConfig cfg = TinyArch();
  ModelParams p = InitParams(cfg, 4);
  Array2 frames = RandFrames(15, cfg.feat_dim, 10);
  auto mp = TokenizeFrames(p, frames, Mode::kInfer);
  REQUIRE(mp.probs.rows == 15);
  REQUIRE(mp.probs.cols == cfg.n_mixtures);
  for (int t = 0; t < 15; ++t) {
    double s = 0;
    for (int k = 0; k < cfg.n_mixtures; ++k) {
      CHECK(mp.probs(t, k) >= 0.0f);
      s += mp.probs(t, k);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("decoder shape and one-utterance forward consistency") {
  ArchConfig cfg = TinyArch();
  ModelParams p = InitParams(cfg, 5);
  Array2 frames = RandFrames(12, cfg.feat_dim, 11);
  auto e = EmbedUtterance(p, frames, Mode::kInfer);
  auto mp = TokenizeFrames(p, frames, Mode::kInfer);
  Array2 rec = DecodeFrames(p, e.mu_omega, mp.probs, Mode::kInfer);
  CHECK(rec.rows == 12);
  CHECK(rec.cols == cfg.feat_dim);
  CHECK(rec.AllFinite());
}

TEST_CASE("train mode updates running statistics, infer mode does not") {
  ArchConfig cfg = TinyArch();
  ModelParams p = InitParams(cfg, 6);
  Array2 frames = RandFrames(25, cfg.feat_dim, 12);
  int rmean_idx = p.layout.embedder_slots[0].rmean;
  std::vector<float> before = p.arrays[rmean_idx].v;
  (void)EmbedUtterance(p, frames, Mode::kInfer);
  CHECK(p.arrays[rmean_idx].v == before);
  (void)EmbedUtterance(p, frames, Mode::kTrain);
  CHECK(p.arrays[rmean_idx].v != before);

  // EMA oracle for the first layer's first feature: new = 0.9*old + 0.1*batch.
  ModelParams q = InitParams(cfg, 6);
  Tape<float> tape;
  auto ctx = MakeGraphCtx(tape, q.layout, q.arrays, Mode::kTrain);
  int x = tape.Constant(frames);
  (void)EmbedderForward(ctx, x, q.arrays);
  REQUIRE(!ctx.bn_updates.empty());
  float batch_mean = ctx.bn_updates[0].mean(0, 0);
  float want = (1.0f - kBnMomentum) * before[0] + kBnMomentum * batch_mean;
  CHECK(p.arrays[rmean_idx].v[0] == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("wrappers validate input dimensions") {
  ArchConfig cfg = TinyArch();
  ModelParams p = InitParams(cfg, 8);
  Array2 bad = RandFrames(10, cfg.feat_dim + 1, 13);
  CHECK_THROWS_AS(EmbedUtterance(p, bad, Mode::kInfer), Error);
  CHECK_THROWS_AS(TokenizeFrames(p, bad, Mode::kInfer), Error);
  std::vector<float> short_vec(cfg.embed_dim - 1, 0.0f);
  Array2 y(10, cfg.n_mixtures);
  CHECK_THROWS_AS(DecodeFrames(p, short_vec, y, Mode::kInfer), Error);
}
