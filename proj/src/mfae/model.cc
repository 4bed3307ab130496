// mfae/model.cc

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

#include "mfae/model.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace mfae {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void ArchConfig::Check() const {
  if (feat_dim < 1) throw ConfigError("feat_dim must be >= 1");
  if (n_mixtures < 2) throw ConfigError("n_mixtures must be >= 2");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (tdnn_hidden < 1 || ff_hidden < 1 || decoder_hidden < 1)
    throw ConfigError("hidden sizes must be >= 1");
  if (encoder_contexts.size() != 4)
    throw ConfigError("encoder_contexts must list 4 TDNN layer contexts");
  for (const auto &ctx : encoder_contexts) {
    if (ctx.empty()) throw ConfigError("empty TDNN context");
    for (size_t i = 1; i < ctx.size(); ++i)
      if (ctx[i] <= ctx[i - 1])
        throw ConfigError("context offsets must be strictly ascending");
  }
  if (decoder_context.empty()) throw ConfigError("empty decoder context");
}

std::string ArchConfig::ContextsToString() const {
  std::string s;
  for (size_t i = 0; i < encoder_contexts.size(); ++i) {
    if (i) s += ';';
    for (size_t j = 0; j < encoder_contexts[i].size(); ++j) {
      if (j) s += ',';
      s += std::to_string(encoder_contexts[i][j]);
    }
  }
  return s;
}

std::vector<std::vector<int>> ArchConfig::ParseContexts(const std::string &s) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::string tok;
  auto flush_tok = [&]() {
    if (tok.empty()) throw ConfigError("bad context string: " + s);
    cur.push_back(std::stoi(tok));
    tok.clear();
  };
  for (char ch : s) {
    if (ch == ',') {
      flush_tok();
    } else if (ch == ';') {
      flush_tok();
      out.push_back(cur);
      cur.clear();
    } else {
      tok += ch;
    }
  }
  flush_tok();
  out.push_back(cur);
  return out;
}

namespace {

void AddLayer(Layout &layout, std::vector<LayerSpec> &section,
              std::vector<ParamSlots> &slots, const std::string &name,
              LayerSpec spec) {
  ParamSlots ps;
  auto add = [&](const std::string &suffix, int r, int c, bool trainable) {
    layout.shapes.emplace_back(r, c);
    layout.names.push_back(name + "." + suffix);
    layout.trainable.push_back(trainable);
    return static_cast<int>(layout.shapes.size()) - 1;
  };
  ps.w = add("w", spec.WeightRows(), spec.out_dim, true);
  ps.b = add("b", 1, spec.out_dim, true);
  if (spec.relu_bn) {
    ps.gamma = add("bn_gamma", 1, spec.out_dim, true);
    ps.beta = add("bn_beta", 1, spec.out_dim, true);
    ps.rmean = add("bn_rmean", 1, spec.out_dim, false);
    ps.rvar = add("bn_rvar", 1, spec.out_dim, false);
  }
  section.push_back(std::move(spec));
  slots.push_back(ps);
}

}  // namespace

Layout Layout::Build(const ArchConfig &cfg) {
  cfg.Check();
  Layout L;
  auto tdnn_stack = [&](std::vector<LayerSpec> &section,
                        std::vector<ParamSlots> &slots,
                        const std::string &prefix) {
    int in = cfg.feat_dim;
    for (int i = 0; i < 4; ++i) {
      LayerSpec s;
      s.context = cfg.encoder_contexts[i];
      s.in_dim = in;
      s.out_dim = cfg.tdnn_hidden;
      s.relu_bn = true;
      AddLayer(L, section, slots, prefix + ".tdnn" + std::to_string(i), s);
      in = cfg.tdnn_hidden;
    }
    return in;
  };

  // Embedder: TDNN stack, stats pooling, 2 FF layers, two linear heads.
  tdnn_stack(L.embedder, L.embedder_slots, "embedder");
  int in = 2 * cfg.tdnn_hidden;
  for (int i = 0; i < 2; ++i) {
    LayerSpec s;
    s.in_dim = in;
    s.out_dim = cfg.ff_hidden;
    s.relu_bn = true;
    AddLayer(L, L.embedder, L.embedder_slots, "embedder.ff" + std::to_string(i), s);
    in = cfg.ff_hidden;
  }
  {
    LayerSpec mu;
    mu.in_dim = in;
    mu.out_dim = cfg.embed_dim;
    AddLayer(L, L.embedder, L.embedder_slots, "embedder.mu", mu);
    LayerSpec sig;
    sig.in_dim = in;
    sig.out_dim = cfg.embed_dim;
    AddLayer(L, L.embedder, L.embedder_slots, "embedder.sigma2", sig);
  }

  // Tokenizer: TDNN stack, 2 FF layers, linear logit head.
  in = tdnn_stack(L.tokenizer, L.tokenizer_slots, "tokenizer");
  for (int i = 0; i < 2; ++i) {
    LayerSpec s;
    s.in_dim = in;
    s.out_dim = cfg.ff_hidden;
    s.relu_bn = true;
    AddLayer(L, L.tokenizer, L.tokenizer_slots,
             "tokenizer.ff" + std::to_string(i), s);
    in = cfg.ff_hidden;
  }
  {
    LayerSpec out;
    out.in_dim = in;
    out.out_dim = cfg.n_mixtures;
    AddLayer(L, L.tokenizer, L.tokenizer_slots, "tokenizer.logits", out);
  }

  // Decoder: TDNN input over the mixture indicators, 3 hidden FF layers,
  // linear output; the sequence vector is appended to every layer input.
  {
    LayerSpec s0;
    s0.context = cfg.decoder_context;
    s0.in_dim = cfg.n_mixtures;
    s0.extra_in = cfg.embed_dim;
    s0.out_dim = cfg.decoder_hidden;
    s0.relu_bn = true;
    AddLayer(L, L.decoder, L.decoder_slots, "decoder.tdnn", s0);
    for (int i = 0; i < 3; ++i) {
      LayerSpec s;
      s.in_dim = cfg.decoder_hidden;
      s.extra_in = cfg.embed_dim;
      s.out_dim = cfg.decoder_hidden;
      s.relu_bn = true;
      AddLayer(L, L.decoder, L.decoder_slots, "decoder.ff" + std::to_string(i), s);
    }
    LayerSpec out;
    out.in_dim = cfg.decoder_hidden;
    out.extra_in = cfg.embed_dim;
    out.out_dim = cfg.feat_dim;
    AddLayer(L, L.decoder, L.decoder_slots, "decoder.out", out);
  }
  return L;
}

ModelParams InitParams(const ArchConfig &config, uint64_t seed) {
  ModelParams p;
  p.config = config;
  p.layout = Layout::Build(config);
  Rng rng(MixSeed(seed, 0x6D464145u));  // independent init stream
  p.arrays.reserve(p.layout.NumArrays());
  for (int i = 0; i < p.layout.NumArrays(); ++i) {
    auto [r, c] = p.layout.shapes[i];
    Array2 a(r, c);
    const std::string &name = p.layout.names[i];
    if (name.ends_with(".w")) {
      float bound = 1.0f / std::sqrt(static_cast<float>(r));
      for (float &e : a.v)
        e = bound * (2.0f * static_cast<float>(rng.Uniform()) - 1.0f);
    } else if (name.ends_with("bn_gamma") || name.ends_with("bn_rvar")) {
      std::fill(a.v.begin(), a.v.end(), 1.0f);
    }
    // biases, bn_beta, bn_rmean stay zero
    p.arrays.push_back(std::move(a));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O.  Text header (magic + key-value config block), then raw
// little-endian float32 blobs in layout order.

void SaveModel(const std::string &path, const ModelParams &params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  const ArchConfig &c = params.config;
  os << "MFAE0001\n";
  os << "feat_dim " << c.feat_dim << "\n";
  os << "n_mixtures " << c.n_mixtures << "\n";
  os << "embed_dim " << c.embed_dim << "\n";
  os << "tdnn_hidden " << c.tdnn_hidden << "\n";
  os << "ff_hidden " << c.ff_hidden << "\n";
  os << "decoder_hidden " << c.decoder_hidden << "\n";
  os << "encoder_contexts " << c.ContextsToString() << "\n";
  os << "decoder_context ";
  for (size_t j = 0; j < c.decoder_context.size(); ++j)
    os << (j ? "," : "") << c.decoder_context[j];
  os << "\n";
  os << "step " << params.step << "\n";
  os << "<params>\n";
  for (const Array2 &a : params.arrays)
    os.write(reinterpret_cast<const char *>(a.Data()),
             static_cast<std::streamsize>(a.Size() * sizeof(float)));
  if (!os) throw IoError("write failed: " + path);
}

ModelParams LoadModel(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string magic;
  if (!std::getline(is, magic) || magic != "MFAE0001")
    throw IoError("bad magic in " + path);
  ArchConfig c;
  int64_t step = 0;
  std::string line;
  bool saw_params = false;
  while (std::getline(is, line)) {
    if (line == "<params>") {
      saw_params = true;
      break;
    }
    auto sp = line.find(' ');
    if (sp == std::string::npos) throw IoError("bad header line: " + line);
    std::string key = line.substr(0, sp), val = line.substr(sp + 1);
    if (key == "feat_dim") c.feat_dim = std::stoi(val);
    else if (key == "n_mixtures") c.n_mixtures = std::stoi(val);
    else if (key == "embed_dim") c.embed_dim = std::stoi(val);
    else if (key == "tdnn_hidden") c.tdnn_hidden = std::stoi(val);
    else if (key == "ff_hidden") c.ff_hidden = std::stoi(val);
    else if (key == "decoder_hidden") c.decoder_hidden = std::stoi(val);
    else if (key == "encoder_contexts") c.encoder_contexts = ArchConfig::ParseContexts(val);
    else if (key == "decoder_context") c.decoder_context = ArchConfig::ParseContexts(val)[0];
    else if (key == "step") step = std::stoll(val);
    else throw IoError("unknown checkpoint key: " + key);
  }
  if (!saw_params) throw IoError("truncated checkpoint header: " + path);
  ModelParams p;
  p.config = c;
  p.layout = Layout::Build(c);
  p.step = step;
  p.arrays.reserve(p.layout.NumArrays());
  for (int i = 0; i < p.layout.NumArrays(); ++i) {
    auto [r, cc] = p.layout.shapes[i];
    Array2 a(r, cc);
    is.read(reinterpret_cast<char *>(a.Data()),
            static_cast<std::streamsize>(a.Size() * sizeof(float)));
    if (!is) throw IoError("truncated checkpoint payload: " + path);
    p.arrays.push_back(std::move(a));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Convenience wrappers (float path, single utterance).

UtteranceEmbedding EmbedUtterance(ModelParams &params, const Array2 &frames,
                                  Mode mode) {
  MFAE_CHECK(frames.cols == params.config.feat_dim,
             "feature dim ", frames.cols, " != config ", params.config.feat_dim);
  MFAE_CHECK(frames.rows >= 1, "empty utterance");
  Tape<float> tape;
  auto ctx = MakeGraphCtx(tape, params.layout, params.arrays, mode);
  int input = tape.Constant(frames);
  auto [mu, sigma2] = EmbedderForward(ctx, input, params.arrays);
  if (mode == Mode::kTrain) ApplyBnUpdates(ctx.bn_updates, params.arrays);
  UtteranceEmbedding e;
  e.mu_omega = tape.Value(mu).v;
  e.sigma2_omega = tape.Value(sigma2).v;
  return e;
}

MixturePosterior TokenizeFrames(ModelParams &params, const Array2 &frames,
                                Mode mode) {
  MFAE_CHECK(frames.cols == params.config.feat_dim,
             "feature dim ", frames.cols, " != config ", params.config.feat_dim);
  MFAE_CHECK(frames.rows >= 1, "empty utterance");
  Tape<float> tape;
  auto ctx = MakeGraphCtx(tape, params.layout, params.arrays, mode);
  int input = tape.Constant(frames);
  int logits = TokenizerForward(ctx, input, params.arrays);
  int probs = tape.SoftmaxRows(logits);
  if (mode == Mode::kTrain) ApplyBnUpdates(ctx.bn_updates, params.arrays);
  MixturePosterior mp;
  mp.logits = tape.Value(logits);
  mp.probs = tape.Value(probs);
  return mp;
}

Array2 DecodeFrames(ModelParams &params, const std::vector<float> &seq_vec,
                    const Array2 &y_seq, Mode mode) {
  MFAE_CHECK(static_cast<int>(seq_vec.size()) == params.config.embed_dim,
             "sequence vector dim mismatch");
  MFAE_CHECK(y_seq.cols == params.config.n_mixtures, "y_seq column mismatch");
  Tape<float> tape;
  auto ctx = MakeGraphCtx(tape, params.layout, params.arrays, mode);
  Array2 om(1, params.config.embed_dim);
  om.v = seq_vec;
  int omega = tape.Constant(std::move(om));
  int y = tape.Constant(y_seq);
  int recon = DecoderForward(ctx, y, omega, params.arrays);
  if (mode == Mode::kTrain) ApplyBnUpdates(ctx.bn_updates, params.arrays);
  return tape.Value(recon);
}

}  // namespace mfae
