// mfae/eval.cc

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

#include "mfae/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mfae {

namespace {

// FAR/FRR at threshold theta with the accept-if-score>=theta convention.
struct RocPoint {
  double far, frr;
};

RocPoint RocAt(const std::vector<double> &tgt_sorted,
               const std::vector<double> &non_sorted, double theta) {
  auto ge = [](const std::vector<double> &v, double t) {
    return v.end() - std::lower_bound(v.begin(), v.end(), t);
  };
  RocPoint p;
  p.far = static_cast<double>(ge(non_sorted, theta)) / non_sorted.size();
  p.frr = 1.0 - static_cast<double>(ge(tgt_sorted, theta)) / tgt_sorted.size();
  return p;
}

}  // namespace

double ComputeEer(std::span<const double> target_scores,
                  std::span<const double> nontarget_scores) {
  MFAE_CHECK(!target_scores.empty() && !nontarget_scores.empty(),
             "EER needs non-empty score lists");
  std::vector<double> tgt(target_scores.begin(), target_scores.end());
  std::vector<double> non(nontarget_scores.begin(), nontarget_scores.end());
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());

  std::vector<double> thresholds;
  thresholds.reserve(tgt.size() + non.size() + 1);
  thresholds.insert(thresholds.end(), tgt.begin(), tgt.end());
  thresholds.insert(thresholds.end(), non.begin(), non.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  // FAR - FRR goes from >= 0 (accept all) to <= 0 (reject all); find the
  // sign change and interpolate on that segment of the curve.
  RocPoint prev = {1.0, 0.0};
  for (size_t i = 0; i <= thresholds.size(); ++i) {
    RocPoint cur = (i < thresholds.size())
                       ? RocAt(tgt, non, thresholds[i])
                       : RocPoint{0.0, 1.0};
    double d_prev = prev.far - prev.frr;
    double d_cur = cur.far - cur.frr;
    if (d_prev == 0.0) return prev.far;
    if (d_cur == 0.0 && i == thresholds.size()) return cur.far;
    if (d_prev > 0.0 && d_cur <= 0.0) {
      double t = d_prev / (d_prev - d_cur);
      return prev.far + t * (cur.far - prev.far);
    }
    prev = cur;
  }
  return prev.far;  // unreachable for valid inputs
}

double ComputeMdcf(std::span<const double> target_scores,
                   std::span<const double> nontarget_scores, double p_target) {
  MFAE_CHECK(!target_scores.empty() && !nontarget_scores.empty(),
             "mDCF needs non-empty score lists");
  MFAE_CHECK(p_target > 0 && p_target < 1, "p_target must lie in (0,1)");
  std::vector<double> tgt(target_scores.begin(), target_scores.end());
  std::vector<double> non(nontarget_scores.begin(), nontarget_scores.end());
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());

  std::vector<double> thresholds;
  thresholds.insert(thresholds.end(), tgt.begin(), tgt.end());
  thresholds.insert(thresholds.end(), non.begin(), non.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  double norm = std::min(p_target, 1.0 - p_target);
  double best = (p_target * 1.0) / norm;  // reject everything
  for (double theta : thresholds) {
    RocPoint p = RocAt(tgt, non, theta);
    double cost = (p_target * p.frr + (1.0 - p_target) * p.far) / norm;
    best = std::min(best, cost);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Two-covariance PLDA.

void Plda::Fit(const std::vector<Eigen::VectorXd> &x,
               const std::vector<int> &labels, int em_iters) {
  MFAE_CHECK(x.size() == labels.size() && !x.empty(), "bad PLDA input");
  const int dim = static_cast<int>(x[0].size());
  const int n = static_cast<int>(x.size());

  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  const int S = static_cast<int>(by_class.size());
  MFAE_CHECK(S >= 2, "PLDA needs at least two classes");
  for (const auto &[c, idx] : by_class)
    MFAE_CHECK(idx.size() >= 2, "PLDA class ", c, " has fewer than 2 samples");

  // Moment initialization: between = covariance of class means,
  // within = pooled within-class covariance.
  mu = Eigen::VectorXd::Zero(dim);
  for (const auto &v : x) mu += v;
  mu /= n;

  std::vector<Eigen::VectorXd> class_mean;
  std::vector<int> class_count;
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto &[c, idx] : by_class) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
    for (int i : idx) m += x[i];
    m /= static_cast<double>(idx.size());
    for (int i : idx) sw += (x[i] - m) * (x[i] - m).transpose();
    sb += (m - mu) * (m - mu).transpose();
    class_mean.push_back(m);
    class_count.push_back(static_cast<int>(idx.size()));
  }
  within = sw / n;
  between = sb / S;
  double ridge = 1e-6 * (within.trace() / dim + 1e-12);
  within += ridge * Eigen::MatrixXd::Identity(dim, dim);
  between += ridge * Eigen::MatrixXd::Identity(dim, dim);

  for (int it = 0; it < em_iters; ++it) {
    Eigen::MatrixXd b_inv = between.ldlt().solve(
        Eigen::MatrixXd::Identity(dim, dim));
    Eigen::MatrixXd w_inv = within.ldlt().solve(
        Eigen::MatrixXd::Identity(dim, dim));
    Eigen::VectorXd new_mu = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd new_b = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd new_w = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<Eigen::VectorXd> y_hat(S);
    std::vector<Eigen::MatrixXd> y_cov(S);
    for (int s = 0; s < S; ++s) {
      int ns = class_count[s];
      Eigen::MatrixXd prec = b_inv + ns * w_inv;
      y_cov[s] = prec.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
      y_hat[s] = y_cov[s] * (b_inv * mu + w_inv * (ns * class_mean[s]));
      new_mu += y_hat[s];
    }
    new_mu /= S;
    int s = 0;
    for (const auto &[c, idx] : by_class) {
      Eigen::VectorXd d = y_hat[s] - new_mu;
      new_b += y_cov[s] + d * d.transpose();
      for (int i : idx) {
        Eigen::VectorXd r = x[i] - y_hat[s];
        new_w += r * r.transpose();
      }
      new_w += static_cast<double>(class_count[s]) * y_cov[s];
      ++s;
    }
    mu = new_mu;
    between = new_b / S;
    within = new_w / n;
  }
  Finalize();
}

void Plda::Finalize() {
  const int d = static_cast<int>(mu.size());
  Eigen::MatrixXd tot = between + within;
  Eigen::MatrixXd m_same(2 * d, 2 * d), m_diff(2 * d, 2 * d);
  m_same << tot, between, between, tot;
  m_diff << tot, Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d), tot;

  Eigen::LDLT<Eigen::MatrixXd> ldlt_same(m_same);
  Eigen::MatrixXd inv_same =
      ldlt_same.solve(Eigen::MatrixXd::Identity(2 * d, 2 * d));
  q_same_ = inv_same.topLeftCorner(d, d);
  p_same_ = inv_same.topRightCorner(d, d);
  logdet_same_ = ldlt_same.vectorD().array().log().sum();

  Eigen::LDLT<Eigen::MatrixXd> ldlt_tot(tot);
  q_diff_ = ldlt_tot.solve(Eigen::MatrixXd::Identity(d, d));
  logdet_diff_ = 2.0 * ldlt_tot.vectorD().array().log().sum();
}

double Plda::Score(const Eigen::VectorXd &a, const Eigen::VectorXd &b) const {
  Eigen::VectorXd u = a - mu, v = b - mu;
  double quad_same = u.dot(q_same_ * u) + v.dot(q_same_ * v) +
                     2.0 * u.dot(p_same_ * v);
  double quad_diff = u.dot(q_diff_ * u) + v.dot(q_diff_ * v);
  return -0.5 * (quad_same + logdet_same_) + 0.5 * (quad_diff + logdet_diff_);
}

// ---------------------------------------------------------------------------
// Backend.

BackendModel BackendFit(
    const std::vector<std::pair<std::string, Eigen::VectorXd>> &labeled_embs,
    int lda_dim) {
  MFAE_CHECK(!labeled_embs.empty(), "backend_fit: no embeddings");
  const int dim = static_cast<int>(labeled_embs[0].second.size());
  MFAE_CHECK(lda_dim >= 1 && lda_dim <= dim,
             "lda_dim must lie in [1, embedding dim]");
  std::map<std::string, std::vector<int>> by_spk;
  for (size_t i = 0; i < labeled_embs.size(); ++i)
    by_spk[labeled_embs[i].first].push_back(static_cast<int>(i));
  MFAE_CHECK(by_spk.size() >= 2, "backend_fit needs at least 2 speakers");
  for (const auto &[spk, idx] : by_spk)
    MFAE_CHECK(idx.size() >= 2, "speaker ", spk, " has fewer than 2 embeddings");

  BackendModel model;
  model.mean = Eigen::VectorXd::Zero(dim);
  for (const auto &[spk, v] : labeled_embs) model.mean += v;
  model.mean /= static_cast<double>(labeled_embs.size());

  const int n = static_cast<int>(labeled_embs.size());
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto &[spk, idx] : by_spk) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
    for (int i : idx) m += labeled_embs[i].second;
    m /= static_cast<double>(idx.size());
    for (int i : idx) {
      Eigen::VectorXd c = labeled_embs[i].second - m;
      sw += c * c.transpose();
    }
    Eigen::VectorXd cm = m - model.mean;
    sb += static_cast<double>(idx.size()) * cm * cm.transpose();
  }
  sw /= n;
  sb /= n;
  sw += (1e-4 * sw.trace() / dim) * Eigen::MatrixXd::Identity(dim, dim);

  // Generalized symmetric eigenproblem via Cholesky whitening.
  Eigen::LLT<Eigen::MatrixXd> llt(sw);
  MFAE_CHECK(llt.info() == Eigen::Success, "singular within-class scatter");
  Eigen::MatrixXd l_inv = llt.matrixL().solve(
      Eigen::MatrixXd::Identity(dim, dim));
  Eigen::MatrixXd m_white = l_inv * sb * l_inv.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m_white);
  model.lda.resize(dim, lda_dim);
  for (int j = 0; j < lda_dim; ++j)
    model.lda.col(j) =
        l_inv.transpose() * eig.eigenvectors().col(dim - 1 - j);

  std::vector<Eigen::VectorXd> projected;
  std::vector<int> labels;
  std::map<std::string, int> spk_index;
  projected.reserve(labeled_embs.size());
  for (const auto &[spk, v] : labeled_embs) {
    Eigen::VectorXd p = model.lda.transpose() * (v - model.mean);
    double norm = p.norm();
    if (norm > 0) p /= norm;
    projected.push_back(p);
    labels.push_back(
        spk_index.emplace(spk, static_cast<int>(spk_index.size())).first->second);
  }
  model.plda.Fit(projected, labels, 10);
  return model;
}

double BackendScore(const BackendModel &model, const Eigen::VectorXd &enroll,
                    const Eigen::VectorXd &test) {
  auto transform = [&](const Eigen::VectorXd &v) {
    Eigen::VectorXd p = model.lda.transpose() * (v - model.mean);
    double norm = p.norm();
    if (norm > 0) p /= norm;
    return p;
  };
  return model.plda.Score(transform(enroll), transform(test));
}

// ---------------------------------------------------------------------------
// DTW / ABX.

double AngularCosineDistance(std::span<const float> a,
                             std::span<const float> b) {
  MFAE_CHECK(a.size() == b.size(), "frame dim mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  double cosine = denom > 0 ? dot / denom : 0.0;
  cosine = std::clamp(cosine, -1.0, 1.0);
  return std::acos(cosine) / M_PI;
}

double DtwDistance(const Array2 &a, const Array2 &b) {
  MFAE_CHECK(a.rows >= 1 && b.rows >= 1, "dtw: empty sequence");
  MFAE_CHECK(a.cols == b.cols, "dtw: dim mismatch");
  const int n = a.rows, m = b.rows;
  struct Cell {
    double cost;
    int len;
  };
  std::vector<Cell> dp(static_cast<size_t>(n) * m);
  auto cell = [&](int i, int j) -> Cell & { return dp[static_cast<size_t>(i) * m + j]; };
  auto metric = [&](int i, int j) {
    return AngularCosineDistance({a.Row(i), static_cast<size_t>(a.cols)},
                                 {b.Row(j), static_cast<size_t>(b.cols)});
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double c = metric(i, j);
      if (i == 0 && j == 0) {
        cell(i, j) = {c, 1};
        continue;
      }
      Cell best = {1e300, 0};
      auto consider = [&](int pi, int pj) {
        if (pi < 0 || pj < 0) return;
        const Cell &p = cell(pi, pj);
        Cell cand = {p.cost + c, p.len + 1};
        if (cand.cost < best.cost ||
            (cand.cost == best.cost && cand.len < best.len))
          best = cand;
      };
      consider(i - 1, j);
      consider(i, j - 1);
      consider(i - 1, j - 1);
      cell(i, j) = best;
    }
  const Cell &end = cell(n - 1, m - 1);
  return end.cost / end.len;
}

std::map<std::string, double> AbxErrorRate(
    const std::vector<AbxTriple> &triples,
    const std::map<std::string, Array2> &representations) {
  MFAE_CHECK(!triples.empty(), "no ABX triples");
  // condition -> category pair -> (error sum, count)
  std::map<std::string, std::map<std::string, std::pair<double, int>>> acc;
  for (const auto &t : triples) {
    auto a = representations.find(t.a);
    auto b = representations.find(t.b);
    auto x = representations.find(t.x);
    MFAE_CHECK(a != representations.end() && b != representations.end() &&
                   x != representations.end(),
               "malformed triple: missing representation");
    double dax = DtwDistance(a->second, x->second);
    double dbx = DtwDistance(b->second, x->second);
    double err = dax > dbx ? 1.0 : (dax == dbx ? 0.5 : 0.0);
    auto &slot = acc[t.condition][t.cat_a + "|" + t.cat_b];
    slot.first += err;
    slot.second += 1;
  }
  std::map<std::string, double> out;
  for (const auto &[cond, pairs] : acc) {
    double sum = 0;
    for (const auto &[pair_key, s] : pairs) sum += s.first / s.second;
    out[cond] = sum / pairs.size();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction settings.

std::vector<FeatureSequence> Reconstruct(
    ModelParams &params, const std::vector<FeatureSequence> &dataset,
    ReconSetting setting, const std::vector<FeatureSequence> *train_corpus) {
  std::vector<float> unified_mu;
  if (setting == ReconSetting::kUnified) {
    MFAE_CHECK(train_corpus && !train_corpus->empty(),
               "unified reconstruction needs a non-empty training corpus");
    std::vector<double> acc(params.config.embed_dim, 0.0);
    for (const auto &seq : *train_corpus) {
      auto e = EmbedUtterance(params, seq.frames, Mode::kInfer);
      for (int d = 0; d < params.config.embed_dim; ++d) acc[d] += e.mu_omega[d];
    }
    unified_mu.resize(params.config.embed_dim);
    for (int d = 0; d < params.config.embed_dim; ++d)
      unified_mu[d] = static_cast<float>(acc[d] / train_corpus->size());
  }
  std::vector<FeatureSequence> out;
  out.reserve(dataset.size());
  for (const auto &seq : dataset) {
    MixturePosterior post = TokenizeFrames(params, seq.frames, Mode::kInfer);
    std::vector<float> mu =
        setting == ReconSetting::kPerUtt
            ? EmbedUtterance(params, seq.frames, Mode::kInfer).mu_omega
            : unified_mu;
    FeatureSequence r;
    r.utt_id = seq.utt_id;
    r.spk_id = seq.spk_id;
    r.frames = DecodeFrames(params, mu, post.probs, Mode::kInfer);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clustering agreement.

double ClusteringNmi(std::span<const int> labels_a,
                     std::span<const int> labels_b) {
  MFAE_CHECK(labels_a.size() == labels_b.size() && !labels_a.empty(),
             "label sequences must have equal non-zero length");
  const double n = static_cast<double>(labels_a.size());
  std::map<int, int> ca, cb;
  std::map<std::pair<int, int>, int> cj;
  for (size_t i = 0; i < labels_a.size(); ++i) {
    ca[labels_a[i]]++;
    cb[labels_b[i]]++;
    cj[{labels_a[i], labels_b[i]}]++;
  }
  auto entropy = [&](const std::map<int, int> &c) {
    double h = 0;
    for (const auto &[k, cnt] : c) {
      double p = cnt / n;
      h -= p * std::log(p);
    }
    return h;
  };
  double ha = entropy(ca), hb = entropy(cb);
  double mi = 0;
  for (const auto &[kk, cnt] : cj) {
    double pij = cnt / n;
    double pi = ca[kk.first] / n, pj = cb[kk.second] / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  if (ha + hb == 0) return 1.0;  // both labelings constant
  return 2.0 * mi / (ha + hb);
}

double CosineScore(std::span<const float> a, std::span<const float> b) {
  MFAE_CHECK(a.size() == b.size(), "dim mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  double denom = std::sqrt(na * nb);
  return denom > 0 ? dot / denom : 0.0;
}

}  // namespace mfae
