// mfae/eval.h

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

// Speaker-verification backend (LDA -> length norm -> two-covariance
// PLDA), detection metrics, DTW-based ABX discriminability, the two
// reconstruction settings, and clustering agreement.

#ifndef MFAE_EVAL_H_
#define MFAE_EVAL_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfae/data.h"
#include "mfae/model.h"

namespace mfae {

// Rate at which false-acceptance equals false-rejection, via linear
// interpolation of the (FAR, FRR) curve over sorted score thresholds.
double ComputeEer(std::span<const double> target_scores,
                  std::span<const double> nontarget_scores);

// Min over thresholds of the normalized detection cost,
// C_miss = C_fa = 1, NIST normalization by min(p_tar, 1 - p_tar).
double ComputeMdcf(std::span<const double> target_scores,
                   std::span<const double> nontarget_scores,
                   double p_target = 0.01);

// Two-covariance PLDA: x = mu + between + within, fit by EM.
struct Plda {
  Eigen::VectorXd mu;
  Eigen::MatrixXd between;  // PSD
  Eigen::MatrixXd within;   // PD

  void Fit(const std::vector<Eigen::VectorXd> &x,
           const std::vector<int> &labels, int em_iters = 10);
  // Same-speaker vs different-speaker log-likelihood ratio; symmetric.
  double Score(const Eigen::VectorXd &a, const Eigen::VectorXd &b) const;

 private:
  // Cached joint-Gaussian inverses for scoring.
  Eigen::MatrixXd q_same_, p_same_, q_diff_;
  double logdet_same_ = 0, logdet_diff_ = 0;
  void Finalize();
};

struct BackendModel {
  Eigen::VectorXd mean;   // global mean in embedding space
  Eigen::MatrixXd lda;    // in_dim x out_dim projection
  Plda plda;
};

// Global mean removal -> LDA (within-class scatter ridge-regularized) ->
// unit-L2 length normalization -> two-covariance PLDA.
BackendModel BackendFit(
    const std::vector<std::pair<std::string, Eigen::VectorXd>> &labeled_embs,
    int lda_dim = 150);
double BackendScore(const BackendModel &model, const Eigen::VectorXd &enroll,
                    const Eigen::VectorXd &test);

// Angular cosine frame metric: arccos(clipped cosine similarity) / pi.
double AngularCosineDistance(std::span<const float> a,
                             std::span<const float> b);

// Path-length-normalized DTW with steps {(1,0),(0,1),(1,1)}; among
// minimal-cost paths the shortest is used for normalization.
double DtwDistance(const Array2 &a, const Array2 &b);

struct AbxTriple {
  std::string a, b, x;
  std::string cat_a, cat_b;  // category pair for aggregation (may be empty)
  std::string condition;     // e.g. "within" / "across"
};

// Per-condition error rate: each triple contributes 1 if dtw(A,X) >
// dtw(B,X), 0.5 on a tie, 0 otherwise; triples are averaged within a
// category pair, then category pairs are averaged unweighted.
std::map<std::string, double> AbxErrorRate(
    const std::vector<AbxTriple> &triples,
    const std::map<std::string, Array2> &representations);

enum class ReconSetting { kPerUtt, kUnified };

// Decoder fed the soft tokenizer posterior and either the utterance's own
// embedding or the mean embedding over `train_corpus`.
std::vector<FeatureSequence> Reconstruct(
    ModelParams &params, const std::vector<FeatureSequence> &dataset,
    ReconSetting setting,
    const std::vector<FeatureSequence> *train_corpus = nullptr);

// Normalized mutual information, arithmetic-mean normalization, in [0,1].
double ClusteringNmi(std::span<const int> labels_a,
                     std::span<const int> labels_b);

double CosineScore(std::span<const float> a, std::span<const float> b);

}  // namespace mfae

#endif  // MFAE_EVAL_H_
