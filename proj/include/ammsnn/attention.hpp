#pragma once

#include <utility>

#include "ammsnn/encoder.hpp"
#include "ammsnn/error.hpp"
#include "ammsnn/rng.hpp"
#include "ammsnn/tensor.hpp"

namespace ammsnn {

// Bilinear operator of the two-way attention, side length = encoder c_total.
struct AttentionParams {
  Tensor U;
};

inline AttentionParams init_attention_params(int c_total, Rng& rng) {
  AttentionParams p;
  p.U = Tensor::zeros({c_total, c_total}, /*requires_grad=*/true);
  // Small init keeps tanh in its linear regime early in training.
  for (double& v : p.U.data()) v = rng.uniform(-0.1, 0.1);
  return p;
}

struct AttentionState {
  Tensor T;        // M x N soft-alignment scores, entries in (-1, 1)
  Tensor sigma_q;  // length M, masked entries exactly 0
  Tensor sigma_a;  // length N, masked entries exactly 0
};

// Soft-alignment matrix T = tanh(Qf' U Af), rows = question positions,
// columns = answer positions.
//
// The bilinear form is evaluated in the symmetrized order
//   (Qf' U Af + (Af' U' Qf)')/2
// which is the same matrix in exact arithmetic but makes role exchange an
// exact floating-point transpose: swapping (Qf, Af) while transposing U, or
// swapping them under a symmetric U, yields bitwise T'.
inline Tensor attention_matrix(Tape& tape, const FeatureMap& qf, const FeatureMap& af,
                               const AttentionParams& params) {
  const Tensor& q = qf.values;
  const Tensor& a = af.values;
  if (q.dim(0) != a.dim(0))
    throw DimError("attention_matrix: feature maps disagree on channel count, " +
                   shape_str(q.shape()) + " vs " + shape_str(a.shape()));
  if (params.U.rank() != 2 || params.U.dim(0) != q.dim(0) || params.U.dim(1) != q.dim(0))
    throw DimError("attention_matrix: U must be " + std::to_string(q.dim(0)) + " square, got " +
                   shape_str(params.U.shape()));
  Tensor x = tape.matmul(tape.transpose(q), tape.matmul(params.U, a));
  Tensor y = tape.matmul(tape.transpose(a), tape.matmul(tape.transpose(params.U), q));
  Tensor pre = tape.affine(tape.add(x, tape.transpose(y)), 0.5, 0.0);
  return tape.activation(pre, Activation::tanh);
}

// Row-wise and column-wise maxima of T over the unmasked region, then
// softmax. Masked positions are excluded from both the max and the softmax
// and come back as exact zeros in sigma.
inline std::pair<Tensor, Tensor> attention_vectors(Tape& tape, const Tensor& t_matrix,
                                                   int q_true, int a_true) {
  const int m = t_matrix.dim(0), n = t_matrix.dim(1);
  if (q_true < 1 || a_true < 1) throw DataError("attention_vectors: true lengths must be >= 1");
  if (q_true > m || a_true > n)
    throw DimError("attention_vectors: true lengths exceed T of shape " + shape_str(t_matrix.shape()));
  Tensor valid = t_matrix;
  if (q_true < m) valid = tape.slice(valid, 0, 0, q_true);
  if (a_true < n) valid = tape.slice(valid, 1, 0, a_true);
  Tensor g_q = tape.max_reduce(valid, Axis::rows).values;
  Tensor g_a = tape.max_reduce(valid, Axis::cols).values;
  Tensor sigma_q = tape.softmax_vec(g_q);
  Tensor sigma_a = tape.softmax_vec(g_a);
  if (q_true < m) sigma_q = tape.concat(sigma_q, Tensor::zeros({m - q_true}), 0);
  if (a_true < n) sigma_a = tape.concat(sigma_a, Tensor::zeros({n - a_true}), 0);
  return {sigma_q, sigma_a};
}

// Final pair representations: the attention-free pooled encoding
// concatenated with the per-channel max of the attention-reweighted map,
// giving a vector of length 2 * c_total per sentence.
inline std::pair<Tensor, Tensor> attend(Tape& tape, const FeatureMap& qf, const FeatureMap& af,
                                        const Tensor& sigma_q, const Tensor& sigma_a) {
  auto weighted_pool = [&](const FeatureMap& fm, const Tensor& sigma) {
    Tensor weighted = tape.hadamard_broadcast(fm.values, sigma);
    Tensor valid = fm.true_len < weighted.dim(1) ? tape.slice(weighted, 1, 0, fm.true_len) : weighted;
    return tape.max_reduce(valid, Axis::rows).values;
  };
  Tensor r_q = tape.concat(pool_encoding(tape, qf), weighted_pool(qf, sigma_q), 0);
  Tensor r_a = tape.concat(pool_encoding(tape, af), weighted_pool(af, sigma_a), 0);
  return {r_q, r_a};
}

// Convenience wrapper running the whole mechanism for one pair.
inline AttentionState two_way_attention(Tape& tape, const FeatureMap& qf, const FeatureMap& af,
                                        const AttentionParams& params) {
  AttentionState st;
  st.T = attention_matrix(tape, qf, af, params);
  auto sigmas = attention_vectors(tape, st.T, qf.true_len, af.true_len);
  st.sigma_q = sigmas.first;
  st.sigma_a = sigmas.second;
  return st;
}

}  // namespace ammsnn
