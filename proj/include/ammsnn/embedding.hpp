#pragma once

#include <vector>

#include "ammsnn/error.hpp"
#include "ammsnn/rng.hpp"
#include "ammsnn/tensor.hpp"
#include "ammsnn/vocab.hpp"

namespace ammsnn {

// Trainable embedding matrix, one column per vocabulary id. Column 0 (PAD)
// stays all-zero: it is skipped both at initialization and in the backward
// scatter, so no update can ever touch it.
struct EmbeddingTable {
  Tensor W;  // d x |V|
  int d = 0;

  int vocab_size() const { return W.defined() ? W.dim(1) : 0; }
};

inline EmbeddingTable init_embeddings(const Vocabulary& vocab, int d, double half_range,
                                      std::uint64_t seed) {
  if (d <= 0) throw ConfigError("embedding dimension must be positive, got " + std::to_string(d));
  if (half_range <= 0.0) throw ConfigError("embedding init half-range must be positive");
  Rng rng(seed);
  EmbeddingTable table;
  table.d = d;
  table.W = Tensor::zeros({d, vocab.size()}, /*requires_grad=*/true);
  const int v = vocab.size();
  for (int i = 0; i < d; ++i)
    for (int j = 1; j < v; ++j)  // PAD column stays zero
      table.W.at(i, j) = rng.uniform(-half_range, half_range);
  return table;
}

struct PaddedIds {
  std::vector<int> ids;  // length exactly L
  int true_len = 0;      // unpadded length, for masking
};

// Keeps the first L ids of longer sequences; right-pads shorter ones.
inline PaddedIds pad_truncate(const std::vector<int>& ids, int fixed_len) {
  if (fixed_len < 1) throw ConfigError("pad_truncate: fixed length must be >= 1");
  if (ids.empty()) throw DataError("pad_truncate: a sentence must have at least one token");
  PaddedIds out;
  out.true_len = std::min<int>(static_cast<int>(ids.size()), fixed_len);
  out.ids.assign(static_cast<std::size_t>(fixed_len), Vocabulary::kPad);
  std::copy_n(ids.begin(), out.true_len, out.ids.begin());
  return out;
}

// Column j of the result is W[:, ids[j]]. Gradients scatter back into the
// referenced columns only; PAD columns receive none.
inline Tensor embed(Tape& tape, const PaddedIds& seq, const EmbeddingTable& table) {
  const int d = table.d;
  const int len = static_cast<int>(seq.ids.size());
  const int v = table.vocab_size();
  for (int id : seq.ids)
    if (id < 0 || id >= v)
      throw DataError("embed: token id " + std::to_string(id) + " out of range [0, " +
                      std::to_string(v) + ")");
  Tensor out = Tensor::zeros({d, len}, tape.track(table.W));
  const double* w = table.W.data().data();
  double* op = out.data().data();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < len; ++j) op[i * len + j] = w[i * v + seq.ids[static_cast<std::size_t>(j)]];
  if (out.requires_grad()) {
    Tensor w_tensor = table.W;
    std::vector<int> ids = seq.ids;
    tape.record("embed", [w_tensor, out, ids, d, len, v]() mutable {
      const double* g = out.grad().data();
      double* gw = w_tensor.grad().data();
      for (int j = 0; j < len; ++j) {
        const int id = ids[static_cast<std::size_t>(j)];
        if (id == Vocabulary::kPad) continue;
        for (int i = 0; i < d; ++i) gw[i * v + id] += g[i * len + j];
      }
    });
  }
  return out;
}

}  // namespace ammsnn
