#pragma once

#include <cstddef>
#include <vector>

namespace tailgan {

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// partition[b][s] is sub-batch s of stationary batch b.
using BatchPartition = std::vector<std::vector<IndexRange>>;

// Contiguous equal partition of [0, length) into n_batches batches of n_sub
// sub-batches each. The remainder of every division goes to the last piece.
// Requires length >= n_batches * n_sub * min_window.
BatchPartition split_batches(std::size_t length, std::size_t n_batches, std::size_t n_sub,
                             std::size_t min_window = 1);

struct TrainEvalSplit {
  std::vector<IndexRange> train;
  std::vector<IndexRange> eval;
};

// Sub-batch s of every batch goes to eval when s % eval_every == eval_every - 1,
// so each stationary batch contributes to both sides.
TrainEvalSplit split_train_eval(const BatchPartition& partition, std::size_t eval_every = 4);

}  // namespace tailgan
