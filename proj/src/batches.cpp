#include "tailgan/batches.hpp"

#include <string>

#include "tailgan/errors.hpp"

namespace tailgan {

BatchPartition split_batches(std::size_t length, std::size_t n_batches, std::size_t n_sub,
                             std::size_t min_window) {
  if (n_batches == 0 || n_sub == 0) throw DomainError("batch counts must be positive");
  if (length < n_batches * n_sub * std::max<std::size_t>(min_window, 1)) {
    throw DomainError("series of length " + std::to_string(length) + " is too short for " +
                      std::to_string(n_batches) + "x" + std::to_string(n_sub) + " batches");
  }
  BatchPartition out(n_batches);
  const std::size_t batch_len = length / n_batches;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const std::size_t begin = b * batch_len;
    const std::size_t end = b + 1 == n_batches ? length : begin + batch_len;
    const std::size_t sub_len = (end - begin) / n_sub;
    for (std::size_t s = 0; s < n_sub; ++s) {
      const std::size_t sb = begin + s * sub_len;
      out[b].push_back({sb, s + 1 == n_sub ? end : sb + sub_len});
    }
  }
  return out;
}

TrainEvalSplit split_train_eval(const BatchPartition& partition, std::size_t eval_every) {
  if (eval_every < 2) throw DomainError("eval_every must be at least 2");
  TrainEvalSplit out;
  for (const auto& batch : partition) {
    for (std::size_t s = 0; s < batch.size(); ++s) {
      (s % eval_every == eval_every - 1 ? out.eval : out.train).push_back(batch[s]);
    }
  }
  return out;
}

}  // namespace tailgan
