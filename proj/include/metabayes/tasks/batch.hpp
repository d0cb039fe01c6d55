#pragma once

#include <memory>
#include <optional>
#include <variant>

#include "metabayes/nncore/meta_params.hpp"
#include "metabayes/tasks/dataset.hpp"
#include "metabayes/tasks/families.hpp"
#include "metabayes/tasks/rng.hpp"

namespace metabayes {

/// Column j holds sequence j (T + 1 rows). Latents are known only for
/// generatively sampled batches.
struct SequenceBatch {
  Matrix observations;
  std::optional<Vector> latents;

  Eigen::Index size() const { return observations.cols(); }
};

/// Fresh tasks from a family, or uniform draws with replacement from a dataset.
class BatchSource {
 public:
  BatchSource(TaskFamily family, SeededRng rng);
  BatchSource(std::shared_ptr<const SampleDataset> dataset, SeededRng rng);
  /// Copies the dataset.
  BatchSource(const SampleDataset& dataset, SeededRng rng);

  SequenceBatch next_batch(Eigen::Index batch_size);

  int seq_len() const;
  const SeededRng& rng() const { return rng_; }
  void set_rng(const SeededRng& rng) { rng_ = rng; }

 private:
  std::variant<TaskFamily, std::shared_ptr<const SampleDataset>> source_;
  SeededRng rng_;
};

SampleDataset export_sample_dataset(const TaskFamily& family, Eigen::Index count, SeededRng& rng);

}  // namespace metabayes
