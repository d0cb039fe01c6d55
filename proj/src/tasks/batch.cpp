#include "metabayes/tasks/batch.hpp"

#include "metabayes/errors.hpp"

namespace metabayes {

BatchSource::BatchSource(TaskFamily family, SeededRng rng) : source_(std::move(family)), rng_(rng) {
  validate(std::get<TaskFamily>(source_));
}

BatchSource::BatchSource(std::shared_ptr<const SampleDataset> dataset, SeededRng rng)
    : source_(std::move(dataset)), rng_(rng) {
  if (!std::get<std::shared_ptr<const SampleDataset>>(source_)) throw ContractViolation("null dataset");
}

BatchSource::BatchSource(const SampleDataset& dataset, SeededRng rng)
    : BatchSource(std::make_shared<const SampleDataset>(dataset), rng) {}

int BatchSource::seq_len() const {
  if (const auto* family = std::get_if<TaskFamily>(&source_)) return metabayes::seq_len(*family);
  return std::get<std::shared_ptr<const SampleDataset>>(source_)->seq_len();
}

SequenceBatch BatchSource::next_batch(Eigen::Index batch_size) {
  if (batch_size < 1) throw ContractViolation("batch size must be >= 1");
  SequenceBatch batch;
  batch.observations.resize(seq_len() + 1, batch_size);
  if (const auto* family = std::get_if<TaskFamily>(&source_)) {
    Vector latents(batch_size);
    for (Eigen::Index j = 0; j < batch_size; ++j) {
      TaskSample s = sample_task(*family, rng_);
      latents[j] = s.latent;
      batch.observations.col(j) = s.observations;
    }
    batch.latents = std::move(latents);
  } else {
    const SampleDataset& data = *std::get<std::shared_ptr<const SampleDataset>>(source_);
    for (Eigen::Index j = 0; j < batch_size; ++j) {
      const auto row = static_cast<Eigen::Index>(rng_.uniform_index(static_cast<std::uint64_t>(data.count())));
      batch.observations.col(j) = data.sequence(row).transpose();
    }
  }
  return batch;
}

SampleDataset export_sample_dataset(const TaskFamily& family, Eigen::Index count, SeededRng& rng) {
  if (count < 1) throw ValidationError("dataset count must be >= 1");
  const int t = seq_len(family);
  Matrix rows(count, t + 1);
  for (Eigen::Index i = 0; i < count; ++i) rows.row(i) = sample_task(family, rng).observations.transpose();
  const char* name = std::holds_alternative<GaussianTaskFamily>(family) ? "gaussian" : "exponential";
  return SampleDataset(std::move(rows), std::string("sampled from ") + name + " task family");
}

}  // namespace metabayes
