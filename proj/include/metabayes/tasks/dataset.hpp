#pragma once

#include <filesystem>
#include <string>

#include "metabayes/nncore/meta_params.hpp"

namespace metabayes {

/// Recorded observation sequences with no access to any density. Row i is one
/// sequence of length T + 1.
///
/// File format (UTF-8 text, '\n' line endings):
///   T=<int>,count=<int>
///   # optional comment lines; "# source: <text>" sets the description
///   x_1,x_2,...,x_{T+1}        (exactly `count` lines)
class SampleDataset {
 public:
  SampleDataset(Matrix sequences, std::string source);

  int seq_len() const { return static_cast<int>(sequences_.cols()) - 1; }
  Eigen::Index count() const { return sequences_.rows(); }
  const std::string& source() const { return source_; }
  auto sequence(Eigen::Index i) const { return sequences_.row(i); }
  const Matrix& sequences() const { return sequences_; }

 private:
  Matrix sequences_;
  std::string source_;
};

SampleDataset load_sample_dataset(const std::filesystem::path& path);
SampleDataset parse_sample_dataset(const std::string& text);
void save_sample_dataset(const SampleDataset& dataset, const std::filesystem::path& path);
std::string format_sample_dataset(const SampleDataset& dataset);

}  // namespace metabayes
