#pragma once

#include <filesystem>
#include <string>

#include "metabayes/metarl/trainer.hpp"
#include "metabayes/metasl/trainer.hpp"

namespace metabayes {

inline constexpr const char* kSupervisedMetricsHeader = "step,train_nll,eval_nll,oracle_nll,mean_kl";
inline constexpr const char* kBanditMetricsHeader = "batch,mean_return,oracle_value,frac_optimal";

/// Shortest-exact decimal (%.17g); NaN prints as "nan".
std::string format_decimal(double v);

std::string metrics_csv(const TrainingCurve& curve);
std::string metrics_csv(const RlTrainingCurve& curve);

/// Replaces `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace metabayes
