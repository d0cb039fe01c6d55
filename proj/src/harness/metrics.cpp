#include "metabayes/harness/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "metabayes/errors.hpp"

namespace metabayes {

std::string format_decimal(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metrics_csv(const TrainingCurve& curve) {
  std::string out = std::string(kSupervisedMetricsHeader) + "\n";
  for (const CurveRow& r : curve.rows) {
    out += std::to_string(r.step) + "," + format_decimal(r.train_nll) + "," + format_decimal(r.eval_nll) + "," +
           format_decimal(r.oracle_nll) + "," + format_decimal(r.mean_kl) + "\n";
  }
  return out;
}

std::string metrics_csv(const RlTrainingCurve& curve) {
  std::string out = std::string(kBanditMetricsHeader) + "\n";
  for (const RlCurveRow& r : curve.rows) {
    out += std::to_string(r.batch) + "," + format_decimal(r.mean_return) + "," + format_decimal(r.oracle_value) + "," +
           format_decimal(r.frac_optimal) + "\n";
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << contents;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace metabayes
