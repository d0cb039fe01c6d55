#include "metabayes/tasks/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "metabayes/errors.hpp"

namespace metabayes {

SampleDataset::SampleDataset(Matrix sequences, std::string source)
    : sequences_(std::move(sequences)), source_(std::move(source)) {
  if (sequences_.rows() < 1) throw ValidationError("sample dataset must contain at least one sequence");
  if (sequences_.cols() < 2) throw ValidationError("sample dataset sequences need length >= 2");
  if (!sequences_.allFinite()) throw ValidationError("sample dataset contains non-finite values");
}

namespace {

bool parse_int(const std::string& s, long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtol(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

SampleDataset parse_sample_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw ParseError(1, "missing header 'T=<int>,count=<int>'");
  ++lineno;
  line = strip_cr(line);
  const auto comma = line.find(',');
  long seq_len = 0;
  long count = 0;
  if (line.rfind("T=", 0) != 0 || comma == std::string::npos || line.compare(comma + 1, 6, "count=") != 0 ||
      !parse_int(line.substr(2, comma - 2), seq_len) || !parse_int(line.substr(comma + 7), count)) {
    throw ParseError(lineno, "malformed header, expected 'T=<int>,count=<int>'");
  }
  if (seq_len < 1) throw ParseError(lineno, "T must be >= 1");
  if (count < 1) throw ParseError(lineno, "count must be >= 1");

  std::string source;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(count * (seq_len + 1)));
  long rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (!line.empty() && line.front() == '#') {
      if (line.rfind("# source:", 0) == 0) {
        source = line.substr(9);
        if (!source.empty() && source.front() == ' ') source.erase(0, 1);
      }
      continue;
    }
    if (line.empty()) {
      throw ParseError(lineno, "empty line");
    }
    if (rows == count) throw ParseError(lineno, "more rows than count=" + std::to_string(count));
    long fields = 0;
    std::size_t start = 0;
    while (true) {
      const auto end = line.find(',', start);
      const std::string field = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
      double v = 0.0;
      if (!parse_double(field, v)) throw ParseError(lineno, "non-numeric value '" + field + "'");
      values.push_back(v);
      ++fields;
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (fields != seq_len + 1) {
      throw ParseError(lineno, "expected " + std::to_string(seq_len + 1) + " values, found " + std::to_string(fields));
    }
    ++rows;
  }
  if (rows != count) {
    throw ParseError(lineno + 1, "expected " + std::to_string(count) + " rows, found " + std::to_string(rows));
  }

  Matrix sequences(count, seq_len + 1);
  for (long r = 0; r < count; ++r) {
    for (long c = 0; c <= seq_len; ++c) sequences(r, c) = values[static_cast<std::size_t>(r * (seq_len + 1) + c)];
  }
  return SampleDataset(std::move(sequences), std::move(source));
}

SampleDataset load_sample_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open sample dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sample_dataset(buf.str());
}

std::string format_sample_dataset(const SampleDataset& dataset) {
  std::string out = "T=" + std::to_string(dataset.seq_len()) + ",count=" + std::to_string(dataset.count()) + "\n";
  if (!dataset.source().empty()) out += "# source: " + dataset.source() + "\n";
  char buf[32];
  for (Eigen::Index r = 0; r < dataset.count(); ++r) {
    for (Eigen::Index c = 0; c <= dataset.seq_len(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", dataset.sequences()(r, c));
      if (c > 0) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void save_sample_dataset(const SampleDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write sample dataset '" + path.string() + "'");
  out << format_sample_dataset(dataset);
}

}  // namespace metabayes
