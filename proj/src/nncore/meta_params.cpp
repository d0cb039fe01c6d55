#include "metabayes/nncore/meta_params.hpp"

#include <algorithm>
#include <cstring>

#include "metabayes/errors.hpp"

namespace metabayes {

std::size_t MetaParams::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (rows <= 0 || cols <= 0) {
    throw ContractViolation("tensor '" + name + "' must have a positive shape");
  }
  if (contains(name)) {
    throw ContractViolation("duplicate tensor name '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(Matrix::Zero(rows, cols));
  return values_.size() - 1;
}

std::size_t MetaParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

std::size_t MetaParams::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw ContractViolation("unknown tensor '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names_.begin());
}

bool MetaParams::contains(std::string_view name) const noexcept {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

void MetaParams::assign(std::size_t i, const Matrix& value) {
  if (value.rows() != values_[i].rows() || value.cols() != values_[i].cols()) {
    throw ContractViolation("shape mismatch assigning tensor '" + names_[i] + "'");
  }
  values_[i] = value;
}

MetaParams MetaParams::zeros_like() const {
  MetaParams out;
  out.names_ = names_;
  out.values_.reserve(values_.size());
  for (const auto& v : values_) out.values_.push_back(Matrix::Zero(v.rows(), v.cols()));
  return out;
}

bool MetaParams::same_layout(const MetaParams& other) const noexcept {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].rows() != other.values_[i].rows() || values_[i].cols() != other.values_[i].cols()) {
      return false;
    }
  }
  return true;
}

bool MetaParams::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](const Matrix& m) { return m.allFinite(); });
}

double MetaParams::squared_norm() const noexcept {
  double s = 0.0;
  for (const auto& v : values_) s += v.squaredNorm();
  return s;
}

bool operator==(const MetaParams& a, const MetaParams& b) {
  return bitwise_equal(a, b);
}

bool bitwise_equal(const MetaParams& a, const MetaParams& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto bytes = static_cast<std::size_t>(a[i].size()) * sizeof(double);
    if (std::memcmp(a[i].data(), b[i].data(), bytes) != 0) return false;
  }
  return true;
}

}  // namespace metabayes
