#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace metabayes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Named, fixed-shape tensor collection holding every trainable weight of a
/// network. Gradients and optimizer moments reuse the same type, built with
/// zeros_like() so that tensor order and shapes line up one-to-one.
class MetaParams {
 public:
  MetaParams() = default;

  /// Appends a zero-initialized tensor and returns its index. Names are unique.
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t parameter_count() const noexcept;

  const Matrix& operator[](std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const noexcept;

  /// Overwrites tensor i. The shape must match the declared one.
  void assign(std::size_t i, const Matrix& value);
  /// Mutable view for in-place updates that cannot change the shape.
  Eigen::Map<Matrix> data(std::size_t i) { return {values_[i].data(), values_[i].rows(), values_[i].cols()}; }

  MetaParams zeros_like() const;
  bool same_layout(const MetaParams& other) const noexcept;
  bool all_finite() const noexcept;
  double squared_norm() const noexcept;

  std::uint64_t version() const noexcept { return version_; }
  void bump_version() noexcept { ++version_; }
  void set_version(std::uint64_t v) noexcept { version_ = v; }

  friend bool operator==(const MetaParams& a, const MetaParams& b);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::uint64_t version_ = 0;
};

/// Bitwise equality of every parameter value (shapes and names included).
bool bitwise_equal(const MetaParams& a, const MetaParams& b);

}  // namespace metabayes
