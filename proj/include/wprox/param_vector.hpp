#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wprox/errors.hpp"

namespace wprox::diff {

struct Slice {
  std::string name;
  int offset = 0;
  int length = 0;
  bool operator==(const Slice&) const = default;
};

// Ordered, contiguous, disjoint named slices covering [0, total).
using ParamLayout = std::vector<Slice>;

inline int layout_total(const ParamLayout& layout) {
  int total = 0;
  for (const auto& s : layout) total += s.length;
  return total;
}

inline void validate_layout(const ParamLayout& layout, int expected_size) {
  int cursor = 0;
  for (const auto& s : layout) {
    if (s.offset != cursor || s.length < 0)
      throw ConfigError("parameter layout not contiguous at slice '" + s.name +
                        "'");
    cursor += s.length;
  }
  if (cursor != expected_size)
    throw ConfigError("parameter layout covers " + std::to_string(cursor) +
                      " entries, vector has " + std::to_string(expected_size));
}

// Flat parameter vector with a named-slice layout.
class ParamVector {
 public:
  ParamVector(Eigen::VectorXd values, ParamLayout layout)
      : values_(std::move(values)), layout_(std::move(layout)) {
    validate_layout(layout_, static_cast<int>(values_.size()));
    if (!values_.allFinite())
      throw NumericError("parameter vector contains non-finite entries");
  }

  static ParamVector dense(Eigen::VectorXd values, std::string name = "theta") {
    ParamLayout layout{{std::move(name), 0, static_cast<int>(values.size())}};
    return ParamVector(std::move(values), std::move(layout));
  }

  const Eigen::VectorXd& values() const { return values_; }
  const ParamLayout& layout() const { return layout_; }
  int size() const { return static_cast<int>(values_.size()); }

  Eigen::VectorXd slice(const std::string& name) const {
    for (const auto& s : layout_)
      if (s.name == name) return values_.segment(s.offset, s.length);
    throw UsageError("no parameter slice named '" + name + "'");
  }

 private:
  Eigen::VectorXd values_;
  ParamLayout layout_;
};

}  // namespace wprox::diff
