#pragma once

#include <vector>

#include <json.hpp>

#include "crossrec/numcore/matrix.hpp"

namespace crossrec::numcore {

// Per-column z-scoring; constant columns keep unit scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<std::vector<double>>& rows);
  Mat transform(const std::vector<double>& row) const;
  std::size_t width() const { return mean.size(); }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

}  // namespace crossrec::numcore
