#include "crossrec/numcore/scaler.hpp"

#include <cmath>

namespace crossrec::numcore {

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error("standardizer needs at least one row");
  const std::size_t d = rows.front().size();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw Error("standardizer: ragged rows");
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) s.scale[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  for (auto& v : s.scale) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

Mat Standardizer::transform(const std::vector<double>& row) const {
  if (row.size() != mean.size()) throw Error("standardizer: expected " + std::to_string(mean.size()) + " features");
  Mat out(1, static_cast<Eigen::Index>(row.size()));
  for (std::size_t j = 0; j < row.size(); ++j) out(0, static_cast<Eigen::Index>(j)) = (row[j] - mean[j]) / scale[j];
  return out;
}

nlohmann::json Standardizer::to_json() const { return {{"mean", mean}, {"scale", scale}}; }

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  if (s.mean.size() != s.scale.size()) throw Error("standardizer: mismatched mean/scale");
  return s;
}

}  // namespace crossrec::numcore
