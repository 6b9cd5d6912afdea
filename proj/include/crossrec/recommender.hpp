#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "crossrec/dataio/dataset.hpp"
#include "crossrec/segmentation/segmentation.hpp"

namespace crossrec {

// Anything that scores every catalog item for a purchase task; higher
// scores mean more likely purchases. Implementations are immutable after
// training, so scoring is safe to call concurrently.
class Recommender {
 public:
  virtual ~Recommender() = default;

  virtual std::string name() const = 0;
  virtual std::vector<double> score(const dataio::Dataset& data, const segmentation::Task& task) const = 0;
  // Scores after each prefix of the task's sessions. The default re-scores
  // truncated copies of the task.
  virtual std::vector<std::vector<double>> score_steps(const dataio::Dataset& data,
                                                       const segmentation::Task& task) const;
  virtual nlohmann::json checkpoint() const = 0;
};

}  // namespace crossrec
