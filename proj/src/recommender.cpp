#include "crossrec/recommender.hpp"

namespace crossrec {

std::vector<std::vector<double>> Recommender::score_steps(const dataio::Dataset& data,
                                                          const segmentation::Task& task) const {
  std::vector<std::vector<double>> out;
  segmentation::Task prefix = task;
  for (std::size_t j = 1; j <= task.sessions.size(); ++j) {
    prefix.sessions.assign(task.sessions.begin(), task.sessions.begin() + static_cast<std::ptrdiff_t>(j));
    out.push_back(score(data, prefix));
  }
  return out;
}

}  // namespace crossrec
