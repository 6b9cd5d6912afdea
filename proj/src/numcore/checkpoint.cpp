#include "crossrec/numcore/checkpoint.hpp"

#include <fstream>

namespace crossrec::numcore {

using nlohmann::json;

json params_to_json(const ParamSet& params) {
  json arr = json::array();
  for (const auto& p : params) {
    arr.push_back({{"name", p.name},
                   {"rows", p.value.rows()},
                   {"cols", p.value.cols()},
                   {"data", std::vector<double>(p.value.data(), p.value.data() + p.value.size())}});
  }
  return arr;
}

namespace {

Mat matrix_from_json(const json& e) {
  const auto rows = e.at("rows").get<Eigen::Index>();
  const auto cols = e.at("cols").get<Eigen::Index>();
  const auto data = e.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("checkpoint parameter " + e.at("name").get<std::string>() + " has wrong size");
  }
  Mat m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

ParamSet params_from_json(const json& j) {
  ParamSet params;
  for (const auto& e : j) params.add(e.at("name").get<std::string>(), matrix_from_json(e));
  return params;
}

void assign_params(ParamSet& target, const json& j) {
  ParamSet loaded = params_from_json(j);
  if (loaded.size() != target.size()) throw DataError("checkpoint parameter count mismatch");
  for (auto& p : target) {
    const auto idx = loaded.find(p.name);
    if (!idx) throw DataError("checkpoint lacks parameter " + p.name);
    const Mat& v = loaded[*idx].value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw DataError("checkpoint shape mismatch for " + p.name);
    }
    p.value = v;
  }
}

json make_checkpoint(std::string kind, const json& meta, const ParamSet& params) {
  return {{"format", "crossrec-checkpoint"},
          {"version", kCheckpointVersion},
          {"kind", std::move(kind)},
          {"meta", meta},
          {"params", params_to_json(params)}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace crossrec::numcore
