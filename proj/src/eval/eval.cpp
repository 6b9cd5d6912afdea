#include "crossrec/eval/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "crossrec/numcore/matrix.hpp"

namespace crossrec::eval {

using nlohmann::json;

std::vector<std::uint32_t> rank_items(const std::vector<double>& scores) {
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0U);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

std::vector<double> apply_post_filter(std::vector<double> scores, const std::vector<bool>& eligible) {
  if (eligible.size() != scores.size()) throw Error("post filter: mask length mismatch");
  if (scores.empty()) return scores;
  if (std::none_of(eligible.begin(), eligible.end(), [](bool e) { return e; })) {
    spdlog::warn("post filter: no eligible items, scores left unchanged");
    return scores;
  }
  const double low = *std::min_element(scores.begin(), scores.end()) - 1.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!eligible[i]) scores[i] = low;
  return scores;
}

double metric_value(const Metrics& m, std::size_t which) {
  switch (which) {
    case 0:
      return m.hr;
    case 1:
      return m.precision;
    case 2:
      return m.recall;
    case 3:
      return m.mrr;
    case 4:
      return m.ap;
  }
  throw Error("unknown metric index");
}

Metrics metrics_at_k(const std::vector<std::uint32_t>& ranked, const std::vector<std::uint32_t>& purchased,
                     std::size_t k) {
  if (purchased.empty()) throw Error("metrics_at_k: empty purchase set");
  if (k == 0) throw Error("metrics_at_k: k must be >= 1");
  const std::set<std::uint32_t> bought(purchased.begin(), purchased.end());
  Metrics m;
  std::size_t hits = 0;
  double precision_sum = 0.0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (!bought.count(ranked[r])) continue;
    ++hits;
    if (hits == 1) m.mrr = 1.0 / static_cast<double>(r + 1);
    precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  m.hr = hits > 0 ? 1.0 : 0.0;
  m.precision = static_cast<double>(hits) / static_cast<double>(k);
  m.recall = static_cast<double>(hits) / static_cast<double>(bought.size());
  m.ap = precision_sum / static_cast<double>(std::min(bought.size(), k));
  return m;
}

namespace {

void accumulate(Metrics& acc, const Metrics& m) {
  acc.hr += m.hr;
  acc.precision += m.precision;
  acc.recall += m.recall;
  acc.mrr += m.mrr;
  acc.ap += m.ap;
}

Metrics divide(Metrics m, double n) {
  if (n == 0.0) return {};
  m.hr /= n;
  m.precision /= n;
  m.recall /= n;
  m.mrr /= n;
  m.ap /= n;
  return m;
}

std::vector<double> filtered_scores(const std::vector<double>& scores, const dataio::Dataset& data,
                                    const segmentation::Task& t) {
  if (scores.size() != data.catalog.size()) throw Error("model returned the wrong number of scores");
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("model returned a non-finite score");
  const auto portfolio = dataio::portfolio_at(data.users.at(t.user), t.purchase_time, data.catalog.size());
  return apply_post_filter(scores, dataio::eligibility_mask(portfolio, data.catalog));
}

}  // namespace

Metrics EvalReport::mean(std::size_t cutoff) const {
  if (cutoff == 0 || cutoff > std::max(k, max_k)) throw Error("cutoff not recorded in report");
  Metrics acc;
  for (const auto& t : tasks) accumulate(acc, t.at[cutoff - 1]);
  return divide(acc, static_cast<double>(tasks.size()));
}

EvalReport evaluate(const Recommender& model, const dataio::Dataset& data, const std::vector<segmentation::Task>& test,
                    std::size_t k, std::size_t max_k) {
  if (test.empty()) throw Error("empty test set");
  if (k == 0) throw ConfigError("k must be >= 1");
  EvalReport report;
  report.model = model.name();
  report.k = k;
  report.max_k = std::max(k, max_k);
  for (const auto& t : test) {
    const auto& user = data.users.at(t.user);
    const auto ranked = rank_items(filtered_scores(model.score(data, t), data, t));
    TaskResult r{user.id, t.user, t.sessions.size(), {}};
    for (std::size_t c = 1; c <= report.max_k; ++c) r.at.push_back(metrics_at_k(ranked, user.purchases[t.purchase].items, c));
    report.tasks.push_back(std::move(r));
  }
  return report;
}

json metrics_to_json(const Metrics& m) {
  return {{"hr", m.hr}, {"precision", m.precision}, {"recall", m.recall}, {"mrr", m.mrr}, {"map", m.ap}};
}

json report_to_json(const EvalReport& r, bool per_task) {
  json at = json::object();
  for (std::size_t c = 1; c <= r.max_k; ++c) at[std::to_string(c)] = metrics_to_json(r.mean(c));
  json j = {{"model", r.model}, {"k", r.k}, {"tasks", r.tasks.size()}, {"metrics", metrics_to_json(r.mean())},
            {"at", at}};
  if (per_task) {
    json rows = json::array();
    for (const auto& t : r.tasks) {
      rows.push_back({{"user", t.user_id}, {"sessions", t.sessions}, {"metrics", metrics_to_json(t.at[r.k - 1])}});
    }
    j["per_task"] = rows;
  }
  return j;
}

std::vector<CsvRow> report_rows(const EvalReport& r, const std::string& group) {
  std::vector<CsvRow> rows;
  for (std::size_t c = 1; c <= r.max_k; ++c) {
    const Metrics m = r.mean(c);
    for (std::size_t i = 0; i < 5; ++i) rows.push_back({kMetricNames[i], c, r.model, group, metric_value(m, i)});
  }
  return rows;
}

std::string to_csv(const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,cutoff,model,group,value\n";
  for (const auto& r : rows) out << r.metric << ',' << r.cutoff << ',' << r.model << ',' << r.group << ',' << r.value << '\n';
  return out.str();
}

std::vector<StepPoint> per_step_curve(const Recommender& model, const dataio::Dataset& data,
                                      const std::vector<segmentation::Task>& test, std::size_t k) {
  std::vector<StepPoint> points;
  std::vector<Metrics> sums;
  for (const auto& t : test) {
    const auto& user = data.users.at(t.user);
    const auto steps = model.score_steps(data, t);
    if (steps.size() != t.sessions.size()) throw Error("score_steps returned the wrong number of steps");
    if (sums.size() < steps.size()) {
      sums.resize(steps.size());
      points.resize(steps.size());
    }
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const auto ranked = rank_items(filtered_scores(steps[j], data, t));
      accumulate(sums[j], metrics_at_k(ranked, user.purchases[t.purchase].items, k));
      ++points[j].tasks;
    }
  }
  for (std::size_t j = 0; j < points.size(); ++j) {
    points[j].step = j + 1;
    points[j].metrics = divide(sums[j], static_cast<double>(points[j].tasks));
  }
  return points;
}

std::string ModelSpec::label() const {
  if (baseline) return base.model;
  std::string s = std::string(encoders::to_string(cross.encoder)) + "-" + std::string(recmodels::to_string(cross.head));
  if (cross.hybrid) s += "-hybrid";
  return s;
}

void to_json(json& j, const ModelSpec& s) {
  if (s.baseline) {
    j = {{"baseline", s.base}};
  } else {
    j = {{"model", s.cross}};
  }
}

void from_json(const json& j, ModelSpec& s) {
  if (j.contains("baseline")) {
    s.baseline = true;
    s.base = j.at("baseline").get<baselines::BaselineConfig>();
  } else {
    s.baseline = false;
    if (j.contains("model")) s.cross = j.at("model").get<recmodels::ModelConfig>();
  }
}

std::unique_ptr<Recommender> train_model(const prep::PreparedData& prepared, const ModelSpec& spec) {
  if (spec.baseline) return baselines::train_baseline(prepared, spec.base);
  return std::move(recmodels::train_cross_sessions(prepared, spec.cross).model);
}

std::unique_ptr<Recommender> load_model(const json& checkpoint) {
  if (checkpoint.value("kind", "") == recmodels::kCrossSessionsKind) {
    return recmodels::CrossSessionsModel::from_checkpoint(checkpoint);
  }
  return baselines::load_baseline(checkpoint);
}

ShuffleResult shuffle_study(const prep::PreparedData& prepared, const ModelSpec& spec, std::size_t trials,
                            std::uint64_t seed, std::size_t k) {
  if (trials == 0) throw ConfigError("trials must be >= 1");
  ShuffleResult out;
  const auto test = prepared.tasks_of(prepared.split.test);
  out.original = evaluate(*train_model(prepared, spec), prepared.data, test, k);
  Metrics acc;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    prep::PreparedData shuffled = prepared;
    numcore::Rng rng(numcore::mix_seed(seed, trial));
    for (auto& t : shuffled.tasks) std::shuffle(t.sessions.begin(), t.sessions.end(), rng);
    auto model = train_model(shuffled, spec);
    out.trials.push_back(evaluate(*model, shuffled.data, shuffled.tasks_of(shuffled.split.test), k));
    accumulate(acc, out.trials.back().mean());
    spdlog::info("shuffle trial {}: HR@{} {:.4f}", trial + 1, k, out.trials.back().mean().hr);
  }
  out.shuffled_mean = divide(acc, static_cast<double>(trials));
  return out;
}

bool action_in_facet(const dataio::Dataset& data, const dataio::Action& a, const std::string& facet) {
  const auto colon = facet.find(':');
  if (colon == std::string::npos) throw ConfigError("bad facet: " + facet);
  const std::string kind = facet.substr(0, colon);
  const std::string value = facet.substr(colon + 1);
  if (kind == "section") return data.vocab.sections()[a.section] == value;
  if (kind == "type") return data.vocab.types()[a.type] == value;
  if (kind == "object") {
    const auto k = dataio::object_kind(data.vocab.objects()[a.object]);
    if (value == "items") return k == dataio::ObjectKind::item;
    if (value == "services") return k == dataio::ObjectKind::service;
  }
  throw ConfigError("bad facet: " + facet);
}

dataio::Dataset remove_facet(const dataio::Dataset& raw, const std::string& facet) {
  dataio::Dataset out = raw;
  std::size_t kept = 0;
  for (auto& u : out.users) {
    for (auto& s : u.sessions) {
      std::erase_if(s.actions, [&](const dataio::Action& a) { return action_in_facet(raw, a, facet); });
      kept += s.actions.size();
    }
  }
  if (kept == 0) throw DataError("facet " + facet + " removes every action");
  dataio::rebuild_vocabulary(out);
  return out;
}

std::vector<std::string> default_facets(const dataio::Dataset& raw) {
  std::vector<std::string> facets;
  for (const auto& s : raw.vocab.sections()) facets.push_back("section:" + s);
  for (const char* f : {"object:items", "object:services", "type:start", "type:act", "type:complete"}) {
    facets.emplace_back(f);
  }
  return facets;
}

Metrics relative_change(const Metrics& changed, const Metrics& base) {
  auto rel = [](double c, double b) { return b == 0.0 ? 0.0 : (c - b) / b; };
  return {rel(changed.hr, base.hr), rel(changed.precision, base.precision), rel(changed.recall, base.recall),
          rel(changed.mrr, base.mrr), rel(changed.ap, base.ap)};
}

AblationResult ablate_actions(const dataio::Dataset& raw, const prep::PrepConfig& prep_cfg, const ModelSpec& spec,
                              const std::vector<std::string>& facets, std::size_t k) {
  auto run = [&](const dataio::Dataset& d) {
    const auto prepared = prep::prepare(d, prep_cfg);
    return evaluate(*train_model(prepared, spec), prepared.data, prepared.tasks_of(prepared.split.test), k);
  };
  AblationResult out;
  out.all_actions = run(raw);
  for (const auto& f : facets) {
    AblationEntry e{f, run(remove_facet(raw, f)), {}};
    e.relative_change = relative_change(e.report.mean(), out.all_actions.mean());
    spdlog::info("ablation {}: HR@{} {:.4f} ({:+.1f}%)", f, k, e.report.mean().hr, 100.0 * e.relative_change.hr);
    out.entries.push_back(std::move(e));
  }
  return out;
}

std::vector<SweepEntry> threshold_sweep(const dataio::Dataset& raw, const prep::PrepConfig& prep_cfg,
                                        const ModelSpec& spec, const std::vector<double>& thresholds, std::size_t k) {
  std::vector<SweepEntry> out;
  for (double days : thresholds) {
    if (!(days > 0.0)) throw ConfigError("thresholds must be positive");
    prep::PrepConfig cfg = prep_cfg;
    cfg.threshold_days = days;
    const auto prepared = prep::prepare(raw, cfg);
    SweepEntry e;
    e.threshold_days = days;
    e.sessions_per_task = prepared.report.stats.sessions_per_task_mean;
    e.report = evaluate(*train_model(prepared, spec), prepared.data, prepared.tasks_of(prepared.split.test), k);
    spdlog::info("threshold {} days: HR@{} {:.4f}", days, k, e.report.mean().hr);
    out.push_back(std::move(e));
  }
  return out;
}

GroupAttribute parse_group_attribute(std::string_view name) {
  if (name == "age") return GroupAttribute::age;
  if (name == "gender") return GroupAttribute::gender;
  if (name == "income") return GroupAttribute::income;
  throw ConfigError("unknown group attribute: " + std::string(name));
}

std::string group_of(const dataio::User& user, GroupAttribute attribute) {
  if (!user.has_profile) throw DataError("attribute missing for user " + user.id);
  switch (attribute) {
    case GroupAttribute::age: {
      const auto decade = static_cast<long>(std::floor(user.profile.demographics.at(0) / 10.0)) * 10;
      return std::to_string(decade) + "-" + std::to_string(decade + 9);
    }
    case GroupAttribute::gender:
      if (user.profile.gender.empty()) throw DataError("attribute missing for user " + user.id);
      return user.profile.gender;
    case GroupAttribute::income: {
      const long decile = std::clamp(std::lround(user.profile.demographics.at(2)), 1L, 10L);
      return std::to_string(decile);
    }
  }
  throw Error("unknown group attribute");
}

std::vector<GroupEntry> group_breakdown(const EvalReport& report, const dataio::Dataset& data,
                                        GroupAttribute attribute) {
  std::map<std::string, GroupEntry> groups;
  for (const auto& t : report.tasks) {
    auto& g = groups[group_of(data.users.at(t.user), attribute)];
    if (g.at.empty()) g.at.resize(t.at.size());
    ++g.tasks;
    for (std::size_t c = 0; c < t.at.size(); ++c) accumulate(g.at[c], t.at[c]);
  }
  std::vector<GroupEntry> out;
  const double n = static_cast<double>(report.tasks.size());
  for (auto& [name, g] : groups) {
    g.group = name;
    g.share = static_cast<double>(g.tasks) / n;
    for (auto& m : g.at) m = divide(m, static_cast<double>(g.tasks));
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace crossrec::eval
