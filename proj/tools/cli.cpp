#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "crossrec/baselines/baselines.hpp"
#include "crossrec/dataio/dataset.hpp"
#include "crossrec/eval/eval.hpp"
#include "crossrec/prep/prep.hpp"
#include "crossrec/recmodels/recmodels.hpp"
#include "crossrec/segmentation/segmentation.hpp"
#include "crossrec/synth/synth.hpp"

namespace crossrec::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct RunConfig {
  fs::path data;
  fs::path out = "out";
  fs::path checkpoint;
  std::uint64_t seed = 42;
  std::size_t k = 3;
  synth::SynthConfig synth;
  prep::PrepConfig prep;
  recmodels::ModelConfig model;
  baselines::BaselineConfig baseline;
  eval::ModelSpec analysis;
  std::size_t trials = 5;
  std::vector<std::string> facets;
  std::vector<double> thresholds{1, 2, 5, 10, 20, 40};
  std::string attribute = "age";

  json effective;
  std::string hash;
};

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + p.string() + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* name, T fallback) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + name + "': " + e.what());
  }
}

RunConfig load_config(json j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.data = field<std::string>(j, "data", "");
  c.out = field<std::string>(j, "out", c.out.string());
  c.checkpoint = field<std::string>(j, "checkpoint", (c.out / "model.json").string());
  c.seed = field<std::uint64_t>(j, "seed", c.seed);
  c.k = field<std::size_t>(j, "k", c.k);
  if (c.k == 0) throw ConfigError("config field 'k': must be >= 1");
  c.synth = field<synth::SynthConfig>(j, "synth", c.synth);
  c.prep = field<prep::PrepConfig>(j, "prep", c.prep);
  c.model = field<recmodels::ModelConfig>(j, "model", c.model);
  c.baseline = field<baselines::BaselineConfig>(j, "baseline", c.baseline);
  c.synth.seed = c.seed;
  c.model.train.seed = c.seed;
  c.model.autoencoder.train.seed = c.seed;
  c.baseline.seed = c.seed;
  c.baseline.demo_train.seed = c.seed;
  c.baseline.gru4rec_train.seed = c.seed;
  c.analysis.cross = c.model;
  c.analysis.base = c.baseline;
  c.analysis.baseline = field<std::string>(j, "analysis", "model") == "baseline";
  if (j.contains("analysis") && j["analysis"] != "model" && j["analysis"] != "baseline") {
    throw ConfigError("config field 'analysis': expected \"model\" or \"baseline\"");
  }
  const json shuffle = field<json>(j, "shuffle", json::object());
  c.trials = field<std::size_t>(shuffle, "trials", c.trials);
  if (c.trials == 0) throw ConfigError("config field 'shuffle.trials': must be >= 1");
  const json ablation = field<json>(j, "ablation", json::object());
  c.facets = field<std::vector<std::string>>(ablation, "facets", {});
  const json sweep = field<json>(j, "sweep", json::object());
  c.thresholds = field<std::vector<double>>(sweep, "thresholds", c.thresholds);
  const json fairness = field<json>(j, "fairness", json::object());
  c.attribute = field<std::string>(fairness, "attribute", c.attribute);
  eval::parse_group_attribute(c.attribute);

  c.synth.validate();
  c.prep.validate();
  c.model.validate();
  c.baseline.validate();

  c.effective = {{"data", c.data.string()},
                 {"out", c.out.string()},
                 {"checkpoint", c.checkpoint.string()},
                 {"seed", c.seed},
                 {"k", c.k},
                 {"synth", c.synth},
                 {"prep", c.prep},
                 {"model", c.model},
                 {"baseline", c.baseline},
                 {"analysis", c.analysis.baseline ? "baseline" : "model"},
                 {"shuffle", {{"trials", c.trials}}},
                 {"ablation", {{"facets", c.facets}}},
                 {"sweep", {{"thresholds", c.thresholds}}},
                 {"fairness", {{"attribute", c.attribute}}}};
  c.hash = config_hash(c.effective);
  return c;
}

json stamped(const RunConfig& c, json body) {
  body["config_hash"] = c.hash;
  body["seed"] = c.seed;
  return body;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
  if (!f) throw Error("cannot write " + p.string());
  spdlog::info("wrote {}", p.string());
}

void write_json(const RunConfig& c, const std::string& name, json body) {
  write_text(c.out / name, stamped(c, std::move(body)).dump(2) + "\n");
}

void write_csv(const RunConfig& c, const std::string& name, const std::vector<eval::CsvRow>& rows) {
  write_text(c.out / name, "# config_hash=" + c.hash + " seed=" + std::to_string(c.seed) + "\n" + eval::to_csv(rows));
}

dataio::Dataset load_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("config field 'data': a data directory is required");
  if (!fs::is_directory(c.data)) throw ConfigError("config field 'data': not a directory: " + c.data.string());
  return dataio::ingest(synth::files_in(c.data));
}

prep::PreparedData load_prepared(const RunConfig& c) { return prep::prepare(load_data(c), c.prep); }

json read_checkpoint(const RunConfig& c) {
  std::ifstream in(c.checkpoint);
  if (!in) throw Error("cannot read checkpoint " + c.checkpoint.string());
  return json::parse(in);
}

json ingest_summary(const dataio::Dataset& d) {
  const auto& r = d.report;
  return {{"users", d.users.size()},
          {"items", d.catalog.size()},
          {"sessions", d.session_count()},
          {"actions", d.action_count()},
          {"purchase_events", d.purchase_count()},
          {"rows", {{"events", r.event_rows}, {"purchases", r.purchase_rows}, {"profiles", r.profile_rows}}},
          {"rejected",
           {{"events", r.rejected_events}, {"purchases", r.rejected_purchases}, {"profiles", r.rejected_profiles}}},
          {"messages", r.messages}};
}

json history_json(const numcore::TrainHistory& h) {
  return {{"train_loss", h.train_loss},
          {"validation_loss", h.validation_loss},
          {"best_epoch", h.best_epoch},
          {"initial_train_loss", h.initial_train_loss}};
}

void cmd_synth(const RunConfig& c) {
  const auto data = synth::generate(c.synth);
  synth::write_files(data, c.out);
  std::size_t planted = 0;
  for (bool p : data.planted_purchase) planted += p;
  write_json(c, "synth_manifest.json",
             {{"config", c.synth}, {"purchase_events", data.planted.size()}, {"planted_purchases", planted}});
}

void cmd_ingest(const RunConfig& c) { write_json(c, "ingest_report.json", ingest_summary(load_data(c))); }

void cmd_segment(const RunConfig& c) {
  const auto data = load_data(c);
  const auto gaps = segmentation::pooled_log_gaps(data);
  if (gaps.size() < 2) throw DataError("too few inter-session gaps to fit a mixture");
  const auto fit = segmentation::fit_gmm_em(gaps);
  const auto thr = segmentation::intersection_threshold(fit.model);
  const auto& g = fit.model;
  spdlog::info("threshold {:.3f} days after {} EM iterations", thr.days, fit.iterations);
  write_json(c, "segmentation.json",
             {{"gaps", gaps.size()},
              {"mixture",
               {{"weights", {g.w1, g.w2}}, {"log_means", {g.mu1, g.mu2}}, {"log_sds", {g.sigma1, g.sigma2}}}},
              {"iterations", fit.iterations},
              {"converged", fit.converged},
              {"log_likelihood", fit.log_likelihood},
              {"threshold_log_seconds", thr.log_seconds},
              {"threshold_days", thr.days}});
}

void cmd_prep(const RunConfig& c) {
  const auto p = load_prepared(c);
  json j = prep::report_to_json(p.report);
  j["split"] = {{"train", p.split.train.size()}, {"validation", p.split.validation.size()}, {"test", p.split.test.size()}};
  j["config"] = p.config;
  write_json(c, "prep_report.json", j);
}

void save_checkpoint(const RunConfig& c, const Recommender& model) {
  if (c.checkpoint.has_parent_path()) fs::create_directories(c.checkpoint.parent_path());
  write_text(c.checkpoint, stamped(c, model.checkpoint()).dump() + "\n");
}

void cmd_train(const RunConfig& c) {
  const auto p = load_prepared(c);
  auto fit = recmodels::train_cross_sessions(p, c.model);
  save_checkpoint(c, *fit.model);
  json h = {{"model", fit.model->name()}, {"history", history_json(fit.history)}};
  if (fit.autoencoder_history) h["autoencoder_history"] = history_json(*fit.autoencoder_history);
  write_json(c, "train_history.json", h);
}

void cmd_train_baseline(const RunConfig& c) {
  const auto p = load_prepared(c);
  save_checkpoint(c, *baselines::train_baseline(p, c.baseline));
}

void cmd_eval(const RunConfig& c) {
  const auto p = load_prepared(c);
  const auto model = eval::load_model(read_checkpoint(c));
  const auto report = eval::evaluate(*model, p.data, p.tasks_of(p.split.test), c.k);
  spdlog::info("{}: HR@{} {:.4f} MRR@{} {:.4f}", report.model, c.k, report.mean().hr, c.k, report.mean().mrr);
  write_json(c, "eval.json", eval::report_to_json(report, true));
  write_csv(c, "eval.csv", eval::report_rows(report));
}

void cmd_per_step(const RunConfig& c) {
  const auto p = load_prepared(c);
  const auto model = eval::load_model(read_checkpoint(c));
  const auto curve = eval::per_step_curve(*model, p.data, p.tasks_of(p.split.test), c.k);
  json points = json::array();
  std::vector<eval::CsvRow> rows;
  for (const auto& s : curve) {
    points.push_back({{"step", s.step}, {"tasks", s.tasks}, {"metrics", eval::metrics_to_json(s.metrics)}});
    for (std::size_t i = 0; i < 5; ++i) {
      rows.push_back({eval::kMetricNames[i], c.k, model->name(), "step" + std::to_string(s.step),
                      eval::metric_value(s.metrics, i)});
    }
  }
  write_json(c, "per_step.json", {{"model", model->name()}, {"k", c.k}, {"steps", points}});
  write_csv(c, "per_step.csv", rows);
}

void cmd_shuffle(const RunConfig& c) {
  const auto p = load_prepared(c);
  const auto r = eval::shuffle_study(p, c.analysis, c.trials, c.seed, c.k);
  json trials = json::array();
  for (const auto& t : r.trials) trials.push_back(eval::metrics_to_json(t.mean()));
  const auto orig = r.original.mean();
  spdlog::info("shuffle study: HR@{} {:.4f} -> {:.4f}", c.k, orig.hr, r.shuffled_mean.hr);
  write_json(c, "shuffle.json",
             {{"model", c.analysis.label()},
              {"k", c.k},
              {"original", eval::metrics_to_json(orig)},
              {"shuffled_mean", eval::metrics_to_json(r.shuffled_mean)},
              {"delta_hr", r.shuffled_mean.hr - orig.hr},
              {"relative_change", eval::metrics_to_json(eval::relative_change(r.shuffled_mean, orig))},
              {"trials", trials}});
}

void cmd_ablate(const RunConfig& c) {
  const auto raw = load_data(c);
  const auto facets = c.facets.empty() ? eval::default_facets(raw) : c.facets;
  const auto r = eval::ablate_actions(raw, c.prep, c.analysis, facets, c.k);
  json entries = json::array();
  auto rows = eval::report_rows(r.all_actions, "all");
  for (const auto& e : r.entries) {
    entries.push_back({{"facet", e.facet},
                       {"metrics", eval::metrics_to_json(e.report.mean())},
                       {"relative_change", eval::metrics_to_json(e.relative_change)}});
    const auto more = eval::report_rows(e.report, "without " + e.facet);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  write_json(c, "ablation.json",
             {{"model", c.analysis.label()},
              {"k", c.k},
              {"all_actions", eval::metrics_to_json(r.all_actions.mean())},
              {"entries", entries}});
  write_csv(c, "ablation.csv", rows);
}

void cmd_sweep(const RunConfig& c) {
  const auto raw = load_data(c);
  const auto entries = eval::threshold_sweep(raw, c.prep, c.analysis, c.thresholds, c.k);
  json out = json::array();
  std::vector<eval::CsvRow> rows;
  for (const auto& e : entries) {
    out.push_back({{"threshold_days", e.threshold_days},
                   {"sessions_per_task", e.sessions_per_task},
                   {"tasks", e.report.tasks.size()},
                   {"metrics", eval::metrics_to_json(e.report.mean())}});
    char group[32];
    std::snprintf(group, sizeof group, "threshold=%g", e.threshold_days);
    const auto more = eval::report_rows(e.report, group);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  write_json(c, "sweep.json", {{"model", c.analysis.label()}, {"k", c.k}, {"entries", out}});
  write_csv(c, "sweep.csv", rows);
}

void cmd_fairness(const RunConfig& c) {
  const auto p = load_prepared(c);
  const auto model = eval::load_model(read_checkpoint(c));
  const auto report = eval::evaluate(*model, p.data, p.tasks_of(p.split.test), c.k);
  const auto groups = eval::group_breakdown(report, p.data, eval::parse_group_attribute(c.attribute));
  json out = json::array();
  std::vector<eval::CsvRow> rows;
  for (const auto& g : groups) {
    out.push_back({{"group", g.group},
                   {"tasks", g.tasks},
                   {"share", g.share},
                   {"metrics", eval::metrics_to_json(g.at[c.k - 1])}});
    for (std::size_t cut = 1; cut <= g.at.size(); ++cut)
      for (std::size_t i = 0; i < 5; ++i)
        rows.push_back({eval::kMetricNames[i], cut, report.model, c.attribute + "=" + g.group,
                        eval::metric_value(g.at[cut - 1], i)});
  }
  write_json(c, "fairness.json",
             {{"model", report.model},
              {"attribute", c.attribute},
              {"k", c.k},
              {"overall", eval::metrics_to_json(report.mean())},
              {"groups", out}});
  write_csv(c, "fairness.csv", rows);
}

}  // namespace

int run(int argc, char** argv) {
  auto logger = spdlog::get("crossrec");
  if (!logger) logger = spdlog::stderr_color_mt("crossrec");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  CLI::App app{"Cross-session purchase recommender"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out, data, checkpoint, encoder, head, baseline_model;
  bool hybrid = false, verbose = false;
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("-o,--out", out, "Output directory (overrides the config)");
  app.add_option("-d,--data", data, "Directory with the four data files (overrides the config)");
  app.add_option("--checkpoint", checkpoint, "Model checkpoint path (overrides the config)");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const RunConfig&);
  };
  const Sub subs[] = {
      {"synth", "Generate a synthetic dataset", cmd_synth},
      {"ingest", "Read and validate the data files", cmd_ingest},
      {"segment", "Fit the inter-session gap mixture and report the task threshold", cmd_segment},
      {"prep", "Clean, segment and split the data", cmd_prep},
      {"train", "Train a cross-session model", cmd_train},
      {"train-baseline", "Train a baseline model", cmd_train_baseline},
      {"eval", "Evaluate a checkpoint on the test split", cmd_eval},
      {"per-step", "Metrics by number of visible sessions", cmd_per_step},
      {"shuffle-study", "Retrain on shuffled session order", cmd_shuffle},
      {"ablate", "Remove action facets and retrain", cmd_ablate},
      {"sweep-threshold", "Retrain over several task thresholds", cmd_sweep},
      {"fairness", "Metrics by demographic group", cmd_fairness},
  };
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(s.name, s.help);
    if (std::string_view(s.name) == "train") {
      sc->add_option("--encoder", encoder, "encode|concat|auto");
      sc->add_option("--head", head, "bce|weibull|attention");
      sc->add_flag("--hybrid", hybrid, "Add the demographic branch");
    }
    if (std::string_view(s.name) == "train-baseline") {
      sc->add_option("--model", baseline_model, "popular|random|svd|demo|gru4rec|gru4rec-concat|sknn|sknn-b");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  const CLI::App* chosen = app.get_subcommands().front();
  try {
    json j = config_path.empty() ? json::object() : read_json_file(config_path);
    if (!out.empty()) j["out"] = out;
    if (!data.empty()) j["data"] = data;
    if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
    if (!encoder.empty()) j["model"]["encoder"] = encoder;
    if (!head.empty()) j["model"]["head"] = head;
    if (hybrid) j["model"]["hybrid"] = true;
    if (!baseline_model.empty()) j["baseline"]["model"] = baseline_model;
    const RunConfig cfg = load_config(std::move(j));
    spdlog::info("{}: config {} seed {}", chosen->get_name(), cfg.hash, cfg.seed);
    for (const auto& s : subs)
      if (chosen->get_name() == s.name) s.fn(cfg);
    return 0;
  } catch (const ConfigError& e) {
    spdlog::error("invalid config: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

}  // namespace crossrec::cli
