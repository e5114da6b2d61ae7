#include "cbm/report_json.hpp"

#include <charconv>
#include <fstream>
#include <set>

namespace cbm {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) fail(ErrorCode::ConfigError, where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      fail(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::ConfigError, std::string("bad value for '") + key + "'");
  }
}

json stats_json(const Stats& s) { return json{{"mean", s.mean}, {"std", s.stddev}}; }

json repeat_metrics_json(const RepeatMetrics& m) {
  json j;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
  return j;
}

json aggregate_json(const std::optional<AggregateMetric>& m) {
  if (!m) return json(nullptr);
  return json{{"mean", m->mean},
              {"std_across_users", m->std_across_users},
              {"std_across_runs", m->std_across_runs}};
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

json protocol_config_json(const ProtocolConfig& c) {
  json j;
  j["protocol"] = to_string(c.protocol);
  j["seed"] = c.seed;
  j["split"] = {{"population_fraction", c.split.population_fraction},
                {"target_train_fraction", c.split.target_train_fraction},
                {"repeats", c.split.repeats},
                {"stratified", c.split.stratified}};
  j["smote"] = {{"k_neighbors", c.smote.k_neighbors}, {"enabled", c.smote.enabled}};
  json clf;
  switch (c.classifier.kind) {
    case ClassifierConfig::Kind::forest:
      clf["type"] = "forest";
      clf["params"] = {{"n_trees", c.classifier.forest.n_trees},
                       {"max_depth", c.classifier.forest.max_depth},
                       {"min_samples_split", c.classifier.forest.min_samples_split},
                       {"features_per_split", c.classifier.forest.features_per_split},
                       {"bootstrap", c.classifier.forest.bootstrap}};
      break;
    case ClassifierConfig::Kind::grid:
      clf["type"] = "grid";
      clf["grid"] = {{"n_trees", c.classifier.grid.n_trees},
                     {"max_depth", c.classifier.grid.max_depth},
                     {"min_samples_split", c.classifier.grid.min_samples_split},
                     {"folds", c.classifier.grid.folds}};
      break;
    case ClassifierConfig::Kind::majority:
      clf["type"] = "majority";
      break;
  }
  j["classifier"] = std::move(clf);
  if (c.threshold_policy) {
    const ThresholdPolicy& p = *c.threshold_policy;
    json tp;
    switch (p.kind) {
      case ThresholdPolicy::Kind::fixed:
        tp["type"] = "fixed";
        tp["value"] = p.value;
        break;
      case ThresholdPolicy::Kind::per_user_max:
        tp["type"] = "per_user_max";
        tp["grid"] = p.grid.values;
        tp["mode"] = p.mode == ThresholdPolicy::SelectionMode::test ? "test" : "validation";
        break;
      case ThresholdPolicy::Kind::max_avg:
        tp["type"] = "max_avg";
        tp["value"] = p.value;
        break;
    }
    j["threshold_policy"] = std::move(tp);
  }
  j["profile"] = {{"scaling", to_string(c.profile_scaling)},
                  {"include_label_fractions", c.profile_include_label_fractions}};
  j["ulm_min_per_class"] = c.ulm_min_per_class;
  j["collect_predictions"] = c.collect_predictions;
  return j;
}

json injection_config_json(const InjectionConfig& injection) {
  return json{{"target_context", injection.target_context},
              {"counts", injection.counts},
              {"test_fraction", injection.test_fraction}};
}

json generator_config_json(const GeneratorConfig& c) {
  json tags = json::array();
  for (const auto& [tag, prop] : c.context_tags) tags.push_back(json::array({tag, prop}));
  return json{{"n_clusters", c.n_clusters},
              {"n_users", c.n_users},
              {"reports_per_user_mean", c.reports_per_user_mean},
              {"reports_per_user_spread", c.reports_per_user_spread},
              {"n_features", c.n_features},
              {"class_priors", c.class_priors},
              {"prior_tilt", c.prior_tilt},
              {"cluster_separation", c.cluster_separation},
              {"label_signal", c.label_signal},
              {"context_tags", std::move(tags)},
              {"context_shift", c.context_shift},
              {"noise_std", c.noise_std},
              {"seed", c.seed}};
}

std::string config_hash_hex(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

json experiment_report_json(const ExperimentReport& report) {
  json j;
  j["kind"] = "experiment_report";
  j["version"] = kVersion;
  j["protocol"] = to_string(report.config.protocol);
  j["seed"] = report.config.seed;
  j["config"] = protocol_config_json(report.config);
  j["config_hash"] = config_hash_hex(j["config"]);
  j["classes"] = report.classes;
  j["n_users"] = report.n_users;
  j["n_ok"] = report.n_ok;
  j["n_skipped"] = report.n_skipped;
  j["aggregate"] = {{"accuracy", aggregate_json(report.accuracy)},
                    {"macro_f1", aggregate_json(report.macro_f1)},
                    {"auc", aggregate_json(report.auc)}};

  if (!report.per_threshold.empty()) {
    json rows = json::array();
    for (const auto& row : report.per_threshold)
      rows.push_back({{"threshold", row.threshold},
                      {"modelable_users", row.modelable_users},
                      {"mean_accuracy", row.mean_accuracy},
                      {"mean_community_size", row.mean_community_size}});
    j["per_threshold"] = std::move(rows);
  }

  if (report.eligibility) {
    json presence = json::object();
    for (const auto& [classes_present, users] : report.eligibility->users_by_class_presence)
      presence[std::to_string(classes_present)] = users;
    json curve = json::object();
    for (const auto& [n, users] : report.eligibility->negative_count_curve)
      curve[std::to_string(n)] = users;
    j["eligibility"] = {{"users_by_class_presence", std::move(presence)},
                        {"negative_count_curve", std::move(curve)}};
  }

  json users = json::array();
  for (const auto& u : report.users) {
    json ju;
    ju["user_id"] = u.user_id;
    ju["status"] = u.status;
    if (u.chosen_threshold) ju["chosen_threshold"] = *u.chosen_threshold;
    if (u.community_size) ju["community_size"] = *u.community_size;
    if (u.ok()) {
      json reps = json::array();
      for (const auto& r : u.repeats) reps.push_back(repeat_metrics_json(r));
      ju["repeats"] = std::move(reps);
      ju["mean"] = repeat_metrics_json(u.mean);
      ju["std"] = repeat_metrics_json(u.stddev);
    }
    users.push_back(std::move(ju));
  }
  j["users"] = std::move(users);

  if (!report.predictions.empty()) {
    json preds = json::array();
    for (const auto& p : report.predictions)
      preds.push_back({{"report_id", p.report_id},
                       {"user_id", p.user_id},
                       {"context", p.context},
                       {"repeat", p.repeat},
                       {"truth", report.classes[static_cast<std::size_t>(p.truth)]},
                       {"pred", report.classes[static_cast<std::size_t>(p.pred)]}});
    j["predictions"] = std::move(preds);
  }
  return j;
}

json injection_report_json(const InjectionReport& report) {
  json j;
  j["kind"] = "injection_report";
  j["version"] = kVersion;
  j["seed"] = report.base.seed;
  json config = protocol_config_json(report.base);
  config.erase("protocol");
  config.erase("threshold_policy");
  config.erase("profile");
  config.erase("ulm_min_per_class");
  config["injection"] = injection_config_json(report.injection);
  j["config"] = std::move(config);
  j["config_hash"] = config_hash_hex(j["config"]);
  j["test_rows"] = report.test_rows;
  j["test_target_rows"] = report.test_target_rows;
  json rows = json::array();
  for (const auto& row : report.rows)
    rows.push_back({{"count", row.count},
                    {"overall_accuracy", stats_json(row.overall_accuracy)},
                    {"target_context_accuracy", stats_json(row.target_accuracy)},
                    {"train_rows", row.train_rows},
                    {"train_target_context_rows", row.train_target_context_rows}});
  j["rows"] = std::move(rows);
  return j;
}

json context_breakdown_json(const ContextBreakdown& breakdown) {
  json groups = json::array();
  for (const auto& g : breakdown.groups)
    groups.push_back({{"context", g.context}, {"support", g.support}, {"accuracy", g.accuracy}});
  return json{{"groups", std::move(groups)},
              {"overall", {{"support", breakdown.support}, {"accuracy", breakdown.overall}}}};
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::ConfigError, "'" + path + "' is not valid JSON");
  return j;
}

void write_report_users_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "user_id,status,mean_accuracy,std_accuracy,mean_macro_f1,std_macro_f1,"
         "mean_auc,std_auc,chosen_threshold,community_size\n";
  for (const auto& u : report.users) {
    out << u.user_id << ',' << u.status << ',';
    if (u.ok()) {
      out << format_double(u.mean.accuracy) << ',' << format_double(u.stddev.accuracy) << ','
          << format_double(u.mean.macro_f1) << ',' << format_double(u.stddev.macro_f1) << ',';
      if (u.mean.auc) out << format_double(*u.mean.auc);
      out << ',';
      if (u.stddev.auc) out << format_double(*u.stddev.auc);
    } else {
      out << ",,,,,";
    }
    out << ',';
    if (u.chosen_threshold) out << format_double(*u.chosen_threshold);
    out << ',';
    if (u.community_size) out << *u.community_size;
    out << '\n';
  }
}

void write_report_thresholds_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "threshold,modelable_users,mean_accuracy,mean_community_size\n";
  for (const auto& row : report.per_threshold)
    out << format_double(row.threshold) << ',' << row.modelable_users << ','
        << format_double(row.mean_accuracy) << ',' << format_double(row.mean_community_size)
        << '\n';
}

void write_injection_sweep_csv(const InjectionReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "count,overall_mean,overall_std,target_context_mean,target_context_std\n";
  for (const auto& row : report.rows)
    out << row.count << ',' << format_double(row.overall_accuracy.mean) << ','
        << format_double(row.overall_accuracy.stddev) << ','
        << format_double(row.target_accuracy.mean) << ','
        << format_double(row.target_accuracy.stddev) << '\n';
}

namespace {

SplitSpec parse_split(const json& j) {
  reject_unknown_keys(j, {"population_fraction", "target_train_fraction", "repeats", "stratified"},
                      "split");
  SplitSpec s;
  s.population_fraction = get_or(j, "population_fraction", s.population_fraction);
  s.target_train_fraction = get_or(j, "target_train_fraction", s.target_train_fraction);
  s.repeats = get_or(j, "repeats", s.repeats);
  s.stratified = get_or(j, "stratified", s.stratified);
  return s;
}

SmoteConfig parse_smote(const json& j) {
  reject_unknown_keys(j, {"k_neighbors", "enabled"}, "smote");
  SmoteConfig s;
  s.k_neighbors = get_or(j, "k_neighbors", s.k_neighbors);
  s.enabled = get_or(j, "enabled", s.enabled);
  return s;
}

ForestParams parse_forest_params(const json& j) {
  reject_unknown_keys(
      j, {"n_trees", "max_depth", "min_samples_split", "features_per_split", "bootstrap"},
      "classifier.params");
  ForestParams p;
  p.n_trees = get_or(j, "n_trees", p.n_trees);
  p.max_depth = get_or(j, "max_depth", p.max_depth);
  p.min_samples_split = get_or(j, "min_samples_split", p.min_samples_split);
  p.features_per_split = get_or(j, "features_per_split", p.features_per_split);
  p.bootstrap = get_or(j, "bootstrap", p.bootstrap);
  return p;
}

ClassifierConfig parse_classifier(const json& j) {
  reject_unknown_keys(j, {"type", "params", "grid"}, "classifier");
  ClassifierConfig c;
  const std::string type = get_or<std::string>(j, "type", "forest");
  if (type == "forest") {
    c.kind = ClassifierConfig::Kind::forest;
    if (j.contains("params")) c.forest = parse_forest_params(j.at("params"));
  } else if (type == "grid") {
    c.kind = ClassifierConfig::Kind::grid;
    if (j.contains("params")) c.forest = parse_forest_params(j.at("params"));
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      reject_unknown_keys(g, {"n_trees", "max_depth", "min_samples_split", "folds"},
                          "classifier.grid");
      c.grid.n_trees = get_or(g, "n_trees", c.grid.n_trees);
      c.grid.max_depth = get_or(g, "max_depth", c.grid.max_depth);
      c.grid.min_samples_split = get_or(g, "min_samples_split", c.grid.min_samples_split);
      c.grid.folds = get_or(g, "folds", c.grid.folds);
    }
  } else if (type == "majority") {
    c.kind = ClassifierConfig::Kind::majority;
  } else {
    fail(ErrorCode::ConfigError, "unknown classifier type '" + type + "'");
  }
  return c;
}

ThresholdPolicy parse_threshold_policy(const json& j) {
  reject_unknown_keys(j, {"type", "value", "grid", "mode"}, "threshold_policy");
  const std::string type = get_or<std::string>(j, "type", "");
  if (type == "fixed") return ThresholdPolicy::fixed(get_or(j, "value", 0.85));
  if (type == "max_avg") return ThresholdPolicy::max_avg(get_or(j, "value", 0.85));
  if (type == "per_user_max") {
    ThresholdGrid grid = j.contains("grid")
                             ? ThresholdGrid::from_values(j.at("grid").get<std::vector<double>>())
                             : ThresholdGrid::default_grid();
    const std::string mode = get_or<std::string>(j, "mode", "test");
    if (mode != "test" && mode != "validation")
      fail(ErrorCode::ConfigError, "threshold_policy.mode must be 'test' or 'validation'");
    return ThresholdPolicy::per_user_max(std::move(grid),
                                         mode == "test" ? ThresholdPolicy::SelectionMode::test
                                                        : ThresholdPolicy::SelectionMode::validation);
  }
  fail(ErrorCode::ConfigError, "threshold_policy.type must be fixed | per_user_max | max_avg");
}

InjectionConfig parse_injection(const json& j) {
  reject_unknown_keys(j, {"target_context", "counts", "test_fraction"}, "injection");
  InjectionConfig c;
  c.target_context = get_or<std::string>(j, "target_context", c.target_context);
  c.counts = get_or(j, "counts", c.counts);
  c.test_fraction = get_or(j, "test_fraction", c.test_fraction);
  return c;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  reject_unknown_keys(j,
                      {"protocol", "injection", "seed", "split", "smote", "classifier",
                       "threshold_policy", "profile", "ulm_min_per_class",
                       "collect_predictions", "context_breakdown"},
                      "run config");
  if (j.contains("protocol") == j.contains("injection"))
    fail(ErrorCode::ConfigError, "run config needs exactly one of 'protocol' or 'injection'");

  RunConfig rc;
  ProtocolConfig& c = rc.protocol_config;
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("split")) c.split = parse_split(j.at("split"));
  if (j.contains("smote")) c.smote = parse_smote(j.at("smote"));
  if (j.contains("classifier")) c.classifier = parse_classifier(j.at("classifier"));
  if (j.contains("profile")) {
    const json& p = j.at("profile");
    reject_unknown_keys(p, {"scaling", "include_label_fractions"}, "profile");
    c.profile_scaling = scaling_mode_from(get_or<std::string>(p, "scaling", "minmax"));
    c.profile_include_label_fractions = get_or(p, "include_label_fractions", false);
  }
  c.ulm_min_per_class = get_or(j, "ulm_min_per_class", c.ulm_min_per_class);
  c.collect_predictions = get_or(j, "collect_predictions", c.collect_predictions);
  rc.with_context_breakdown = get_or(j, "context_breakdown", false);
  if (rc.with_context_breakdown) c.collect_predictions = true;

  if (j.contains("injection")) {
    rc.injection = parse_injection(j.at("injection"));
    if (j.contains("threshold_policy"))
      fail(ErrorCode::ConfigError, "threshold_policy is not valid for injection runs");
  } else {
    c.protocol = protocol_from(j.at("protocol").get<std::string>());
    if (j.contains("threshold_policy"))
      c.threshold_policy = parse_threshold_policy(j.at("threshold_policy"));
    c.split.seed = c.seed;
    c.validate();
  }
  return rc;
}

GeneratorConfig parse_generator_config(const json& j) {
  reject_unknown_keys(j,
                      {"n_clusters", "n_users", "reports_per_user_mean",
                       "reports_per_user_spread", "n_features", "class_priors", "prior_tilt",
                       "cluster_separation", "label_signal", "context_tags", "context_shift",
                       "noise_std", "seed"},
                      "generator config");
  GeneratorConfig c;
  c.n_clusters = get_or(j, "n_clusters", c.n_clusters);
  c.n_users = get_or(j, "n_users", c.n_users);
  c.reports_per_user_mean = get_or(j, "reports_per_user_mean", c.reports_per_user_mean);
  c.reports_per_user_spread = get_or(j, "reports_per_user_spread", c.reports_per_user_spread);
  c.n_features = get_or(j, "n_features", c.n_features);
  c.class_priors = get_or(j, "class_priors", c.class_priors);
  c.prior_tilt = get_or(j, "prior_tilt", c.prior_tilt);
  c.cluster_separation = get_or(j, "cluster_separation", c.cluster_separation);
  c.label_signal = get_or(j, "label_signal", c.label_signal);
  if (j.contains("context_tags")) {
    c.context_tags.clear();
    for (const auto& entry : j.at("context_tags")) {
      if (!entry.is_array() || entry.size() != 2)
        fail(ErrorCode::ConfigError, "context_tags entries must be [tag, proportion] pairs");
      c.context_tags.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<double>());
    }
  }
  c.context_shift = get_or(j, "context_shift", c.context_shift);
  c.noise_std = get_or(j, "noise_std", c.noise_std);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.validate();
  return c;
}

}  // namespace cbm
