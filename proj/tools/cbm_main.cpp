// Command-line surface for the community-based personalization pipeline:
// synth | stats | similarity | communities | run | compare.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cbm/community.hpp"
#include "cbm/profile.hpp"
#include "cbm/protocols.hpp"
#include "cbm/report_json.hpp"
#include "cbm/synthcohort.hpp"

namespace {

using nlohmann::json;

std::string strip_suffix(const std::string& path, const std::string& suffix) {
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return path.substr(0, path.size() - suffix.size());
  return path;
}

std::vector<double> parse_grid_values(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      cbm::fail(cbm::ErrorCode::ConfigError, "bad grid value '" + item + "'");
    }
  }
  return values;
}

cbm::ThresholdPolicy parse_policy_flag(const std::string& text, const std::string& grid_csv) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  cbm::ThresholdGrid grid = grid_csv.empty()
                                ? cbm::ThresholdGrid::default_grid()
                                : cbm::ThresholdGrid::from_values(parse_grid_values(grid_csv));
  if (kind == "fixed") return cbm::ThresholdPolicy::fixed(arg.empty() ? 0.85 : std::stod(arg));
  if (kind == "max_avg") return cbm::ThresholdPolicy::max_avg(arg.empty() ? 0.85 : std::stod(arg));
  if (kind == "per_user_max") {
    auto mode = cbm::ThresholdPolicy::SelectionMode::test;
    if (arg == "validation") mode = cbm::ThresholdPolicy::SelectionMode::validation;
    else if (!arg.empty() && arg != "test")
      cbm::fail(cbm::ErrorCode::ConfigError, "per_user_max mode must be test or validation");
    return cbm::ThresholdPolicy::per_user_max(std::move(grid), mode);
  }
  cbm::fail(cbm::ErrorCode::ConfigError,
            "--threshold-policy must be fixed:V | per_user_max[:mode] | max_avg:V");
}

struct CommonFlags {
  std::string mapping = "three-class";
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out;
};

cbm::Cohort load_cohort(const std::string& path, const std::string& mapping) {
  cbm::IngestOptions options;
  options.mapping = cbm::ClassMapping::by_name(mapping);
  return cbm::load_csv(path, options);
}

int cmd_synth(const std::string& config_path, const CommonFlags& flags, bool seed_given) {
  cbm::GeneratorConfig config;
  if (!config_path.empty()) config = cbm::parse_generator_config(cbm::read_json_file(config_path));
  if (seed_given) config.seed = flags.seed;
  const cbm::SynthCohort synth = cbm::generate_cohort(config);
  cbm::emit_csv(synth.cohort, flags.out);
  const std::string stem = strip_suffix(flags.out, ".csv");
  cbm::save_schema_json(synth.cohort, stem + ".schema.json");
  cbm::save_ground_truth_json(synth, config, stem + ".truth.json");

  json summary;
  summary["cohort"] = flags.out;
  summary["config"] = cbm::generator_config_json(config);
  summary["config_hash"] = cbm::config_hash_hex(summary["config"]);
  summary["n_reports"] = synth.cohort.n_reports();
  summary["n_users"] = synth.cohort.n_users();
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_stats(const std::string& cohort_path, const CommonFlags& flags, bool by_context) {
  const cbm::Cohort cohort = load_cohort(cohort_path, flags.mapping);
  json j;
  j["kind"] = "cohort_stats";
  j["n_reports"] = cohort.n_reports();
  j["n_users"] = cohort.n_users();
  j["classes"] = cohort.mapping().class_order;

  const cbm::ClassDistribution dist = cbm::class_distribution(cohort);
  json overall;
  for (int c = 0; c < cohort.mapping().n_classes(); ++c) {
    const auto& cls = cohort.mapping().class_order[static_cast<std::size_t>(c)];
    overall[cls] = {{"count", dist.counts[static_cast<std::size_t>(c)]},
                    {"fraction", dist.fractions[static_cast<std::size_t>(c)]}};
  }
  j["class_distribution"] = std::move(overall);

  if (by_context && cohort.has_context()) {
    json groups = json::object();
    for (const auto& [ctx, d] : cbm::class_distribution_by_context(cohort)) {
      json g;
      for (int c = 0; c < cohort.mapping().n_classes(); ++c) {
        const auto& cls = cohort.mapping().class_order[static_cast<std::size_t>(c)];
        g[cls] = {{"count", d.counts[static_cast<std::size_t>(c)]},
                  {"fraction", d.fractions[static_cast<std::size_t>(c)]}};
      }
      groups[ctx.empty() ? "(untagged)" : ctx] = std::move(g);
    }
    j["class_distribution_by_context"] = std::move(groups);
  }

  if (cohort.mapping().n_classes() == 3) {
    const cbm::EligibilityReport rep = cbm::eligibility_stats(cohort);
    json presence = json::object();
    for (const auto& [classes_present, users] : rep.users_by_class_presence)
      presence[std::to_string(classes_present)] = users;
    json curve = json::object();
    for (const auto& [n, users] : rep.negative_count_curve) curve[std::to_string(n)] = users;
    json per_user = json::object();
    for (const auto& [user, counts] : rep.per_user_class_counts) per_user[user] = counts;
    j["eligibility"] = {{"users_by_class_presence", std::move(presence)},
                        {"negative_count_curve", std::move(curve)},
                        {"per_user_class_counts", std::move(per_user)}};
  }

  if (flags.out.empty()) std::cout << j.dump(2) << '\n';
  else cbm::write_json_file(j, flags.out);
  return 0;
}

int cmd_similarity(const std::string& cohort_path, const CommonFlags& flags,
                   const std::string& scaling, bool include_labels) {
  const cbm::Cohort cohort = load_cohort(cohort_path, flags.mapping);
  const cbm::ScalingParams scaler = cbm::fit_scaler(cohort, cbm::scaling_mode_from(scaling));
  const cbm::UserProfileMatrix profiles =
      cbm::aggregate_users(cohort, scaler, cbm::AggregateOptions{include_labels});
  const cbm::SimilarityMatrix sim = cbm::cosine_similarity(profiles);
  const std::string stem = strip_suffix(flags.out, ".csv");
  cbm::save_profiles_csv(profiles, stem + "_profiles.csv");
  cbm::save_similarity_csv(sim, stem + "_similarity.csv");
  json summary;
  summary["profiles"] = stem + "_profiles.csv";
  summary["similarity"] = stem + "_similarity.csv";
  summary["n_users"] = sim.user_ids.size();
  summary["scaling"] = scaling;
  summary["include_label_fractions"] = include_labels;
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_communities(const std::string& cohort_path, const CommonFlags& flags,
                    const std::string& scaling, bool include_labelsterms,
                    const std::string& grid_csv) {
  const cbm::Cohort cohort = load_cohort(cohort_path, flags.mapping);
  const cbm::ScalingParams scaler = cbm::fit_scaler(cohort, cbm::scaling_mode_from(scaling));
  const cbm::UserProfileMatrix profiles =
      cbm::aggregate_users(cohort, scaler, cbm::AggregateOptions{include_labelsterms});
  const cbm::SimilarityMatrix sim = cbm::cosine_similarity(profiles);
  const cbm::ThresholdGrid grid =
      grid_csv.empty() ? cbm::ThresholdGrid::default_grid()
                       : cbm::ThresholdGrid::from_values(parse_grid_values(grid_csv));
  const cbm::CommunitySweep sweep = cbm::sweep_communities(sim, grid);
  const std::string stem = strip_suffix(flags.out, ".csv");
  cbm::save_sweep_csv(sweep, stem + "_sizes.csv");
  cbm::save_sweep_summary_json(sweep, stem + "_summary.json");
  json summary;
  summary["sizes"] = stem + "_sizes.csv";
  summary["summary"] = stem + "_summary.json";
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_run(const std::string& cohort_path, const std::string& config_path,
            const CommonFlags& flags, bool seed_given, const std::string& protocol_flag,
            const std::string& policy_flag, const std::string& grid_csv) {
  json file_config = json::object();
  if (!config_path.empty()) file_config = cbm::read_json_file(config_path);
  // flags > env > file: explicit flags (CLI11 also maps env vars onto them)
  // overwrite whatever the file specified
  if (!protocol_flag.empty()) {
    file_config.erase("injection");
    file_config["protocol"] = protocol_flag;
  }
  if (!file_config.contains("protocol") && !file_config.contains("injection"))
    cbm::fail(cbm::ErrorCode::ConfigError,
              "specify --protocol or a config file with 'protocol'/'injection'");
  cbm::RunConfig rc = cbm::parse_run_config(file_config);
  if (seed_given) {
    rc.protocol_config.seed = flags.seed;
    rc.protocol_config.split.seed = flags.seed;
  }
  rc.protocol_config.threads = flags.threads;
  if (!policy_flag.empty())
    rc.protocol_config.threshold_policy = parse_policy_flag(policy_flag, grid_csv);
  else if (!grid_csv.empty() && rc.protocol_config.threshold_policy &&
           rc.protocol_config.threshold_policy->kind == cbm::ThresholdPolicy::Kind::per_user_max)
    rc.protocol_config.threshold_policy->grid =
        cbm::ThresholdGrid::from_values(parse_grid_values(grid_csv));
  if (!rc.is_injection()) rc.protocol_config.validate();

  const cbm::Cohort cohort = load_cohort(cohort_path, flags.mapping);
  const std::string stem = strip_suffix(flags.out, ".json");

  if (rc.is_injection()) {
    const cbm::InjectionReport report = cbm::injection_sweep(cohort, *rc.injection,
                                                             rc.protocol_config);
    const json j = cbm::injection_report_json(report);
    cbm::write_json_file(j, flags.out);
    cbm::write_injection_sweep_csv(report, stem + "_sweep.csv");
    std::cout << "wrote " << flags.out << " (" << report.rows.size() << " counts, "
              << report.base.split.repeats << " repeats)\n";
    return 0;
  }

  const cbm::ExperimentReport report = cbm::run_protocol(cohort, rc.protocol_config);
  json j = cbm::experiment_report_json(report);
  if (rc.with_context_breakdown)
    j["context_breakdown"] = cbm::context_breakdown_json(cbm::context_breakdown(report.predictions));
  cbm::write_json_file(j, flags.out);
  cbm::write_report_users_csv(report, stem + "_users.csv");
  if (!report.per_threshold.empty())
    cbm::write_report_thresholds_csv(report, stem + "_thresholds.csv");

  std::ostringstream line;
  line << cbm::to_string(report.config.protocol) << ": ";
  if (report.accuracy)
    line << "accuracy " << report.accuracy->mean << " (+-" << report.accuracy->std_across_users
         << " across users)";
  else
    line << "no modelable users";
  line << ", ok " << report.n_ok << "/" << report.n_users;
  std::cout << line.str() << '\n' << "wrote " << flags.out << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths, const CommonFlags& flags) {
  struct Row {
    std::string label;
    json acc, f1, auc;
  };
  std::vector<Row> rows;
  for (const auto& path : report_paths) {
    const json j = cbm::read_json_file(path);
    if (j.value("kind", "") != "experiment_report")
      cbm::fail(cbm::ErrorCode::ConfigError, "'" + path + "' is not an experiment report");
    Row row;
    row.label = j.value("protocol", "?");
    if (j.contains("config") && j["config"].contains("threshold_policy"))
      row.label += "/" + j["config"]["threshold_policy"].value("type", "?");
    row.acc = j["aggregate"]["accuracy"];
    row.f1 = j["aggregate"]["macro_f1"];
    row.auc = j["aggregate"]["auc"];
    rows.push_back(std::move(row));
  }

  auto cell = [](const json& m) {
    if (m.is_null()) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", m.value("mean", 0.0),
                  m.value("std_across_users", 0.0));
    return std::string(buf);
  };

  std::printf("%-22s %-16s %-16s %-16s\n", "run", "accuracy", "macro_f1", "auc");
  for (const auto& row : rows)
    std::printf("%-22s %-16s %-16s %-16s\n", row.label.c_str(), cell(row.acc).c_str(),
                cell(row.f1).c_str(), cell(row.auc).c_str());

  if (!flags.out.empty()) {
    std::ofstream out(flags.out);
    if (!out) cbm::fail(cbm::ErrorCode::IoError, "cannot write '" + flags.out + "'");
    out << "run,accuracy_mean,accuracy_std_users,macro_f1_mean,macro_f1_std_users,"
           "auc_mean,auc_std_users\n";
    for (const auto& row : rows) {
      auto num = [](const json& m, const char* key) {
        return m.is_null() ? std::string() : std::to_string(m.value(key, 0.0));
      };
      out << row.label << ',' << num(row.acc, "mean") << ',' << num(row.acc, "std_across_users")
          << ',' << num(row.f1, "mean") << ',' << num(row.f1, "std_across_users") << ','
          << num(row.auc, "mean") << ',' << num(row.auc, "std_across_users") << '\n';
    }
  }
  return 0;
}

int error_exit_code(cbm::ErrorCode code) {
  switch (code) {
    case cbm::ErrorCode::ConfigError: return 2;
    case cbm::ErrorCode::IoError: return 3;
    default: return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"community-based model personalization pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool by_context = false;
  bool include_labels = false;
  std::string config_path, scaling = "minmax", grid_csv, protocol_flag, policy_flag;
  std::string cohort_path;
  std::vector<std::string> report_paths;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    auto* seed = cmd->add_option("--seed", flags.seed, "master seed")->envname("CBM_SEED");
    cmd->add_option("--threads", flags.threads, "worker threads (0 = hardware)")
        ->envname("CBM_THREADS");
    auto* out = cmd->add_option("--out", flags.out, "output path")->envname("CBM_OUT");
    if (needs_out) out->required();
    return seed;
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort CSV + sidecars");
  auto* synth_seed = add_common(synth, true);
  synth->add_option("--config", config_path, "generator config JSON");

  auto* stats = app.add_subcommand("stats", "class distribution and eligibility statistics");
  stats->add_option("cohort", cohort_path, "cohort CSV")->required();
  stats->add_option("--mapping", flags.mapping, "class mapping name");
  stats->add_flag("--by-context", by_context, "group the distribution by context tag");
  add_common(stats, false);

  auto* similarity = app.add_subcommand("similarity", "dump profile and similarity matrices");
  similarity->add_option("cohort", cohort_path, "cohort CSV")->required();
  similarity->add_option("--mapping", flags.mapping, "class mapping name");
  similarity->add_option("--scaling", scaling, "minmax | zscore | none");
  similarity->add_flag("--include-labels", include_labels,
                       "append per-class label fractions to profiles");
  add_common(similarity, true);

  auto* communities = app.add_subcommand("communities", "threshold sweep of community sizes");
  communities->add_option("cohort", cohort_path, "cohort CSV")->required();
  communities->add_option("--mapping", flags.mapping, "class mapping name");
  communities->add_option("--scaling", scaling, "minmax | zscore | none");
  communities->add_flag("--include-labels", include_labels,
                        "append per-class label fractions to profiles");
  communities->add_option("--grid", grid_csv, "comma-separated thresholds")->envname("CBM_GRID");
  add_common(communities, true);

  auto* run = app.add_subcommand("run", "run a protocol or injection sweep");
  run->add_option("cohort", cohort_path, "cohort CSV")->required();
  run->add_option("--mapping", flags.mapping, "class mapping name");
  run->add_option("--config", config_path, "run config JSON");
  run->add_option("--protocol", protocol_flag, "PLM | HM | ULM | CBM")->envname("CBM_PROTOCOL");
  run->add_option("--threshold-policy", policy_flag,
                  "fixed:V | per_user_max[:test|validation] | max_avg:V")
      ->envname("CBM_THRESHOLD_POLICY");
  run->add_option("--grid", grid_csv, "comma-separated thresholds for per_user_max")
      ->envname("CBM_GRID");
  auto* run_seed = add_common(run, true);

  auto* compare = app.add_subcommand("compare", "side-by-side table of report aggregates");
  compare->add_option("reports", report_paths, "experiment report JSON files")->required();
  add_common(compare, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(config_path, flags, synth_seed->count() > 0);
    if (stats->parsed()) return cmd_stats(cohort_path, flags, by_context);
    if (similarity->parsed()) return cmd_similarity(cohort_path, flags, scaling, include_labels);
    if (communities->parsed())
      return cmd_communities(cohort_path, flags, scaling, include_labels, grid_csv);
    if (run->parsed())
      return cmd_run(cohort_path, config_path, flags, run_seed->count() > 0, protocol_flag,
                     policy_flag, grid_csv);
    if (compare->parsed()) return cmd_compare(report_paths, flags);
  } catch (const cbm::Error& e) {
    nlohmann::json err{{"error", {{"code", cbm::to_string(e.code())}, {"message", e.what()}}}};
    std::cerr << err.dump() << '\n';
    return error_exit_code(e.code());
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", {{"code", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
  return 0;
}
