#include "cbm/synthcohort.hpp"

#include <cmath>
#include <fstream>

#include "cbm/rng.hpp"
#include "json.hpp"

namespace cbm {

void GeneratorConfig::validate() const {
  if (n_clusters < 1 || n_users < 1 || n_features < 1)
    fail(ErrorCode::ConfigError, "generator counts must be positive");
  if (reports_per_user_mean < 2)
    fail(ErrorCode::ConfigError, "reports_per_user_mean must be >= 2");
  if (class_priors.size() != 3)
    fail(ErrorCode::ConfigError, "class_priors must list exactly 3 values");
  double p = 0;
  for (double v : class_priors) {
    if (v < 0) fail(ErrorCode::ConfigError, "class priors must be non-negative");
    p += v;
  }
  if (std::abs(p - 1.0) > 1e-9) fail(ErrorCode::ConfigError, "class priors must sum to 1");
  if (context_tags.empty()) fail(ErrorCode::ConfigError, "at least one context tag required");
  double q = 0;
  for (const auto& [tag, prop] : context_tags) {
    if (tag.empty()) fail(ErrorCode::ConfigError, "empty context tag");
    if (prop < 0) fail(ErrorCode::ConfigError, "context proportions must be non-negative");
    q += prop;
  }
  if (std::abs(q - 1.0) > 1e-9) fail(ErrorCode::ConfigError, "context proportions must sum to 1");
  if (label_signal < 0 || label_signal > 1)
    fail(ErrorCode::ConfigError, "label_signal must be in [0,1]");
  if (cluster_separation < 0 || noise_std <= 0)
    fail(ErrorCode::ConfigError, "cluster_separation must be >= 0 and noise_std > 0");
}

namespace {

std::string padded_id(const char* prefix, int value, int width) {
  std::string digits = std::to_string(value);
  std::string out(prefix);
  for (int i = static_cast<int>(digits.size()); i < width; ++i) out.push_back('0');
  return out + digits;
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.real();
  double cum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

SynthCohort generate_cohort(const GeneratorConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, {seed_purpose::generator}));

  const int nc = 3;  // three-class mapping
  const int nk = config.n_clusters;
  const int nf = config.n_features;

  // Cluster centroids sit on a sphere whose radius gives each feature a
  // separation/2 per-dimension cluster signal: single reports reveal their
  // cluster only weakly, while 40-report mean profiles separate cleanly.
  const double radius =
      config.cluster_separation * config.noise_std * std::sqrt(static_cast<double>(nf)) / 2.0;
  std::vector<Vector> centroid(static_cast<std::size_t>(nk));
  for (int k = 0; k < nk; ++k) {
    Vector g(nf);
    for (int f = 0; f < nf; ++f) g[f] = rng.normal();
    const double norm = g.norm();
    centroid[static_cast<std::size_t>(k)] =
        norm > 0 ? Vector(radius * g / norm) : Vector(Vector::Zero(nf));
  }

  // Class-conditional offsets draw from one shared direction basis that each
  // cluster permutes: the same feature-space region carries different labels
  // in different clusters, which is exactly the heterogeneity community
  // filtering is meant to resolve.
  std::vector<Vector> basis(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    Vector b(nf);
    for (int f = 0; f < nf; ++f) b[f] = config.label_signal * config.noise_std * rng.normal();
    basis[static_cast<std::size_t>(c)] = std::move(b);
  }
  static const int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                   {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<std::vector<Vector>> offset(static_cast<std::size_t>(nk));
  for (int k = 0; k < nk; ++k) {
    offset[static_cast<std::size_t>(k)].resize(nc);
    for (int c = 0; c < nc; ++c)
      offset[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] =
          basis[static_cast<std::size_t>(kPerms[k % 6][c])];
  }

  // Tilted per-cluster class priors.
  std::vector<std::vector<double>> priors(static_cast<std::size_t>(nk));
  for (int k = 0; k < nk; ++k) {
    std::vector<double> p = config.class_priors;
    p[static_cast<std::size_t>(k % nc)] *= 1.0 + config.prior_tilt;
    double sum = 0;
    for (double v : p) sum += v;
    for (double& v : p) v /= sum;
    priors[static_cast<std::size_t>(k)] = std::move(p);
  }

  const std::string& shifted_context = config.context_tags.front().first;
  std::vector<double> context_probs;
  for (const auto& [tag, prop] : config.context_tags) context_probs.push_back(prop);

  const int user_width = static_cast<int>(std::to_string(config.n_users).size());

  GroundTruth truth;
  truth.cluster_priors = priors;
  truth.shifted_context = shifted_context;

  std::vector<Report> reports;
  std::vector<std::vector<double>> feature_rows;
  for (int u = 0; u < config.n_users; ++u) {
    const int k = u % nk;
    truth.user_cluster.push_back(k);
    const double raw_count =
        config.reports_per_user_mean + config.reports_per_user_spread * rng.normal();
    const int count = std::max(3, static_cast<int>(std::llround(raw_count)));
    const std::string user_id = padded_id("u", u + 1, user_width);

    for (int r = 0; r < count; ++r) {
      const int cls = sample_categorical(priors[static_cast<std::size_t>(k)], rng);
      int raw_label = 0;
      if (cls == 0) raw_label = 1 + static_cast<int>(rng.below(2));       // negative: 1 or 2
      else if (cls == 1) raw_label = 3;                                    // neutral
      else raw_label = 4 + static_cast<int>(rng.below(2));                 // positive: 4 or 5
      const int ctx = sample_categorical(context_probs, rng);
      const std::string& context = config.context_tags[static_cast<std::size_t>(ctx)].first;

      std::vector<double> row(static_cast<std::size_t>(nf));
      const bool shifted = context == shifted_context;
      for (int f = 0; f < nf; ++f) {
        double v = centroid[static_cast<std::size_t>(k)][f] +
                   offset[static_cast<std::size_t>(k)][static_cast<std::size_t>(cls)][f] +
                   config.noise_std * rng.normal();
        if (shifted) v += config.context_shift * config.noise_std;
        row[static_cast<std::size_t>(f)] = v;
      }

      Report rep;
      rep.report_id = padded_id("r", static_cast<int>(reports.size()), 6);
      rep.user_id = user_id;
      rep.raw_label = raw_label;
      rep.context = context;
      reports.push_back(std::move(rep));
      feature_rows.push_back(std::move(row));
      truth.report_cluster.push_back(k);
      std::vector<double> logits(static_cast<std::size_t>(nc));
      for (int c = 0; c < nc; ++c)
        logits[static_cast<std::size_t>(c)] =
            std::log(priors[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]);
      truth.report_class_logits.push_back(std::move(logits));
    }
  }

  std::vector<std::string> names;
  for (int f = 0; f < nf; ++f) names.push_back(padded_id("f", f + 1, 2));
  Matrix features(static_cast<long>(feature_rows.size()), nf);
  for (long i = 0; i < features.rows(); ++i)
    for (int f = 0; f < nf; ++f)
      features(i, f) = feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];

  return SynthCohort{Cohort(FeatureSchema::from_names(std::move(names)),
                            ClassMapping::three_class(), std::move(reports), std::move(features)),
                     std::move(truth)};
}

void emit_csv(const Cohort& cohort, const std::string& path) { save_csv(cohort, path); }

void save_ground_truth_json(const SynthCohort& synth, const GeneratorConfig& config,
                            const std::string& path) {
  nlohmann::json j;
  j["kind"] = "synth_ground_truth";
  j["shifted_context"] = synth.truth.shifted_context;
  j["cluster_priors"] = synth.truth.cluster_priors;
  nlohmann::json users = nlohmann::json::object();
  for (int u = 0; u < synth.cohort.n_users(); ++u)
    users[synth.cohort.users()[static_cast<std::size_t>(u)]] =
        synth.truth.user_cluster[static_cast<std::size_t>(u)];
  j["user_clusters"] = std::move(users);
  nlohmann::json per_report = nlohmann::json::array();
  for (int i = 0; i < synth.cohort.n_reports(); ++i)
    per_report.push_back(
        {{"report_id", synth.cohort.reports()[static_cast<std::size_t>(i)].report_id},
         {"cluster", synth.truth.report_cluster[static_cast<std::size_t>(i)]},
         {"class_logits", synth.truth.report_class_logits[static_cast<std::size_t>(i)]}});
  j["per_report"] = std::move(per_report);
  j["config"] = {{"n_clusters", config.n_clusters},
                 {"n_users", config.n_users},
                 {"n_features", config.n_features},
                 {"seed", config.seed}};
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace cbm
