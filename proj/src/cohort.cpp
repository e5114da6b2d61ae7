#include "cbm/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cbm {

FeatureSchema FeatureSchema::from_names(std::vector<std::string> names) {
  if (names.empty()) fail(ErrorCode::Precondition, "feature schema needs at least one feature");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second)
      fail(ErrorCode::Precondition, "duplicate feature name '" + n + "'");
  }
  return FeatureSchema{std::move(names)};
}

int ClassMapping::class_index(const std::string& cls) const {
  for (int i = 0; i < n_classes(); ++i)
    if (class_order[static_cast<std::size_t>(i)] == cls) return i;
  fail(ErrorCode::Precondition, "unknown class '" + cls + "' in mapping " + name);
}

ClassMapping ClassMapping::three_class() {
  ClassMapping m;
  m.name = "three-class";
  m.class_order = {"negative", "neutral", "positive"};
  m.raw_to_class = {0, 0, 1, 2, 2};
  return m;
}

ClassMapping ClassMapping::five_class() {
  ClassMapping m;
  m.name = "five-class";
  m.class_order = {"very_negative", "negative", "neutral", "positive", "very_positive"};
  m.raw_to_class = {0, 1, 2, 3, 4};
  return m;
}

ClassMapping ClassMapping::by_name(const std::string& name) {
  if (name == "three-class") return three_class();
  if (name == "five-class") return five_class();
  fail(ErrorCode::ConfigError, "unknown class mapping '" + name + "'");
}

Cohort::Cohort(FeatureSchema schema, ClassMapping mapping, std::vector<Report> reports,
               Matrix features)
    : schema_(std::move(schema)),
      mapping_(std::move(mapping)),
      reports_(std::move(reports)),
      features_(std::move(features)) {
  if (features_.rows() != static_cast<long>(reports_.size()) ||
      features_.cols() != schema_.feature_count())
    fail(ErrorCode::Precondition, "feature matrix shape does not match reports/schema");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < reports_.size(); ++i) {
    Report& r = reports_[i];
    r.class_label = mapping_.map_raw(r.raw_label);
    if (!ids.insert(r.report_id).second)
      fail(ErrorCode::DuplicateReportId, "duplicate report id '" + r.report_id + "'");
    auto it = user_index_.find(r.user_id);
    if (it == user_index_.end()) {
      user_ordinal_[r.user_id] = static_cast<int>(users_.size());
      users_.push_back(r.user_id);
      it = user_index_.emplace(r.user_id, std::vector<int>{}).first;
    }
    it->second.push_back(static_cast<int>(i));
    if (!r.context.empty()) has_context_ = true;
  }
}

const std::vector<int>& Cohort::rows_of(const std::string& user_id) const {
  auto it = user_index_.find(user_id);
  if (it == user_index_.end()) fail(ErrorCode::UnknownUser, "unknown user '" + user_id + "'");
  return it->second;
}

int Cohort::user_ordinal(const std::string& user_id) const {
  auto it = user_ordinal_.find(user_id);
  if (it == user_ordinal_.end()) fail(ErrorCode::UnknownUser, "unknown user '" + user_id + "'");
  return it->second;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

double parse_feature(const std::string& s, int row, const std::string& column) {
  if (s.empty()) return missing_value();
  double v = 0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    fail(ErrorCode::BadFeatureValue, "row " + std::to_string(row) + ", column '" + column +
                                         "': cannot parse '" + s + "' as a number");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

Cohort load_csv(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::EmptyCohort, "'" + path + "' has no header row");
  const auto header = split_line(line);

  int col_user = -1, col_label = -1, col_report = -1, col_context = -1;
  std::vector<int> feature_cols;
  std::vector<std::string> feature_names;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& h = header[static_cast<std::size_t>(c)];
    if (h == "user_id") col_user = c;
    else if (h == "label") col_label = c;
    else if (h == "report_id") col_report = c;
    else if (h == "context") col_context = c;
    else {
      feature_cols.push_back(c);
      feature_names.push_back(h);
    }
  }
  if (col_user < 0) fail(ErrorCode::MissingColumn, "required column 'user_id' missing");
  if (col_label < 0) fail(ErrorCode::MissingColumn, "required column 'label' missing");
  if (feature_names.empty()) fail(ErrorCode::MissingColumn, "no feature columns present");

  auto schema = FeatureSchema::from_names(feature_names);
  std::vector<Report> reports;
  std::vector<double> values;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      fail(ErrorCode::BadRow, "row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    Report r;
    r.user_id = fields[static_cast<std::size_t>(col_user)];
    r.report_id = col_report >= 0 ? fields[static_cast<std::size_t>(col_report)]
                                  : std::to_string(row);
    r.context = col_context >= 0 ? fields[static_cast<std::size_t>(col_context)] : "";

    const std::string& ls = fields[static_cast<std::size_t>(col_label)];
    int raw = 0;
    auto [ptr, ec] = std::from_chars(ls.data(), ls.data() + ls.size(), raw);
    if (ec != std::errc() || ptr != ls.data() + ls.size() || raw < 1 || raw > 5)
      fail(ErrorCode::BadLabel, "row " + std::to_string(row) + ": bad label '" + ls + "'");
    r.raw_label = raw;

    for (std::size_t k = 0; k < feature_cols.size(); ++k)
      values.push_back(parse_feature(fields[static_cast<std::size_t>(feature_cols[k])], row,
                                     schema.feature_names[k]));
    reports.push_back(std::move(r));
    ++row;
  }
  if (reports.empty()) fail(ErrorCode::EmptyCohort, "'" + path + "' has no data rows");

  Matrix features(static_cast<long>(reports.size()), schema.feature_count());
  for (long i = 0; i < features.rows(); ++i)
    for (long j = 0; j < features.cols(); ++j)
      features(i, j) = values[static_cast<std::size_t>(i) * static_cast<std::size_t>(features.cols()) +
                              static_cast<std::size_t>(j)];

  return Cohort(std::move(schema), options.mapping, std::move(reports), std::move(features));
}

void save_csv(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "report_id,user_id,label,context";
  for (const auto& f : cohort.schema().feature_names) out << ',' << f;
  out << '\n';
  for (int i = 0; i < cohort.n_reports(); ++i) {
    const Report& r = cohort.reports()[static_cast<std::size_t>(i)];
    out << r.report_id << ',' << r.user_id << ',' << r.raw_label << ',' << r.context;
    for (int j = 0; j < cohort.n_features(); ++j) {
      const double v = cohort.features()(i, j);
      out << ',';
      if (!is_missing(v)) out << format_double(v);
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path + "'");
}

void save_schema_json(const Cohort& cohort, const std::string& path) {
  nlohmann::json j;
  j["feature_names"] = cohort.schema().feature_names;
  j["mapping"] = cohort.mapping().name;
  j["classes"] = cohort.mapping().class_order;
  j["n_reports"] = cohort.n_reports();
  j["n_users"] = cohort.n_users();
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

EligibilityReport eligibility_stats(const Cohort& cohort) {
  const ClassMapping& m = cohort.mapping();
  if (m.n_classes() != 3)
    fail(ErrorCode::Precondition, "eligibility stats require the three-class mapping");
  const int neg = m.class_index("negative");

  EligibilityReport rep;
  long max_neg = 0;
  for (const auto& user : cohort.users()) {
    std::vector<long> counts(static_cast<std::size_t>(m.n_classes()), 0);
    for (int row : cohort.rows_of(user))
      counts[static_cast<std::size_t>(cohort.reports()[static_cast<std::size_t>(row)].class_label)]++;
    int present = 0;
    for (long c : counts) present += c > 0 ? 1 : 0;
    rep.users_by_class_presence[present]++;
    max_neg = std::max(max_neg, counts[static_cast<std::size_t>(neg)]);
    rep.per_user_class_counts[user] = std::move(counts);
  }
  for (long n = 1; n <= max_neg; ++n) {
    int users = 0;
    for (const auto& [user, counts] : rep.per_user_class_counts)
      if (counts[static_cast<std::size_t>(neg)] >= n) ++users;
    rep.negative_count_curve[n] = users;
  }
  return rep;
}

ClassDistribution class_distribution(const Cohort& cohort) {
  if (cohort.n_reports() == 0) fail(ErrorCode::EmptyCohort, "empty cohort");
  ClassDistribution d;
  d.counts.assign(static_cast<std::size_t>(cohort.mapping().n_classes()), 0);
  for (const Report& r : cohort.reports()) d.counts[static_cast<std::size_t>(r.class_label)]++;
  d.total = cohort.n_reports();
  d.fractions.resize(d.counts.size());
  for (std::size_t i = 0; i < d.counts.size(); ++i)
    d.fractions[i] = static_cast<double>(d.counts[i]) / static_cast<double>(d.total);
  return d;
}

std::map<std::string, ClassDistribution> class_distribution_by_context(const Cohort& cohort) {
  if (cohort.n_reports() == 0) fail(ErrorCode::EmptyCohort, "empty cohort");
  std::map<std::string, std::vector<long>> counts;
  for (const Report& r : cohort.reports()) {
    auto& c = counts[r.context];
    c.resize(static_cast<std::size_t>(cohort.mapping().n_classes()), 0);
    c[static_cast<std::size_t>(r.class_label)]++;
  }
  std::map<std::string, ClassDistribution> out;
  for (auto& [ctx, c] : counts) {
    ClassDistribution d;
    d.counts = c;
    d.total = 0;
    for (long v : c) d.total += v;
    d.fractions.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      d.fractions[i] = static_cast<double>(c[i]) / static_cast<double>(d.total);
    out.emplace(ctx, std::move(d));
  }
  return out;
}

}  // namespace cbm
