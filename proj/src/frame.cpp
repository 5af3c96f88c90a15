#include "aip/frame.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "aip/csv.hpp"

namespace aip {

void Schema::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& a : attributes) {
    if (!seen.insert(a.name).second) throw DataError("duplicate attribute name '" + a.name + "'");
    if (a.cardinality < 2)
      throw DataError("attribute '" + a.name + "' must have cardinality >= 2");
    if (!a.labels.empty() && static_cast<int>(a.labels.size()) != a.cardinality)
      throw DataError("attribute '" + a.name + "' label count != cardinality");
  }
  if (choices.size() < 2) throw DataError("choice set must have J >= 2");
  attribute_index(area_attribute);
}

int Schema::attribute_index(const std::string& name) const {
  for (size_t i = 0; i < attributes.size(); ++i)
    if (attributes[i].name == name) return static_cast<int>(i);
  throw DataError("unknown attribute '" + name + "'");
}

int Schema::choice_index(const std::string& label) const {
  for (size_t i = 0; i < choices.size(); ++i)
    if (choices[i] == label) return static_cast<int>(i);
  throw DataError("unknown choice label '" + label + "'");
}

int Schema::parse_level(int attr, const std::string& cell) const {
  const Attribute& a = attributes[attr];
  for (size_t i = 0; i < a.labels.size(); ++i)
    if (a.labels[i] == cell) return static_cast<int>(i);
  bool numeric = !cell.empty();
  for (char c : cell)
    if (!std::isdigit(static_cast<unsigned char>(c))) numeric = false;
  if (numeric) {
    long id = csv::to_long(cell, a.name);
    if (id < 1 || id > a.cardinality)
      throw DataError("level " + cell + " out of domain [1, " +
                      std::to_string(a.cardinality) + "] for attribute '" + a.name + "'");
    return static_cast<int>(id) - 1;
  }
  throw DataError("unknown level '" + cell + "' for attribute '" + a.name + "'");
}

Schema election_schema(int num_days) {
  Schema s;
  s.attributes = {
      {"state", 51, false, {}},
      {"gender", 2, false, {"M", "F"}},
      {"ethnicity", 5, false, {"White", "Black", "Hispanic", "Asian", "Other"}},
      {"age", 6, true, {"18-24", "25-34", "35-44", "45-54", "55-64", "65+"}},
      {"education", 2, false, {"no degree", "degree"}},
      {"income", 5, true, {"<25k", "25-50k", "50-75k", "75-100k", ">100k"}},
      {"vote2016", 4, false, {"R", "D", "other", "stay home"}},
  };
  s.choices = {"R", "D", "Libertarian", "Green", "stay home"};
  s.state_covariates = {"share2016", "share2012", "pct_white", "pct_evangelical",
                        "pct_college", "midwest", "northeast", "south", "west"};
  if (num_days > 0) {
    s.day_covariates = {"econ_index", "incumbent_approval"};
    s.state_day_covariates = {"covid_deaths"};
  }
  s.num_days = num_days;
  return s;
}

int StratificationFrame::cell_index(const std::vector<int>& levels) const {
  auto it = index_.find(levels);
  if (it == index_.end()) throw DataError("cell not found for attribute tuple");
  return it->second;
}

std::optional<int> StratificationFrame::find_cell(const std::vector<int>& levels) const {
  auto it = index_.find(levels);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StratificationFrame make_frame(Schema schema, std::vector<Cell> cells) {
  schema.validate();
  StratificationFrame f;
  f.schema = std::move(schema);
  f.cells = std::move(cells);
  const int num_attr = static_cast<int>(f.schema.attributes.size());
  for (size_t m = 0; m < f.cells.size(); ++m) {
    const Cell& c = f.cells[m];
    if (static_cast<int>(c.levels.size()) != num_attr)
      throw DataError("cell " + std::to_string(m + 1) + " has wrong attribute count");
    for (int a = 0; a < num_attr; ++a)
      if (c.levels[a] < 0 || c.levels[a] >= f.schema.attributes[a].cardinality)
        throw DataError("cell " + std::to_string(m + 1) + ": level out of domain for '" +
                        f.schema.attributes[a].name + "'");
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
      throw DataError("cell " + std::to_string(m + 1) + ": negative or non-finite weight");
    if (!f.index_.emplace(c.levels, static_cast<int>(m)).second)
      throw DataError("duplicate cell key at row " + std::to_string(m + 1));
    f.total_weight += c.weight;
  }
  if (!(f.total_weight > 0.0)) throw DataError("total weight must be positive");
  return f;
}

StratificationFrame load_frame(const std::string& path, const Schema& schema) {
  auto t = csv::read_file(path);
  std::vector<int> attr_cols;
  for (const auto& a : schema.attributes) attr_cols.push_back(t.column(a.name));
  int wcol = t.column("weight");
  std::vector<Cell> cells;
  cells.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    Cell c;
    for (size_t a = 0; a < schema.attributes.size(); ++a)
      c.levels.push_back(schema.parse_level(static_cast<int>(a), row[attr_cols[a]]));
    c.weight = csv::to_double(row[wcol], "weight");
    if (c.weight < 0.0) throw DataError("negative weight " + row[wcol]);
    cells.push_back(std::move(c));
  }
  return make_frame(schema, std::move(cells));
}

void write_frame(const std::string& path, const StratificationFrame& frame) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  for (size_t a = 0; a < frame.schema.attributes.size(); ++a)
    out << csv::quote(frame.schema.attributes[a].name) << ',';
  out << "weight\n";
  for (const Cell& c : frame.cells) {
    for (size_t a = 0; a < frame.schema.attributes.size(); ++a) {
      const Attribute& attr = frame.schema.attributes[a];
      if (!attr.labels.empty())
        out << csv::quote(attr.labels[c.levels[a]]) << ',';
      else
        out << (c.levels[a] + 1) << ',';
    }
    out << c.weight << '\n';
  }
}

int SurveyDataset::num_dropped() const {
  int n = 0;
  for (const auto& [_, count] : dropped) n += count;
  return n;
}

SurveyDataset load_survey(const std::string& path, const Schema& schema,
                          const StratificationFrame* frame) {
  auto t = csv::read_file(path);
  std::vector<int> attr_cols;
  for (const auto& a : schema.attributes) attr_cols.push_back(t.column(a.name));
  int ccol = t.column("choice");
  int dcol = t.has_column("day") ? t.column("day") : -1;

  SurveyDataset ds;
  ds.schema = schema;
  for (const auto& row : t.rows) {
    SurveyRow r;
    try {
      r.choice = schema.choice_index(row[ccol]);
      for (size_t a = 0; a < schema.attributes.size(); ++a)
        r.levels.push_back(schema.parse_level(static_cast<int>(a), row[attr_cols[a]]));
      if (dcol >= 0) {
        long d = csv::to_long(row[dcol], "day");
        if (d < 1 || (schema.num_days > 0 && d > schema.num_days))
          throw DataError("day " + row[dcol] + " out of domain");
        r.day = static_cast<int>(d) - 1;
      }
      if (frame && !frame->find_cell(r.levels))
        throw DataError("no frame cell for attribute tuple");
    } catch (const DataError& e) {
      ++ds.dropped[e.what()];
      continue;
    }
    ds.rows.push_back(std::move(r));
  }
  if (ds.rows.empty()) throw DataError("no respondents");
  return ds;
}

int CovariateTables::num_covariates() const {
  return static_cast<int>(schema.state_covariates.size() + schema.day_covariates.size() +
                          schema.state_day_covariates.size());
}

std::vector<double> CovariateTables::row(int state, int day) const {
  std::vector<double> out;
  out.reserve(num_covariates());
  for (double v : state_values[state]) out.push_back(v);
  if (!schema.day_covariates.empty() || !schema.state_day_covariates.empty()) {
    if (day < 0 || day >= schema.num_days)
      throw DataError("no covariates for day " + std::to_string(day + 1));
    for (double v : day_values[day]) out.push_back(v);
    for (double v : state_day_values[state * schema.num_days + day]) out.push_back(v);
  }
  return out;
}

namespace {

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw DataError("non-finite covariate value for " + what);
}

}  // namespace

CovariateTables load_covariates(const std::string& state_path, const std::string& day_path,
                                const std::string& state_day_path, const Schema& schema) {
  CovariateTables cov;
  cov.schema = schema;
  const int L = schema.num_areas();
  const int D = schema.num_days;

  cov.state_values.assign(L, {});
  {
    auto t = csv::read_file(state_path);
    int scol = t.column("state");
    std::vector<int> cols;
    for (const auto& name : schema.state_covariates) cols.push_back(t.column(name));
    for (const auto& row : t.rows) {
      int s = schema.parse_level(schema.area_index(), row[scol]);
      std::vector<double> vals;
      for (size_t k = 0; k < cols.size(); ++k) {
        double v = csv::to_double(row[cols[k]], schema.state_covariates[k]);
        check_finite(v, schema.state_covariates[k]);
        vals.push_back(v);
      }
      cov.state_values[s] = std::move(vals);
    }
    for (int s = 0; s < L; ++s)
      if (cov.state_values[s].empty() && !schema.state_covariates.empty())
        throw DataError("state covariates missing for state " + std::to_string(s + 1));
  }

  cov.day_values.assign(std::max(D, 0), {});
  cov.state_day_values.assign(static_cast<size_t>(L) * std::max(D, 0), {});
  if (D > 0) {
    auto t = csv::read_file(day_path);
    int dcol = t.column("day");
    std::vector<int> cols;
    for (const auto& name : schema.day_covariates) cols.push_back(t.column(name));
    for (const auto& row : t.rows) {
      long d = csv::to_long(row[dcol], "day");
      if (d < 1 || d > D) throw DataError("day " + row[dcol] + " out of domain");
      std::vector<double> vals;
      for (size_t k = 0; k < cols.size(); ++k) {
        double v = csv::to_double(row[cols[k]], schema.day_covariates[k]);
        check_finite(v, schema.day_covariates[k]);
        vals.push_back(v);
      }
      cov.day_values[d - 1] = std::move(vals);
    }
    for (int d = 0; d < D; ++d)
      if (cov.day_values[d].empty() && !schema.day_covariates.empty())
        throw DataError("day covariates missing for day " + std::to_string(d + 1));

    auto t2 = csv::read_file(state_day_path);
    int scol = t2.column("state");
    int dcol2 = t2.column("day");
    std::vector<int> cols2;
    for (const auto& name : schema.state_day_covariates) cols2.push_back(t2.column(name));
    for (const auto& row : t2.rows) {
      int s = schema.parse_level(schema.area_index(), row[scol]);
      long d = csv::to_long(row[dcol2], "day");
      if (d < 1 || d > D) throw DataError("day " + row[dcol2] + " out of domain");
      std::vector<double> vals;
      for (size_t k = 0; k < cols2.size(); ++k) {
        double v = csv::to_double(row[cols2[k]], schema.state_day_covariates[k]);
        check_finite(v, schema.state_day_covariates[k]);
        vals.push_back(v);
      }
      cov.state_day_values[s * D + (d - 1)] = std::move(vals);
    }
    if (!schema.state_day_covariates.empty())
      for (int s = 0; s < L; ++s)
        for (int d = 0; d < D; ++d)
          if (cov.state_day_values[s * D + d].empty())
            throw DataError("state-day covariates missing for state " + std::to_string(s + 1) +
                            ", day " + std::to_string(d + 1));
  }
  return cov;
}

CovariateTables zero_covariates(const Schema& schema) {
  CovariateTables cov;
  cov.schema = schema;
  const int L = schema.num_areas();
  const int D = std::max(schema.num_days, 0);
  cov.state_values.assign(L, std::vector<double>(schema.state_covariates.size(), 0.0));
  cov.day_values.assign(D, std::vector<double>(schema.day_covariates.size(), 0.0));
  cov.state_day_values.assign(static_cast<size_t>(L) * D,
                              std::vector<double>(schema.state_day_covariates.size(), 0.0));
  return cov;
}

}  // namespace aip
