#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aip/schema.hpp"

namespace aip {

// One population cell: a full attribute tuple plus its (fractional) weight.
struct Cell {
  std::vector<int> levels;  // 0-based, one per schema attribute
  double weight = 0.0;
};

struct StratificationFrame {
  Schema schema;
  std::vector<Cell> cells;
  double total_weight = 0.0;

  int area_of(int cell) const { return cells[cell].levels[schema.area_index()]; }
  // Unique cell index for an attribute tuple; throws DataError when the frame
  // has no cell for the combination.
  int cell_index(const std::vector<int>& levels) const;
  std::optional<int> find_cell(const std::vector<int>& levels) const;

 private:
  friend StratificationFrame make_frame(Schema, std::vector<Cell>);
  std::map<std::vector<int>, int> index_;
};

StratificationFrame make_frame(Schema schema, std::vector<Cell> cells);
StratificationFrame load_frame(const std::string& path, const Schema& schema);
void write_frame(const std::string& path, const StratificationFrame& frame);

struct SurveyRow {
  std::vector<int> levels;  // 0-based, one per schema attribute
  int choice = 0;           // 0-based index into schema.choices
  int day = -1;             // 0-based day id, -1 when absent
};

struct SurveyDataset {
  Schema schema;
  std::vector<SurveyRow> rows;
  // Rows rejected at load, with reasons (reason -> count).
  std::map<std::string, int> dropped;
  int num_dropped() const;
};

// Loads survey.csv (choice column + attribute columns + optional day column).
// When a frame is given, rows whose attribute tuple has no frame cell are
// rejected rather than silently post-stratified later.
SurveyDataset load_survey(const std::string& path, const Schema& schema,
                          const StratificationFrame* frame = nullptr);

// Continuous covariate tables keyed by state, day and (state, day).
struct CovariateTables {
  Schema schema;
  std::vector<std::vector<double>> state_values;      // [state][covariate]
  std::vector<std::vector<double>> day_values;        // [day][covariate]
  std::vector<std::vector<double>> state_day_values;  // [state*num_days+day][covariate]

  // Covariate row for a (state, day) pair, ordered state covariates then day
  // then state-day, matching Schema covariate declaration order.
  std::vector<double> row(int state, int day) const;
  int num_covariates() const;
};

CovariateTables load_covariates(const std::string& state_path,
                                const std::string& day_path,
                                const std::string& state_day_path,
                                const Schema& schema);

// Covariate tables with every entry zero, for schemas without continuous
// predictors or for tests.
CovariateTables zero_covariates(const Schema& schema);

}  // namespace aip
