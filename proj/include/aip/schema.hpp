#pragma once

#include <string>
#include <vector>

#include "aip/error.hpp"

namespace aip {

struct Attribute {
  std::string name;
  int cardinality = 0;
  bool ordinal = false;
  // Optional level labels (size == cardinality). When present, data files may
  // carry either the label or the 1-based level id.
  std::vector<std::string> labels;
};

// Declarative layout of the cell attributes, continuous covariates and the
// choice set. Level ids are 1-based in files and 0-based in memory.
struct Schema {
  std::vector<Attribute> attributes;
  std::vector<std::string> choices;
  std::vector<std::string> state_covariates;
  std::vector<std::string> day_covariates;
  std::vector<std::string> state_day_covariates;
  std::string area_attribute = "state";
  int num_days = 0;  // 0 when the model carries no day dimension

  void validate() const;
  int attribute_index(const std::string& name) const;
  int area_index() const { return attribute_index(area_attribute); }
  int num_areas() const { return attributes[area_index()].cardinality; }
  int choice_index(const std::string& label) const;

  // Parses a level cell (label or 1-based id) to a 0-based level id.
  int parse_level(int attr, const std::string& cell) const;
};

// The application schema: state/gender/ethnicity/age/education/income/vote2016
// cell attributes, the five-option choice set, and the continuous covariate
// names at state, day and state-day level.
Schema election_schema(int num_days = 30);

}  // namespace aip
