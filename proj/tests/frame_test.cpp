#include <cstdio>
#include <fstream>

#include "aip/frame.hpp"
#include "doctest.h"

using namespace aip;

namespace {

Schema toy_schema() {
  Schema s;
  s.attributes = {{"state", 3, false, {}},
                  {"age", 2, true, {"young", "old"}}};
  s.choices = {"yes", "no"};
  s.num_days = 0;
  return s;
}

void write(const char* path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

}  // namespace

TEST_CASE("make_frame validates and indexes") {
  auto f = make_frame(toy_schema(), {{{0, 0}, 2.0}, {{0, 1}, 3.0}, {{2, 1}, 5.0}});
  CHECK(f.total_weight == doctest::Approx(10.0));
  CHECK(f.cell_index({0, 1}) == 1);
  CHECK(!f.find_cell({1, 0}).has_value());
  CHECK_THROWS_WITH_AS(f.cell_index({1, 0}), "cell not found for attribute tuple", DataError);
}

TEST_CASE("duplicate cell keys rejected") {
  CHECK_THROWS_AS(make_frame(toy_schema(), {{{0, 0}, 1.0}, {{0, 0}, 2.0}}), DataError);
}

TEST_CASE("weights validated") {
  CHECK_THROWS_AS(make_frame(toy_schema(), {{{0, 0}, -1.0}}), DataError);
  CHECK_THROWS_WITH_AS(make_frame(toy_schema(), {{{0, 0}, 0.0}}),
                       "total weight must be positive", DataError);
}

TEST_CASE("frame round trip preserves levels and weights") {
  auto f = make_frame(toy_schema(), {{{0, 0}, 2.5}, {{1, 1}, 0.125}});
  write_frame("frame_rt.csv", f);
  auto g = load_frame("frame_rt.csv", toy_schema());
  REQUIRE(g.cells.size() == 2);
  CHECK(g.cells[0].levels == f.cells[0].levels);
  CHECK(g.cells[1].weight == doctest::Approx(0.125));
  std::remove("frame_rt.csv");
}

TEST_CASE("levels parse as labels or 1-based ids") {
  write("frame_lv.csv", "state,age,weight\n1,young,1\n3,2,4\n");
  auto f = load_frame("frame_lv.csv", toy_schema());
  CHECK(f.cells[0].levels == std::vector<int>{0, 0});
  CHECK(f.cells[1].levels == std::vector<int>{2, 1});
  std::remove("frame_lv.csv");
}

TEST_CASE("out-of-domain levels rejected at load") {
  write("frame_bad.csv", "state,age,weight\n4,young,1\n");
  CHECK_THROWS_AS(load_frame("frame_bad.csv", toy_schema()), DataError);
  std::remove("frame_bad.csv");
}

TEST_CASE("survey rows parse with drop accounting") {
  write("survey1.csv",
        "state,age,choice\n1,young,yes\n2,old,no\n9,old,no\n1,old,maybe\n");
  auto ds = load_survey("survey1.csv", toy_schema());
  CHECK(ds.rows.size() == 2);
  CHECK(ds.num_dropped() == 2);
  CHECK(ds.rows[0].levels == std::vector<int>{0, 0});
  CHECK(ds.rows[0].choice == 0);
  CHECK(ds.rows[1].choice == 1);
  CHECK(ds.rows[0].day == -1);
  std::remove("survey1.csv");
}

TEST_CASE("survey rows outside the frame are dropped when a frame is given") {
  auto f = make_frame(toy_schema(), {{{0, 0}, 1.0}});
  write("survey2.csv", "state,age,choice\n1,young,yes\n2,old,no\n");
  auto ds = load_survey("survey2.csv", toy_schema(), &f);
  CHECK(ds.rows.size() == 1);
  CHECK(ds.dropped.at("no frame cell for attribute tuple") == 1);
  std::remove("survey2.csv");
}

TEST_CASE("empty survey is an error") {
  write("survey3.csv", "state,age,choice\n9,young,yes\n");
  CHECK_THROWS_WITH_AS(load_survey("survey3.csv", toy_schema()), "no respondents", DataError);
  std::remove("survey3.csv");
}

TEST_CASE("day column validated against schema span") {
  auto s = toy_schema();
  s.num_days = 2;
  write("survey4.csv", "state,age,choice,day\n1,young,yes,2\n1,old,no,3\n");
  auto ds = load_survey("survey4.csv", s);
  CHECK(ds.rows.size() == 1);
  CHECK(ds.rows[0].day == 1);
  CHECK(ds.num_dropped() == 1);
  std::remove("survey4.csv");
}

TEST_CASE("covariate rows follow declaration order") {
  auto s = toy_schema();
  s.num_days = 2;
  s.state_covariates = {"a", "b"};
  s.day_covariates = {"c"};
  s.state_day_covariates = {"d"};
  write("cov_s.csv", "state,a,b\n1,1,2\n2,3,4\n3,5,6\n");
  write("cov_d.csv", "day,c\n1,10\n2,20\n");
  write("cov_sd.csv",
        "state,day,d\n1,1,100\n1,2,101\n2,1,102\n2,2,103\n3,1,104\n3,2,105\n");
  auto cov = load_covariates("cov_s.csv", "cov_d.csv", "cov_sd.csv", s);
  CHECK(cov.num_covariates() == 4);
  CHECK(cov.row(1, 1) == std::vector<double>{3, 4, 20, 103});
  std::remove("cov_s.csv");
  std::remove("cov_d.csv");
  std::remove("cov_sd.csv");
}

TEST_CASE("incomplete covariate coverage rejected") {
  auto s = toy_schema();
  s.num_days = 1;
  s.state_covariates = {"a"};
  s.day_covariates = {"c"};
  s.state_day_covariates = {"d"};
  write("cov_s2.csv", "state,a\n1,1\n2,2\n");
  write("cov_d2.csv", "day,c\n1,10\n");
  write("cov_sd2.csv", "state,day,d\n1,1,0\n2,1,0\n3,1,0\n");
  CHECK_THROWS_AS(load_covariates("cov_s2.csv", "cov_d2.csv", "cov_sd2.csv", s), DataError);
  std::remove("cov_s2.csv");
  std::remove("cov_d2.csv");
  std::remove("cov_sd2.csv");
}

TEST_CASE("application schema shape") {
  auto s = election_schema(30);
  s.validate();
  CHECK(s.attributes.size() == 7);
  CHECK(s.num_areas() == 51);
  CHECK(s.choices.size() == 5);
  CHECK(s.choice_index("stay home") == 4);
  CHECK(s.attributes[s.attribute_index("age")].ordinal);
  CHECK(s.attributes[s.attribute_index("income")].ordinal);
  int P = static_cast<int>(s.state_covariates.size() + s.day_covariates.size() +
                           s.state_day_covariates.size());
  CHECK(P == 12);
}
