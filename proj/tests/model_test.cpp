#include <cmath>
#include <memory>
#include <random>

#include "aip/model.hpp"
#include "doctest.h"

using namespace aip;

namespace {

Schema small_schema(int num_days = 0) {
  Schema s;
  s.attributes = {{"state", 3, false, {}},
                  {"age", 3, true, {}},
                  {"gender", 2, false, {"M", "F"}}};
  s.choices = {"yes", "no", "maybe"};
  s.state_covariates = {"x1"};
  if (num_days > 0) s.day_covariates = {"x2"};
  s.num_days = num_days;
  return s;
}

SurveyDataset small_survey(const Schema& s, int n, unsigned seed, bool with_day) {
  SurveyDataset ds;
  ds.schema = s;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    SurveyRow r;
    for (const auto& a : s.attributes)
      r.levels.push_back(static_cast<int>(rng() % a.cardinality));
    r.choice = static_cast<int>(rng() % s.choices.size());
    r.day = with_day ? static_cast<int>(rng() % s.num_days) : -1;
    ds.rows.push_back(std::move(r));
  }
  return ds;
}

CovariateTables small_cov(const Schema& s, unsigned seed) {
  CovariateTables cov = zero_covariates(s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, 1);
  for (auto& row : cov.state_values)
    for (double& v : row) v = N(rng);
  for (auto& row : cov.day_values)
    for (double& v : row) v = N(rng);
  return cov;
}

Eigen::VectorXd random_params(int dim, unsigned seed, double sd = 0.4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0, sd);
  Eigen::VectorXd p(dim);
  for (int i = 0; i < dim; ++i) p[i] = N(rng);
  return p;
}

}  // namespace

TEST_CASE("layout covers every block once") {
  auto schema = small_schema(2);
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 0, true, 0.0, graph);
  auto idx = spec.layout();
  // alpha(1) beta(2) state phi+psi+xi+s(8) age z+s(4) gender z+s(3) day z+s(3)
  CHECK(idx.dim == 1 + 2 + 8 + 4 + 3 + 3);
  CHECK(idx.at("alpha").size == 1);
  CHECK(idx.at("state_psi").size == 3);
  CHECK(idx.at("day_z").size == 2);
  CHECK_THROWS_AS(idx.at("nope"), DataError);
  int covered = 0;
  for (const auto& b : idx.blocks) covered += b.size;
  CHECK(covered == idx.dim);
}

TEST_CASE("multinomial stacks J-1 groups") {
  auto schema = small_schema();
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Multinomial, 0, true, 0.0, graph);
  CHECK(spec.num_groups() == 2);
  auto idx = spec.layout();
  int per_group = 1 + 1 + 8 + 4 + 3;
  CHECK(idx.dim == 2 * per_group);
  CHECK(idx.at("c1:alpha").offset == 0);
  CHECK(idx.at("c2:alpha").offset == per_group);
}

TEST_CASE("structured spec assigns kinds by attribute role") {
  auto schema = small_schema(2);
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 1, true, 0.0, graph);
  CHECK(spec.blocks[0].kind == EffectKind::Bym2);
  CHECK(spec.blocks[1].kind == EffectKind::RandomWalk);
  CHECK(spec.blocks[2].kind == EffectKind::Unstructured);
  CHECK(spec.blocks[3].name == "day");
  CHECK(spec.blocks[3].kind == EffectKind::RandomWalk);

  auto flat = unstructured_variant(spec);
  for (const auto& b : flat.blocks) CHECK(b.kind == EffectKind::Unstructured);
  CHECK(flat.layout().dim < spec.layout().dim);
}

TEST_CASE("offsets are rejected for multinomial models") {
  auto schema = small_schema();
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  CHECK_THROWS_AS(make_model_spec(schema, Likelihood::Multinomial, 0, true, 0.3, graph),
                  DataError);
}

TEST_CASE("standardization freezes on first build") {
  auto schema = small_schema(2);
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 0, true, 0.0, graph);
  auto survey = small_survey(schema, 40, 11, true);
  auto cov = small_cov(schema, 12);
  auto data = build_training_data(spec, schema, survey, cov);
  REQUIRE(spec.x_mean.size() == 2);
  for (int p = 0; p < 2; ++p) {
    CHECK(data.X.col(p).mean() == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    double sd = std::sqrt(data.X.col(p).squaredNorm() / (data.X.rows() - 1));
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
  }
  // a different survey reuses the frozen constants rather than re-centering
  auto frozen = spec.x_mean;
  auto survey2 = small_survey(schema, 15, 99, true);
  build_training_data(spec, schema, survey2, cov);
  CHECK(spec.x_mean == frozen);
}

TEST_CASE("cell data aligns with frame order and uses frozen standardization") {
  auto schema = small_schema(2);
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 0, true, 0.0, graph);
  auto survey = small_survey(schema, 40, 11, true);
  auto cov = small_cov(schema, 12);
  build_training_data(spec, schema, survey, cov);

  std::vector<Cell> cells;
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 3; ++a)
      for (int g = 0; g < 2; ++g) cells.push_back({{s, a, g}, 1.0});
  auto frame = make_frame(schema, cells);
  auto cd = build_cell_data(spec, frame, cov, 1);
  CHECK(cd.n() == 18);
  int i = 0;
  for (const auto& c : frame.cells) {
    CHECK(cd.level_ids[0][i] == c.levels[0]);
    CHECK(cd.level_ids[3][i] == 1);
    double want = (cov.row(c.levels[0], 1)[0] - spec.x_mean[0]) / spec.x_sd[0];
    CHECK(cd.X(i, 0) == doctest::Approx(want).epsilon(1e-12));
    ++i;
  }
}

TEST_CASE("linear predictor applies the offset only when asked") {
  auto schema = small_schema();
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 0, true, 0.7, graph);
  auto survey = small_survey(schema, 10, 4, false);
  auto data = build_training_data(spec, schema, survey, zero_covariates(schema));
  auto p = random_params(spec.layout().dim, 5);
  auto with = linear_predictor(p, data, spec, true);
  auto without = linear_predictor(p, data, spec, false);
  for (int i = 0; i < with.rows(); ++i)
    CHECK(with(i, 0) - without(i, 0) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("density matches a direct recomputation") {
  auto schema = small_schema();
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}}));  // node 2 island
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 1, true, 0.25, graph);
  auto survey = small_survey(schema, 30, 21, false);
  auto cov = small_cov(schema, 22);
  auto data = build_training_data(spec, schema, survey, cov);
  auto params = random_params(spec.layout().dim, 23);
  double got = log_posterior(params, data, spec);

  // direct recomputation with scalar loops
  auto idx = spec.layout();
  double alpha = params[idx.at("alpha").offset];
  double beta = params[idx.at("beta").offset];
  Eigen::VectorXd phi = idx.segment(params, "state_phi");
  Eigen::VectorXd psi = idx.segment(params, "state_psi");
  double xi = 1.0 / (1.0 + std::exp(-params[idx.at("state_logit_xi").offset]));
  double s_state = std::exp(params[idx.at("state_log_scale").offset]);
  Eigen::VectorXd age_z = idx.segment(params, "age_z");
  double s_age = std::exp(params[idx.at("age_log_scale").offset]);
  Eigen::VectorXd gen_z = idx.segment(params, "gender_z");
  double s_gen = std::exp(params[idx.at("gender_log_scale").offset]);

  auto sf = compute_scaling_factor(*graph);
  auto gamma = [&](int l) {
    if (graph->is_island(l)) return s_state * phi[l];
    return s_state * (phi[l] * std::sqrt(1 - xi) +
                      psi[l] * std::sqrt(xi) * sf.inv_sqrt[graph->component[l]]);
  };
  double want = 0.0;
  for (size_t i = 0; i < survey.rows.size(); ++i) {
    const auto& r = survey.rows[i];
    double mu = spec.offset + alpha + data.X(i, 0) * beta + gamma(r.levels[0]) +
                s_age * age_z[r.levels[1]] + s_gen * gen_z[r.levels[2]];
    double pr = 1.0 / (1.0 + std::exp(-mu));
    want += r.choice == 1 ? std::log(pr) : std::log(1.0 - pr);
  }
  want += -0.5 * alpha * alpha / 100.0;
  want += -0.5 * beta * beta;
  want += -0.5 * phi.squaredNorm();
  want += -0.5 * (psi[0] - psi[1]) * (psi[0] - psi[1]);
  double sz = sum_to_zero_sd(2), pair_sum = psi[0] + psi[1];
  want += -0.5 * pair_sum * pair_sum / (sz * sz);
  want += -0.5 * psi[2] * psi[2];
  want += 0.5 * (std::log(xi) + std::log(1 - xi));
  Eigen::VectorXd age_grad_unused;
  want += random_walk_logdensity(age_z, nullptr);
  want += -0.5 * gen_z.squaredNorm();
  for (const char* n : {"state_log_scale", "age_log_scale", "gender_log_scale"}) {
    double s = params[idx.at(n).offset];
    want += -0.5 * std::exp(2 * s) + s;
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("bernoulli gradient matches finite differences") {
  auto schema = small_schema(2);
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}}));
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 0, true, 0.4, graph);
  auto survey = small_survey(schema, 25, 31, true);
  auto cov = small_cov(schema, 32);
  auto data = build_training_data(spec, schema, survey, cov);
  auto params = random_params(spec.layout().dim, 33);
  Eigen::VectorXd grad;
  log_posterior_with_grad(params, data, spec, grad);
  const double h = 1e-5;
  for (int i = 0; i < params.size(); ++i) {
    Eigen::VectorXd pp = params, pm = params;
    pp[i] += h;
    pm[i] -= h;
    double fd = (log_posterior(pp, data, spec) - log_posterior(pm, data, spec)) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("multinomial gradient matches finite differences") {
  auto schema = small_schema();
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Multinomial, 0, true, 0.0, graph);
  auto survey = small_survey(schema, 25, 41, false);
  auto cov = small_cov(schema, 42);
  auto data = build_training_data(spec, schema, survey, cov);
  auto params = random_params(spec.layout().dim, 43);
  Eigen::VectorXd grad;
  log_posterior_with_grad(params, data, spec, grad);
  const double h = 1e-5;
  for (int i = 0; i < params.size(); ++i) {
    Eigen::VectorXd pp = params, pm = params;
    pp[i] += h;
    pm[i] -= h;
    double fd = (log_posterior(pp, data, spec) - log_posterior(pm, data, spec)) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("unstructured variant gradient matches finite differences") {
  auto schema = small_schema(2);
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = unstructured_variant(
      make_model_spec(schema, Likelihood::Bernoulli, 2, true, 0.0, graph));
  auto survey = small_survey(schema, 25, 51, true);
  auto cov = small_cov(schema, 52);
  auto data = build_training_data(spec, schema, survey, cov);
  auto params = random_params(spec.layout().dim, 53);
  Eigen::VectorXd grad;
  log_posterior_with_grad(params, data, spec, grad);
  const double h = 1e-5;
  for (int i = 0; i < params.size(); ++i) {
    Eigen::VectorXd pp = params, pm = params;
    pp[i] += h;
    pm[i] -= h;
    double fd = (log_posterior(pp, data, spec) - log_posterior(pm, data, spec)) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("two-choice multinomial equals the matching bernoulli model") {
  Schema schema = small_schema();
  schema.choices = {"yes", "no"};
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto mspec = make_model_spec(schema, Likelihood::Multinomial, 0, true, 0.0, graph);
  auto bspec = make_model_spec(schema, Likelihood::Bernoulli, 0, true, 0.0, graph);
  CHECK(mspec.layout().dim == bspec.layout().dim);
  auto survey = small_survey(schema, 30, 61, false);
  auto cov = small_cov(schema, 62);
  auto mdata = build_training_data(mspec, schema, survey, cov);
  auto bdata = build_training_data(bspec, schema, survey, cov);
  auto params = random_params(mspec.layout().dim, 63);
  Eigen::VectorXd mg, bg;
  double mlp = log_posterior_with_grad(params, mdata, mspec, mg);
  double blp = log_posterior_with_grad(params, bdata, bspec, bg);
  CHECK(mlp == doctest::Approx(blp).epsilon(1e-12));
  for (int i = 0; i < mg.size(); ++i)
    CHECK(mg[i] == doctest::Approx(bg[i]).epsilon(1e-10).scale(1.0));
}

TEST_CASE("parameter length mismatch is a data error") {
  auto schema = small_schema();
  auto graph = std::make_shared<AdjacencyGraph>(build_graph(3, {{0, 1}, {1, 2}}));
  auto spec = make_model_spec(schema, Likelihood::Bernoulli, 0, true, 0.0, graph);
  auto survey = small_survey(schema, 5, 71, false);
  auto data = build_training_data(spec, schema, survey, zero_covariates(schema));
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(log_posterior(bad, data, spec), DataError);
}
