#include "aip/simstudy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>

#include "aip/csv.hpp"
#include "aip/error.hpp"
#include "aip/poststrat.hpp"
#include "aip/priors.hpp"

namespace aip {

void PopulationConfig::validate() const {
  if (N < 1) throw DataError("population size must be positive");
  if (J < 2) throw DataError("need at least two choices");
  if (L < 2) throw DataError("need at least two areas");
  if (num_covariates < 1) throw DataError("need at least one covariate");
  if (cutoffs.empty()) throw DataError("need at least one cutoff");
  for (size_t i = 1; i < cutoffs.size(); ++i)
    if (!(cutoffs[i] > cutoffs[i - 1]))
      throw DataError("cutoffs must be strictly increasing");
  if (sar_candidates < 1) throw DataError("need at least one SAR candidate");
}

Eigen::MatrixXd Population::area_truth() const {
  const int L = frame.schema.num_areas();
  const int J = static_cast<int>(truth.cols());
  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(L, J);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(L);
  const int area = frame.schema.area_index();
  for (size_t m = 0; m < frame.cells.size(); ++m) {
    int l = frame.cells[m].levels[area];
    num.row(l) += frame.cells[m].weight * truth.row(m);
    den[l] += frame.cells[m].weight;
  }
  for (int l = 0; l < L; ++l) {
    if (!(den[l] > 0.0))
      throw DataError("area " + std::to_string(l + 1) + " has no population");
    num.row(l) /= den[l];
  }
  return num;
}

CovariateTables Population::covariates() const {
  CovariateTables cov = zero_covariates(schema);
  for (int l = 0; l < schema.num_areas(); ++l) cov.state_values[l][0] = z[l];
  return cov;
}

double moran_i(const Eigen::VectorXd& values, const AdjacencyGraph& graph) {
  if (values.size() != graph.num_nodes)
    throw DataError("value length != number of graph nodes");
  const double mean = values.mean();
  double denom = (values.array() - mean).square().sum();
  if (!(denom > 0.0)) throw DataError("zero variance");
  double s0 = 2.0 * static_cast<double>(graph.edges.size());
  if (!(s0 > 0.0)) throw DataError("graph has no edges");
  double cross = 0.0;
  for (auto [a, b] : graph.edges)
    cross += 2.0 * (values[a] - mean) * (values[b] - mean);
  return graph.num_nodes / s0 * cross / denom;
}

Eigen::VectorXd sample_sar_psi(const AdjacencyGraph& graph, int candidates, Rng& rng) {
  if (candidates < 1) throw DataError("need at least one SAR candidate");
  const int L = graph.num_nodes;
  // row-normalized adjacency
  auto deg = graph.degrees();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(L, L);
  for (auto [a, b] : graph.edges) {
    if (deg[a] > 0) W(a, b) = 1.0 / deg[a];
    if (deg[b] > 0) W(b, a) = 1.0 / deg[b];
  }
  Eigen::VectorXd best;
  double best_i = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < candidates; ++c) {
    Eigen::VectorXd psi;
    for (;;) {
      double lambda = 0.99 * runif(rng);
      Eigen::VectorXd eps(L);
      for (int l = 0; l < L; ++l) eps[l] = rnorm(rng);
      Eigen::MatrixXd A = Eigen::MatrixXd::Identity(L, L) - lambda * W;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (!lu.isInvertible()) continue;  // redraw lambda
      psi = lu.solve(eps);
      break;
    }
    double mi;
    try {
      mi = moran_i(psi, graph);
    } catch (const DataError&) {
      continue;
    }
    if (mi > best_i) {
      best_i = mi;
      best = psi;
    }
  }
  if (best.size() == 0) throw NumericalError("no usable SAR candidate");
  return best;
}

namespace {

Schema simulation_schema(const PopulationConfig& cfg) {
  Schema s;
  s.attributes.push_back({"area", cfg.L, false, {}});
  for (int k = 1; k <= cfg.num_covariates; ++k)
    s.attributes.push_back(
        {"u" + std::to_string(k), cfg.levels_per_covariate(), false, {}});
  for (int j = 1; j <= cfg.J; ++j) s.choices.push_back("c" + std::to_string(j));
  s.state_covariates = {"z"};
  s.area_attribute = "area";
  s.num_days = 0;
  return s;
}

int discretize(double x, const std::vector<double>& cutoffs) {
  int level = 0;
  while (level < static_cast<int>(cutoffs.size()) && x >= cutoffs[level]) ++level;
  return level;
}

}  // namespace

Population gen_population(const PopulationConfig& cfg, const AdjacencyGraph& graph,
                          Rng& rng) {
  cfg.validate();
  if (graph.num_nodes != cfg.L) throw DataError("graph size != number of areas");
  const int J = cfg.J, L = cfg.L, K = cfg.num_covariates;
  const int U = cfg.levels_per_covariate();

  // model effects
  Eigen::VectorXd alpha(J);
  for (int j = 0; j < J; ++j) alpha[j] = rnorm(rng);
  std::vector<Eigen::MatrixXd> gamma_u(K);  // levels x J
  for (int k = 0; k < K; ++k) {
    gamma_u[k].resize(U, J);
    for (int u = 0; u < U; ++u)
      for (int j = 0; j < J; ++j) gamma_u[k](u, j) = rnorm(rng);
  }
  Eigen::VectorXd beta(J), z(L);
  for (int j = 0; j < J; ++j) beta[j] = 2.0 * runif(rng) - 1.0;
  for (int l = 0; l < L; ++l) z[l] = rnorm(rng);

  // spatial effect per choice: unit-variance SAR field mixed with white noise
  Eigen::MatrixXd gamma_area(L, J);
  for (int j = 0; j < J; ++j) {
    Eigen::VectorXd psi = sample_sar_psi(graph, cfg.sar_candidates, rng);
    double sd = std::sqrt((psi.array() - psi.mean()).square().sum() / (L - 1));
    psi = (psi.array() - psi.mean()) / sd;
    double xi = runif(rng);
    for (int l = 0; l < L; ++l)
      gamma_area(l, j) = std::sqrt(1.0 - xi) * rnorm(rng) + std::sqrt(xi) * psi[l];
  }

  // area shares: symmetric Dirichlet via normalized gammas
  Eigen::VectorXd area_share(L);
  {
    std::gamma_distribution<double> g(1.0, 1.0);
    for (int l = 0; l < L; ++l) area_share[l] = g(rng);
    area_share /= area_share.sum();
  }
  std::vector<double> area_cdf(L);
  double acc = 0.0;
  for (int l = 0; l < L; ++l) area_cdf[l] = (acc += area_share[l]);

  // cell index layout: area-major, then covariate levels
  const long cells_per_area = static_cast<long>(std::pow(U, K));
  const long M = L * cells_per_area;
  Schema schema = simulation_schema(cfg);

  // exact softmax probability per cell
  Population pop;
  pop.truth.resize(M, J);
  std::vector<Cell> cell_list(M);
  for (long m = 0; m < M; ++m) {
    int l = static_cast<int>(m / cells_per_area);
    long rest = m % cells_per_area;
    std::vector<int> levels(1 + K);
    levels[0] = l;
    for (int k = K - 1; k >= 0; --k) {
      levels[1 + k] = static_cast<int>(rest % U);
      rest /= U;
    }
    Eigen::VectorXd mu(J);
    for (int j = 0; j < J; ++j) {
      mu[j] = alpha[j] + gamma_area(l, j) + beta[j] * z[l];
      for (int k = 0; k < K; ++k) mu[j] += gamma_u[k](levels[1 + k], j);
    }
    double mx = mu.maxCoeff();
    Eigen::VectorXd e = (mu.array() - mx).exp();
    pop.truth.row(m) = (e / e.sum()).transpose();
    cell_list[m].levels = std::move(levels);
    cell_list[m].weight = 0.0;
  }

  // individuals: correlated covariates, area, then a categorical choice
  const double rho = runif(rng);
  const double sq_rho = std::sqrt(rho), sq_1mrho = std::sqrt(1.0 - rho);
  pop.counts = Eigen::MatrixXd::Zero(M, J);
  for (long i = 0; i < cfg.N; ++i) {
    double common = rnorm(rng);
    long cell = 0;
    for (int k = 0; k < K; ++k) {
      double x = sq_rho * common + sq_1mrho * rnorm(rng);
      cell = cell * U + discretize(x, cfg.cutoffs);
    }
    double u = runif(rng);
    int l = static_cast<int>(std::lower_bound(area_cdf.begin(), area_cdf.end(), u) -
                             area_cdf.begin());
    l = std::min(l, L - 1);
    cell += static_cast<long>(l) * cells_per_area;

    double v = runif(rng);
    double csum = 0.0;
    int choice = J - 1;
    for (int j = 0; j < J; ++j) {
      csum += pop.truth(cell, j);
      if (v < csum) {
        choice = j;
        break;
      }
    }
    pop.counts(cell, choice) += 1.0;
    cell_list[cell].weight += 1.0;
  }

  pop.schema = schema;
  pop.z = z;
  pop.frame = make_frame(schema, std::move(cell_list));
  pop.prevalence.assign(J, 0.0);
  for (int j = 0; j < J; ++j)
    pop.prevalence[j] = pop.counts.col(j).sum() / static_cast<double>(cfg.N);

  // state covariate table from z
  return pop;
}

const std::vector<ScenarioSpec>& all_scenarios() {
  static const std::vector<ScenarioSpec> table = {
      {"S.0", false, Likelihood::Bernoulli, true, false},
      {"S.1", false, Likelihood::Bernoulli, false, false},
      {"S.2", false, Likelihood::Multinomial, true, false},
      {"S.3", false, Likelihood::Multinomial, false, false},
      {"S.4", true, Likelihood::Bernoulli, true, false},
      {"S.5", true, Likelihood::Bernoulli, false, false},
      {"S.6", true, Likelihood::Multinomial, true, false},
      {"S.7", true, Likelihood::Multinomial, false, false},
      {"S.8", true, Likelihood::Bernoulli, true, true},
      {"S.9", true, Likelihood::Bernoulli, false, true},
  };
  return table;
}

ScenarioSpec scenario(const std::string& id) {
  for (const auto& s : all_scenarios())
    if (s.id == id) return s;
  std::string valid;
  for (const auto& s : all_scenarios()) valid += (valid.empty() ? "" : ", ") + s.id;
  throw DataError("unknown scenario '" + id + "' (valid: " + valid + ")");
}

Metrics score(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate,
              const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const Eigen::Index n = truth.size();
  if (estimate.size() != n || lo.size() != n || hi.size() != n)
    throw DataError("score inputs differ in length");
  if (n < 1) throw DataError("nothing to score");
  Metrics m;
  Eigen::VectorXd err = truth - estimate;
  m.bias = err.mean();
  m.rmse = std::sqrt(err.squaredNorm() / n);
  double st = (truth.array() - truth.mean()).matrix().norm();
  double se = (estimate.array() - estimate.mean()).matrix().norm();
  if (st > 0.0 && se > 0.0) {
    m.pearson = (truth.array() - truth.mean()).matrix().dot(
                    (estimate.array() - estimate.mean()).matrix()) /
                (st * se);
  } else {
    m.pearson = std::numeric_limits<double>::quiet_NaN();
  }
  int covered = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (lo[i] < truth[i] && truth[i] < hi[i]) ++covered;
  m.coverage = static_cast<double>(covered) / n;
  return m;
}

namespace {

SurveyDataset counts_to_survey(const Population& pop, const Eigen::MatrixXd& counts) {
  SurveyDataset ds;
  ds.schema = pop.schema;
  const Eigen::Index M = counts.rows(), J = counts.cols();
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index j = 0; j < J; ++j)
      for (long r = 0; r < static_cast<long>(counts(m, j)); ++r) {
        SurveyRow row;
        row.levels = pop.frame.cells[m].levels;
        row.choice = static_cast<int>(j);
        ds.rows.push_back(std::move(row));
      }
  if (ds.rows.empty()) throw DataError("no respondents");
  return ds;
}

}  // namespace

std::vector<ScenarioResult> run_scenario(const Population& pop,
                                         const AdjacencyGraph& graph,
                                         const ScenarioSpec& spec,
                                         const SimOptions& opt, Rng& rng) {
  const int J = static_cast<int>(pop.truth.cols());

  // selection penalties
  SelectionConfig sel;
  sel.mean.assign(J, 0.0);
  sel.variance.assign(J, 0.0);
  if (spec.selected) {
    for (int j = 0; j < J; ++j) {
      double mu = opt.penalty_mean.empty() ? runif(rng) : opt.penalty_mean.at(j);
      sel.mean[j] = mu;
      sel.variance[j] = 0.5 * max_penalty_variance(mu);
    }
  }
  auto sample = draw_online_selected_sample(pop.counts, sel, opt.n, rng);
  auto survey = counts_to_survey(pop, sample.counts);
  auto cov = pop.covariates();

  auto area_truth = pop.area_truth();
  auto shared_graph = std::make_shared<AdjacencyGraph>(graph);

  std::vector<ScenarioResult> out;
  auto finish = [&](int j, const PosteriorDraws& draws, const ModelSpec& mspec,
                    const ModelData& cell_data, long n1) {
    auto cells = predict_cells(draws, mspec, cell_data);
    int k = 0;
    for (size_t q = 0; q < cells.choice.size(); ++q)
      if (cells.choice[q] == j) k = static_cast<int>(q);

    ScenarioResult r;
    r.scenario = spec.id;
    r.choice = j;
    r.n = opt.n;
    r.prevalence = pop.prevalence[j];
    r.penalty_mean = sel.mean[j];
    r.sample_prevalence_bias =
        static_cast<double>(n1) / static_cast<double>(opt.n) - pop.prevalence[j];

    auto area_draws = aggregate(cells.prob[k], pop.frame, pop.schema.area_index());
    auto area_sum = summarize(area_draws);
    const int L = static_cast<int>(area_sum.size());
    Eigen::VectorXd est(L), lo(L), hi(L);
    for (int l = 0; l < L; ++l) {
      est[l] = area_sum[l].mean;
      lo[l] = area_sum[l].q5;
      hi[l] = area_sum[l].q95;
    }
    r.theta = score(area_truth.col(j), est, lo, hi);

    auto cell_sum = summarize(cells.prob[k]);
    const int M = static_cast<int>(cell_sum.size());
    Eigen::VectorXd cest(M), clo(M), chi(M);
    for (int m = 0; m < M; ++m) {
      cest[m] = cell_sum[m].mean;
      clo[m] = cell_sum[m].q5;
      chi[m] = cell_sum[m].q95;
    }
    r.pi = score(pop.truth.col(j), cest, clo, chi);

    int divergences = 0;
    for (const auto& cs : draws.chain_stats) divergences += cs.divergences;
    r.flagged = divergences > opt.divergence_flag_threshold;
    out.push_back(std::move(r));
  };

  if (spec.likelihood == Likelihood::Bernoulli) {
    for (int j = 0; j < J; ++j) {
      long n1 = static_cast<long>(sample.counts.col(j).sum());
      double offset = 0.0;
      if (spec.corrected)
        offset = king_zeng_offset(n1, opt.n, pop.prevalence[j],
                                  static_cast<double>(pop.frame.total_weight));
      auto mspec = make_model_spec(pop.schema, Likelihood::Bernoulli, j,
                                   spec.structured, offset,
                                   spec.structured ? shared_graph : nullptr);
      if (!spec.structured) mspec = unstructured_variant(mspec);
      auto data = build_training_data(mspec, pop.schema, survey, cov);
      SamplerConfig scfg = opt.sampler;
      scfg.seed = mix_seed(opt.sampler.seed, static_cast<std::uint64_t>(j + 1));
      auto draws = run_chains(data, mspec, scfg);
      auto cell_data = build_cell_data(mspec, pop.frame, cov, -1);
      finish(j, draws, mspec, cell_data, n1);
    }
  } else {
    auto mspec = make_model_spec(pop.schema, Likelihood::Multinomial, 0,
                                 spec.structured, 0.0,
                                 spec.structured ? shared_graph : nullptr);
    if (!spec.structured) mspec = unstructured_variant(mspec);
    auto data = build_training_data(mspec, pop.schema, survey, cov);
    auto draws = run_chains(data, mspec, opt.sampler);
    auto cell_data = build_cell_data(mspec, pop.frame, cov, -1);
    for (int j = 0; j < J; ++j)
      finish(j, draws, mspec, cell_data,
             static_cast<long>(sample.counts.col(j).sum()));
  }
  return out;
}

std::vector<SweepRow> stimulus_sweep(const std::vector<ScenarioResult>& rows,
                                     const std::string& stimulus, int bins) {
  if (bins < 1) throw DataError("need at least one bin");
  auto value = [&](const ScenarioResult& r) -> double {
    if (stimulus == "n") return static_cast<double>(r.n);
    if (stimulus == "prevalence") return r.prevalence;
    if (stimulus == "penalty") return r.penalty_mean;
    if (stimulus == "sample_bias") return std::abs(r.sample_prevalence_bias);
    throw DataError("unknown stimulus '" + stimulus + "'");
  };
  if (rows.empty()) return {};
  double lo = value(rows[0]), hi = lo;
  for (const auto& r : rows) {
    lo = std::min(lo, value(r));
    hi = std::max(hi, value(r));
  }
  double width = hi > lo ? (hi - lo) / bins : 1.0;

  std::map<std::pair<std::string, int>, std::vector<const ScenarioResult*>> groups;
  for (const auto& r : rows) {
    int b = width > 0.0 ? std::min(bins - 1, static_cast<int>((value(r) - lo) / width))
                        : 0;
    groups[{r.scenario, b}].push_back(&r);
  }
  std::vector<SweepRow> out;
  for (const auto& [key, members] : groups) {
    SweepRow s;
    s.scenario = key.first;
    s.bin_center = lo + (key.second + 0.5) * width;
    s.count = static_cast<int>(members.size());
    for (const auto* r : members) {
      s.theta.bias += r->theta.bias / members.size();
      s.theta.rmse += r->theta.rmse / members.size();
      s.theta.pearson += r->theta.pearson / members.size();
      s.theta.coverage += r->theta.coverage / members.size();
      s.pi.bias += r->pi.bias / members.size();
      s.pi.rmse += r->pi.rmse / members.size();
      s.pi.pearson += r->pi.pearson / members.size();
      s.pi.coverage += r->pi.coverage / members.size();
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_simreport(const std::string& path, const std::vector<ScenarioResult>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "replicate,scenario,choice,target,metric,value,n,prevalence,penalty_mean,"
         "sample_prevalence_bias,flagged\n";
  auto emit = [&](const ScenarioResult& r, const char* target, const char* metric,
                  double v) {
    out << r.replicate << ',' << r.scenario << ',' << (r.choice + 1) << ',' << target
        << ',' << metric << ',' << v << ',' << r.n << ',' << r.prevalence << ','
        << r.penalty_mean << ',' << r.sample_prevalence_bias << ','
        << (r.flagged ? 1 : 0) << '\n';
  };
  for (const auto& r : rows) {
    emit(r, "theta", "bias", r.theta.bias);
    emit(r, "theta", "rmse", r.theta.rmse);
    emit(r, "theta", "pearson", r.theta.pearson);
    emit(r, "theta", "coverage", r.theta.coverage);
    emit(r, "pi", "bias", r.pi.bias);
    emit(r, "pi", "rmse", r.pi.rmse);
    emit(r, "pi", "pearson", r.pi.pearson);
    emit(r, "pi", "coverage", r.pi.coverage);
  }
}

}  // namespace aip
