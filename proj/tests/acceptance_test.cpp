// Acceptance gate: one pass/fail line per criterion, tolerances pinned below.
// Run with no arguments for all criteria, or pass criterion numbers to run a
// subset (e.g. "acceptance_test 3 7").

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aip/agreement.hpp"
#include "aip/annotate.hpp"
#include "aip/correction.hpp"
#include "aip/poststrat.hpp"
#include "aip/simstudy.hpp"

using namespace aip;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s — %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

double spearman(std::vector<double> x, std::vector<double> y) {
  auto ranks = [](std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(rx.size());
  const double m = (n - 1.0) / 2.0;
  double num = 0, vx = 0, vy = 0;
  for (size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - m) * (ry[i] - m);
    vx += (rx[i] - m) * (rx[i] - m);
    vy += (ry[i] - m) * (ry[i] - m);
  }
  return num / std::sqrt(vx * vy);
}

// ------------------------------------------------- criteria 1 & 2 (shared)

// Desk-scale study: N = 1e5 population, 51 areas, n = 2000, 10 replicates,
// J = 3, scenarios S.0 (random sampling), S.4 (online-selected, uncorrected)
// and S.8 (online-selected, corrected). Each replicate reuses one random
// stream per scenario family so S.4 and S.8 face identical selection draws.
void criteria_1_2() {
  const auto t0 = std::chrono::steady_clock::now();
  PopulationConfig pc;
  pc.N = 100000;
  pc.L = 51;
  pc.J = 3;
  pc.sar_candidates = 200;
  const AdjacencyGraph graph = ring_lattice_graph(pc.L);

  SimOptions opt;
  opt.n = 2000;
  opt.sampler.chains = 4;
  opt.sampler.iterations = 400;
  opt.sampler.warmup = 200;
  opt.sampler.thin = 2;

  const std::vector<std::string> ids = {"S.0", "S.4", "S.8"};
  std::map<std::string, std::vector<ScenarioResult>> rows;
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    Rng pop_rng = make_stream(2026, static_cast<std::uint64_t>(rep));
    const Population pop = gen_population(pc, graph, pop_rng);
    for (const std::string& id : ids) {
      Rng rng = make_stream(mix_seed(2026, 77), static_cast<std::uint64_t>(rep));
      opt.sampler.seed = mix_seed(4000 + rep, std::hash<std::string>{}(id));
      auto batch = run_scenario(pop, graph, scenario(id), opt, rng);
      for (auto& r : batch) {
        r.replicate = rep;
        rows[id].push_back(std::move(r));
      }
    }
    std::fprintf(stderr, "  [desk-scale] replicate %d/%d done\n", rep + 1, reps);
  }

  auto mean_abs_bias = [&](const std::string& id) {
    double s = 0;
    for (const auto& r : rows[id]) s += std::abs(r.theta.bias);
    return s / static_cast<double>(rows[id].size());
  };
  auto mean_coverage = [&](const std::string& id) {
    double s = 0;
    for (const auto& r : rows[id]) s += r.theta.coverage;
    return s / static_cast<double>(rows[id].size());
  };
  const double mab0 = mean_abs_bias("S.0");
  const double mab4 = mean_abs_bias("S.4");
  const double mab8 = mean_abs_bias("S.8");
  const double cov4 = mean_coverage("S.4");
  const double cov8 = mean_coverage("S.8");
  const auto t1 = std::chrono::steady_clock::now();
  const double minutes =
      std::chrono::duration_cast<std::chrono::seconds>(t1 - t0).count() / 60.0;

  const bool gap = mab4 - mab8 >= 0.04;            // correction removes bias
  const bool close = std::abs(mab8 - mab0) <= 0.02;  // corrected ~ random sampling
  const bool cover = cov8 - cov4 >= 0.15;          // correction restores coverage
  const bool fast = minutes <= 90.0;
  report(1, gap && close && cover && fast,
         "desk-scale study: mean|theta-bias| S.0=" + fmt(mab0) + " S.4=" + fmt(mab4) +
             " S.8=" + fmt(mab8) + " (gap>=0.04: " + (gap ? "yes" : "no") +
             ", |S.8-S.0|<=0.02: " + (close ? "yes" : "no") +
             "); coverage S.4=" + fmt(cov4) + " S.8=" + fmt(cov8) +
             " (gain>=0.15: " + (cover ? "yes" : "no") + "); runtime " +
             fmt(minutes) + " min (<=90)");

  auto rank_corr = [&](const std::string& id) {
    std::vector<double> stim, rmse;
    for (const auto& r : rows[id]) {
      stim.push_back(std::abs(r.sample_prevalence_bias));
      rmse.push_back(r.theta.rmse);
    }
    return spearman(stim, rmse);
  };
  const double rc4 = rank_corr("S.4");
  const double rc8 = rank_corr("S.8");
  report(2, rc4 > 0.7 && rc8 < 0.4,
         "rank corr of theta-RMSE with |sample-prevalence bias|: uncorrected S.4=" +
             fmt(rc4) + " (>0.7), corrected S.8=" + fmt(rc8) + " (<0.4)");
}

// ------------------------------------------------------------- criterion 3

Schema small_schema() {
  Schema s;
  s.attributes = {{"state", 6, false, {}},
                  {"grp", 3, false, {}},
                  {"ord", 4, true, {}}};
  s.choices = {"a", "b", "c"};
  s.state_covariates = {"x1", "x2"};
  s.area_attribute = "state";
  s.num_days = 0;
  return s;
}

void criterion_3() {
  const Schema schema = small_schema();
  auto graph = std::make_shared<AdjacencyGraph>(
      build_graph(6, {{0, 1}, {1, 2}, {2, 0}, {3, 4}}));  // node 5 is an island
  Rng rng = make_stream(303, 0);

  SurveyDataset survey;
  survey.schema = schema;
  for (int i = 0; i < 40; ++i) {
    SurveyRow r;
    r.levels = {static_cast<int>(runif(rng) * 6), static_cast<int>(runif(rng) * 3),
                static_cast<int>(runif(rng) * 4)};
    r.choice = static_cast<int>(runif(rng) * 3);
    survey.rows.push_back(r);
  }
  CovariateTables cov = zero_covariates(schema);
  for (int l = 0; l < 6; ++l)
    for (int k = 0; k < 2; ++k) cov.state_values[l][k] = rnorm(rng);

  double worst = 0.0;
  int checks = 0;
  // every likelihood x structure x offset combination (offsets are a
  // Bernoulli-only concept)
  for (const Likelihood lik : {Likelihood::Bernoulli, Likelihood::Multinomial}) {
    for (const bool structured : {true, false}) {
      for (const double offset : {0.0, 0.8}) {
        if (lik == Likelihood::Multinomial && offset != 0.0) continue;
        ModelSpec spec = make_model_spec(schema, lik, 1, structured, offset, graph);
        const ModelData data = build_training_data(spec, schema, survey, cov);
        const int dim = spec.layout().dim;
        for (int point = 0; point < 20; ++point) {
          Eigen::VectorXd theta(dim);
          for (int d = 0; d < dim; ++d) theta(d) = 0.4 * rnorm(rng);
          Eigen::VectorXd grad(dim);
          log_posterior_with_grad(theta, data, spec, grad);
          for (int d = 0; d < dim; ++d) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta(d)));
            Eigen::VectorXd tp = theta, tm = theta;
            tp(d) += h;
            tm(d) -= h;
            const double fd =
                (log_posterior(tp, data, spec) - log_posterior(tm, data, spec)) /
                (2.0 * h);
            const double rel = std::abs(fd - grad(d)) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, rel);
            ++checks;
          }
        }
      }
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "analytic vs central-difference gradients: %d checks, worst "
                "relative error %.2e (<1e-5)",
                checks, worst);
  report(3, worst < 1e-5, buf);
}

// ------------------------------------------------------------- criterion 4

void criterion_4() {
  const int dim = 50;
  const LogDensity target = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -x;
    return -0.5 * x.squaredNorm();
  };
  BlockIndex index;
  index.blocks.push_back({"x", 0, dim});
  index.dim = dim;

  SamplerConfig cfg;
  cfg.chains = 8;
  cfg.iterations = 2750;
  cfg.warmup = 250;
  cfg.thin = 2;
  cfg.seed = 404;
  const PosteriorDraws draws = run_chains(target, dim, index, cfg);
  const int total = static_cast<int>(draws.draws.rows());

  double worst_z = 0.0;
  for (int d = 0; d < dim; ++d) {
    const ScalarDiagnostics diag = diagnose(draws.draws.col(d), cfg.chains);
    worst_z = std::max(worst_z, std::abs(diag.mean) * std::sqrt(diag.ess));
  }

  // Kolmogorov-Smirnov distance of the first coordinate against N(0,1)
  std::vector<double> xs(draws.draws.col(0).data(), draws.draws.col(0).data() + total);
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int i = 0; i < total; ++i) {
    const double cdf = 0.5 * std::erfc(-xs[i] / std::sqrt(2.0));
    ks = std::max(ks, std::max(std::abs(cdf - (i + 1.0) / total),
                               std::abs(cdf - static_cast<double>(i) / total)));
  }

  SamplerConfig one = cfg, four = cfg;
  one.threads = 1;
  four.threads = 4;
  const bool deterministic =
      run_chains(target, dim, index, one).draws == run_chains(target, dim, index, four).draws;

  report(4, worst_z < 4.0 && total >= 10000 && ks < 0.02 && deterministic,
         "50-dim normal: worst ESS z-score " + fmt(worst_z) + " (<4), KS " +
             fmt(ks) + " (<0.02) at " + std::to_string(total) +
             " draws, thread-count determinism " +
             (deterministic ? "bitwise" : "BROKEN"));
}

// ------------------------------------------------------------- criterion 5

void criterion_5() {
  // logistic DGP with known intercept; cases are oversampled three-to-one
  // relative to their population share, the classic case-control distortion
  const double true_alpha = -2.0, true_beta = 0.8;
  const int population = 40000, n1_target = 400;
  int covered_corrected = 0, covered_uncorrected = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = make_stream(505, static_cast<std::uint64_t>(rep));
    std::vector<double> x(population);
    std::vector<int> y(population);
    long N1 = 0;
    for (int i = 0; i < population; ++i) {
      x[i] = rnorm(rng);
      y[i] = runif(rng) < logistic(true_alpha + true_beta * x[i]) ? 1 : 0;
      N1 += y[i];
    }
    const long N0 = population - N1;
    // sample n1 cases and 3*n1 controls
    std::vector<int> cases, controls;
    for (int i = 0; i < population; ++i) (y[i] ? cases : controls).push_back(i);
    std::shuffle(cases.begin(), cases.end(), rng);
    std::shuffle(controls.begin(), controls.end(), rng);
    const int n1 = std::min<int>(n1_target, static_cast<int>(cases.size()));
    const int n0 = 3 * n1;
    std::vector<int> sample(cases.begin(), cases.begin() + n1);
    sample.insert(sample.end(), controls.begin(), controls.begin() + n0);

    const double offset =
        king_zeng_offset(static_cast<double>(n1), static_cast<double>(n0),
                         static_cast<double>(N1), static_cast<double>(N0));
    auto fit = [&](double off) {
      const LogDensity target = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
        double lp = -p.squaredNorm() / 200.0;  // N(0, 100) priors
        g = -p / 100.0;
        for (int idx : sample) {
          const double eta = off + p(0) + p(1) * x[idx];
          lp += y[idx] * eta - log1p_exp(eta);
          const double r = y[idx] - logistic(eta);
          g(0) += r;
          g(1) += r * x[idx];
        }
        return lp;
      };
      BlockIndex index;
      index.blocks.push_back({"alpha", 0, 1});
      index.blocks.push_back({"beta", 1, 1});
      index.dim = 2;
      SamplerConfig cfg;
      cfg.chains = 2;
      cfg.iterations = 400;
      cfg.warmup = 200;
      cfg.thin = 1;
      cfg.seed = mix_seed(606, rep);
      const PosteriorDraws draws = run_chains(target, 2, index, cfg);
      const ScalarDiagnostics d = diagnose(draws.column("alpha"), cfg.chains);
      return std::pair<double, double>(d.q5, d.q95);
    };
    const auto [clo, chi] = fit(offset);  // intercept is corrected in-fit
    const auto [ulo, uhi] = fit(0.0);
    if (clo <= true_alpha && true_alpha <= chi) ++covered_corrected;
    if (ulo <= true_alpha && true_alpha <= uhi) ++covered_uncorrected;
  }
  const double cc = covered_corrected / static_cast<double>(reps);
  const double cu = covered_uncorrected / static_cast<double>(reps);
  report(5, cc >= 0.80 && cu <= 0.30,
         "case-control intercept recovery over 50 replicates: corrected 90% CI "
         "coverage " + fmt(cc) + " (>=0.80), uncorrected " + fmt(cu) + " (<=0.30)");
}

// ------------------------------------------------------------- criterion 6

void criterion_6() {
  Rng rng = make_stream(707, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Schema schema;
    const int l1 = 2 + static_cast<int>(runif(rng) * 4);  // 2..5 areas
    const int l2 = 2 + static_cast<int>(runif(rng) * 3);  // 2..4 groups
    schema.attributes = {{"state", l1, false, {}}, {"g", l2, false, {}}};
    schema.choices = {"a", "b"};
    std::vector<Cell> cells;
    for (int a = 0; a < l1; ++a)
      for (int b = 0; b < l2; ++b) {
        if (cells.size() >= 20) break;
        cells.push_back({{a, b}, 0.25 + runif(rng) * 10.0});
      }
    const StratificationFrame frame = make_frame(schema, cells);
    const int draws = 7;
    Eigen::MatrixXd prob(draws, cells.size());
    for (int d = 0; d < draws; ++d)
      for (size_t m = 0; m < cells.size(); ++m) prob(d, m) = runif(rng);

    for (int attr = -1; attr < 2; ++attr) {
      const Eigen::MatrixXd got = aggregate(prob, frame, attr);
      const int levels = attr < 0 ? 1 : schema.attributes[attr].cardinality;
      for (int lvl = 0; lvl < levels; ++lvl) {
        for (int d = 0; d < draws; ++d) {
          double num = 0, den = 0;  // brute-force weighted average
          for (size_t m = 0; m < cells.size(); ++m) {
            if (attr >= 0 && frame.cells[m].levels[attr] != lvl) continue;
            num += prob(d, m) * frame.cells[m].weight;
            den += frame.cells[m].weight;
          }
          worst = std::max(worst, std::abs(got(d, lvl) - num / den));
        }
      }
    }
  }

  // turnout renormalization: party rows sum to exactly one
  double worst_sum = 0.0;
  {
    const int draws = 5, cells = 12, J = 5;
    CellPosterior cp;
    for (int j = 0; j < J; ++j) {
      cp.choice.push_back(j);
      Eigen::MatrixXd m(draws, cells);
      for (int d = 0; d < draws; ++d)
        for (int c = 0; c < cells; ++c) m(d, c) = 0.05 + 0.9 * runif(rng);
      cp.prob.push_back(m);
    }
    const CellPosterior norm = normalize_turnout(cp, 4, J);
    for (int d = 0; d < draws; ++d) {
      for (int c = 0; c < cells; ++c) {
        double s = 0;
        for (size_t k = 0; k < norm.choice.size(); ++k) s += norm.prob[k](d, c);
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "aggregate vs brute-force oracle on 100 random frames: worst "
                "abs error %.2e (<1e-12); turnout row-sum error %.2e (<1e-12)",
                worst, worst_sum);
  report(6, worst < 1e-12 && worst_sum < 1e-12, buf);
}

// ------------------------------------------------------------- criterion 7

AgreementMatrix vote_matrix() {
  AgreementMatrix a;
  a.labels = {"D", "G", "L", "R", "stay home"};
  a.counts = Eigen::MatrixXd(5, 5);
  a.counts << 1906, 3, 4, 50, 234,
      3, 5, 0, 0, 0,
      0, 0, 7, 0, 2,
      40, 0, 6, 864, 59,
      185, 2, 1, 95, 71;
  return a;
}

void criterion_7() {
  // frozen output of an exact-rational reference implementation: 452003/706631
  const double oracle = 0.639659171477051;
  const double got =
      krippendorff_alpha(expand_to_units(vote_matrix()), 5, AlphaLevel::Nominal).alpha;

  const double perfect =
      krippendorff_alpha({{0, 0}, {1, 1}, {2, 2}}, 3, AlphaLevel::Nominal).alpha;

  Rng rng = make_stream(808, 0);
  std::uniform_int_distribution<int> lab(0, 4);
  std::vector<std::vector<int>> units(100000);
  for (auto& u : units) u = {lab(rng), lab(rng)};
  const double chance = krippendorff_alpha(units, 5, AlphaLevel::Nominal).alpha;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "alpha: |%.15f - oracle| = %.2e (<1e-9); perfect agreement %.3f "
                "(=1); independent raters %.4f (|.|<0.02)",
                got, std::abs(got - oracle), perfect, chance);
  report(7, std::abs(got - oracle) < 1e-9 && perfect == 1.0 && std::abs(chance) < 0.02,
         buf);
}

// ------------------------------------------------------------- criterion 8

void criterion_8() {
  const int L = 6;
  Rng rng = make_stream(909, 0);
  Eigen::VectorXd b1(L), b2(L);
  for (int i = 0; i < L; ++i) { b1(i) = 0.3 * rnorm(rng); b2(i) = 0.3 * rnorm(rng); }
  AgreementMatrix a;
  std::vector<int> truth;
  a.counts = Eigen::MatrixXd::Zero(L, L);
  for (int i = 0; i < L; ++i) {
    a.labels.push_back("l" + std::to_string(i));
    for (int j = 0; j < L; ++j) {
      const int link = runif(rng) < 0.5 ? 1 : 0;
      truth.push_back(link);
      const double mu = std::exp(3.0 + b1(i) + b2(j)) * (1.0 + 5.0 * link);
      a.counts(i, j) = static_cast<double>(std::poisson_distribution<long>(mu)(rng));
    }
  }
  NetworkConfig cfg;
  cfg.seed = 910;
  cfg.iterations = 6000;
  cfg.warmup = 2000;
  cfg.thin = 2;
  const NetworkPosterior post = fit_agreement_network(a, cfg);
  double wins = 0;
  long pairs = 0;
  for (int p = 0; p < L * L; ++p) {
    if (truth[p] != 1) continue;
    for (int q = 0; q < L * L; ++q) {
      if (truth[q] != 0) continue;
      ++pairs;
      const double sp = post.mean_incidence(p / L, p % L);
      const double sq = post.mean_incidence(q / L, q % L);
      wins += sp > sq ? 1.0 : (sp == sq ? 0.5 : 0.0);
    }
  }
  const double auc = wins / static_cast<double>(pairs);

  NetworkConfig zero = cfg;
  zero.fix_r_zero = true;
  const NetworkPosterior flat = fit_agreement_network(a, zero);
  const double worst_dev = (flat.mean_incidence.array() - 0.5).abs().maxCoeff();

  report(8, auc >= 0.9 && worst_dev <= 0.05,
         "latent-link network: planted-link AUC " + fmt(auc) +
             " (>=0.9) at 2000 retained draws; r=0 incidence max |B-0.5| = " +
             fmt(worst_dev) + " (<=0.05)");
}

// ------------------------------------------------------------- criterion 9

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_9() {
  UserRecord loc_user;
  loc_user.location = "Sunny Miami, FL!";
  const bool loc_ok = build_location_prompt(loc_user) ==
                      slurp(std::string(AIP_TEST_DATA_DIR) + "/location_prompt.txt");

  UserRecord demo_user;
  demo_user.bio = "Politics junkie. Coffee first.";
  demo_user.tweets = {"Just voted early!", "What a debate last night."};
  std::vector<int> order(10);
  std::iota(order.begin(), order.end(), 0);
  const bool demo_ok = build_demo_prompt(demo_user, 10, order) ==
                       slurp(std::string(AIP_TEST_DATA_DIR) + "/demo_prompt.txt");

  // uniformity of the first category block over seeds
  const auto& blocks = annotation_blocks();
  std::vector<std::string> headers;
  for (const auto& b : blocks) headers.push_back(b.text.substr(0, b.text.find('\n') + 1));
  const std::string anchor = "selected identifier.\n";
  std::map<size_t, int> first;
  const int trials = 10000;
  UserRecord u;
  u.bio = "b";
  u.tweets = {"t"};
  for (int seed = 0; seed < trials; ++seed) {
    Rng rng = make_stream(static_cast<std::uint64_t>(seed), 0);
    const std::string p = build_demo_prompt(u, 5, rng);
    const size_t start = p.find(anchor) + anchor.size();
    for (size_t k = 0; k < headers.size(); ++k)
      if (p.compare(start, headers[k].size(), headers[k]) == 0) {
        ++first[k];
        break;
      }
  }
  bool uniform = true;
  for (size_t k = 0; k < blocks.size(); ++k)
    uniform = uniform && std::abs(first[k] / static_cast<double>(trials) - 0.1) <= 0.01;

  const Annotation parsed = parse_demo_answer(
      "HIGHEST EDUCATIONAL QUALIFICATION: Q2\nTHIS INDIVIDUAL IS REGISTERED AS: R2\n"
      "ETHNICITY: E1\n2016 US PRESIDENTIAL ELECTION VOTE: L3\nSEX: S1\nAGE: A5\n"
      "MARITAL STATUS: M1\n2020 US PRESIDENTIAL ELECTION VOTE: V3\n"
      "2018 MIDTERM ELECTION VOTE: T3\nHOUSEHOLD INCOME BRACKET: H5\n");
  const std::map<std::string, std::string> expected = {
      {"education", "Q2"}, {"registration", "R2"}, {"ethnicity", "E1"},
      {"vote2016", "L3"},  {"sex", "S1"},          {"age", "A5"},
      {"marital", "M1"},   {"vote2020", "V3"},     {"vote2018", "T3"},
      {"income", "H5"}};
  const bool parse_ok = parsed.block_choice == expected;

  report(9, loc_ok && demo_ok && uniform && parse_ok,
         std::string("prompt fidelity: location golden ") + (loc_ok ? "ok" : "MISMATCH") +
             ", demographic golden " + (demo_ok ? "ok" : "MISMATCH") +
             ", first-block frequency within 1/10 +- 0.01 over 10^4 seeds: " +
             (uniform ? "yes" : "no") + ", sample answer parse " +
             (parse_ok ? "exact" : "WRONG"));
}

// ------------------------------------------------------------ criterion 10

// The published election accuracy table cannot be reproduced: it depends on a
// proprietary social-media corpus that is not redistributable. Instead the
// full pipeline is exercised end to end on a synthetic fixture corpus:
// annotate (mock transport) -> survey -> fit -> poststratify.
void criterion_10() {
  Rng rng = make_stream(1010, 0);
  const Schema schema = election_schema(0);

  // synthetic corpus: two users per state with scripted replies
  std::vector<UserRecord> users;
  std::map<std::string, std::pair<std::string, std::string>> replies;  // id -> (loc, demo)
  const char* sexes[] = {"S1", "S2"};
  const char* votes[] = {"V1", "V2", "V3", "V4", "V5"};
  std::vector<std::vector<int>> tuples;
  for (int s = 0; s < 51; ++s) {
    for (int k = 0; k < 2; ++k) {
      UserRecord u;
      u.id = "u" + std::to_string(s) + "_" + std::to_string(k);
      u.location = "home of " + u.id;
      u.bio = "bio of " + u.id;
      u.tweets = {"tweet"};
      const int sex = k, eth = static_cast<int>(runif(rng) * 5);
      const int age = static_cast<int>(runif(rng) * 6);
      const int edu = runif(rng) < 0.5 ? 1 : 0;
      const int inc = static_cast<int>(runif(rng) * 5);
      const int v16 = static_cast<int>(runif(rng) * 5);
      const int v20 = static_cast<int>(runif(rng) * 5);
      std::ostringstream demo;
      demo << sexes[sex] << " E" << (eth + 1) << " A" << (age + 2) << " Q"
           << (edu ? 3 : 2) << " H" << (inc + 1) << " M1 R2 L" << (v16 + 1)
           << " T1 " << votes[v20];
      replies[u.id] = {us_states()[s], demo.str()};
      users.push_back(u);
    }
  }
  MockTransport transport([&](const std::string& prompt) -> std::string {
    for (const auto& [id, pair] : replies) {
      if (prompt.find("home of " + id + "≫") != std::string::npos)
        return pair.first;
      if (prompt.find("bio of " + id) != std::string::npos) return pair.second;
    }
    return "";
  });
  AnnotateConfig acfg;
  acfg.backoff_ms = 0;
  const auto annotations = annotate_batch(users, transport, acfg);
  int successes = 0;
  for (const auto& a : annotations)
    if (a.outcome == AnnotationOutcome::Success) ++successes;
  const SurveyDataset survey = annotations_to_survey(annotations, schema);

  // frame covering the realized tuples plus every state
  std::set<std::vector<int>> cell_set;
  for (const auto& r : survey.rows) cell_set.insert(r.levels);
  for (int s = 0; s < 51; ++s) cell_set.insert({s, 0, 0, 2, 1, 2, 1});
  std::vector<Cell> cells;
  for (const auto& lv : cell_set) cells.push_back({lv, 100.0 + 900.0 * runif(rng)});
  const StratificationFrame frame = make_frame(schema, cells);
  const CovariateTables cov = zero_covariates(schema);
  auto graph = std::make_shared<AdjacencyGraph>(ring_lattice_graph(51));

  SamplerConfig sc;
  sc.chains = 2;
  sc.iterations = 200;
  sc.warmup = 100;
  sc.thin = 2;
  CellPosterior all;
  for (int j = 0; j < 5; ++j) {
    ModelSpec spec = make_model_spec(schema, Likelihood::Bernoulli, j, false, 0.0, graph);
    const ModelData data = build_training_data(spec, schema, survey, cov);
    sc.seed = mix_seed(1111, j);
    const PosteriorDraws draws = run_chains(data, spec, sc);
    const ModelData cell_data = build_cell_data(spec, frame, cov, -1);
    CellPosterior part = predict_cells(draws, spec, cell_data);
    all.choice.push_back(part.choice[0]);
    all.prob.push_back(std::move(part.prob[0]));
  }
  const CellPosterior turnout = normalize_turnout(all, 4, 5);

  bool valid = successes == static_cast<int>(users.size()) && survey.rows.size() >= 90;
  double worst_sum = 0.0;
  for (size_t k = 0; k < all.choice.size(); ++k) {
    const Eigen::MatrixXd state = aggregate(all.prob[k], frame, 0);
    valid = valid && state.cols() == 51;
    valid = valid && state.minCoeff() >= 0.0 && state.maxCoeff() <= 1.0;
  }
  {
    Eigen::MatrixXd total;
    for (size_t k = 0; k < turnout.choice.size(); ++k) {
      if (total.size() == 0) total = turnout.prob[k];
      else total += turnout.prob[k];
    }
    worst_sum = (total.array() - 1.0).abs().maxCoeff();
  }
  report(10, valid && worst_sum < 1e-12,
         "published election-accuracy table NOT reproducible (source corpus "
         "unavailable); synthetic annotate->fit->poststratify pipeline: " +
             std::to_string(successes) + "/" + std::to_string(users.size()) +
             " annotations, " + std::to_string(survey.rows.size()) +
             " survey rows, state margins in [0,1], turnout sums off by " +
             fmt(worst_sum));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };

  try {
    if (want(3)) criterion_3();
    if (want(4)) criterion_4();
    if (want(5)) criterion_5();
    if (want(6)) criterion_6();
    if (want(7)) criterion_7();
    if (want(8)) criterion_8();
    if (want(9)) criterion_9();
    if (want(10)) criterion_10();
    if (want(1) || want(2)) criteria_1_2();
  } catch (const std::exception& e) {
    std::printf("acceptance run aborted: %s\n", e.what());
    return 1;
  }
  if (g_failures == 0) {
    std::printf("all acceptance criteria PASS\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failures);
  return 1;
}
