// aipoll: command-line front end for structured MrP with online-selection
// bias correction, the simulation study, annotation and rater diagnostics.
//
// Exit codes: 0 success, 2 usage error, 3 data validation error,
// 4 numerical failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aip/agreement.hpp"
#include "aip/annotate.hpp"
#include "aip/correction.hpp"
#include "aip/csv.hpp"
#include "aip/poststrat.hpp"
#include "aip/simstudy.hpp"

namespace {

using namespace aip;
using nlohmann::json;

constexpr const char* kVersion = "aipoll 1.0.0";

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Effective settings of a run, recorded verbatim in the manifest so the run
// can be reproduced bit for bit.
using Settings = std::map<std::string, std::string>;

void write_manifest(const std::string& out_dir, const std::string& command,
                    const Settings& settings) {
  std::string flat;
  for (const auto& [k, v] : settings) flat += k + "=" + v + "\n";
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config"] = settings;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a(flat)));
  m["config_hash"] = std::string(hex);
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw DataError("cannot write '" + out_dir + "/manifest.json'");
  out << m.dump(2) << "\n";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "'");
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return out;
}

std::shared_ptr<const AdjacencyGraph> load_or_default_graph(
    const std::string& path, int num_areas) {
  if (path.empty())
    return std::make_shared<AdjacencyGraph>(ring_lattice_graph(num_areas));
  return std::make_shared<AdjacencyGraph>(load_adjacency(path, num_areas));
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string scenarios = "S.0";
  int replicates = 1;
  std::uint64_t seed = 0;
  std::string out;
  long population_size = 100000;
  int areas = 51;
  int choices = 3;
  long n = 2000;
  int sar_candidates = 200;
  std::string adjacency;
  int chains = 4, iterations = 300, warmup = 150, thin = 2, threads = 0;
};

int cmd_simulate(const SimulateOpts& o) {
  std::vector<ScenarioSpec> specs;
  std::stringstream ss(o.scenarios);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      specs.push_back(scenario(tok));
    } catch (const DataError& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 2;
    }
  }
  if (specs.empty()) {
    std::cerr << "usage error: no scenarios given\n";
    return 2;
  }
  ensure_dir(o.out);

  PopulationConfig pc;
  pc.N = o.population_size;
  pc.L = o.areas;
  pc.J = o.choices;
  pc.sar_candidates = o.sar_candidates;
  pc.validate();
  auto graph = load_or_default_graph(o.adjacency, o.areas);

  SimOptions opt;
  opt.n = o.n;
  opt.sampler.chains = o.chains;
  opt.sampler.iterations = o.iterations;
  opt.sampler.warmup = o.warmup;
  opt.sampler.thin = o.thin;
  opt.sampler.threads = o.threads;
  opt.sampler.validate();

  std::vector<ScenarioResult> rows;
  for (int rep = 0; rep < o.replicates; ++rep) {
    Rng pop_rng = make_stream(o.seed, static_cast<std::uint64_t>(rep));
    const Population pop = gen_population(pc, *graph, pop_rng);
    for (size_t s = 0; s < specs.size(); ++s) {
      Rng rng = make_stream(mix_seed(o.seed, 1000 + s), static_cast<std::uint64_t>(rep));
      opt.sampler.seed = mix_seed(o.seed, 5000 + rep * 100 + s);
      auto batch = run_scenario(pop, *graph, specs[s], opt, rng);
      for (auto& r : batch) {
        r.replicate = rep;
        rows.push_back(std::move(r));
      }
    }
  }
  write_simreport(o.out + "/simreport.csv", rows);

  // one condensed row per (scenario, replicate): metrics averaged over choices
  std::ofstream sum(o.out + "/summary.csv");
  sum << "scenario,replicate,choices,n,theta_bias,theta_abs_bias,theta_rmse,"
         "theta_coverage,pi_rmse,flagged\n";
  sum.precision(17);
  for (int rep = 0; rep < o.replicates; ++rep) {
    for (const auto& spec : specs) {
      double tb = 0, tab = 0, tr = 0, tc = 0, pr = 0;
      int count = 0;
      bool flagged = false;
      for (const auto& r : rows) {
        if (r.replicate != rep || r.scenario != spec.id) continue;
        ++count;
        tb += r.theta.bias;
        tab += std::abs(r.theta.bias);
        tr += r.theta.rmse;
        tc += r.theta.coverage;
        pr += r.pi.rmse;
        flagged = flagged || r.flagged;
      }
      if (count == 0) continue;
      sum << spec.id << ',' << rep << ',' << count << ',' << o.n << ','
          << tb / count << ',' << tab / count << ',' << tr / count << ','
          << tc / count << ',' << pr / count << ',' << (flagged ? 1 : 0) << "\n";
    }
  }
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitOpts {
  std::string survey, frame, out;
  std::uint64_t seed = 0;
  int days = 0;
  std::string likelihood = "bernoulli";
  bool unstructured = false;
  bool bias_correct = false;
  std::string prevalence;
  std::string adjacency;
  std::string state_cov, day_cov, state_day_cov;
  int chains = 4, iterations = 400, warmup = 200, thin = 2, threads = 0;
};

CovariateTables load_covariates_or_zero(const FitOpts& o, const Schema& schema) {
  if (o.state_cov.empty() && o.day_cov.empty() && o.state_day_cov.empty())
    return zero_covariates(schema);
  return load_covariates(o.state_cov, o.day_cov, o.state_day_cov, schema);
}

int cmd_fit(const FitOpts& o) {
  const Schema schema = election_schema(o.days);
  const StratificationFrame frame = load_frame(o.frame, schema);
  const SurveyDataset survey = load_survey(o.survey, schema, &frame);
  const CovariateTables cov = load_covariates_or_zero(o, schema);
  auto graph = load_or_default_graph(o.adjacency, schema.num_areas());
  ensure_dir(o.out);

  PrevalenceTable prevalence;
  if (o.bias_correct) prevalence = load_prevalence(o.prevalence, schema);

  SamplerConfig sc;
  sc.chains = o.chains;
  sc.iterations = o.iterations;
  sc.warmup = o.warmup;
  sc.thin = o.thin;
  sc.threads = o.threads;
  sc.validate();

  const int J = static_cast<int>(schema.choices.size());
  json models = json::array();
  auto fit_one = [&](Likelihood lik, int choice, double offset,
                     const std::string& file) {
    ModelSpec spec = make_model_spec(schema, lik, choice, !o.unstructured, offset, graph);
    const ModelData data = build_training_data(spec, schema, survey, cov);
    sc.seed = mix_seed(o.seed, static_cast<std::uint64_t>(choice + 1));
    const PosteriorDraws draws = run_chains(data, spec, sc);
    save_draws(o.out + "/" + file, draws);
    json m;
    m["likelihood"] = lik == Likelihood::Bernoulli ? "bernoulli" : "multinomial";
    m["choice"] = choice;
    m["structured"] = !o.unstructured;
    m["offset"] = offset;
    m["x_mean"] = spec.x_mean;
    m["x_sd"] = spec.x_sd;
    m["draws_file"] = file;
    models.push_back(m);
  };

  if (o.likelihood == "bernoulli") {
    for (int j = 0; j < J; ++j) {
      double offset = 0.0;
      if (o.bias_correct) {
        long n1 = 0;
        for (const auto& r : survey.rows)
          if (r.choice == j) ++n1;
        offset = king_zeng_offset(n1, static_cast<long>(survey.rows.size()),
                                  prevalence.at(j), frame.total_weight);
      }
      fit_one(Likelihood::Bernoulli, j, offset,
              "draws_" + sanitize(schema.choices[j]) + ".csv");
    }
  } else if (o.likelihood == "multinomial") {
    if (o.bias_correct)
      throw DataError("bias-correction offsets apply only to Bernoulli models");
    fit_one(Likelihood::Multinomial, 0, 0.0, "draws_multinomial.csv");
  } else {
    std::cerr << "usage error: --likelihood must be bernoulli or multinomial\n";
    return 2;
  }

  json meta;
  meta["days"] = o.days;
  meta["adjacency"] = o.adjacency;
  meta["models"] = models;
  std::ofstream mf(o.out + "/models.json");
  mf << meta.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------ poststratify

struct PoststratOpts {
  std::string fit_dir, frame, out;
  std::string margin = "national";
  bool turnout = false;
  int day = 0;
  std::string adjacency;
  std::string state_cov, day_cov, state_day_cov;
};

int cmd_poststratify(const PoststratOpts& o) {
  std::ifstream mf(o.fit_dir + "/models.json");
  if (!mf) throw DataError("cannot open '" + o.fit_dir + "/models.json'");
  json meta = json::parse(mf);
  const int days = meta.at("days").get<int>();
  const Schema schema = election_schema(days);
  const StratificationFrame frame = load_frame(o.frame, schema);
  std::string adjacency = o.adjacency.empty()
                              ? meta.value("adjacency", std::string())
                              : o.adjacency;
  auto graph = load_or_default_graph(adjacency, schema.num_areas());
  CovariateTables cov;
  if (o.state_cov.empty() && o.day_cov.empty() && o.state_day_cov.empty()) {
    cov = zero_covariates(schema);
  } else {
    cov = load_covariates(o.state_cov, o.day_cov, o.state_day_cov, schema);
  }
  ensure_dir(o.out);

  // margin: "national", "<attribute>" or "<attribute>,day"
  std::string attr_name = o.margin;
  bool by_day = false;
  if (const auto pos = attr_name.find(",day"); pos != std::string::npos) {
    by_day = true;
    attr_name = attr_name.substr(0, pos);
    if (days <= 0) throw DataError("margin requests days but the model has none");
  }
  const int attr = attr_name == "national" ? -1 : schema.attribute_index(attr_name);

  auto rebuild_spec = [&](const json& m) {
    const Likelihood lik = m.at("likelihood").get<std::string>() == "bernoulli"
                               ? Likelihood::Bernoulli
                               : Likelihood::Multinomial;
    ModelSpec spec = make_model_spec(schema, lik, m.at("choice").get<int>(),
                                     m.at("structured").get<bool>(),
                                     m.at("offset").get<double>(), graph);
    spec.x_mean = m.at("x_mean").get<std::vector<double>>();
    spec.x_sd = m.at("x_sd").get<std::vector<double>>();
    return spec;
  };

  std::vector<EstimateRow> out_rows;
  auto emit = [&](int day_id) {
    // gather per-choice cell posteriors across all stored fits for this day
    CellPosterior all;
    for (const json& m : meta.at("models")) {
      const ModelSpec spec = rebuild_spec(m);
      const PosteriorDraws draws =
          load_draws(o.fit_dir + "/" + m.at("draws_file").get<std::string>());
      const ModelData cells = build_cell_data(spec, frame, cov, days > 0 ? day_id : -1);
      CellPosterior part = predict_cells(draws, spec, cells);
      for (size_t k = 0; k < part.choice.size(); ++k) {
        all.choice.push_back(part.choice[k]);
        all.prob.push_back(std::move(part.prob[k]));
      }
    }
    if (o.turnout) {
      const int stay_home = schema.choice_index("stay home");
      all = normalize_turnout(all, stay_home, static_cast<int>(schema.choices.size()));
    }
    for (size_t k = 0; k < all.choice.size(); ++k) {
      const Eigen::MatrixXd agg = aggregate(all.prob[k], frame, attr);
      const std::vector<Summary> sums = summarize(agg);
      const Attribute* a = attr >= 0 ? &schema.attributes[attr] : nullptr;
      for (size_t lvl = 0; lvl < sums.size(); ++lvl) {
        EstimateRow row;
        row.margin = by_day ? attr_name + ",day" : o.margin;
        std::string level = attr < 0 ? "all"
                            : (a->labels.empty() ? std::to_string(lvl + 1)
                                                 : a->labels[lvl]);
        row.level = by_day ? level + ":" + std::to_string(day_id + 1) : level;
        row.choice = schema.choices[all.choice[k]];
        row.summary = sums[lvl];
        out_rows.push_back(std::move(row));
      }
    }
  };

  if (by_day) {
    for (int d = 0; d < days; ++d) emit(d);
  } else {
    emit(days > 0 ? o.day : -1);
  }
  write_estimates(o.out + "/estimates.csv", out_rows);
  return 0;
}

// ---------------------------------------------------------------- annotate

struct AnnotateOpts {
  std::string users, out, fixture;
  std::string api_base, model, api_key_env = "AIPOLL_API_KEY";
  std::uint64_t seed = 1;
  int context = 10;
  int concurrency = 4;
  int max_attempts = 3;
  std::string survey_out;
};

// Fixture transport: a JSON object with "location" and "demo" maps whose keys
// are matched as substrings of the prompt, plus "default_location" and
// "default_demo" fallbacks. Missing fallback -> transport error.
class FixtureTransport : public ChatTransport {
 public:
  explicit FixtureTransport(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open fixture '" + path + "'");
    spec_ = json::parse(in);
  }

  std::string complete(const std::string& prompt) override {
    const bool is_location = prompt.rfind("A person writes their location", 0) == 0;
    const char* table = is_location ? "location" : "demo";
    const char* fallback = is_location ? "default_location" : "default_demo";
    if (spec_.contains(table)) {
      for (const auto& [key, reply] : spec_[table].items())
        if (prompt.find(key) != std::string::npos) return reply.get<std::string>();
    }
    if (spec_.contains(fallback)) return spec_[fallback].get<std::string>();
    throw TransportError("fixture has no reply for this prompt");
  }

 private:
  json spec_;
};

void write_survey_csv(const std::string& path, const SurveyDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "choice";
  for (const auto& a : ds.schema.attributes) out << ',' << a.name;
  out << "\n";
  for (const auto& r : ds.rows) {
    out << csv::quote(ds.schema.choices[r.choice]);
    for (int v : r.levels) out << ',' << (v + 1);
    out << "\n";
  }
}

int cmd_annotate(const AnnotateOpts& o) {
  const auto users = load_users(o.users);
  std::unique_ptr<ChatTransport> transport;
  if (!o.fixture.empty()) {
    transport = std::make_unique<FixtureTransport>(o.fixture);
  } else if (!o.api_base.empty()) {
    transport = make_http_transport(o.api_base, o.model, o.api_key_env);
  } else {
    std::cerr << "usage error: give either --fixture or --api-base\n";
    return 2;
  }
  ensure_dir(o.out);
  AnnotateConfig cfg;
  cfg.context = o.context;
  cfg.concurrency = o.concurrency;
  cfg.max_attempts = o.max_attempts;
  cfg.seed = o.seed;
  if (!o.fixture.empty()) cfg.backoff_ms = 0;
  const auto rows = annotate_batch(users, *transport, cfg);
  write_annotations(o.out + "/annotations.csv", rows);
  if (!o.survey_out.empty()) {
    const SurveyDataset ds = annotations_to_survey(rows, election_schema(0));
    write_survey_csv(o.survey_out, ds);
    std::cerr << "survey rows: " << ds.rows.size() << ", dropped: "
              << ds.num_dropped() << "\n";
  }
  return 0;
}

// --------------------------------------------------------------- agreement

struct AgreementOpts {
  std::string matrix, ratings, out;
  std::string level = "nominal";
  int bootstrap = 0;
  bool network = false;
  int iterations = 6000, warmup = 2000, thin = 2;
  std::uint64_t seed = 1;
};

int cmd_agreement(const AgreementOpts& o) {
  if (o.matrix.empty() == o.ratings.empty()) {
    std::cerr << "usage error: give exactly one of --matrix or --ratings\n";
    return 2;
  }
  AlphaLevel level;
  if (o.level == "nominal") {
    level = AlphaLevel::Nominal;
  } else if (o.level == "ordinal") {
    level = AlphaLevel::Ordinal;
  } else {
    std::cerr << "usage error: --level must be nominal or ordinal\n";
    return 2;
  }
  ensure_dir(o.out);

  struct Item {
    std::string name;
    AgreementMatrix matrix;
  };
  std::vector<Item> items;
  if (!o.matrix.empty()) {
    items.push_back({"matrix", load_agreement_matrix(o.matrix)});
  } else {
    for (const auto& [var, table] : load_ratings(o.ratings)) {
      if (table.raters.size() != 2)
        throw DataError("variable '" + var + "' needs exactly two raters");
      items.push_back({var, tabulate_pair(table, 0, 1)});
    }
  }

  std::ofstream alpha_out(o.out + "/alpha.csv");
  alpha_out << "variable,level,alpha,degenerate,boot_mean,boot_q5,boot_q50,boot_q95\n";
  alpha_out.precision(17);
  for (const auto& item : items) {
    const auto units = expand_to_units(item.matrix);
    const int L = item.matrix.size();
    const AlphaResult a = krippendorff_alpha(units, L, level);
    if (a.degenerate)
      std::cerr << "warning: '" << item.name
                << "' has zero expected disagreement; alpha defined as 1\n";
    alpha_out << csv::quote(item.name) << ',' << o.level << ',' << a.alpha << ','
              << (a.degenerate ? 1 : 0);
    if (o.bootstrap > 0) {
      const BootstrapSummary b = bootstrap_alpha(units, L, level, o.bootstrap, o.seed);
      alpha_out << ',' << b.mean << ',' << b.q5 << ',' << b.q50 << ',' << b.q95;
    } else {
      alpha_out << ",,,,";
    }
    alpha_out << "\n";
  }

  if (o.network) {
    if (items.size() != 1)
      throw DataError("--network needs a single matrix or single-variable ratings");
    NetworkConfig nc;
    nc.iterations = o.iterations;
    nc.warmup = o.warmup;
    nc.thin = o.thin;
    nc.seed = o.seed;
    nc.validate();
    const NetworkPosterior post = fit_agreement_network(items[0].matrix, nc);
    if (!post.converged) std::cerr << "warning: Metropolis acceptance collapsed\n";
    std::vector<std::string> labels = items[0].matrix.labels;
    if (labels.empty())
      for (int i = 0; i < post.size; ++i) labels.push_back("l" + std::to_string(i + 1));
    write_incidence(o.out + "/incidence.csv", post.mean_incidence, labels);
  }
  return 0;
}

// ------------------------------------------------------------------- swing

struct SwingOpts {
  std::string input, out, choice;
  double target = 0.0;
  double national = -1.0;  // <0: take the "national" margin row from the input
};

int cmd_swing(const SwingOpts& o) {
  const csv::Table t = csv::read_file(o.input);
  const int c_margin = t.column("margin");
  const int c_level = t.column("level");
  const int c_choice = t.column("choice");
  const int c_mean = t.column("mean");

  double national = o.national;
  std::vector<size_t> selected;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][c_choice] != o.choice) continue;
    if (t.rows[r][c_margin] == "national") {
      if (national < 0) national = csv::to_double(t.rows[r][c_mean], "national mean");
      continue;
    }
    selected.push_back(r);
  }
  if (selected.empty()) throw DataError("no rows for choice '" + o.choice + "'");
  if (national < 0)
    throw DataError("give --national or include a national margin row");

  Eigen::VectorXd margins(selected.size());
  for (size_t i = 0; i < selected.size(); ++i)
    margins(i) = csv::to_double(t.rows[selected[i]][c_mean], "margin mean");
  const SwingResult res = uniform_swing(margins, national, o.target);

  ensure_dir(o.out);
  std::ofstream out(o.out + "/swing.csv");
  out << "margin,level,choice,value,clamped\n";
  out.precision(17);
  for (size_t i = 0; i < selected.size(); ++i) {
    const auto& row = t.rows[selected[i]];
    out << csv::quote(row[c_margin]) << ',' << csv::quote(row[c_level]) << ','
        << csv::quote(row[c_choice]) << ',' << res.values(i) << ','
        << (res.clamped[i] ? 1 : 0) << "\n";
  }
  return 0;
}

// -------------------------------------------------------------------- main

Settings collect_settings(const CLI::App& cmd) {
  Settings s;
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames()[0];
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      std::string joined;
      for (const auto& v : opt->results()) {
        if (!joined.empty()) joined += ",";
        joined += v;
      }
      s[name] = joined;
    } else {
      s[name] = opt->get_default_str();
    }
  }
  return s;
}

int run(int argc, char** argv) {
  CLI::App app{"Structured MrP with online-selection bias correction"};
  app.require_subcommand(1);

  SimulateOpts sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "run simulation-study scenarios");
  c_sim->add_option("--scenarios", sim.scenarios, "comma-separated scenario ids");
  c_sim->add_option("--replicates", sim.replicates);
  c_sim->add_option("--seed", sim.seed)->required();
  c_sim->add_option("--out", sim.out)->required();
  c_sim->add_option("--population-size", sim.population_size);
  c_sim->add_option("--areas", sim.areas);
  c_sim->add_option("--choices", sim.choices);
  c_sim->add_option("--n", sim.n);
  c_sim->add_option("--sar-candidates", sim.sar_candidates);
  c_sim->add_option("--adjacency", sim.adjacency)->check(CLI::ExistingFile);
  c_sim->add_option("--chains", sim.chains);
  c_sim->add_option("--iterations", sim.iterations);
  c_sim->add_option("--warmup", sim.warmup);
  c_sim->add_option("--thin", sim.thin);
  c_sim->add_option("--threads", sim.threads);

  FitOpts fit;
  CLI::App* c_fit = app.add_subcommand("fit", "fit the hierarchical choice model");
  c_fit->add_option("--survey", fit.survey)->required()->check(CLI::ExistingFile);
  c_fit->add_option("--frame", fit.frame)->required()->check(CLI::ExistingFile);
  c_fit->add_option("--out", fit.out)->required();
  c_fit->add_option("--seed", fit.seed)->required();
  c_fit->add_option("--days", fit.days);
  c_fit->add_option("--likelihood", fit.likelihood);
  c_fit->add_flag("--unstructured", fit.unstructured);
  auto* bc = c_fit->add_flag("--bias-correct", fit.bias_correct);
  auto* prev = c_fit->add_option("--prevalence", fit.prevalence)->check(CLI::ExistingFile);
  bc->needs(prev);
  c_fit->add_option("--adjacency", fit.adjacency)->check(CLI::ExistingFile);
  c_fit->add_option("--state-covariates", fit.state_cov)->check(CLI::ExistingFile);
  c_fit->add_option("--day-covariates", fit.day_cov)->check(CLI::ExistingFile);
  c_fit->add_option("--state-day-covariates", fit.state_day_cov)->check(CLI::ExistingFile);
  c_fit->add_option("--chains", fit.chains);
  c_fit->add_option("--iterations", fit.iterations);
  c_fit->add_option("--warmup", fit.warmup);
  c_fit->add_option("--thin", fit.thin);
  c_fit->add_option("--threads", fit.threads);

  PoststratOpts ps;
  CLI::App* c_ps = app.add_subcommand("poststratify", "aggregate cell posteriors");
  c_ps->add_option("--fit-dir", ps.fit_dir)->required()->check(CLI::ExistingDirectory);
  c_ps->add_option("--frame", ps.frame)->required();
  c_ps->add_option("--out", ps.out)->required();
  c_ps->add_option("--margin", ps.margin);
  c_ps->add_flag("--turnout", ps.turnout);
  c_ps->add_option("--day", ps.day);
  c_ps->add_option("--adjacency", ps.adjacency)->check(CLI::ExistingFile);
  c_ps->add_option("--state-covariates", ps.state_cov)->check(CLI::ExistingFile);
  c_ps->add_option("--day-covariates", ps.day_cov)->check(CLI::ExistingFile);
  c_ps->add_option("--state-day-covariates", ps.state_day_cov)->check(CLI::ExistingFile);

  AnnotateOpts ann;
  CLI::App* c_ann = app.add_subcommand("annotate", "LLM annotation of user records");
  c_ann->add_option("--users", ann.users)->required()->check(CLI::ExistingFile);
  c_ann->add_option("--out", ann.out)->required();
  c_ann->add_option("--fixture", ann.fixture)->check(CLI::ExistingFile);
  c_ann->add_option("--api-base", ann.api_base);
  c_ann->add_option("--model", ann.model);
  c_ann->add_option("--api-key-env", ann.api_key_env);
  c_ann->add_option("--seed", ann.seed);
  c_ann->add_option("--context", ann.context);
  c_ann->add_option("--concurrency", ann.concurrency);
  c_ann->add_option("--max-attempts", ann.max_attempts);
  c_ann->add_option("--survey-out", ann.survey_out);

  AgreementOpts agr;
  CLI::App* c_agr = app.add_subcommand("agreement", "inter-rater diagnostics");
  c_agr->add_option("--matrix", agr.matrix)->check(CLI::ExistingFile);
  c_agr->add_option("--ratings", agr.ratings)->check(CLI::ExistingFile);
  c_agr->add_option("--out", agr.out)->required();
  c_agr->add_option("--level", agr.level);
  c_agr->add_option("--bootstrap", agr.bootstrap);
  c_agr->add_flag("--network", agr.network);
  c_agr->add_option("--iterations", agr.iterations);
  c_agr->add_option("--warmup", agr.warmup);
  c_agr->add_option("--thin", agr.thin);
  c_agr->add_option("--seed", agr.seed);

  SwingOpts sw;
  CLI::App* c_sw = app.add_subcommand("swing", "uniform-swing projection");
  c_sw->add_option("--input", sw.input)->required()->check(CLI::ExistingFile);
  c_sw->add_option("--out", sw.out)->required();
  c_sw->add_option("--choice", sw.choice)->required();
  c_sw->add_option("--target", sw.target)->required();
  c_sw->add_option("--national", sw.national);

  // Flat key=value configuration file for the subcommand. Values act as
  // defaults: any key already given as a flag on the command line wins.
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) {
        std::cerr << "usage error: --config needs a file path\n";
        return 2;
      }
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + i);
      break;
    }
  }
  if (!config_path.empty()) {
    std::ifstream cf(config_path);
    if (!cf) throw DataError("cannot open config file '" + config_path + "'");
    std::set<std::string> given;
    for (const auto& a : args)
      if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
    std::string line;
    while (std::getline(cf, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw DataError("config file line is not key=value: '" + line + "'");
      const std::string key = line.substr(0, eq);
      if (given.count(key)) continue;  // explicit flags win
      args.push_back("--" + key + "=" + line.substr(eq + 1));
    }
  }

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  int rc;
  std::string out_dir;
  if (cmd == c_sim) { rc = cmd_simulate(sim); out_dir = sim.out; }
  else if (cmd == c_fit) { rc = cmd_fit(fit); out_dir = fit.out; }
  else if (cmd == c_ps) { rc = cmd_poststratify(ps); out_dir = ps.out; }
  else if (cmd == c_ann) { rc = cmd_annotate(ann); out_dir = ann.out; }
  else if (cmd == c_agr) { rc = cmd_agreement(agr); out_dir = agr.out; }
  else { rc = cmd_swing(sw); out_dir = sw.out; }
  if (rc == 0) write_manifest(out_dir, cmd->get_name(), collect_settings(*cmd));
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const aip::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const aip::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
