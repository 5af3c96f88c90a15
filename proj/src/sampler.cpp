#include "aip/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "aip/csv.hpp"
#include "aip/error.hpp"
#include "aip/rng.hpp"
#include "json.hpp"

namespace aip {

void SamplerConfig::validate() const {
  if (chains < 1) throw DataError("need at least one chain");
  if (warmup < 20) throw DataError("warmup must be >= 20 iterations");
  if (iterations <= warmup) throw DataError("iterations must exceed warmup");
  if (thin < 1) throw DataError("thin must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw DataError("target acceptance must lie in (0, 1)");
  if (max_tree_depth < 1 || max_tree_depth > 15)
    throw DataError("max tree depth must lie in [1, 15]");
  if (!(init_sd > 0.0)) throw DataError("init sd must be positive");
}

Eigen::VectorXd PosteriorDraws::column(const std::string& block, int within) const {
  const ParameterBlock& b = index.at(block);
  if (within < 0 || within >= b.size)
    throw DataError("element " + std::to_string(within) + " outside block '" + block + "'");
  return draws.col(b.offset + within);
}

namespace {

constexpr double kDivergenceThreshold = 1000.0;

struct Phase {
  const LogDensity& target;
  Eigen::VectorXd inv_mass;   // M^{-1} diagonal
  Eigen::VectorXd sqrt_mass;  // sqrt(M) diagonal

  double hamiltonian(double lp, const Eigen::VectorXd& p) const {
    return -lp + 0.5 * (p.array().square() * inv_mass.array()).sum();
  }
};

struct State {
  Eigen::VectorXd q, grad;
  double lp = 0.0;
};

void leapfrog(const Phase& ph, State& s, Eigen::VectorXd& p, double eps) {
  p += 0.5 * eps * s.grad;
  s.q += eps * (ph.inv_mass.array() * p.array()).matrix();
  s.lp = ph.target(s.q, s.grad);
  p += 0.5 * eps * s.grad;
}

struct Tree {
  State minus, plus;
  Eigen::VectorXd p_minus, p_plus;
  State sample;
  int n_valid = 0;
  bool ok = true;
  double sum_accept = 0.0;
  int n_accept = 0;
};

// Recursive doubling with slice sampling (Hoffman & Gelman algorithm 6).
Tree build_tree(const Phase& ph, const State& s, const Eigen::VectorXd& p, double log_u,
                int dir, int depth, double eps, double h0, Rng& rng, bool& diverged) {
  if (depth == 0) {
    Tree t;
    t.minus = s;
    t.p_minus = p;
    try {
      leapfrog(ph, t.minus, t.p_minus, dir * eps);
    } catch (const NumericalError&) {
      t.minus.lp = -std::numeric_limits<double>::infinity();
      t.minus.grad.setZero(s.q.size());
    }
    t.plus = t.minus;
    t.p_plus = t.p_minus;
    t.sample = t.minus;
    double h = ph.hamiltonian(t.minus.lp, t.p_minus);
    t.n_valid = log_u <= -h ? 1 : 0;
    t.ok = log_u < kDivergenceThreshold - h;
    if (!t.ok) diverged = true;
    t.sum_accept = std::min(1.0, std::exp(h0 - h));
    if (!std::isfinite(t.sum_accept)) t.sum_accept = 0.0;
    t.n_accept = 1;
    return t;
  }
  Tree t = build_tree(ph, s, p, log_u, dir, depth - 1, eps, h0, rng, diverged);
  if (!t.ok) return t;
  Tree u = dir == -1
               ? build_tree(ph, t.minus, t.p_minus, log_u, dir, depth - 1, eps, h0, rng,
                            diverged)
               : build_tree(ph, t.plus, t.p_plus, log_u, dir, depth - 1, eps, h0, rng,
                            diverged);
  if (dir == -1) {
    t.minus = u.minus;
    t.p_minus = u.p_minus;
  } else {
    t.plus = u.plus;
    t.p_plus = u.p_plus;
  }
  if (u.n_valid > 0 &&
      runif(rng) < static_cast<double>(u.n_valid) / (t.n_valid + u.n_valid))
    t.sample = u.sample;
  t.n_valid += u.n_valid;
  t.sum_accept += u.sum_accept;
  t.n_accept += u.n_accept;
  // stop when the subtrajectory doubles back
  Eigen::VectorXd span = t.plus.q - t.minus.q;
  bool forward = span.dot((ph.inv_mass.array() * t.p_plus.array()).matrix()) >= 0.0;
  bool backward = span.dot((ph.inv_mass.array() * t.p_minus.array()).matrix()) >= 0.0;
  t.ok = u.ok && forward && backward;
  return t;
}

struct TransitionResult {
  double accept_stat = 0.0;
  bool diverged = false;
  bool max_depth = false;
};

TransitionResult nuts_transition(const Phase& ph, State& s, double eps, int max_depth,
                                 Rng& rng) {
  Eigen::VectorXd p(s.q.size());
  for (int i = 0; i < p.size(); ++i) p[i] = ph.sqrt_mass[i] * rnorm(rng);
  const double h0 = ph.hamiltonian(s.lp, p);
  const double log_u = -h0 + std::log(runif(rng));

  Tree t;
  t.minus = t.plus = t.sample = s;
  t.p_minus = t.p_plus = p;
  t.n_valid = 1;

  TransitionResult res;
  double sum_accept = 0.0;
  int n_accept = 0;
  int depth = 0;
  while (depth < max_depth) {
    int dir = runif(rng) < 0.5 ? -1 : 1;
    bool diverged = false;
    Tree u = dir == -1 ? build_tree(ph, t.minus, t.p_minus, log_u, dir, depth, eps, h0,
                                    rng, diverged)
                       : build_tree(ph, t.plus, t.p_plus, log_u, dir, depth, eps, h0,
                                    rng, diverged);
    sum_accept += u.sum_accept;
    n_accept += u.n_accept;
    if (diverged) res.diverged = true;
    if (!u.ok) break;
    if (dir == -1) {
      t.minus = u.minus;
      t.p_minus = u.p_minus;
    } else {
      t.plus = u.plus;
      t.p_plus = u.p_plus;
    }
    if (u.n_valid > 0 &&
        runif(rng) < static_cast<double>(u.n_valid) / std::max(t.n_valid, 1))
      t.sample = u.sample;
    t.n_valid += u.n_valid;
    Eigen::VectorXd span = t.plus.q - t.minus.q;
    if (span.dot((ph.inv_mass.array() * t.p_plus.array()).matrix()) < 0.0 ||
        span.dot((ph.inv_mass.array() * t.p_minus.array()).matrix()) < 0.0)
      break;
    ++depth;
  }
  if (depth == max_depth) res.max_depth = true;
  s = t.sample;
  res.accept_stat = n_accept > 0 ? sum_accept / n_accept : 0.0;
  return res;
}

double find_initial_step(const Phase& ph, const State& s, Rng& rng) {
  double eps = 1.0;
  Eigen::VectorXd p(s.q.size());
  for (int i = 0; i < p.size(); ++i) p[i] = ph.sqrt_mass[i] * rnorm(rng);
  double h0 = ph.hamiltonian(s.lp, p);
  auto ratio = [&](double e) {
    State t = s;
    Eigen::VectorXd pm = p;
    try {
      leapfrog(ph, t, pm, e);
    } catch (const NumericalError&) {
      return -1e300;
    }
    double h = ph.hamiltonian(t.lp, pm);
    return std::isfinite(h) ? h0 - h : -1e300;
  };
  double a = ratio(eps) > std::log(0.5) ? 1.0 : -1.0;
  for (int iter = 0; iter < 50; ++iter) {
    if (a * ratio(eps) <= a * std::log(0.5)) break;
    eps *= std::pow(2.0, a);
  }
  return eps;
}

struct DualAveraging {
  double mu, log_eps, log_eps_bar = 0.0, h_bar = 0.0;
  int t = 0;
  double target;

  explicit DualAveraging(double eps0, double target_accept)
      : mu(std::log(10.0 * eps0)), log_eps(std::log(eps0)), target(target_accept) {}

  double step(double accept_stat) {
    ++t;
    const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    h_bar += (target - accept_stat - h_bar) / (t + t0);
    log_eps = mu - std::sqrt(static_cast<double>(t)) / gamma * h_bar;
    double w = std::pow(static_cast<double>(t), -kappa);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
    return std::exp(log_eps);
  }
  double final_step() const { return std::exp(log_eps_bar); }
};

void run_one_chain(const LogDensity& target, int dim, const SamplerConfig& cfg,
                   int chain, Eigen::MatrixXd& out, ChainStats& stats) {
  Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(chain));

  Phase ph{target, Eigen::VectorXd::Ones(dim), Eigen::VectorXd::Ones(dim)};
  State s;
  s.q.resize(dim);
  for (int i = 0; i < dim; ++i) s.q[i] = cfg.init_sd * rnorm(rng);
  s.lp = target(s.q, s.grad);
  if (!std::isfinite(s.lp))
    throw NumericalError("chain " + std::to_string(chain + 1) +
                         ": non-finite density at the initial point");

  const int w = cfg.warmup;
  const int mass_start = w / 2, mass_end = (3 * w) / 4;
  double eps = find_initial_step(ph, s, rng);
  DualAveraging da(eps, cfg.target_accept);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(dim);
  int n_mass = 0;

  int tail_steps = 0, tail_divergences = 0;
  double sum_accept = 0.0;
  int retained = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    auto res = nuts_transition(ph, s, eps, cfg.max_tree_depth, rng);
    if (it < w) {
      eps = da.step(res.accept_stat);
      if (it >= mass_start && it < mass_end) {
        ++n_mass;
        Eigen::VectorXd d = s.q - mean;
        mean += d / n_mass;
        m2 += d.cwiseProduct(s.q - mean);
      }
      if (it + 1 == mass_end && n_mass >= 2) {
        Eigen::VectorXd var = m2 / (n_mass - 1);
        // regularize toward unit scale as Stan does with few draws
        double shrink = static_cast<double>(n_mass) / (n_mass + 5.0);
        for (int i = 0; i < dim; ++i) {
          double v = shrink * var[i] + (1.0 - shrink) * 1e-3;
          ph.inv_mass[i] = std::max(v, 1e-10);
          ph.sqrt_mass[i] = 1.0 / std::sqrt(ph.inv_mass[i]);
        }
        eps = find_initial_step(ph, s, rng);
        da = DualAveraging(eps, cfg.target_accept);
      }
      if (it >= mass_end) {
        ++tail_steps;
        if (res.diverged) ++tail_divergences;
      }
      if (it + 1 == w) {
        if (tail_steps > 0 && tail_divergences == tail_steps)
          throw NumericalError("chain " + std::to_string(chain + 1) +
                               ": every post-adaptation warmup step diverged");
        eps = da.final_step();
      }
    } else {
      sum_accept += res.accept_stat;
      if (res.diverged) ++stats.divergences;
      if (res.max_depth) ++stats.max_depth_hits;
      if ((it - w) % cfg.thin == 0) out.row(retained++) = s.q;
    }
  }
  stats.step_size = eps;
  stats.mean_accept = sum_accept / (cfg.iterations - w);
}

}  // namespace

PosteriorDraws run_chains(const LogDensity& target, int dim, const BlockIndex& index,
                          const SamplerConfig& config) {
  config.validate();
  if (dim < 1) throw DataError("dimension must be positive");

  PosteriorDraws out;
  out.index = index;
  out.chains = config.chains;
  out.chain_stats.assign(config.chains, {});
  const int per = config.retained_per_chain();
  out.draws.resize(static_cast<Eigen::Index>(per) * config.chains, dim);

  int threads = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.chains);

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(config.chains);
  auto worker = [&]() {
    for (int c; (c = next.fetch_add(1)) < config.chains;) {
      try {
        Eigen::MatrixXd block = out.draws.middleRows(static_cast<Eigen::Index>(c) * per, per);
        run_one_chain(target, dim, config, c, block, out.chain_stats[c]);
        out.draws.middleRows(static_cast<Eigen::Index>(c) * per, per) = block;
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

PosteriorDraws run_chains(const ModelData& data, const ModelSpec& spec,
                          const SamplerConfig& config) {
  spec.validate();
  LogDensity target = [&data, &spec](const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    return log_posterior_with_grad(q, data, spec, grad);
  };
  return run_chains(target, spec.layout().dim, spec.layout(), config);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DataError("percentile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

ScalarDiagnostics diagnose(const Eigen::VectorXd& scalar_draws, int chains) {
  const int total = static_cast<int>(scalar_draws.size());
  if (chains < 1 || total % chains != 0)
    throw DataError("draw count is not a multiple of the chain count");
  const int n = total / chains;
  if (n < 4) throw DataError("need at least 4 draws per chain for diagnostics");

  // split each chain in half
  const int half = n / 2;
  const int m = 2 * chains;
  Eigen::MatrixXd seq(half, m);
  for (int c = 0; c < chains; ++c) {
    seq.col(2 * c) = scalar_draws.segment(c * n, half);
    seq.col(2 * c + 1) = scalar_draws.segment(c * n + n - half, half);
  }

  ScalarDiagnostics d;
  Eigen::VectorXd means = seq.colwise().mean();
  double grand = means.mean();
  d.mean = scalar_draws.mean();
  double B = half * (means.array() - grand).square().sum() / (m - 1);
  Eigen::VectorXd vars(m);
  for (int j = 0; j < m; ++j)
    vars[j] = (seq.col(j).array() - means[j]).square().sum() / (half - 1);
  double W = vars.mean();
  if (W <= 1e-300) {
    d.rhat = 1.0;
    d.ess = static_cast<double>(total);
  } else {
    double var_plus = (half - 1.0) / half * W + B / half;
    d.rhat = std::sqrt(var_plus / W);

    // bulk ESS via Geyer initial-monotone pairs on per-sequence autocovariances
    int max_lag = half - 1;
    std::vector<double> rho(max_lag, 0.0);
    for (int t = 0; t < max_lag; ++t) {
      double acov = 0.0;
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int i = 0; i + t < half; ++i)
          s += (seq(i, j) - means[j]) * (seq(i + t, j) - means[j]);
        acov += s / half;
      }
      acov /= m;
      rho[t] = 1.0 - (W - acov) / var_plus;
    }
    double tau = -rho[0];  // pairs start at lag 0, so seed with -rho0 + (rho0 + rho1)...
    double prev_pair = 1e300;
    for (int t = 0; t + 1 < max_lag; t += 2) {
      double pair = rho[t] + rho[t + 1];
      if (pair < 0.0) break;
      pair = std::min(pair, prev_pair);
      prev_pair = pair;
      tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(static_cast<double>(total) + 10.0));
    d.ess = std::min(static_cast<double>(total) / tau,
                     static_cast<double>(total) * std::log10(static_cast<double>(total)));
  }

  std::vector<double> v(scalar_draws.data(), scalar_draws.data() + total);
  d.q5 = percentile(v, 0.05);
  d.q50 = percentile(v, 0.50);
  d.q95 = percentile(v, 0.95);
  return d;
}

void save_draws(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  std::vector<std::string> names;
  for (const auto& b : draws.index.blocks) {
    if (b.size == 1) {
      names.push_back(b.name);
    } else {
      for (int i = 0; i < b.size; ++i)
        names.push_back(b.name + "[" + std::to_string(i + 1) + "]");
    }
  }
  for (size_t i = 0; i < names.size(); ++i)
    out << (i ? "," : "") << names[i];
  out << '\n';
  for (Eigen::Index r = 0; r < draws.draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < draws.draws.cols(); ++c)
      out << (c ? "," : "") << draws.draws(r, c);
    out << '\n';
  }

  nlohmann::json meta;
  meta["chains"] = draws.chains;
  meta["per_chain"] = draws.per_chain();
  meta["dim"] = draws.draws.cols();
  for (const auto& b : draws.index.blocks)
    meta["blocks"].push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
  for (const auto& s : draws.chain_stats)
    meta["chain_stats"].push_back({{"divergences", s.divergences},
                                   {"max_depth_hits", s.max_depth_hits},
                                   {"step_size", s.step_size},
                                   {"mean_accept", s.mean_accept}});
  std::ofstream mout(path + ".meta.json");
  if (!mout) throw DataError("cannot write '" + path + ".meta.json'");
  mout << meta.dump(2) << '\n';
}

PosteriorDraws load_draws(const std::string& path) {
  std::ifstream min(path + ".meta.json");
  if (!min) throw DataError("cannot open '" + path + ".meta.json'");
  nlohmann::json meta = nlohmann::json::parse(min);

  PosteriorDraws d;
  d.chains = meta.at("chains").get<int>();
  for (const auto& b : meta.at("blocks")) {
    ParameterBlock pb;
    pb.name = b.at("name").get<std::string>();
    pb.offset = b.at("offset").get<int>();
    pb.size = b.at("size").get<int>();
    d.index.blocks.push_back(pb);
    d.index.dim = std::max(d.index.dim, pb.offset + pb.size);
  }
  if (meta.contains("chain_stats")) {
    for (const auto& s : meta.at("chain_stats")) {
      ChainStats cs;
      cs.divergences = s.at("divergences").get<int>();
      cs.max_depth_hits = s.at("max_depth_hits").get<int>();
      cs.step_size = s.at("step_size").get<double>();
      cs.mean_accept = s.at("mean_accept").get<double>();
      d.chain_stats.push_back(cs);
    }
  }

  auto t = csv::read_file(path);
  if (static_cast<int>(t.header.size()) != d.index.dim)
    throw DataError("'" + path + "': column count does not match the block index");
  d.draws.resize(static_cast<Eigen::Index>(t.rows.size()), d.index.dim);
  for (size_t r = 0; r < t.rows.size(); ++r)
    for (int c = 0; c < d.index.dim; ++c)
      d.draws(static_cast<Eigen::Index>(r), c) = csv::to_double(t.rows[r][c], t.header[c]);
  const int per = meta.at("per_chain").get<int>();
  if (d.draws.rows() != static_cast<Eigen::Index>(per) * d.chains)
    throw DataError("'" + path + "': row count does not match chains * draws per chain");
  return d;
}

}  // namespace aip
