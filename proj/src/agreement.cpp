#include "aip/agreement.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>

#include "aip/csv.hpp"
#include "aip/sampler.hpp"

namespace aip {

namespace {

double distance(int c, int k, AlphaLevel level) {
  if (level == AlphaLevel::Nominal) return c == k ? 0.0 : 1.0;
  const double d = static_cast<double>(c - k);
  return d * d;
}

}  // namespace

AlphaResult krippendorff_alpha(const std::vector<std::vector<int>>& units,
                               int num_labels, AlphaLevel level) {
  if (num_labels < 1) throw DataError("num_labels must be positive");
  const int L = num_labels;
  Eigen::MatrixXd o = Eigen::MatrixXd::Zero(L, L);
  int usable = 0;
  for (const auto& unit : units) {
    std::vector<int> vals;
    for (int v : unit) {
      if (v < 0) continue;
      if (v >= L) throw DataError("label id out of range");
      vals.push_back(v);
    }
    const int m = static_cast<int>(vals.size());
    if (m < 2) continue;
    ++usable;
    const double w = 1.0 / (m - 1);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        if (a != b) o(vals[a], vals[b]) += w;
  }
  if (usable < 2) throw DataError("need at least two units with two or more ratings");
  const Eigen::VectorXd n = o.rowwise().sum();
  const double total = n.sum();
  double d_obs = 0.0, d_exp = 0.0;
  for (int c = 0; c < L; ++c) {
    for (int k = 0; k < L; ++k) {
      const double d = distance(c, k, level);
      d_obs += o(c, k) * d;
      d_exp += n(c) * n(k) * d;
    }
  }
  d_obs /= total;
  d_exp /= total * (total - 1.0);
  if (d_exp <= 0.0) return {1.0, true};
  return {1.0 - d_obs / d_exp, false};
}

BootstrapSummary bootstrap_alpha(const std::vector<std::vector<int>>& units,
                                 int num_labels, AlphaLevel level,
                                 int replicates, std::uint64_t seed) {
  if (replicates < 1) throw DataError("replicates must be positive");
  BootstrapSummary out;
  out.draws.assign(replicates, 0.0);
  const size_t n = units.size();
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int b = next.fetch_add(1);
      if (b >= replicates) return;
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(b));
      std::uniform_int_distribution<size_t> pick(0, n - 1);
      std::vector<std::vector<int>> resample;
      resample.reserve(n);
      for (size_t i = 0; i < n; ++i) resample.push_back(units[pick(rng)]);
      out.draws[b] = krippendorff_alpha(resample, num_labels, level).alpha;
    }
  };
  const int threads =
      std::min<int>(replicates, std::max(1u, std::thread::hardware_concurrency()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  double sum = 0.0;
  for (double d : out.draws) sum += d;
  out.mean = sum / replicates;
  out.q5 = percentile(out.draws, 0.05);
  out.q50 = percentile(out.draws, 0.50);
  out.q95 = percentile(out.draws, 0.95);
  return out;
}

void AgreementMatrix::validate() const {
  if (counts.rows() != counts.cols()) throw DataError("agreement matrix must be square");
  if (counts.rows() < 1) throw DataError("agreement matrix is empty");
  if (!labels.empty() && static_cast<int>(labels.size()) != counts.rows())
    throw DataError("label names do not match the matrix size");
  double total = 0.0;
  for (int i = 0; i < counts.rows(); ++i) {
    for (int j = 0; j < counts.cols(); ++j) {
      const double v = counts(i, j);
      if (v < 0 || v != std::floor(v))
        throw DataError("agreement matrix entries must be nonnegative integers");
      total += v;
    }
  }
  if (total < 1) throw DataError("agreement matrix has no counts");
}

std::vector<std::vector<int>> expand_to_units(const AgreementMatrix& a) {
  a.validate();
  std::vector<std::vector<int>> units;
  for (int i = 0; i < a.counts.rows(); ++i)
    for (int j = 0; j < a.counts.cols(); ++j)
      for (long c = 0; c < static_cast<long>(a.counts(i, j)); ++c)
        units.push_back({i, j});
  return units;
}

std::map<std::string, RatingsTable> load_ratings(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int c_unit = t.column("unit");
  const int c_rater = t.column("rater");
  const int c_var = t.column("variable");
  const int c_label = t.column("label");
  struct Builder {
    RatingsTable table;
    std::unordered_map<std::string, int> unit_idx, rater_idx, label_idx;
  };
  std::map<std::string, Builder> builders;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    Builder& b = builders[row[c_var]];
    auto intern = [](std::unordered_map<std::string, int>& idx,
                     std::vector<std::string>& names, const std::string& key) {
      auto it = idx.find(key);
      if (it != idx.end()) return it->second;
      const int id = static_cast<int>(names.size());
      idx.emplace(key, id);
      names.push_back(key);
      return id;
    };
    const int u = intern(b.unit_idx, b.table.unit_ids, row[c_unit]);
    const int rater = intern(b.rater_idx, b.table.raters, row[c_rater]);
    const int label = intern(b.label_idx, b.table.labels, row[c_label]);
    if (u >= static_cast<int>(b.table.values.size())) b.table.values.emplace_back();
    auto& vals = b.table.values[u];
    if (rater >= static_cast<int>(vals.size())) vals.resize(rater + 1, -1);
    if (vals[rater] != -1)
      throw DataError("'" + path + "': duplicate rating for unit '" + row[c_unit] +
                      "', rater '" + row[c_rater] + "', variable '" + row[c_var] + "'");
    vals[rater] = label;
  }
  if (builders.empty()) throw DataError("'" + path + "' contains no ratings");
  std::map<std::string, RatingsTable> out;
  for (auto& [var, b] : builders) {
    const size_t num_raters = b.table.raters.size();
    for (auto& vals : b.table.values) vals.resize(num_raters, -1);
    out.emplace(var, std::move(b.table));
  }
  return out;
}

AgreementMatrix tabulate_pair(const RatingsTable& t, int rater_a, int rater_b) {
  const int num_raters = static_cast<int>(t.raters.size());
  if (rater_a < 0 || rater_a >= num_raters || rater_b < 0 || rater_b >= num_raters ||
      rater_a == rater_b)
    throw DataError("invalid rater pair");
  const int L = static_cast<int>(t.labels.size());
  AgreementMatrix a;
  a.labels = t.labels;
  a.counts = Eigen::MatrixXd::Zero(L, L);
  for (const auto& vals : t.values) {
    const int va = vals[rater_a];
    const int vb = vals[rater_b];
    if (va < 0 || vb < 0) continue;
    a.counts(va, vb) += 1.0;
  }
  a.validate();
  return a;
}

AgreementMatrix load_agreement_matrix(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int c_label = t.column("label");
  AgreementMatrix a;
  for (size_t i = 0; i < t.header.size(); ++i)
    if (static_cast<int>(i) != c_label) a.labels.push_back(t.header[i]);
  const int L = static_cast<int>(a.labels.size());
  if (static_cast<int>(t.rows.size()) != L)
    throw DataError("'" + path + "' is not a square labelled matrix");
  a.counts = Eigen::MatrixXd::Zero(L, L);
  for (int i = 0; i < L; ++i) {
    if (t.rows[i][c_label] != a.labels[i])
      throw DataError("'" + path + "': row labels must match column labels in order");
    int j = 0;
    for (size_t c = 0; c < t.header.size(); ++c) {
      if (static_cast<int>(c) == c_label) continue;
      a.counts(i, j++) =
          static_cast<double>(csv::to_long(t.rows[i][c], "agreement count"));
    }
  }
  a.validate();
  return a;
}

void NetworkConfig::validate() const {
  if (iterations <= warmup) throw DataError("iterations must exceed warmup");
  if (warmup < 0 || thin < 1) throw DataError("invalid warmup or thinning");
  if (beta_step <= 0 || sigma_step <= 0 || r_step <= 0)
    throw DataError("proposal scales must be positive");
}

namespace {

constexpr double kBeta0Var = 10.0;
constexpr double kSigmaUpper = 5.0;
constexpr double kRRate = 0.01;

struct NetworkState {
  double b0, s1, s2, r;
  Eigen::VectorXd b1, b2;
  Eigen::MatrixXd pi, link;
};

double cell_loglik(double a, double eta, double r, double link) {
  const double mu = std::exp(eta) * (1.0 + r * link);
  return a * std::log(mu) - mu;
}

double loglik_all(const Eigen::MatrixXd& a, const NetworkState& st) {
  double lp = 0.0;
  const int L = static_cast<int>(a.rows());
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      lp += cell_loglik(a(i, j), st.b0 + st.b1(i) + st.b2(j), st.r, st.link(i, j));
  return lp;
}

}  // namespace

NetworkPosterior fit_agreement_network(const AgreementMatrix& a,
                                       const NetworkConfig& config) {
  a.validate();
  config.validate();
  const int L = a.size();
  const Eigen::MatrixXd& counts = a.counts;
  Rng rng = make_stream(config.seed, 0);

  NetworkState st;
  st.b0 = std::log(std::max(counts.mean(), 0.5));
  st.s1 = st.s2 = 1.0;
  st.r = config.fix_r_zero ? 0.0 : 1.0;
  st.b1 = Eigen::VectorXd::Zero(L);
  st.b2 = Eigen::VectorXd::Zero(L);
  st.pi = Eigen::MatrixXd::Constant(L, L, 0.5);
  st.link = Eigen::MatrixXd::Zero(L, L);

  NetworkPosterior post;
  post.size = L;
  long beta_prop = 0, beta_acc = 0, sigma_prop = 0, sigma_acc = 0, r_prop = 0, r_acc = 0;

  auto metropolis = [&](double& value, double step, auto&& logpost, long& prop, long& acc) {
    ++prop;
    const double old = value;
    const double lp_old = logpost();
    value = old + step * rnorm(rng);
    const double lp_new = logpost();
    if (std::isfinite(lp_new) && std::log(runif(rng)) < lp_new - lp_old) {
      ++acc;
    } else {
      value = old;
    }
  };

  for (int iter = 0; iter < config.iterations; ++iter) {
    // latent links: exact Bernoulli conditional (see docs/latent_link_gibbs.md)
    for (int i = 0; i < L; ++i) {
      for (int j = 0; j < L; ++j) {
        double p;
        if (config.fix_r_zero) {
          p = st.pi(i, j);  // the likelihood carries no information about B
        } else {
          const double eta = st.b0 + st.b1(i) + st.b2(j);
          const double logit = std::log(st.pi(i, j) / (1.0 - st.pi(i, j))) +
                               counts(i, j) * std::log1p(st.r) - st.r * std::exp(eta);
          p = 1.0 / (1.0 + std::exp(-logit));
        }
        st.link(i, j) = runif(rng) < p ? 1.0 : 0.0;
      }
    }
    // conjugate Beta(1/2, 1/2) update for the link probabilities
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j)
        st.pi(i, j) = rbeta(rng, 0.5 + st.link(i, j), 1.5 - st.link(i, j));

    metropolis(
        st.b0, config.beta_step,
        [&] { return loglik_all(counts, st) - st.b0 * st.b0 / (2.0 * kBeta0Var); },
        beta_prop, beta_acc);
    for (int i = 0; i < L; ++i) {
      metropolis(
          st.b1(i), config.beta_step,
          [&] {
            double lp = -st.b1(i) * st.b1(i) / (2.0 * st.s1 * st.s1);
            for (int j = 0; j < L; ++j)
              lp += cell_loglik(counts(i, j), st.b0 + st.b1(i) + st.b2(j), st.r,
                                st.link(i, j));
            return lp;
          },
          beta_prop, beta_acc);
    }
    for (int j = 0; j < L; ++j) {
      metropolis(
          st.b2(j), config.beta_step,
          [&] {
            double lp = -st.b2(j) * st.b2(j) / (2.0 * st.s2 * st.s2);
            for (int i = 0; i < L; ++i)
              lp += cell_loglik(counts(i, j), st.b0 + st.b1(i) + st.b2(j), st.r,
                                st.link(i, j));
            return lp;
          },
          beta_prop, beta_acc);
    }
    auto scale_logpost = [&](double s, const Eigen::VectorXd& b) {
      if (s <= 0.0 || s >= kSigmaUpper) return -std::numeric_limits<double>::infinity();
      return -L * std::log(s) - b.squaredNorm() / (2.0 * s * s);
    };
    metropolis(st.s1, config.sigma_step, [&] { return scale_logpost(st.s1, st.b1); },
               sigma_prop, sigma_acc);
    metropolis(st.s2, config.sigma_step, [&] { return scale_logpost(st.s2, st.b2); },
               sigma_prop, sigma_acc);
    if (!config.fix_r_zero) {
      // random walk on log r; exponential prior plus the log-scale Jacobian
      double log_r = std::log(st.r);
      metropolis(
          log_r, config.r_step,
          [&] {
            st.r = std::exp(log_r);
            return loglik_all(counts, st) - kRRate * st.r + log_r;
          },
          r_prop, r_acc);
      st.r = std::exp(log_r);
    }

    if (iter >= config.warmup && (iter - config.warmup) % config.thin == 0) {
      post.beta0.push_back(st.b0);
      post.sigma1.push_back(st.s1);
      post.sigma2.push_back(st.s2);
      post.r.push_back(st.r);
      post.beta1.push_back(st.b1);
      post.beta2.push_back(st.b2);
      post.pi.push_back(st.pi);
      post.link.push_back(st.link);
    }
  }

  post.mean_incidence = posterior_incidence(post.link);
  post.accept_beta = beta_prop > 0 ? static_cast<double>(beta_acc) / beta_prop : 0.0;
  post.accept_sigma = sigma_prop > 0 ? static_cast<double>(sigma_acc) / sigma_prop : 0.0;
  post.accept_r = r_prop > 0 ? static_cast<double>(r_acc) / r_prop : 1.0;
  post.converged = post.accept_beta > 0.01 && post.accept_sigma > 0.01 &&
                   (config.fix_r_zero || post.accept_r > 0.01);
  return post;
}

Eigen::MatrixXd posterior_incidence(const std::vector<Eigen::MatrixXd>& link_draws) {
  if (link_draws.empty()) throw DataError("no link draws stored");
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(link_draws[0].rows(), link_draws[0].cols());
  for (const auto& d : link_draws) mean += d;
  return mean / static_cast<double>(link_draws.size());
}

void write_incidence(const std::string& path, const Eigen::MatrixXd& incidence,
                     const std::vector<std::string>& labels) {
  if (static_cast<int>(labels.size()) != incidence.rows())
    throw DataError("label names do not match the incidence size");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "label";
  for (const auto& l : labels) out << ',' << csv::quote(l);
  out << "\n";
  out.precision(17);
  for (int i = 0; i < incidence.rows(); ++i) {
    out << csv::quote(labels[i]);
    for (int j = 0; j < incidence.cols(); ++j) out << ',' << incidence(i, j);
    out << "\n";
  }
}

}  // namespace aip
