#include "aip/model.hpp"

#include <cmath>

#include "aip/error.hpp"

namespace aip {

const ParameterBlock& BlockIndex::at(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw DataError("unknown parameter block '" + name + "'");
}

Eigen::VectorXd BlockIndex::segment(const Eigen::VectorXd& params,
                                    const std::string& name) const {
  const ParameterBlock& b = at(name);
  return params.segment(b.offset, b.size);
}

void ModelSpec::validate() const {
  if (!std::isfinite(offset)) throw DataError("offset must be finite");
  if (likelihood == Likelihood::Multinomial && offset != 0.0)
    throw DataError("bias-correction offsets apply only to Bernoulli models");
  if (num_choices < 2) throw DataError("choice set must have J >= 2");
  for (const auto& b : blocks) {
    if (b.levels < 2) throw DataError("effect block '" + b.name + "' needs >= 2 levels");
    if (b.kind == EffectKind::Bym2) {
      if (!graph) throw DataError("spatial block '" + b.name + "' requires a graph");
      if (graph->num_nodes != b.levels)
        throw DataError("spatial block '" + b.name + "' level count != graph size");
      if (scaling.epsilon.size() != static_cast<size_t>(graph->num_components))
        throw DataError("scaling factors missing for spatial block '" + b.name + "'");
    }
  }
}

BlockIndex ModelSpec::layout() const {
  BlockIndex idx;
  const int groups = num_groups();
  for (int g = 0; g < groups; ++g) {
    std::string prefix = groups > 1 ? "c" + std::to_string(g + 1) + ":" : "";
    auto add = [&](const std::string& name, int size) {
      idx.blocks.push_back({prefix + name, idx.dim, size});
      idx.dim += size;
    };
    add("alpha", 1);
    if (num_fixed > 0) add("beta", num_fixed);
    for (const auto& b : blocks) {
      switch (b.kind) {
        case EffectKind::Unstructured:
        case EffectKind::RandomWalk:
          add(b.name + "_z", b.levels);
          add(b.name + "_log_scale", 1);
          break;
        case EffectKind::Bym2:
          add(b.name + "_phi", b.levels);
          add(b.name + "_psi", b.levels);
          add(b.name + "_logit_xi", 1);
          add(b.name + "_log_scale", 1);
          break;
      }
    }
  }
  return idx;
}

ModelSpec make_model_spec(const Schema& schema, Likelihood likelihood, int choice,
                          bool structured, double offset,
                          std::shared_ptr<const AdjacencyGraph> graph) {
  ModelSpec spec;
  spec.likelihood = likelihood;
  spec.choice = choice;
  spec.num_choices = static_cast<int>(schema.choices.size());
  spec.structured = structured;
  spec.offset = offset;
  spec.num_fixed = static_cast<int>(schema.state_covariates.size() +
                                    schema.day_covariates.size() +
                                    schema.state_day_covariates.size());
  const int area = schema.area_index();
  for (size_t a = 0; a < schema.attributes.size(); ++a) {
    const Attribute& attr = schema.attributes[a];
    EffectBlock b;
    b.name = attr.name;
    b.levels = attr.cardinality;
    b.attribute = static_cast<int>(a);
    if (structured && static_cast<int>(a) == area)
      b.kind = EffectKind::Bym2;
    else if (structured && attr.ordinal)
      b.kind = EffectKind::RandomWalk;
    else
      b.kind = EffectKind::Unstructured;
    spec.blocks.push_back(std::move(b));
  }
  if (schema.num_days > 0) {
    EffectBlock b;
    b.name = "day";
    b.levels = schema.num_days;
    b.attribute = -1;
    b.kind = structured ? EffectKind::RandomWalk : EffectKind::Unstructured;
    spec.blocks.push_back(std::move(b));
  }
  if (structured) {
    if (!graph) throw DataError("structured spec requires an adjacency graph");
    spec.graph = std::move(graph);
    spec.scaling = compute_scaling_factor(*spec.graph);
  }
  spec.validate();
  return spec;
}

ModelSpec unstructured_variant(const ModelSpec& spec) {
  ModelSpec out = spec;
  out.structured = false;
  out.graph.reset();
  out.scaling = {};
  for (auto& b : out.blocks) b.kind = EffectKind::Unstructured;
  return out;
}

namespace {

void standardize(ModelSpec& spec, Eigen::MatrixXd& X) {
  const int P = static_cast<int>(X.cols());
  if (spec.x_mean.empty()) {
    spec.x_mean.assign(P, 0.0);
    spec.x_sd.assign(P, 1.0);
    for (int p = 0; p < P; ++p) {
      spec.x_mean[p] = X.col(p).mean();
      double var = (X.col(p).array() - spec.x_mean[p]).square().sum() /
                   std::max<double>(X.rows() - 1, 1);
      spec.x_sd[p] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  }
  for (int p = 0; p < P; ++p)
    X.col(p) = (X.col(p).array() - spec.x_mean[p]) / spec.x_sd[p];
}

void apply_standardization(const ModelSpec& spec, Eigen::MatrixXd& X) {
  if (spec.x_mean.empty()) return;
  for (int p = 0; p < X.cols(); ++p)
    X.col(p) = (X.col(p).array() - spec.x_mean[p]) / spec.x_sd[p];
}

}  // namespace

ModelData build_training_data(ModelSpec& spec, const Schema& schema,
                              const SurveyDataset& survey, const CovariateTables& cov) {
  if (survey.rows.empty()) throw DataError("survey is empty");
  ModelData data;
  const int n = static_cast<int>(survey.rows.size());
  data.X.resize(n, spec.num_fixed);
  const int area = schema.area_index();
  for (int i = 0; i < n; ++i) {
    const SurveyRow& r = survey.rows[i];
    auto x = cov.row(r.levels[area], r.day);
    for (int p = 0; p < spec.num_fixed; ++p) data.X(i, p) = x[p];
  }
  if (spec.x_mean.empty())
    standardize(spec, data.X);
  else
    apply_standardization(spec, data.X);

  data.level_ids.resize(spec.blocks.size());
  for (size_t b = 0; b < spec.blocks.size(); ++b) {
    auto& ids = data.level_ids[b];
    ids.resize(n);
    for (int i = 0; i < n; ++i) {
      const SurveyRow& r = survey.rows[i];
      int id = spec.blocks[b].attribute >= 0 ? r.levels[spec.blocks[b].attribute] : r.day;
      if (id < 0 || id >= spec.blocks[b].levels)
        throw DataError("respondent " + std::to_string(i + 1) +
                        " outside domain of block '" + spec.blocks[b].name + "'");
      ids[i] = id;
    }
  }
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    int c = survey.rows[i].choice;
    data.y[i] = spec.likelihood == Likelihood::Bernoulli ? (c == spec.choice ? 1 : 0) : c;
  }
  return data;
}

ModelData build_cell_data(const ModelSpec& spec, const StratificationFrame& frame,
                          const CovariateTables& cov, int day) {
  ModelData data;
  const int m = static_cast<int>(frame.cells.size());
  const int area = frame.schema.area_index();
  data.X.resize(m, spec.num_fixed);
  for (int i = 0; i < m; ++i) {
    auto x = cov.row(frame.cells[i].levels[area], day);
    for (int p = 0; p < spec.num_fixed; ++p) data.X(i, p) = x[p];
  }
  apply_standardization(spec, data.X);
  data.level_ids.resize(spec.blocks.size());
  for (size_t b = 0; b < spec.blocks.size(); ++b) {
    auto& ids = data.level_ids[b];
    ids.resize(m);
    for (int i = 0; i < m; ++i)
      ids[i] = spec.blocks[b].attribute >= 0 ? frame.cells[i].levels[spec.blocks[b].attribute]
                                             : day;
  }
  return data;
}

namespace {

// Per-group view into the flat parameter vector.
struct GroupView {
  double alpha;
  Eigen::VectorXd beta;
  // per block: primary vectors and transform parameters
  struct BlockParams {
    Eigen::VectorXd z;    // z / rw levels / phi
    Eigen::VectorXd psi;  // bym2 only
    double logit_xi = 0.0;
    double log_scale = 0.0;
  };
  std::vector<BlockParams> blk;
};

GroupView read_group(const Eigen::VectorXd& params, const ModelSpec& spec, int group,
                     int stride) {
  GroupView v;
  int off = group * stride;
  v.alpha = params[off++];
  v.beta = params.segment(off, spec.num_fixed);
  off += spec.num_fixed;
  for (const auto& b : spec.blocks) {
    GroupView::BlockParams bp;
    if (b.kind == EffectKind::Bym2) {
      bp.z = params.segment(off, b.levels);
      off += b.levels;
      bp.psi = params.segment(off, b.levels);
      off += b.levels;
      bp.logit_xi = params[off++];
      bp.log_scale = params[off++];
    } else {
      bp.z = params.segment(off, b.levels);
      off += b.levels;
      bp.log_scale = params[off++];
    }
    v.blk.push_back(std::move(bp));
  }
  return v;
}

// Constrained effect vector for one block.
Eigen::VectorXd block_effect(const EffectBlock& b, const GroupView::BlockParams& bp,
                             const ModelSpec& spec) {
  const double scale = std::exp(bp.log_scale);
  if (b.kind != EffectKind::Bym2) return scale * bp.z;
  const double xi = logistic(bp.logit_xi);
  return bym2_convolve(bp.z, bp.psi, xi, scale, *spec.graph, spec.scaling);
}

constexpr double kAlphaVar = 100.0;  // alpha ~ N(0, 10)

}  // namespace

Eigen::MatrixXd linear_predictor(const Eigen::VectorXd& params, const ModelData& data,
                                 const ModelSpec& spec, bool with_offset) {
  const BlockIndex idx = spec.layout();
  if (params.size() != idx.dim) throw DataError("parameter vector length mismatch");
  const int groups = spec.num_groups();
  const int stride = idx.dim / groups;
  const int n = data.n();
  Eigen::MatrixXd mu(n, groups);
  for (int g = 0; g < groups; ++g) {
    GroupView v = read_group(params, spec, g, stride);
    Eigen::VectorXd m = Eigen::VectorXd::Constant(
        n, v.alpha + (with_offset ? spec.offset : 0.0));
    if (spec.num_fixed > 0) m += data.X * v.beta;
    for (size_t b = 0; b < spec.blocks.size(); ++b) {
      Eigen::VectorXd eff = block_effect(spec.blocks[b], v.blk[b], spec);
      const auto& ids = data.level_ids[b];
      for (int i = 0; i < n; ++i) m[i] += eff[ids[i]];
    }
    mu.col(g) = m;
  }
  return mu;
}

double log_posterior_with_grad(const Eigen::VectorXd& params, const ModelData& data,
                               const ModelSpec& spec, Eigen::VectorXd& grad) {
  spec.validate();
  const BlockIndex idx = spec.layout();
  if (params.size() != idx.dim) throw DataError("parameter vector length mismatch");
  const int groups = spec.num_groups();
  const int stride = idx.dim / groups;
  const int n = data.n();
  grad.setZero(idx.dim);

  // Likelihood: mu and residuals d loglik / d mu per group.
  Eigen::MatrixXd mu = linear_predictor(params, data, spec, true);
  Eigen::MatrixXd resid(n, groups);
  double lp = 0.0;
  if (spec.likelihood == Likelihood::Bernoulli) {
    for (int i = 0; i < n; ++i) {
      lp += data.y[i] * mu(i, 0) - log1p_exp(mu(i, 0));
      resid(i, 0) = data.y[i] - logistic(mu(i, 0));
    }
  } else {
    for (int i = 0; i < n; ++i) {
      // reference category (last choice) predictor pinned to 0
      double mx = 0.0;
      for (int g = 0; g < groups; ++g) mx = std::max(mx, mu(i, g));
      double sum = std::exp(-mx);
      for (int g = 0; g < groups; ++g) sum += std::exp(mu(i, g) - mx);
      double lse = mx + std::log(sum);
      lp += (data.y[i] < groups ? mu(i, data.y[i]) : 0.0) - lse;
      for (int g = 0; g < groups; ++g)
        resid(i, g) = (data.y[i] == g ? 1.0 : 0.0) - std::exp(mu(i, g) - lse);
    }
  }

  for (int g = 0; g < groups; ++g) {
    GroupView v = read_group(params, spec, g, stride);
    int off = g * stride;
    const double rsum = resid.col(g).sum();

    // alpha
    lp += -0.5 * v.alpha * v.alpha / kAlphaVar;
    grad[off] = rsum - v.alpha / kAlphaVar;
    int pos = off + 1;

    // beta
    if (spec.num_fixed > 0) {
      lp += -0.5 * v.beta.squaredNorm();
      grad.segment(pos, spec.num_fixed) = data.X.transpose() * resid.col(g) - v.beta;
      pos += spec.num_fixed;
    }

    for (size_t b = 0; b < spec.blocks.size(); ++b) {
      const EffectBlock& blk = spec.blocks[b];
      const auto& bp = v.blk[b];
      const double scale = std::exp(bp.log_scale);
      const auto& ids = data.level_ids[b];

      // Per-level residual sums.
      Eigen::VectorXd R = Eigen::VectorXd::Zero(blk.levels);
      for (int i = 0; i < n; ++i) R[ids[i]] += resid(i, g);

      if (blk.kind != EffectKind::Bym2) {
        // likelihood path: effect = scale * z
        grad.segment(pos, blk.levels) = scale * R;
        double ds = scale * R.dot(bp.z);
        if (blk.kind == EffectKind::Unstructured) {
          lp += -0.5 * bp.z.squaredNorm();
          grad.segment(pos, blk.levels) -= bp.z;
        } else {
          Eigen::VectorXd rw_grad;
          lp += random_walk_logdensity(bp.z, &rw_grad);
          grad.segment(pos, blk.levels) += rw_grad;
        }
        pos += blk.levels;
        lp += -0.5 * std::exp(2.0 * bp.log_scale) + bp.log_scale;
        grad[pos++] = ds - std::exp(2.0 * bp.log_scale) + 1.0;
        continue;
      }

      // BYM2 block
      const AdjacencyGraph& graph = *spec.graph;
      const double xi = logistic(bp.logit_xi);
      const double sq1 = std::sqrt(1.0 - xi);
      const double sqxi = std::sqrt(xi);
      Eigen::VectorXd gamma = bym2_convolve(bp.z, bp.psi, xi, scale, graph, spec.scaling);

      double ds = R.dot(gamma);
      double dxi = 0.0;
      Eigen::VectorXd dphi = Eigen::VectorXd::Zero(blk.levels);
      Eigen::VectorXd dpsi = Eigen::VectorXd::Zero(blk.levels);
      for (int l = 0; l < blk.levels; ++l) {
        if (graph.is_island(l)) {
          dphi[l] = R[l] * scale;
        } else {
          const double isf = spec.scaling.inv_sqrt[graph.component[l]];
          dphi[l] = R[l] * scale * sq1;
          dpsi[l] = R[l] * scale * sqxi * isf;
          dxi += R[l] * scale *
                 (-bp.z[l] / (2.0 * sq1) + bp.psi[l] * isf / (2.0 * sqxi));
        }
      }

      // priors: phi ~ N(0,1)
      lp += -0.5 * bp.z.squaredNorm();
      dphi -= bp.z;

      // psi: ICAR pairwise penalty + soft sum-to-zero per connected component;
      // island psi gets a N(0,1) anchor (it never enters the likelihood).
      Eigen::VectorXd icar_grad;
      lp += icar_logdensity(bp.psi, graph, &icar_grad);
      dpsi += icar_grad;
      std::vector<double> comp_sum(graph.num_components, 0.0);
      for (int l = 0; l < blk.levels; ++l) comp_sum[graph.component[l]] += bp.psi[l];
      for (int c = 0; c < graph.num_components; ++c) {
        if (graph.component_size[c] < 2) continue;
        const double s0 = sum_to_zero_sd(graph.component_size[c]);
        lp += -0.5 * comp_sum[c] * comp_sum[c] / (s0 * s0);
      }
      for (int l = 0; l < blk.levels; ++l) {
        if (graph.is_island(l)) {
          lp += -0.5 * bp.psi[l] * bp.psi[l];
          dpsi[l] -= bp.psi[l];
        } else {
          const double s0 = sum_to_zero_sd(graph.component_size[graph.component[l]]);
          dpsi[l] -= comp_sum[graph.component[l]] / (s0 * s0);
        }
      }

      // xi ~ Beta(1/2, 1/2) with logit transform Jacobian
      lp += 0.5 * (std::log(xi) + std::log(1.0 - xi));
      double dlogit_xi = dxi * xi * (1.0 - xi) + (0.5 - xi);

      // half-normal scale with log transform Jacobian
      lp += -0.5 * std::exp(2.0 * bp.log_scale) + bp.log_scale;
      ds += -std::exp(2.0 * bp.log_scale) + 1.0;

      grad.segment(pos, blk.levels) = dphi;
      pos += blk.levels;
      grad.segment(pos, blk.levels) = dpsi;
      pos += blk.levels;
      grad[pos++] = dlogit_xi;
      grad[pos++] = ds;
    }
  }

  if (!std::isfinite(lp))
    throw NumericalError("non-finite log posterior (check data and parameter blocks)");
  return lp;
}

double log_posterior(const Eigen::VectorXd& params, const ModelData& data,
                     const ModelSpec& spec) {
  Eigen::VectorXd grad;
  return log_posterior_with_grad(params, data, spec, grad);
}

Eigen::VectorXd grad_log_posterior(const Eigen::VectorXd& params, const ModelData& data,
                                   const ModelSpec& spec) {
  Eigen::VectorXd grad;
  log_posterior_with_grad(params, data, spec, grad);
  return grad;
}

}  // namespace aip
