// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Performance-guided refinement: score grid cells of two-gate layout space by
// validation loss, then draw the next training layouts in proportion to the
// loss, mixed with a uniform floor.

#include "gatesplat/feasibility.hpp"

namespace gatesplat {

struct PgrConfig {
  std::size_t iterations = 3;
  double beta = 0.05;
  double lambda_pos = 1.0;
  /// Layouts per cell in the initial uniform set.
  std::size_t initial_per_cell = 5;
  /// Layouts per iteration after the first; 0 keeps the initial budget.
  std::size_t samples_per_iteration = 0;
  /// Validation layouts per cell.
  std::size_t validation_per_cell = 2;
  std::size_t retry_cap = 50;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate() const {
    if (iterations < 1) throw ConfigError("pgr: iterations must be >= 1");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("pgr: beta must be in [0,1]");
    if (!(lambda_pos >= 0.0)) throw ConfigError("pgr: lambda_pos must be >= 0");
    if (retry_cap < 1) throw ConfigError("pgr: retry cap must be >= 1");
    if (validation_per_cell < 1) throw ConfigError("pgr: validation_per_cell must be >= 1");
  }
};

/// Mean over gates of 1 for any failure and lambda * error for a success.
inline double task_loss(const std::vector<GateRecord>& gates, double lambda_pos) {
  if (gates.empty()) throw ParameterError("task_loss: no gate records");
  double sum = 0.0;
  for (const auto& g : gates) sum += g.outcome == Outcome::success ? lambda_pos * g.error : 1.0;
  return sum / static_cast<double>(gates.size());
}

/// w = l / sum(l), then (1 - beta) w + beta / M. Uniform when sum(l) = 0.
inline std::vector<double> pgr_weights(const std::vector<double>& losses, double beta) {
  if (losses.empty()) throw ParameterError("weights: empty loss vector");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("weights: beta must be in [0,1]");
  double total = 0.0;
  for (const double l : losses) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("weights: losses must be finite and >= 0");
    total += l;
  }
  const auto m = static_cast<double>(losses.size());
  std::vector<double> w(losses.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double base = total > 0.0 ? losses[i] / total : 1.0 / m;
    w[i] = (1.0 - beta) * base + beta / m;
  }
  return w;
}

/// Layouts tagged with their grid cells.
struct LayoutSet {
  std::vector<TwoGateLayout> layouts;
  std::vector<std::size_t> cells;
  std::size_t size() const { return layouts.size(); }
};

using LayoutPredicate = std::function<bool(const TwoGateLayout&)>;

struct SamplingStats {
  /// Draws whose cell ran out of retries and was dropped.
  std::size_t skipped = 0;
  /// Rejected candidate layouts.
  std::size_t rejections = 0;
};

namespace pgr_detail {

/// In-cell rejection sampling for a fixed list of cells. Entry i is either a
/// layout accepted within the retry cap or nullopt. Each slot draws from its
/// own stream so the result does not depend on the thread count.
inline std::vector<std::optional<TwoGateLayout>> fill_cells(const GridPartition& part,
                                                            const std::vector<std::size_t>& cells,
                                                            std::uint64_t seed, std::size_t retry_cap,
                                                            const LayoutPredicate& accept, unsigned jobs,
                                                            std::vector<std::size_t>& rejections) {
  std::vector<std::optional<TwoGateLayout>> out(cells.size());
  rejections.assign(cells.size(), 0);
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const LayoutBox box = part.cell_bounds(cells[i]);
    for (std::size_t k = 0; k < retry_cap; ++k) {
      const TwoGateLayout l = sample_layout(box, rng);
      if (!accept || accept(l)) {
        out[i] = l;
        return;
      }
      ++rejections[i];
    }
  });
  return out;
}

inline std::size_t categorical(const std::vector<double>& w, double total, Rng& rng) {
  const double r = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    acc += w[i];
    last = i;
    if (r < acc) return i;
  }
  return last;
}

}  // namespace pgr_detail

/// n layouts: cell drawn categorically by w, layout uniform in the cell and
/// redrawn from the same cell on rejection. A cell that exhausts the retry
/// cap is marked in `exhausted`, excluded from later draws and the draw is
/// repeated over the remaining cells.
inline LayoutSet resample(const GridPartition& part, const std::vector<double>& w, std::size_t n, Rng& rng,
                          const LayoutPredicate& accept = {}, std::size_t retry_cap = 50, unsigned jobs = 1,
                          std::vector<bool>* exhausted = nullptr, SamplingStats* stats = nullptr) {
  if (w.size() != part.cell_count()) throw ParameterError("resample: weight vector size differs from cell count");
  std::vector<bool> local(part.cell_count(), false);
  std::vector<bool>& dead = exhausted ? *exhausted : local;
  if (dead.size() != part.cell_count()) dead.assign(part.cell_count(), false);
  std::vector<double> live = w;
  double total = 0.0;
  for (std::size_t i = 0; i < live.size(); ++i) {
    if (!(live[i] >= 0.0)) throw ParameterError("resample: negative weight");
    if (dead[i]) live[i] = 0.0;
    total += live[i];
  }

  std::vector<std::optional<TwoGateLayout>> result(n);
  std::vector<std::size_t> cell_of(n);
  std::vector<std::size_t> pending(n);
  for (std::size_t i = 0; i < n; ++i) pending[i] = i;
  SamplingStats st;
  std::uint64_t round = 0;
  while (!pending.empty()) {
    if (!(total > 0.0)) throw SamplingError("resample: every grid cell is infeasible");
    std::vector<std::size_t> cells(pending.size());
    for (std::size_t k = 0; k < pending.size(); ++k) cells[k] = cell_of[pending[k]] = pgr_detail::categorical(live, total, rng);
    std::vector<std::size_t> rej;
    const auto filled =
        pgr_detail::fill_cells(part, cells, derive_seed(rng.next_u64(), round++), retry_cap, accept, jobs, rej);
    std::vector<std::size_t> still;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      st.rejections += rej[k];
      if (filled[k]) {
        result[pending[k]] = filled[k];
        continue;
      }
      ++st.skipped;
      still.push_back(pending[k]);
      if (!dead[cells[k]]) {
        dead[cells[k]] = true;
        total -= live[cells[k]];
        live[cells[k]] = 0.0;
      }
    }
    if (total <= 1e-15 * static_cast<double>(live.size())) {
      total = 0.0;
      for (const double x : live) total += x;
    }
    pending = std::move(still);
  }
  LayoutSet out;
  out.layouts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.layouts.push_back(*result[i]);
    out.cells.push_back(cell_of[i]);
  }
  if (stats) {
    stats->skipped += st.skipped;
    stats->rejections += st.rejections;
  }
  return out;
}

/// `per_cell` accepted layouts in every cell (fewer where the cell exhausts
/// its retries; such cells are marked in `exhausted`).
inline LayoutSet per_cell_layouts(const GridPartition& part, std::size_t per_cell, std::uint64_t seed,
                                  const LayoutPredicate& accept, std::size_t retry_cap, unsigned jobs,
                                  std::vector<bool>* exhausted = nullptr, SamplingStats* stats = nullptr) {
  std::vector<std::size_t> cells;
  cells.reserve(part.cell_count() * per_cell);
  for (std::size_t c = 0; c < part.cell_count(); ++c)
    for (std::size_t k = 0; k < per_cell; ++k) cells.push_back(c);
  std::vector<std::size_t> rej;
  const auto filled = pgr_detail::fill_cells(part, cells, seed, retry_cap, accept, jobs, rej);
  LayoutSet out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (stats) stats->rejections += rej[i];
    if (filled[i]) {
      out.layouts.push_back(*filled[i]);
      out.cells.push_back(cells[i]);
    } else {
      if (stats) ++stats->skipped;
      if (exhausted) {
        if (exhausted->size() != part.cell_count()) exhausted->assign(part.cell_count(), false);
        (*exhausted)[cells[i]] = true;
      }
    }
  }
  return out;
}

struct ValidationResult {
  std::vector<double> losses;
  /// Cells holding at least one validation layout.
  std::vector<bool> populated;
  Metrics metrics;
};

/// Per-cell mean task loss over the validation layouts; cells without
/// validation layouts receive the global mean loss.
template <class Model>
ValidationResult grid_losses(const Policy<Model>& policy, const LayoutSet& val, const GridPartition& part,
                             const Model& model, SimConfig cfg, double lambda_pos, std::uint64_t seed,
                             unsigned jobs = 1) {
  if (val.size() == 0) throw ConfigError("grid_losses: empty validation set");
  cfg.record_trajectory = false;
  std::vector<std::vector<GateRecord>> records(val.size());
  parallel_for(val.size(), jobs, [&](std::size_t i) {
    SimConfig c = cfg;
    c.seed = derive_seed(seed, i);
    records[i] = rollout(model, policy, layout_to_track(val.layouts[i], Model::kPlatform), c).gates;
  });
  ValidationResult r;
  r.losses.assign(part.cell_count(), 0.0);
  r.populated.assign(part.cell_count(), false);
  std::vector<std::size_t> count(part.cell_count(), 0);
  double global = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const double l = task_loss(records[i], lambda_pos);
    r.losses[val.cells[i]] += l;
    ++count[val.cells[i]];
    global += l;
  }
  global /= static_cast<double>(val.size());
  for (std::size_t c = 0; c < part.cell_count(); ++c) {
    r.populated[c] = count[c] > 0;
    r.losses[c] = count[c] ? r.losses[c] / static_cast<double>(count[c]) : global;
  }
  r.metrics = metrics(records);
  return r;
}

struct PgrIteration {
  std::size_t iteration = 0;
  std::vector<double> losses;
  std::vector<double> weights;
  /// Training layouts per cell used in this iteration.
  std::vector<std::size_t> samples;
  Metrics validation;
  std::size_t dataset_rollouts = 0;
  std::size_t dataset_pairs = 0;
  SamplingStats sampling;

  double worst_loss(const std::vector<bool>& populated) const {
    double w = 0.0;
    for (std::size_t c = 0; c < losses.size(); ++c)
      if (populated[c]) w = std::max(w, losses[c]);
    return w;
  }
};

struct PgrResult {
  std::vector<PgrIteration> history;
  LayoutSet validation;
  std::vector<bool> populated;
  Dataset dataset;
};

/// The refinement loop. Iteration t collects expert rollouts on G_t into the
/// dataset, trains the policy, scores the validation cells and draws G_{t+1}.
template <class Model>
PgrResult pgr_run(const PgrConfig& config, Policy<Model>& policy, const Policy<Model>& expert,
                  const GridPartition& part, const Model& model, const SimConfig& sim) {
  config.validate();
  const LayoutPredicate accept = layout_filter(model, expert, sim);
  PgrResult res;
  std::vector<bool> exhausted(part.cell_count(), false);

  SamplingStats val_stats;
  res.validation = per_cell_layouts(part, config.validation_per_cell, derive_seed(config.seed, 1), accept,
                                    config.retry_cap, config.jobs, nullptr, &val_stats);
  if (res.validation.size() == 0) throw SamplingError("pgr: no feasible validation layout in any cell");

  SamplingStats stats;
  LayoutSet train = per_cell_layouts(part, config.initial_per_cell, derive_seed(config.seed, 2), accept,
                                     config.retry_cap, config.jobs, &exhausted, &stats);
  if (train.size() == 0) throw SamplingError("pgr: no feasible training layout in any cell");
  const std::size_t budget = config.samples_per_iteration ? config.samples_per_iteration : train.size();
  Rng rng(derive_seed(config.seed, 3));

  SimConfig collect = sim;
  collect.record_trajectory = false;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    std::vector<std::size_t> pairs(train.size(), 0);
    parallel_for(train.size(), config.jobs, [&](std::size_t i) {
      SimConfig c = collect;
      c.seed = derive_seed(config.seed ^ 0x636f6c6cULL, it * 1000003 + i);
      pairs[i] = rollout(model, expert, layout_to_track(train.layouts[i], Model::kPlatform), c).ticks;
    });
    for (std::size_t i = 0; i < train.size(); ++i) res.dataset.entries.push_back({train.layouts[i], pairs[i]});
    policy.train(res.dataset);

    const auto val = grid_losses(policy, res.validation, part, model, sim, config.lambda_pos,
                                 derive_seed(config.seed, 4), config.jobs);
    res.populated = val.populated;
    PgrIteration h;
    h.iteration = it;
    h.losses = val.losses;
    h.weights = pgr_weights(val.losses, config.beta);
    h.samples.assign(part.cell_count(), 0);
    for (const auto c : train.cells) ++h.samples[c];
    h.validation = val.metrics;
    h.dataset_rollouts = res.dataset.entries.size();
    h.dataset_pairs = res.dataset.total_pairs();
    h.sampling = stats;
    res.history.push_back(std::move(h));

    if (it < config.iterations) {
      stats = {};
      train = resample(part, res.history.back().weights, budget, rng, accept, config.retry_cap, config.jobs,
                       &exhausted, &stats);
    }
  }
  return res;
}

inline nlohmann::json pgr_history_json(const PgrResult& r) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& h : r.history) {
    nlohmann::json e;
    e["iteration"] = h.iteration;
    e["losses"] = h.losses;
    e["weights"] = h.weights;
    e["samples"] = h.samples;
    e["validation"] = metrics_json(h.validation);
    e["worst_grid_loss"] = h.worst_loss(r.populated);
    e["dataset_rollouts"] = h.dataset_rollouts;
    e["dataset_pairs"] = h.dataset_pairs;
    e["skipped_draws"] = h.sampling.skipped;
    e["rejected_layouts"] = h.sampling.rejections;
    j.push_back(std::move(e));
  }
  return j;
}

inline std::string pgr_losses_csv(const PgrIteration& h) {
  std::ostringstream os;
  os << "grid_idx,loss,weight,samples\n";
  for (std::size_t c = 0; c < h.losses.size(); ++c)
    os << c << ',' << format_double(h.losses[c]) << ',' << format_double(h.weights[c]) << ',' << h.samples[c] << '\n';
  return os.str();
}

/// Samples PGR placed in the top-decile-loss cells of the previous iteration
/// versus what a reference run placed there, for iterations 2..T.
struct Concentration {
  std::vector<std::size_t> pgr;
  std::vector<std::size_t> reference;
};

inline Concentration top_decile_allocation(const PgrResult& pgr, const PgrResult& reference) {
  Concentration c;
  const std::size_t m = pgr.history.front().losses.size();
  const std::size_t k = std::max<std::size_t>(1, m / 10);
  for (std::size_t t = 1; t < pgr.history.size(); ++t) {
    const auto& prev = pgr.history[t - 1].losses;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prev[a] > prev[b]; });
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < k; ++i) {
      a += pgr.history[t].samples[order[i]];
      b += reference.history[t].samples[order[i]];
    }
    c.pgr.push_back(a);
    c.reference.push_back(b);
  }
  return c;
}

}  // namespace gatesplat
