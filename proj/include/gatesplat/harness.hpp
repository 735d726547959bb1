// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment drivers behind the command-line tool. Every command reads one
// JSON config, writes CSV/JSON under the output directory and stamps each
// quantitative output with the config hash.

#include "gatesplat/edit_script.hpp"
#include "gatesplat/pgr.hpp"
#include "gatesplat/render.hpp"

#include <filesystem>
#include <iomanip>

namespace gatesplat {

namespace fs = std::filesystem;

struct ExperimentSpec {
  /// Effective configuration (file contents plus command-line overrides).
  nlohmann::json config = nlohmann::json::object();
  fs::path base = ".";
  fs::path out = "out";
  std::uint64_t seed = 0;
  std::size_t trials = 10;
  unsigned jobs = 1;

  /// Hash of the canonical config text together with seed and trial count.
  std::string hash() const {
    nlohmann::json j = config;
    j["seed"] = seed;
    j["trials"] = trials;
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
    return os.str();
  }

  fs::path resolve(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
  }

  const nlohmann::json& section(const char* name) const {
    static const nlohmann::json empty = nlohmann::json::object();
    return config.contains(name) ? config.at(name) : empty;
  }
};

struct SpecOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> jobs;
  std::optional<fs::path> out;
};

inline ExperimentSpec load_spec(const std::optional<fs::path>& config_path, const SpecOverrides& o = {}) {
  ExperimentSpec s;
  if (config_path) {
    if (!fs::exists(*config_path)) throw ConfigError("config file '" + config_path->string() + "' does not exist");
    try {
      s.config = nlohmann::json::parse(read_file_bytes(*config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config '" + config_path->string() + "': " + e.what());
    }
    if (!s.config.is_object()) throw ConfigError("config must be a JSON object");
    s.base = config_path->parent_path().empty() ? fs::path(".") : config_path->parent_path();
  }
  try {
    s.seed = s.config.value("seed", std::uint64_t{0});
    s.trials = s.config.value("trials", std::size_t{10});
    s.jobs = s.config.value("jobs", 1u);
    if (s.config.contains("out")) s.out = s.resolve(s.config.at("out").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (o.seed) s.seed = *o.seed;
  if (o.trials) s.trials = *o.trials;
  if (o.jobs) s.jobs = *o.jobs;
  if (o.out) s.out = *o.out;
  if (s.trials < 1) throw ConfigError("trials must be >= 1");
  if (s.jobs < 1) s.jobs = 1;
  s.config.erase("out");
  s.config.erase("jobs");
  return s;
}

// ---- configuration parsing -------------------------------------------------

inline CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  CameraIntrinsics k;
  k.fx = j.value("fx", k.fx);
  k.fy = j.value("fy", k.fy);
  k.width = j.value("width", k.width);
  k.height = j.value("height", k.height);
  k.cx = j.value("cx", k.cx);
  k.cy = j.value("cy", k.cy);
  try {
    k.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return k;
}

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  c.tick_hz = j.value("tick_hz", c.tick_hz);
  c.timeout = j.value("timeout", c.timeout);
  if (j.contains("camera")) c.camera = intrinsics_from_json(j.at("camera"));
  c.mount.pitch = j.value("camera_pitch", 0.0);
  c.success_threshold = j.value("success_threshold", c.success_threshold);
  c.vehicle_half_width = j.value("vehicle_half_width", c.vehicle_half_width);
  c.history_length = j.value("history_length", c.history_length);
  return c;
}

inline PerceptionNoise noise_from_json(const nlohmann::json& j) {
  PerceptionNoise p;
  p.boundary_flip = j.value("boundary_flip", p.boundary_flip);
  p.blob_rate = j.value("blob_rate", p.blob_rate);
  return p;
}

inline LearnerConfig learner_from_json(const nlohmann::json& j) {
  LearnerConfig l;
  l.sigma0_fraction = j.value("sigma0_fraction", l.sigma0_fraction);
  l.n0 = j.value("n0", l.n0);
  l.rho = j.value("rho", l.rho);
  return l;
}

/// Calls f(model) with the model of the platform built from "dynamics".
template <class F>
decltype(auto) with_model(Platform p, const nlohmann::json& dynamics, F&& f) {
  if (p == Platform::uav) return f(UavModel(uav_params_from_json(dynamics.value("uav", nlohmann::json::object()))));
  return f(QuadModel(quad_params_from_json(dynamics.value("quad", nlohmann::json::object()))));
}

template <class Model>
std::shared_ptr<Policy<Model>> make_policy(const std::string& name, const Model& model, const ExperimentSpec& spec,
                                           const SimConfig& sim) {
  if (name == "expert") return std::make_shared<ExpertPolicy<Model>>(model.params());
  if (name == "zero") return std::make_shared<ZeroPolicy<Model>>();
  if constexpr (std::is_same_v<Model, QuadModel>) {
    if (name == "mask") return std::make_shared<MaskCentroidPolicy>(sim.camera, MaskControllerGains{}, model.params());
    if (name == "noisy_mask")
      return std::make_shared<NoisyMaskPolicy>(
          std::make_shared<MaskCentroidPolicy>(sim.camera, MaskControllerGains{}, model.params()),
          noise_from_json(spec.section("noise")));
  }
  throw ConfigError("unknown policy '" + name + "' for platform " + to_string(Model::kPlatform));
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key,
                                            std::vector<std::string> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  return v.get<std::vector<std::string>>();
}

// ---- trials -------------------------------------------------------------------

/// Initial pose jittered by up to 0.3 m per axis and 0.1 rad of yaw.
inline InitialPose jitter_initial(const InitialPose& p, Rng& rng, double pos = 0.3, double yaw = 0.1) {
  InitialPose q = p;
  for (int k = 0; k < 3; ++k) q.position[k] += rng.uniform(-pos, pos);
  q.yaw = wrap_angle(q.yaw + rng.uniform(-yaw, yaw));
  return q;
}

/// Runs `trials` rollouts from jittered initial poses; trial i draws its
/// jitter and policy noise from streams derived from (seed, i).
template <class Model>
std::vector<Rollout<Model>> run_trials(const Model& model, const Policy<Model>& policy, const Track& track,
                                       std::size_t trials, std::uint64_t seed, const SimConfig& sim, unsigned jobs,
                                       bool jitter = true) {
  std::vector<Rollout<Model>> out(trials);
  parallel_for(trials, jobs, [&](std::size_t i) {
    Rng rng(derive_seed(seed, 2 * i));
    const InitialPose init = jitter ? jitter_initial(track.init, rng) : track.init;
    SimConfig c = sim;
    c.seed = derive_seed(seed, 2 * i + 1);
    out[i] = rollout(model, policy, track, model.initial_state(init), c);
  });
  return out;
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// variable is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("spearman: need two equal-length series");
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

inline std::string trial_name(std::size_t i) {
  std::ostringstream os;
  os << "trial_" << std::setw(2) << std::setfill('0') << i;
  return os.str();
}

// ---- evaluate -------------------------------------------------------------------

struct EvaluateRow {
  std::string track;
  std::string policy;
  std::size_t trials = 0;
  Metrics metrics;
};

/// Trials x tracks x policies; writes summary.csv/.txt/.json and per-trial
/// trajectory and gate-event CSVs.
inline std::vector<EvaluateRow> cmd_evaluate(const ExperimentSpec& spec) {
  const auto& ev = spec.section("evaluate");
  const auto tracks = string_list(ev, "tracks", {});
  if (tracks.empty()) throw ConfigError("evaluate: no tracks configured");
  const auto policies = string_list(ev, "policies", {"expert"});
  const SimConfig sim = sim_config_from_json(spec.section("sim"));
  const bool write_traj = ev.value("write_trajectories", true);
  const std::string hash = spec.hash();
  std::vector<EvaluateRow> rows;
  for (const auto& tp : tracks) {
    const Track track = load_track_file(spec.resolve(tp));
    for (const auto& pname : policies) {
      with_model(track.platform, spec.section("dynamics"), [&](const auto& model) {
        const auto policy = make_policy(pname, model, spec, sim);
        const auto runs = run_trials(model, *policy, track, spec.trials, spec.seed, sim, spec.jobs);
        rows.push_back({track.name, pname, spec.trials, metrics(runs)});
        if (write_traj)
          for (std::size_t i = 0; i < runs.size(); ++i) {
            const fs::path dir = spec.out / track.name / pname;
            write_text_file(dir / (trial_name(i) + "_trajectory.csv"), trajectory_csv(runs[i]));
            write_text_file(dir / (trial_name(i) + "_gates.csv"), gate_events_csv(runs[i].gates));
          }
      });
    }
  }
  std::ostringstream csv, txt;
  csv << "config_hash,track,policy,trials,gates,successes,sr,mge\n";
  txt << "config " << hash << ", seed " << spec.seed << "\n";
  txt << std::left << std::setw(20) << "track" << std::setw(14) << "policy" << std::setw(8) << "SR%" << "MGE[m]\n";
  nlohmann::json js{{"config_hash", hash}, {"seed", spec.seed}, {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) {
    csv << hash << ',' << r.track << ',' << r.policy << ',' << r.trials << ',' << r.metrics.gates << ','
        << r.metrics.successes << ',' << format_double(r.metrics.sr) << ',' << format_optional(r.metrics.mge) << '\n';
    std::ostringstream sr;
    sr << std::fixed << std::setprecision(1) << 100.0 * r.metrics.sr;
    std::ostringstream mge;
    if (r.metrics.mge)
      mge << std::fixed << std::setprecision(3) << *r.metrics.mge;
    else
      mge << "N/A";
    txt << std::left << std::setw(20) << r.track << std::setw(14) << r.policy << std::setw(8) << sr.str() << mge.str()
        << '\n';
    auto m = metrics_json(r.metrics);
    m["track"] = r.track;
    m["policy"] = r.policy;
    m["trials"] = r.trials;
    js["rows"].push_back(std::move(m));
  }
  write_text_file(spec.out / "summary.csv", csv.str());
  write_text_file(spec.out / "summary.txt", txt.str());
  write_text_file(spec.out / "summary.json", js.dump(2) + "\n");
  return rows;
}

// ---- perturb --------------------------------------------------------------------

struct PerturbPoint {
  double level_cm = 0.0;
  Metrics metrics;
};

/// SR of one policy on `count` perturbed copies of the track per level, each
/// flown once from the nominal initial pose.
template <class Model>
std::vector<PerturbPoint> perturbation_sweep(const Model& model, const Policy<Model>& policy, const Track& track,
                                             const std::vector<double>& levels, std::size_t count, std::uint64_t seed,
                                             const SimConfig& sim, unsigned jobs) {
  std::vector<PerturbPoint> out;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    std::vector<std::vector<GateRecord>> runs(count);
    parallel_for(count, jobs, [&](std::size_t k) {
      Rng rng(derive_seed(seed, li * 100003 + k));
      const Track t = perturb_track(track, levels[li], rng);
      SimConfig c = sim;
      c.seed = derive_seed(seed ^ 0x70657274ULL, li * 100003 + k);
      c.record_trajectory = false;
      runs[k] = rollout(model, policy, t, c).gates;
    });
    out.push_back({levels[li], metrics(runs)});
  }
  return out;
}

inline double sweep_spearman(const std::vector<PerturbPoint>& pts) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(p.level_cm);
    y.push_back(p.metrics.sr);
  }
  return spearman(x, y);
}

inline nlohmann::json cmd_perturb(const ExperimentSpec& spec) {
  const auto& pj = spec.section("perturb");
  if (!pj.contains("track")) throw ConfigError("perturb: 'track' is required");
  const Track track = load_track_file(spec.resolve(pj.at("track").get<std::string>()));
  const auto levels = pj.value("levels", std::vector<double>{0, 20, 40, 60, 80});
  for (const double l : levels)
    if (!(l >= 0.0)) throw ConfigError("perturb: levels must be >= 0");
  const std::size_t count = pj.value("tracks_per_level", std::size_t{10});
  const auto policies = string_list(pj, "policies", {"expert"});
  const SimConfig sim = sim_config_from_json(spec.section("sim"));
  const std::string hash = spec.hash();
  std::ostringstream csv;
  csv << "config_hash,policy,level_cm,tracks,gates,successes,sr,mge\n";
  nlohmann::json js{{"config_hash", hash}, {"track", track.name}, {"policies", nlohmann::json::object()}};
  for (const auto& pname : policies) {
    with_model(track.platform, spec.section("dynamics"), [&](const auto& model) {
      const auto policy = make_policy(pname, model, spec, sim);
      const auto pts = perturbation_sweep(model, *policy, track, levels, count, spec.seed, sim, spec.jobs);
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& p : pts) {
        csv << hash << ',' << pname << ',' << format_double(p.level_cm) << ',' << count << ',' << p.metrics.gates << ','
            << p.metrics.successes << ',' << format_double(p.metrics.sr) << ',' << format_optional(p.metrics.mge)
            << '\n';
        curve.push_back({{"level_cm", p.level_cm}, {"sr", p.metrics.sr}});
      }
      js["policies"][pname] = {{"curve", curve}, {"spearman_rho", sweep_spearman(pts)}};
    });
  }
  write_text_file(spec.out / "perturb.csv", csv.str());
  write_text_file(spec.out / "perturb.json", js.dump(2) + "\n");
  return js;
}

// ---- pgr -----------------------------------------------------------------------

inline GridPartition partition_from_json(const nlohmann::json& j, Platform p) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "desk") return desk_partition(p);
    if (s == "full") return full_partition(p);
    throw ConfigError("pgr: unknown partition '" + s + "'");
  }
  LayoutBox b = layout_bounds(p);
  if (j.contains("lo")) b.lo = j.at("lo").get<LayoutVector>();
  if (j.contains("hi")) b.hi = j.at("hi").get<LayoutVector>();
  std::array<std::size_t, kLayoutDims> bins{};
  bins.fill(2);
  if (j.contains("bins")) bins = j.at("bins").get<std::array<std::size_t, kLayoutDims>>();
  return {b, bins};
}

inline PgrConfig pgr_config_from_json(const nlohmann::json& j, std::uint64_t seed, unsigned jobs) {
  PgrConfig c;
  c.iterations = j.value("iterations", c.iterations);
  c.beta = j.value("beta", c.beta);
  c.lambda_pos = j.value("lambda_pos", c.lambda_pos);
  c.initial_per_cell = j.value("initial_per_cell", c.initial_per_cell);
  c.samples_per_iteration = j.value("samples_per_iteration", c.samples_per_iteration);
  c.validation_per_cell = j.value("validation_per_cell", c.validation_per_cell);
  c.retry_cap = j.value("retry_cap", c.retry_cap);
  c.seed = seed;
  c.jobs = jobs;
  c.validate();
  return c;
}

struct PgrComparison {
  PgrResult pgr;
  PgrResult uniform;
  Concentration concentration;
};

/// PGR and the matched-budget uniform baseline (same run with beta = 1), each
/// with a fresh synthetic learner.
template <class Model>
PgrComparison pgr_compare(const Model& model, const GridPartition& part, PgrConfig cfg, const SimConfig& sim,
                          const LearnerConfig& learner) {
  const auto expert = std::make_shared<ExpertPolicy<Model>>(model.params());
  PgrComparison r;
  {
    SyntheticLearner<Model> policy(part, expert, model.params(), learner);
    r.pgr = pgr_run(cfg, policy, *expert, part, model, sim);
  }
  {
    cfg.beta = 1.0;
    SyntheticLearner<Model> policy(part, expert, model.params(), learner);
    r.uniform = pgr_run(cfg, policy, *expert, part, model, sim);
  }
  r.concentration = top_decile_allocation(r.pgr, r.uniform);
  return r;
}

inline void write_pgr_run(const fs::path& dir, const PgrResult& r, const std::string& hash, const std::string& label) {
  nlohmann::json h{{"config_hash", hash}, {"label", label}, {"iterations", pgr_history_json(r)}};
  h["validation_layouts"] = r.validation.size();
  write_text_file(dir / "history.json", h.dump(2) + "\n");
  for (const auto& it : r.history)
    write_text_file(dir / ("losses_iter_" + std::to_string(it.iteration) + ".csv"), pgr_losses_csv(it));
}

inline nlohmann::json cmd_pgr(const ExperimentSpec& spec) {
  const auto& pj = spec.section("pgr");
  const Platform platform = platform_from_string(pj.value("platform", std::string("uav")));
  const GridPartition part = partition_from_json(pj.value("partition", nlohmann::json("desk")), platform);
  const PgrConfig cfg = pgr_config_from_json(pj, spec.seed, spec.jobs);
  const LearnerConfig learner = learner_from_json(pj.value("learner", nlohmann::json::object()));
  const SimConfig sim = sim_config_from_json(spec.section("sim"));
  const std::string hash = spec.hash();

  nlohmann::json report;
  with_model(platform, spec.section("dynamics"), [&](const auto& model) {
    const auto cmp = pgr_compare(model, part, cfg, sim, learner);
    const std::string label = cfg.beta == 1.0 ? "uniform-equivalent" : "pgr";
    write_pgr_run(spec.out / "pgr", cmp.pgr, hash, label);
    write_pgr_run(spec.out / "uniform", cmp.uniform, hash, "uniform-equivalent");
    report = {{"config_hash", hash},
              {"platform", to_string(platform)},
              {"cells", part.cell_count()},
              {"beta", cfg.beta},
              {"label", label},
              {"lambda_pos", cfg.lambda_pos},
              {"pgr_worst_grid_loss", cmp.pgr.history.back().worst_loss(cmp.pgr.populated)},
              {"uniform_worst_grid_loss", cmp.uniform.history.back().worst_loss(cmp.uniform.populated)},
              {"pgr_validation", metrics_json(cmp.pgr.history.back().validation)},
              {"uniform_validation", metrics_json(cmp.uniform.history.back().validation)},
              {"top_decile_samples_pgr", cmp.concentration.pgr},
              {"top_decile_samples_uniform", cmp.concentration.reference}};
  });
  nlohmann::json cfg_out = spec.config;
  cfg_out["seed"] = spec.seed;
  cfg_out["config_hash"] = hash;
  write_text_file(spec.out / "config.json", cfg_out.dump(2) + "\n");
  write_text_file(spec.out / "report.json", report.dump(2) + "\n");
  std::ostringstream txt;
  txt << "config " << hash << " (" << report["label"].get<std::string>() << ", beta " << format_double(cfg.beta)
      << ", " << part.cell_count() << " cells)\n";
  txt << "worst-grid validation loss: pgr " << format_double(report["pgr_worst_grid_loss"].get<double>())
      << ", uniform " << format_double(report["uniform_worst_grid_loss"].get<double>()) << '\n';
  const auto a = report["top_decile_samples_pgr"].get<std::vector<std::size_t>>();
  const auto b = report["top_decile_samples_uniform"].get<std::vector<std::size_t>>();
  for (std::size_t i = 0; i < a.size(); ++i)
    txt << "iteration " << i + 2 << ": top-decile samples pgr " << a[i] << ", uniform " << b[i] << '\n';
  write_text_file(spec.out / "report.txt", txt.str());
  return report;
}

// ---- export-dataset ------------------------------------------------------------

inline nlohmann::json control_json(const UavControl& u) { return {{"yaw_rate", u.yaw_rate}, {"pitch_rate", u.pitch_rate}}; }
inline nlohmann::json control_json(const QuadControl& u) {
  return {{"vx", u.velocity.x()}, {"vy", u.velocity.y()}, {"vz", u.velocity.z()}, {"yaw_rate", u.yaw_rate}};
}

inline std::string tick_name(std::uint64_t tick) {
  std::ostringstream os;
  os << "tick_" << std::setw(6) << std::setfill('0') << tick;
  return os.str();
}

/// Per tick: the analytic gate mask (PGM), an RGB render when a scene is
/// given (PPM) and a JSON record of past controls and the policy's control.
inline nlohmann::json cmd_export_dataset(const ExperimentSpec& spec) {
  const auto& ej = spec.section("export");
  const auto tracks = string_list(ej, "tracks", {});
  if (tracks.empty()) throw ConfigError("export: no tracks configured");
  const std::string pname = ej.value("policy", std::string("expert"));
  const SimConfig sim = sim_config_from_json(spec.section("sim"));
  std::optional<GaussianScene> scene;
  if (ej.contains("scene")) scene = load_scene_file(spec.resolve(ej.at("scene").get<std::string>()));
  const Vec3 background = ej.contains("background") ? script_detail::vec3(ej.at("background"), "background")
                                                    : Vec3(0.55, 0.7, 0.9);
  const std::string hash = spec.hash();
  nlohmann::json manifest{{"config_hash", hash}, {"policy", pname}, {"episodes", nlohmann::json::array()}};
  for (const auto& tp : tracks) {
    const Track track = load_track_file(spec.resolve(tp));
    with_model(track.platform, spec.section("dynamics"), [&](const auto& model) {
      using Model = std::decay_t<decltype(model)>;
      const auto policy = make_policy(pname, model, spec, sim);
      for (std::size_t i = 0; i < spec.trials; ++i) {
        const fs::path dir = spec.out / track.name / trial_name(i);
        Rng rng(derive_seed(spec.seed, 2 * i));
        const InitialPose init = jitter_initial(track.init, rng);
        SimConfig c = sim;
        c.seed = derive_seed(spec.seed, 2 * i + 1);
        c.record_trajectory = false;
        std::size_t ticks = 0;
        const TickCallback<Model> on_tick = [&](const Observation<Model>& obs, const typename Model::Control& u) {
          const CameraPose cam = camera_pose_from_body(
              Model::position(obs.state),
              Model::body_rotation(obs.state) * Eigen::AngleAxisd(-c.mount.pitch, Vec3::UnitY()).toRotationMatrix());
          const std::string stem = tick_name(obs.tick);
          write_file_bytes(dir / (stem + ".pgm"), encode_pgm(render_gate_mask(track, obs.t, cam, c.camera)));
          if (scene) write_file_bytes(dir / (stem + ".ppm"), encode_ppm(render_rgb(*scene, cam, c.camera, background)));
          nlohmann::json rec{{"t", obs.t}, {"tick", obs.tick}, {"target_gate", obs.target}};
          rec["history"] = nlohmann::json::array();
          for (const auto& h : obs.history) rec["history"].push_back(control_json(h));
          rec["control"] = control_json(u);
          write_text_file(dir / (stem + ".json"), rec.dump(2) + "\n");
          ++ticks;
        };
        const auto r = rollout(model, *policy, track, model.initial_state(init), c, on_tick);
        manifest["episodes"].push_back(nlohmann::json{{"track", track.name},
                                        {"trial", i},
                                        {"directory", (fs::path(track.name) / trial_name(i)).generic_string()},
                                        {"ticks", ticks},
                                        {"gates", gate_records_json(r.gates)}});
      }
    });
  }
  manifest["camera"] = {{"fx", sim.camera.fx}, {"fy", sim.camera.fy}, {"cx", sim.camera.cx},
                        {"cy", sim.camera.cy}, {"width", sim.camera.width}, {"height", sim.camera.height}};
  write_text_file(spec.out / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

// ---- edit-scene / render --------------------------------------------------------

inline nlohmann::json cmd_edit_scene(const ExperimentSpec& spec) {
  const auto& ej = spec.section("edit");
  if (!ej.contains("script")) throw ConfigError("edit: 'script' is required");
  const fs::path script_path = spec.resolve(ej.at("script").get<std::string>());
  nlohmann::json script;
  try {
    script = nlohmann::json::parse(read_file_bytes(script_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("edit script '" + script_path.string() + "': " + e.what());
  }
  GaussianScene scene;
  if (ej.contains("scene")) scene = load_scene_file(spec.resolve(ej.at("scene").get<std::string>()));
  const auto log = apply_edit_script(scene, script, script_path.parent_path());
  const std::string format = ej.value("format", std::string("binary"));
  const fs::path output = spec.out / ej.value("output", std::string("scene.ply"));
  save_scene_file(output, scene, format == "ascii" ? PlyFormat::ascii : PlyFormat::binary_little_endian);
  nlohmann::json j{{"config_hash", spec.hash()}, {"gaussians", scene.size()}, {"ops", nlohmann::json::array()}};
  for (const auto& e : log) {
    nlohmann::json o{{"index", e.index}, {"op", e.op}, {"affected", e.result.affected}};
    if (e.result.empty_selection) o["warning"] = "empty selection";
    if (e.result.new_object) o["new_object"] = *e.result.new_object;
    j["ops"].push_back(std::move(o));
  }
  write_text_file(spec.out / "edit_log.json", j.dump(2) + "\n");
  return j;
}

inline nlohmann::json cmd_render(const ExperimentSpec& spec) {
  const auto& rj = spec.section("render");
  const CameraIntrinsics k = intrinsics_from_json(rj.value("camera", nlohmann::json::object()));
  const auto& pj = rj.value("pose", nlohmann::json::object());
  const Vec3 pos = pj.contains("position") ? script_detail::vec3(pj.at("position"), "pose.position") : Vec3::Zero();
  const CameraPose cam = camera_pose_from_heading(pos, pj.value("yaw", 0.0), pj.value("pitch", 0.0));
  nlohmann::json j{{"config_hash", spec.hash()}};
  if (!rj.contains("scene") && !rj.contains("track")) throw ConfigError("render: need 'scene' and/or 'track'");
  if (rj.contains("scene")) {
    const GaussianScene scene = load_scene_file(spec.resolve(rj.at("scene").get<std::string>()));
    const Vec3 bg = rj.contains("background") ? script_detail::vec3(rj.at("background"), "background")
                                              : Vec3(0.55, 0.7, 0.9);
    RenderStats st;
    write_file_bytes(spec.out / "render.ppm", encode_ppm(render_rgb(scene, cam, k, bg, &st)));
    j["rgb"] = {{"file", "render.ppm"}, {"projected", st.projected}, {"culled", st.culled},
                {"skipped_ill_conditioned", st.skipped_ill_conditioned}};
  }
  if (rj.contains("track")) {
    const Track track = load_track_file(spec.resolve(rj.at("track").get<std::string>()));
    const BinaryMask m = render_gate_mask(track, rj.value("time", 0.0), cam, k);
    write_file_bytes(spec.out / "mask.pgm", encode_pgm(m));
    j["mask"] = {{"file", "mask.pgm"},
                 {"white_pixels", std::count(m.data.begin(), m.data.end(), std::uint8_t{255})}};
  }
  write_text_file(spec.out / "render.json", j.dump(2) + "\n");
  return j;
}

}  // namespace gatesplat
