// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0

#include "gatesplat/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  std::optional<unsigned> jobs;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "JSON experiment config")->required();
  sub->add_option("--seed", f.seed, "Root random seed");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--trials", f.trials, "Trials per configuration")->check(CLI::PositiveNumber);
  sub->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

gatesplat::ExperimentSpec make_spec(const CommonFlags& f) {
  gatesplat::SpecOverrides o;
  o.seed = f.seed;
  o.trials = f.trials;
  o.jobs = f.jobs;
  if (f.out) o.out = *f.out;
  return gatesplat::load_spec(std::filesystem::path(f.config), o);
}

void print_evaluate(const std::vector<gatesplat::EvaluateRow>& rows) {
  for (const auto& r : rows) {
    std::cout << r.track << ' ' << r.policy << " SR " << gatesplat::format_double(100.0 * r.metrics.sr) << "% MGE "
              << (r.metrics.mge ? gatesplat::format_double(*r.metrics.mge) : std::string("N/A")) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gatesplat: editable gaussian-splat gate scenes, closed-loop simulation and guided resampling"};
  app.require_subcommand(1);
  CommonFlags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"evaluate", "Fly policies on tracks and report success rate and gate error"},
      {"perturb", "Sweep gate position perturbation levels and report success-rate curves"},
      {"pgr", "Run guided resampling and its uniform baseline"},
      {"export-dataset", "Write per-tick masks, renders and controls from closed-loop rollouts"},
      {"edit-scene", "Apply an edit script to a scene and save it as PLY"},
      {"render", "Render a scene and/or a track's gate mask from one pose"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const auto spec = make_spec(flags);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "evaluate") {
      print_evaluate(gatesplat::cmd_evaluate(spec));
    } else if (cmd == "perturb") {
      std::cout << gatesplat::cmd_perturb(spec).dump(2) << '\n';
    } else if (cmd == "pgr") {
      gatesplat::cmd_pgr(spec);
      std::cout << gatesplat::read_file_bytes(spec.out / "report.txt");
    } else if (cmd == "export-dataset") {
      const auto m = gatesplat::cmd_export_dataset(spec);
      std::cout << "exported " << m["episodes"].size() << " episodes to " << spec.out.string() << '\n';
    } else if (cmd == "edit-scene") {
      std::cout << gatesplat::cmd_edit_scene(spec).dump(2) << '\n';
    } else if (cmd == "render") {
      std::cout << gatesplat::cmd_render(spec).dump(2) << '\n';
    }
    std::cout << "outputs in " << spec.out.string() << '\n';
    return 0;
  } catch (const gatesplat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
