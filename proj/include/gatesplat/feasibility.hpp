// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gatesplat/simulator.hpp"

namespace gatesplat {

/// True iff the expert crosses both gates of the layout's two-gate track
/// successfully within the timeout.
template <class Model>
bool feasibility_check(const TwoGateLayout& layout, const Model& model, const Policy<Model>& expert,
                       SimConfig cfg = {}) {
  cfg.record_trajectory = false;
  const Track track = layout_to_track(layout, Model::kPlatform);
  const auto r = rollout(model, expert, track, cfg);
  return std::all_of(r.gates.begin(), r.gates.end(), [](const GateRecord& g) { return g.outcome == Outcome::success; });
}

/// Observability (including the start pose) and expert feasibility.
template <class Model>
std::function<bool(const TwoGateLayout&)> layout_filter(const Model& model, const Policy<Model>& expert,
                                                         const SimConfig& cfg) {
  return [&model, &expert, cfg](const TwoGateLayout& l) {
    return observability_check(l, cfg.camera, cfg.mount, Model::kPlatform) && feasibility_check(l, model, expert, cfg);
  };
}

}  // namespace gatesplat
