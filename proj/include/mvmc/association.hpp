#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "mvmc/camera.hpp"

namespace mvmc {

/// One tracked centroid in one view.
struct ViewTrack {
  int local_id = 0;
  PixelPoint centroid;
};

/// Global identity assignment for one frame. Within each view the map is
/// injective: no two local tracks share a global id.
struct AssociationResult {
  std::vector<std::map<int, int>> view_local_to_global;  // per view: local id -> global id
  double total_cost = 0.0;  // summed epipolar distance over all matched cross-view pairs, px
};

struct AssociationConfig {
  double gate_px = 50.0;        // pairs above this epipolar distance are unmatchable
  double tie_break_eps = 1e-9;  // deterministic preference for low local-id pairs on exact ties
};

/// Associates per-view tracks into global identities by optimal bipartite
/// assignment on pairwise epipolar distances, seeded from view 0 and
/// propagated transitively through the remaining views. Unmatched tracks
/// receive fresh global ids. Throws NoViews for fewer than two views.
AssociationResult associate_identities(const std::vector<std::vector<ViewTrack>>& tracks,
                                       const std::vector<CameraParams>& cameras,
                                       const AssociationConfig& config = {});

/// Total cross-view epipolar cost of an arbitrary labeling, summed over all
/// view pairs that share a global id. Used by the pipeline and by tests that
/// compare against brute force.
double association_cost(const std::vector<std::vector<ViewTrack>>& tracks,
                        const std::vector<CameraParams>& cameras,
                        const std::vector<std::map<int, int>>& labeling);

/// Temporally consistent association over a sequence: runs per-frame
/// association (parallelizable) and then links frame-to-frame global ids by
/// maximizing (view, local id) membership overlap, which rides out brief
/// single-view identity swaps.
std::vector<AssociationResult> associate_sequence(
    const std::vector<std::vector<std::vector<ViewTrack>>>& frames,
    const std::vector<CameraParams>& cameras, const AssociationConfig& config = {});

}  // namespace mvmc
