#include "mvmc/association.hpp"

#include <algorithm>
#include <string>

#include "mvmc/hungarian.hpp"
#include "mvmc/parallel.hpp"

namespace mvmc {

namespace {

// Fundamental matrices for every ordered view pair. fwd[a][b] satisfies
// p_b^T fwd[a][b] p_a = 0.
std::vector<std::vector<Eigen::Matrix3d>> pairwise_fundamentals(
    const std::vector<CameraParams>& cameras) {
  const int n = static_cast<int>(cameras.size());
  std::vector<std::vector<Eigen::Matrix3d>> f(n, std::vector<Eigen::Matrix3d>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a != b) f[a][b] = fundamental_matrix(cameras[a], cameras[b]);
    }
  }
  return f;
}

double pair_distance(const PixelPoint& pa, const PixelPoint& pb, int a, int b,
                     const std::vector<std::vector<Eigen::Matrix3d>>& f) {
  // F12 maps view-b pixels to view-a lines, i.e. f[b][a].
  return epipolar_distance(pa, pb, f[b][a], f[a][b]);
}

struct Identity {
  std::vector<std::pair<int, PixelPoint>> members;  // (view, centroid)
};

}  // namespace

AssociationResult associate_identities(const std::vector<std::vector<ViewTrack>>& tracks,
                                       const std::vector<CameraParams>& cameras,
                                       const AssociationConfig& config) {
  if (tracks.size() < 2) {
    throw NoViews("association requires at least 2 views, got " + std::to_string(tracks.size()));
  }
  if (tracks.size() != cameras.size()) {
    throw Error("association: " + std::to_string(tracks.size()) + " track lists vs " +
                std::to_string(cameras.size()) + " cameras");
  }
  const int n_views = static_cast<int>(tracks.size());
  const auto f = pairwise_fundamentals(cameras);

  AssociationResult result;
  result.view_local_to_global.resize(n_views);

  // Tracks sorted by local id so ties resolve toward low ids.
  std::vector<std::vector<ViewTrack>> sorted = tracks;
  for (auto& view : sorted) {
    std::sort(view.begin(), view.end(),
              [](const ViewTrack& x, const ViewTrack& y) { return x.local_id < y.local_id; });
  }

  std::vector<Identity> identities;
  for (const ViewTrack& t : sorted[0]) {
    const int g = static_cast<int>(identities.size());
    identities.push_back(Identity{{{0, t.centroid}}});
    result.view_local_to_global[0][t.local_id] = g;
  }

  for (int v = 1; v < n_views; ++v) {
    const auto& view_tracks = sorted[v];
    const int nr = static_cast<int>(view_tracks.size());
    const int nc = static_cast<int>(identities.size());
    Eigen::MatrixXd cost(nr, nc);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < nc; ++j) {
        double sum = 0.0;
        for (const auto& [mv, mp] : identities[j].members) {
          sum += pair_distance(mp, view_tracks[i].centroid, mv, v, f);
        }
        double mean = identities[j].members.empty()
                          ? 0.0
                          : sum / static_cast<double>(identities[j].members.size());
        if (mean > config.gate_px) {
          cost(i, j) = std::numeric_limits<double>::infinity();
        } else {
          cost(i, j) = mean + config.tie_break_eps * (i * nc + j);
        }
      }
    }
    const auto sol = solve_assignment(cost, std::numeric_limits<double>::infinity());
    for (int i = 0; i < nr; ++i) {
      int g = sol.row_to_col[i];
      if (g < 0) {
        g = static_cast<int>(identities.size());
        identities.push_back(Identity{});
      }
      identities[g].members.emplace_back(v, view_tracks[i].centroid);
      result.view_local_to_global[v][view_tracks[i].local_id] = g;
    }
  }

  result.total_cost = association_cost(tracks, cameras, result.view_local_to_global);
  return result;
}

double association_cost(const std::vector<std::vector<ViewTrack>>& tracks,
                        const std::vector<CameraParams>& cameras,
                        const std::vector<std::map<int, int>>& labeling) {
  const int n_views = static_cast<int>(tracks.size());
  const auto f = pairwise_fundamentals(cameras);

  // global id -> (view -> centroid)
  std::map<int, std::map<int, PixelPoint>> clusters;
  for (int v = 0; v < n_views; ++v) {
    for (const ViewTrack& t : tracks[v]) {
      auto it = labeling[v].find(t.local_id);
      if (it != labeling[v].end()) clusters[it->second][v] = t.centroid;
    }
  }
  double total = 0.0;
  for (const auto& [g, views] : clusters) {
    for (auto ia = views.begin(); ia != views.end(); ++ia) {
      for (auto ib = std::next(ia); ib != views.end(); ++ib) {
        total += pair_distance(ia->second, ib->second, ia->first, ib->first, f);
      }
    }
  }
  return total;
}

std::vector<AssociationResult> associate_sequence(
    const std::vector<std::vector<std::vector<ViewTrack>>>& frames,
    const std::vector<CameraParams>& cameras, const AssociationConfig& config) {
  const int n_frames = static_cast<int>(frames.size());
  std::vector<AssociationResult> per_frame(n_frames);
  parallel_for(n_frames,
               [&](int t) { per_frame[t] = associate_identities(frames[t], cameras, config); });

  // Sequential relabeling: match each frame's clusters to the previous
  // frame's canonical clusters by (view, local id) membership overlap.
  int next_canonical = 0;
  std::map<int, int> prev_canonical;  // previous frame: local global id -> canonical id
  std::map<int, std::vector<std::pair<int, int>>> prev_members;  // canonical -> (view, local)
  for (int t = 0; t < n_frames; ++t) {
    std::map<int, std::vector<std::pair<int, int>>> members;  // frame-local g -> (view, local)
    for (int v = 0; v < static_cast<int>(per_frame[t].view_local_to_global.size()); ++v) {
      for (const auto& [local, g] : per_frame[t].view_local_to_global[v]) {
        members[g].emplace_back(v, local);
      }
    }
    std::map<int, int> relabel;
    if (t == 0 || prev_members.empty()) {
      for (const auto& [g, mem] : members) relabel[g] = next_canonical++;
    } else {
      std::vector<int> gids, cids;
      for (const auto& [g, mem] : members) gids.push_back(g);
      for (const auto& [c, mem] : prev_members) cids.push_back(c);
      Eigen::MatrixXd overlap_cost(gids.size(), cids.size());
      for (size_t i = 0; i < gids.size(); ++i) {
        for (size_t j = 0; j < cids.size(); ++j) {
          int overlap = 0;
          for (const auto& m : members[gids[i]]) {
            const auto& pm = prev_members[cids[j]];
            if (std::find(pm.begin(), pm.end(), m) != pm.end()) ++overlap;
          }
          overlap_cost(i, j) = overlap > 0 ? -static_cast<double>(overlap)
                                           : std::numeric_limits<double>::infinity();
        }
      }
      const auto sol = solve_assignment(overlap_cost, std::numeric_limits<double>::infinity());
      for (size_t i = 0; i < gids.size(); ++i) {
        relabel[gids[i]] = sol.row_to_col[i] >= 0 ? cids[sol.row_to_col[i]] : next_canonical++;
      }
    }
    AssociationResult relabeled = per_frame[t];
    for (auto& view_map : relabeled.view_local_to_global) {
      for (auto& [local, g] : view_map) g = relabel.at(g);
    }
    prev_members.clear();
    for (const auto& [g, mem] : members) prev_members[relabel.at(g)] = mem;
    per_frame[t] = std::move(relabeled);
  }
  return per_frame;
}

}  // namespace mvmc
