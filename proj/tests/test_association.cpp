#include <doctest.h>

#include "mvmc/association.hpp"
#include "mvmc/hungarian.hpp"
#include "mvmc/rng.hpp"
#include "oracles.hpp"

using namespace mvmc;

namespace {

// Exact projections of `people` world points into every camera, local ids
// permuted per view by `perms`.
std::vector<std::vector<ViewTrack>> make_tracks(
    const std::vector<Eigen::Vector3d>& people, const std::vector<CameraParams>& cams,
    const std::vector<std::vector<int>>& perms) {
  std::vector<std::vector<ViewTrack>> tracks(cams.size());
  for (size_t v = 0; v < cams.size(); ++v) {
    for (size_t p = 0; p < people.size(); ++p) {
      tracks[v].push_back(ViewTrack{perms[v][p], project(cams[v], people[p])});
    }
  }
  return tracks;
}

// Brute force: view 0 fixes the global labels; every other view tries every
// injective assignment of its tracks into the global id set. Returns the
// minimal total cross-view cost.
double brute_force_min_cost(const std::vector<std::vector<ViewTrack>>& tracks,
                            const std::vector<CameraParams>& cams) {
  const int n_views = static_cast<int>(tracks.size());
  std::vector<std::map<int, int>> labeling(n_views);
  int n_globals = 0;
  for (const auto& t : tracks[0]) {
    labeling[0][t.local_id] = t.local_id;
    n_globals = std::max(n_globals, t.local_id + 1);
  }
  for (const auto& view : tracks) n_globals = std::max(n_globals, static_cast<int>(view.size()));

  double best_cost = std::numeric_limits<double>::infinity();
  std::function<void(int)> recurse = [&](int v) {
    if (v == n_views) {
      best_cost = std::min(best_cost, association_cost(tracks, cams, labeling));
      return;
    }
    const int n = static_cast<int>(tracks[v].size());
    for (const auto& perm : oracle::permutations(n_globals)) {
      labeling[v].clear();
      for (int i = 0; i < n; ++i) labeling[v][tracks[v][i].local_id] = perm[i];
      recurse(v + 1);
    }
  };
  recurse(1);
  return best_cost;
}

}  // namespace

TEST_CASE("hungarian: small exact instance") {
  Eigen::MatrixXd c(3, 3);
  c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto sol = solve_assignment(c);
  CHECK(sol.total_cost == doctest::Approx(5.0));  // 1 + 2 + 2
  CHECK(sol.row_to_col[0] == 1);
  CHECK(sol.row_to_col[1] == 0);
  CHECK(sol.row_to_col[2] == 2);
}

TEST_CASE("hungarian: matches brute force on random rectangular instances") {
  CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int nr = 1 + static_cast<int>(rng.uniform_index(4));
    const int nc = nr + static_cast<int>(rng.uniform_index(2));
    Eigen::MatrixXd c(nr, nc);
    for (int i = 0; i < nr; ++i) {
      for (int j = 0; j < nc; ++j) c(i, j) = rng.uniform(0, 10);
    }
    const auto sol = solve_assignment(c);
    // Brute force over all column subsets/permutations.
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> cols(nc);
    std::iota(cols.begin(), cols.end(), 0);
    std::sort(cols.begin(), cols.end());
    do {
      double cost = 0;
      for (int i = 0; i < nr; ++i) cost += c(i, cols[i]);
      best = std::min(best, cost);
    } while (std::next_permutation(cols.begin(), cols.end()));
    CHECK(sol.total_cost == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("associate_identities: recovers ground-truth permutation, 2 people 3 views") {
  const auto cams = oracle::ring_cameras(3, 3.5, 1.6, {0, 0, 1});
  const std::vector<Eigen::Vector3d> people = {{0.4, 0.2, 1.0}, {-0.5, -0.1, 1.2}};
  const std::vector<std::vector<int>> perms = {{0, 1}, {1, 0}, {0, 1}};
  const auto tracks = make_tracks(people, cams, perms);
  const auto result = associate_identities(tracks, cams);

  // Tracks of the same person share a global id across views.
  for (size_t p = 0; p < people.size(); ++p) {
    const int g = result.view_local_to_global[0].at(perms[0][p]);
    for (size_t v = 1; v < cams.size(); ++v) {
      CHECK(result.view_local_to_global[v].at(perms[v][p]) == g);
    }
  }
  CHECK(result.total_cost == doctest::Approx(brute_force_min_cost(tracks, cams)).epsilon(1e-9));
}

TEST_CASE("associate_identities: single person collapses to one id") {
  const auto cams = oracle::ring_cameras(3, 3.5, 1.6, {0, 0, 1});
  const auto tracks = make_tracks({{0.1, 0.0, 1.0}}, cams, {{0}, {0}, {0}});
  const auto result = associate_identities(tracks, cams);
  for (const auto& vm : result.view_local_to_global) {
    for (const auto& [local, g] : vm) CHECK(g == 0);
  }
}

TEST_CASE("associate_identities: missing detection leaves a view slot absent") {
  const auto cams = oracle::ring_cameras(3, 3.5, 1.6, {0, 0, 1});
  const std::vector<Eigen::Vector3d> people = {{0.4, 0.2, 1.0}, {-0.5, -0.1, 1.2}};
  auto tracks = make_tracks(people, cams, {{0, 1}, {0, 1}, {0, 1}});
  tracks[1].erase(tracks[1].begin());  // person 0 missing from view 1
  const auto result = associate_identities(tracks, cams);
  CHECK(result.view_local_to_global[1].size() == 1);
  CHECK(result.view_local_to_global[1].count(0) == 0);
  // Remaining track still joins the right identity.
  const int g_p1 = result.view_local_to_global[0].at(1);
  CHECK(result.view_local_to_global[1].at(1) == g_p1);
  CHECK(result.total_cost == doctest::Approx(brute_force_min_cost(tracks, cams)).epsilon(1e-9));
}

TEST_CASE("associate_identities: fewer than two views throws") {
  const auto cams = oracle::ring_cameras(1, 3.5, 1.6, {0, 0, 1});
  std::vector<std::vector<ViewTrack>> tracks(1);
  CHECK_THROWS_AS(associate_identities(tracks, cams), NoViews);
}

TEST_CASE("associate_identities: optimal vs brute force, up to 4 people x 4 views") {
  CounterRng rng(41);
  for (int scene = 0; scene < 40; ++scene) {
    const int n_people = 2 + static_cast<int>(rng.uniform_index(3));
    const auto cams = oracle::ring_cameras(2 + static_cast<int>(rng.uniform_index(3)), 3.5,
                                           1.6, {0, 0, 1});
    std::vector<Eigen::Vector3d> people;
    for (int p = 0; p < n_people; ++p) {
      people.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.8, 1.4));
    }
    std::vector<std::vector<int>> perms;
    for (size_t v = 0; v < cams.size(); ++v) {
      auto perm = oracle::permutations(n_people);
      perms.push_back(perm[rng.uniform_index(perm.size())]);
    }
    const auto tracks = make_tracks(people, cams, perms);
    const auto result = associate_identities(tracks, cams);
    const double brute = brute_force_min_cost(tracks, cams);
    CHECK(result.total_cost <= brute + 1e-6);
  }
}

TEST_CASE("associate_sequence: rides out a single-view identity swap") {
  const auto cams = oracle::ring_cameras(3, 3.5, 1.6, {0, 0, 1});
  const std::vector<Eigen::Vector3d> base = {{0.5, 0.3, 1.0}, {-0.5, -0.3, 1.1}};
  std::vector<std::vector<std::vector<ViewTrack>>> frames;
  for (int t = 0; t < 30; ++t) {
    std::vector<Eigen::Vector3d> people = base;
    people[0].x() += 0.003 * t;
    people[1].y() -= 0.002 * t;
    // Views all label person p as p, except view 1 swaps during frames 10..19.
    std::vector<std::vector<int>> perms = {{0, 1}, {0, 1}, {0, 1}};
    if (t >= 10 && t < 20) perms[1] = {1, 0};
    frames.push_back(make_tracks(people, cams, perms));
  }
  const auto results = associate_sequence(frames, cams);
  // Canonical ids: person 0 should keep one id in view 0 for the whole clip.
  const int id0 = results[0].view_local_to_global[0].at(0);
  const int id1 = results[0].view_local_to_global[0].at(1);
  CHECK(id0 != id1);
  for (int t = 0; t < 30; ++t) {
    CHECK(results[t].view_local_to_global[0].at(0) == id0);
    CHECK(results[t].view_local_to_global[0].at(1) == id1);
    // In the swapped window, view 1's local 0 must map to person 1's id.
    const int expected_local0 = (t >= 10 && t < 20) ? id1 : id0;
    CHECK(results[t].view_local_to_global[1].at(0) == expected_local0);
  }
}
