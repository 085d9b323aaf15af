#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "aoirrm/clustering.hpp"

using namespace aoirrm;
using namespace aoirrm::clustering;

namespace {

Eigen::MatrixXd random_symmetric(int n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      a(i, j) = 2.0 * uniform01(rng) - 1.0;
      a(j, i) = a(i, j);
    }
  }
  return a;
}

std::vector<Vec2> blobs(Rng& rng, int per_blob, double separation) {
  std::vector<Vec2> pts;
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      pts.push_back({20.0 + b * separation + 10.0 * uniform01(rng), 100.0 + 10.0 * uniform01(rng)});
    }
  }
  return pts;
}

// Best 2-partition by total within-group squared distance to the group mean.
std::vector<int> brute_force_two_partition(const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (unsigned mask = 1; mask < (1u << (n - 1)); ++mask) {
    double cost = 0.0;
    for (int g = 0; g < 2; ++g) {
      Vec2 mean{};
      int cnt = 0;
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>((mask >> i) & 1u) == g) {
          mean = mean + pts[static_cast<std::size_t>(i)];
          ++cnt;
        }
      }
      if (cnt == 0) continue;
      mean = (1.0 / cnt) * mean;
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>((mask >> i) & 1u) == g) {
          const Vec2 d = pts[static_cast<std::size_t>(i)] - mean;
          cost += dot(d, d);
        }
      }
    }
    if (cost < best) {
      best = cost;
      for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    }
  }
  return labels;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("similarity entries") {
  const std::vector<Vec2> pts{{0.0, 0.0}, {0.0, 0.0}, {30.0, 0.0}, {181.0, 0.0}};
  const auto d = similarity_matrix(pts, 150.0, 30.0);
  CHECK(d.entries(0, 0) == 1.0);
  CHECK(d.entries(0, 1) == 1.0);
  CHECK(d.entries(0, 2) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(d.entries(2, 3) == 0.0);
  CHECK(d.entries(0, 3) == 0.0);
  CHECK(d.entries.isApprox(d.entries.transpose()));
  CHECK_THROWS_AS(similarity_matrix(std::vector<Vec2>{{0.0, 0.0}}, 150.0, 30.0), PreconditionError);
}

TEST_CASE("two-node Laplacian has eigenvalues 0 and 2a/(1+a)") {
  for (double dist : {5.0, 20.0, 45.0}) {
    const std::vector<Vec2> pts{{0.0, 0.0}, {dist, 0.0}};
    const auto d = similarity_matrix(pts, 150.0, 30.0);
    const double a = d.entries(0, 1);
    const auto e = jacobi_eigen(normalized_laplacian(d));
    CHECK(e.values(0) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(e.values(1) == doctest::Approx(2.0 * a / (1.0 + a)).epsilon(1e-12));
  }
}

TEST_CASE("isolated pairs give a zero Laplacian") {
  const std::vector<Vec2> pts{{0.0, 0.0}, {200.0, 0.0}, {0.0, 200.0}};
  const auto l = normalized_laplacian(similarity_matrix(pts, 150.0, 30.0));
  CHECK(l.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("null space is spanned by the square-root degree vector per component") {
  Rng rng(8);
  std::vector<Vec2> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({60.0 * uniform01(rng), 60.0 * uniform01(rng)});
  const auto d = similarity_matrix(pts, 150.0, 30.0);
  const auto l = normalized_laplacian(d);
  const Eigen::VectorXd v = d.entries.rowwise().sum().cwiseSqrt();
  CHECK((l * v).cwiseAbs().maxCoeff() <= 1e-12);
  const auto e = jacobi_eigen(l);
  CHECK(std::abs(e.values(0)) <= 1e-10);
  CHECK(std::abs(std::abs(e.vectors.col(0).dot(v.normalized())) - 1.0) <= 1e-10);
}

TEST_CASE("diagonal input") {
  const Eigen::MatrixXd a = Eigen::Vector3d(0.0, 1.0, 2.0).asDiagonal();
  const Eigen::MatrixXd phi = smallest_eigenvectors(a, 2);
  CHECK(std::abs(phi(0, 0)) == 1.0);
  CHECK(std::abs(phi(1, 1)) == 1.0);
  CHECK(phi(2, 0) == 0.0);
  CHECK(phi(2, 1) == 0.0);
  CHECK_THROWS_AS(smallest_eigenvectors(a, 4), PreconditionError);
}

TEST_CASE("Jacobi residuals, orthonormality and agreement with a reference solver") {
  Rng rng(21);
  for (int n : {8, 17, 32}) {
    const Eigen::MatrixXd a = random_symmetric(n, rng);
    const auto e = jacobi_eigen(a);
    for (int i = 0; i < n; ++i) {
      const double res = (a * e.vectors.col(i) - e.values(i) * e.vectors.col(i)).cwiseAbs().maxCoeff();
      CHECK(res <= 1e-8);
    }
    const Eigen::MatrixXd gram = e.vectors.transpose() * e.vectors;
    CHECK((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-8);
    for (int i = 1; i < n; ++i) CHECK(e.values(i - 1) <= e.values(i));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
    CHECK((ref.eigenvalues() - e.values).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("non-square input is rejected") {
  CHECK_THROWS_AS(jacobi_eigen(Eigen::MatrixXd::Zero(2, 3)), PreconditionError);
}

TEST_CASE("two separated blobs split exactly and agree with brute force") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto pts = blobs(rng, 5, 200.0);
    const auto g = cluster_groups(pts, 2, {}, rng);
    std::vector<int> truth(10);
    for (int i = 0; i < 10; ++i) truth[static_cast<std::size_t>(i)] = i < 5 ? 0 : 1;
    CHECK(same_partition(g.group_of, truth));
    CHECK(same_partition(g.group_of, brute_force_two_partition(pts)));
  }
}

TEST_CASE("K equal to G puts every pair in its own group") {
  Rng rng(5);
  std::vector<Vec2> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({40.0 * i, 10.0 * (i % 2)});
  const auto g = cluster_groups(pts, 6, {}, rng);
  for (const auto& members : g.groups) CHECK(members.size() == 1);
}

TEST_CASE("grouping is a partition, seeded and permutation equivariant") {
  Rng gen(77);
  std::vector<Vec2> pts;
  for (int i = 0; i < 30; ++i) pts.push_back({250.0 * uniform01(gen), 250.0 * uniform01(gen)});

  Rng a(3), b(3);
  const auto g1 = cluster_groups(pts, 4, {}, a);
  const auto g2 = cluster_groups(pts, 4, {}, b);
  CHECK(g1.group_of == g2.group_of);

  std::vector<int> seen(pts.size(), 0);
  for (const auto& members : g1.groups) {
    CHECK(std::is_sorted(members.begin(), members.end()));
    for (int m : members) ++seen[static_cast<std::size_t>(m)];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  // reversing the pair order relabels but does not change the partition of
  // well-separated blobs
  Rng r(12);
  std::vector<Vec2> two = blobs(r, 6, 200.0);
  std::vector<Vec2> rev(two.rbegin(), two.rend());
  Rng c(9), d(9);
  const auto forward = cluster_groups(two, 2, {}, c).group_of;
  auto backward = cluster_groups(rev, 2, {}, d).group_of;
  std::reverse(backward.begin(), backward.end());
  CHECK(same_partition(forward, backward));
}

TEST_CASE("Lloyd objective never increases") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(60, 3);
    for (int i = 0; i < 60; ++i) {
      for (int j = 0; j < 3; ++j) x(i, j) = uniform01(rng) + (i % 3 == j ? 0.7 : 0.0);
    }
    const auto res = kmeans(x, 4, rng);
    for (std::size_t i = 1; i < res.objective.size(); ++i) {
      CHECK(res.objective[i] <= res.objective[i - 1] + 1e-12);
    }
    CHECK(res.iterations <= kKMeansMaxIterations);
  }
}
