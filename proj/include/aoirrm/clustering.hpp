#pragma once

// Spectral grouping of VUE-pairs by midpoint proximity.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "aoirrm/common.hpp"

namespace aoirrm::clustering {

class EigenConvergenceError : public Error {
 public:
  using Error::Error;
};

struct SimilarityMatrix {
  Eigen::MatrixXd entries;
  double neighborhood_m = 150.0;  // zeta
  double scale_m = 30.0;          // varrho
};

struct GroupAssignment {
  std::vector<int> group_of;             // pair index -> group id in [0, G)
  std::vector<std::vector<int>> groups;  // ascending pair indices per group

  int num_groups() const { return static_cast<int>(groups.size()); }
};

/// Builds the induced partition from a label vector.
GroupAssignment make_assignment(std::vector<int> labels, int num_groups);

/// Truncated Gaussian similarity of midpoints (unit diagonal).
SimilarityMatrix similarity_matrix(std::span<const Vec2> midpoints, double zeta_m,
                                   double varrho_m);

/// I - Omega^{-1/2} D Omega^{-1/2}, Omega the diagonal of row sums.
Eigen::MatrixXd normalized_laplacian(const SimilarityMatrix& d);

struct EigenDecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column i pairs with values(i)
};

inline constexpr double kJacobiTolerance = 1e-10;
inline constexpr int kJacobiMaxSweeps = 50;

/// Cyclic Jacobi eigensolver for a dense symmetric matrix.
EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& symmetric);

/// Orthonormal eigenvectors of the g smallest eigenvalues, as columns.
Eigen::MatrixXd smallest_eigenvectors(const Eigen::MatrixXd& l_sym, int g);

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;       // one row per cluster
  std::vector<double> objective;   // sum of squared distances after each iteration
  int iterations = 0;
};

inline constexpr int kKMeansMaxIterations = 100;

/// Lloyd's method on the rows of `points` with distance-weighted seeding.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, Rng& rng);

struct ClusterConfig {
  double zeta_m = 150.0;
  double varrho_m = 30.0;
};

GroupAssignment cluster_groups(std::span<const Vec2> midpoints, int g, const ClusterConfig& cfg,
                               Rng& rng);

}  // namespace aoirrm::clustering
