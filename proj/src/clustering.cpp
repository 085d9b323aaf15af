#include "aoirrm/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace aoirrm::clustering {

GroupAssignment make_assignment(std::vector<int> labels, int num_groups) {
  GroupAssignment out;
  out.groups.assign(static_cast<std::size_t>(num_groups), {});
  for (std::size_t k = 0; k < labels.size(); ++k) {
    out.groups.at(static_cast<std::size_t>(labels[k])).push_back(static_cast<int>(k));
  }
  out.group_of = std::move(labels);
  return out;
}

SimilarityMatrix similarity_matrix(std::span<const Vec2> midpoints, double zeta_m,
                                   double varrho_m) {
  if (midpoints.size() < 2) throw PreconditionError("similarity_matrix: need at least two pairs");
  if (!(zeta_m > 0.0) || !(varrho_m > 0.0)) {
    throw PreconditionError("similarity_matrix: zeta and varrho must be positive");
  }
  const auto n = static_cast<Eigen::Index>(midpoints.size());
  SimilarityMatrix d{Eigen::MatrixXd::Zero(n, n), zeta_m, varrho_m};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double dist = norm2(midpoints[static_cast<std::size_t>(i)] -
                                midpoints[static_cast<std::size_t>(j)]);
      const double v = dist <= zeta_m ? std::exp(-(dist * dist) / (varrho_m * varrho_m)) : 0.0;
      d.entries(i, j) = v;
      d.entries(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd normalized_laplacian(const SimilarityMatrix& d) {
  const Eigen::VectorXd omega = d.entries.rowwise().sum();
  if ((omega.array() <= 0.0).any()) {
    throw PreconditionError("normalized_laplacian: zero row sum in similarity matrix");
  }
  const Eigen::VectorXd inv_sqrt = omega.array().rsqrt();
  const auto n = d.entries.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
  l -= inv_sqrt.asDiagonal() * d.entries * inv_sqrt.asDiagonal();
  // exact symmetry
  return (l + l.transpose()) / 2.0;
}

EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& symmetric) {
  if (symmetric.rows() != symmetric.cols()) {
    throw PreconditionError("jacobi_eigen: matrix is not square");
  }
  const Eigen::Index n = symmetric.rows();
  Eigen::MatrixXd a = symmetric;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(1.0, a.norm());

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };

  bool converged = false;
  for (int sweep = 0; sweep <= kJacobiMaxSweeps; ++sweep) {
    if (off_norm() <= kJacobiTolerance * scale) {
      converged = true;
      break;
    }
    if (sweep == kJacobiMaxSweeps) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    throw EigenConvergenceError("jacobi_eigen: no convergence after " +
                                std::to_string(kJacobiMaxSweeps) + " sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  EigenDecomposition out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src);
    out.vectors.col(i) = v.col(src);
  }
  return out;
}

Eigen::MatrixXd smallest_eigenvectors(const Eigen::MatrixXd& l_sym, int g) {
  if (g < 1 || g > l_sym.rows()) {
    throw PreconditionError("smallest_eigenvectors: g must lie in [1, K]");
  }
  return jacobi_eigen(l_sym).vectors.leftCols(g);
}

namespace {

std::vector<int> assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c) {
  std::vector<int> labels(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      const double d = (x.row(i) - c.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    labels[static_cast<std::size_t>(i)] = arg;
  }
  return labels;
}

double objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                 const std::vector<int>& labels) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    s += (x.row(i) - c.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return s;
}

Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd c(k, x.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  auto pick = [&](Eigen::Index i, int slot) {
    c.row(slot) = x.row(i);
    chosen[static_cast<std::size_t>(i)] = true;
  };
  pick(std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(uniform01(rng) * n)), 0);

  Eigen::VectorXd d2(n);
  for (int slot = 1; slot < k; ++slot) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < slot; ++j) best = std::min(best, (x.row(i) - c.row(j)).squaredNorm());
      d2(i) = best;
    }
    const double total = d2.sum();
    const double u = uniform01(rng);
    Eigen::Index next = -1;
    if (total > 0.0) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i) / total;
        if (d2(i) > 0.0 && u < acc) {
          next = i;
          break;
        }
      }
      if (next < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2(i) > 0.0) {
            next = i;
            break;
          }
        }
      }
    } else {
      // every point coincides with a centroid: take an unused index
      std::vector<Eigen::Index> unused;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) unused.push_back(i);
      }
      next = unused.empty() ? 0
                            : unused[std::min(unused.size() - 1,
                                              static_cast<std::size_t>(u * unused.size()))];
    }
    pick(next, slot);
  }
  return c;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) throw PreconditionError("kmeans: k must lie in [1, number of points]");

  KMeansResult res;
  res.centroids = seed_centroids(points, k, rng);
  res.labels = assign(points, res.centroids);

  for (int it = 1; it <= kKMeansMaxIterations; ++it) {
    res.iterations = it;
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : res.labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      // reseed the empty cluster at the point farthest from its own centroid
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int li = res.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(li)] < 2) continue;
        const double d = (points.row(i) - res.centroids.row(li)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      --counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(far)])];
      res.labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      res.centroids.row(c) = points.row(far);
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(res.labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }
    res.objective.push_back(objective(points, res.centroids, res.labels));

    auto next = assign(points, res.centroids);
    if (next == res.labels) break;
    res.labels = std::move(next);
  }
  return res;
}

GroupAssignment cluster_groups(std::span<const Vec2> midpoints, int g, const ClusterConfig& cfg,
                               Rng& rng) {
  const int k = static_cast<int>(midpoints.size());
  if (g < 2 || k < g) throw PreconditionError("cluster_groups: need K >= G >= 2");

  const auto d = similarity_matrix(midpoints, cfg.zeta_m, cfg.varrho_m);
  Eigen::MatrixXd phi = smallest_eigenvectors(normalized_laplacian(d), g);
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    const double len = phi.row(i).norm();
    if (len > 0.0) phi.row(i) /= len;
  }
  return make_assignment(kmeans(phi, g, rng).labels, g);
}

}  // namespace aoirrm::clustering
