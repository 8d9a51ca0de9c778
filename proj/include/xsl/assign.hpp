#pragma once

// Mapping recovery machinery: cosine similarity matrices, optimal assignment
// (Kuhn-Munkres with potentials, O(n^3)), tie-aware Spearman rank
// correlation, and the permutation search that scores candidate object-word
// mappings by the agreement of the two modalities' similarity structures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xsl/common.hpp"
#include "xsl/graph.hpp"

namespace xsl {

/// Pairwise cosine similarities between the rows of a and the rows of b.
/// A zero-norm row yields 0 against everything.
inline Eigen::MatrixXd cosine_similarity_matrix(const Eigen::MatrixXd& a,
                                                const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw ConfigError("cosine similarity requires equal vector dimensions");
  }
  const Eigen::VectorXd na = a.rowwise().norm();
  const Eigen::VectorXd nb = b.rowwise().norm();
  Eigen::MatrixXd sim = a * b.transpose();
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      if (na(i) == 0.0 || nb(j) == 0.0) {
        sim(i, j) = 0.0;
      } else {
        sim(i, j) /= na(i) * nb(j);
      }
    }
  }
  return sim;
}

enum class AssignmentObjective { Maximize, Minimize };

struct Assignment {
  std::vector<uint32_t> assignment;  // assignment[row] = column
  double value = 0.0;                // objective under the returned assignment
};

namespace detail {

/// Kuhn-Munkres with row/column potentials, minimization form.
inline std::vector<uint32_t> kuhn_munkres_min(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<uint32_t> assignment(n, 0);
  for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = static_cast<uint32_t>(j - 1);
  return assignment;
}

}  // namespace detail

/// Optimal one-to-one assignment over a square score matrix.
inline Assignment hungarian(const Eigen::MatrixXd& scores, AssignmentObjective objective) {
  if (scores.rows() == 0 || scores.rows() != scores.cols()) {
    throw ConfigError("assignment requires a nonempty square matrix");
  }
  if (!scores.allFinite()) throw ConfigError("assignment matrix must be finite");

  Assignment result;
  result.assignment = objective == AssignmentObjective::Minimize
                          ? detail::kuhn_munkres_min(scores)
                          : detail::kuhn_munkres_min(-scores);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    result.value += scores(i, result.assignment[i]);
  }
  return result;
}

namespace detail {

/// Average ranks (1-based); tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

}  // namespace detail

/// Spearman rank correlation with average ranks for ties. Zero variance on
/// either side gives 0 by convention.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("spearman requires equal lengths");
  if (x.size() < 2) throw ConfigError("spearman requires at least 2 samples");
  return detail::pearson(detail::average_ranks(x), detail::average_ranks(y));
}

struct PermutationSearchResult {
  std::vector<uint32_t> permutation;  // permutation[i] = word index mapped to object i
  double rho = 0.0;
  uint64_t evaluated = 0;
};

/// Best object-to-word permutation by Spearman correlation between the
/// object similarity structure and the permuted word similarity structure
/// (upper triangles, diagonal excluded). Exhaustive when Z! fits in
/// max_samples, otherwise max_samples seeded draws with replacement. Ties
/// resolve to the lexicographically smallest permutation.
inline PermutationSearchResult alignment_correlation_search(
    const Eigen::MatrixXd& sim_objects, const Eigen::MatrixXd& sim_words,
    uint64_t max_samples, uint64_t seed) {
  const Eigen::Index z = sim_objects.rows();
  if (z == 0 || sim_objects.cols() != z || sim_words.rows() != z || sim_words.cols() != z) {
    throw ConfigError("permutation search requires square matrices of equal size");
  }
  if (max_samples == 0) throw ConfigError("max_samples must be >= 1");

  std::vector<double> xs;
  xs.reserve(static_cast<size_t>(z * (z - 1) / 2));
  for (Eigen::Index i = 0; i < z; ++i) {
    for (Eigen::Index j = i + 1; j < z; ++j) xs.push_back(sim_objects(i, j));
  }
  const std::vector<double> x_ranks =
      xs.size() >= 2 ? detail::average_ranks(xs) : std::vector<double>{};

  std::vector<double> ys(xs.size());
  const auto rho_for = [&](const std::vector<uint32_t>& perm) -> double {
    if (xs.size() < 2) return 0.0;
    size_t k = 0;
    for (Eigen::Index i = 0; i < z; ++i) {
      for (Eigen::Index j = i + 1; j < z; ++j) {
        ys[k++] = sim_words(perm[i], perm[j]);
      }
    }
    return detail::pearson(x_ranks, detail::average_ranks(ys));
  };

  // Z! with saturation; anything past 20! overflows and is certainly sampled.
  uint64_t n_perms = 1;
  bool overflow = false;
  for (Eigen::Index i = 2; i <= z; ++i) {
    if (n_perms > std::numeric_limits<uint64_t>::max() / static_cast<uint64_t>(i)) {
      overflow = true;
      break;
    }
    n_perms *= static_cast<uint64_t>(i);
  }
  const bool exhaustive = !overflow && n_perms <= max_samples;

  PermutationSearchResult best;
  best.rho = -std::numeric_limits<double>::infinity();

  const auto consider = [&](const std::vector<uint32_t>& perm) {
    const double rho = rho_for(perm);
    best.evaluated += 1;
    if (rho > best.rho || (rho == best.rho && perm < best.permutation)) {
      best.rho = rho;
      best.permutation = perm;
    }
  };

  std::vector<uint32_t> perm(static_cast<size_t>(z));
  std::iota(perm.begin(), perm.end(), 0);
  if (exhaustive) {
    // Lexicographic order, so on ties the first (smallest) candidate sticks.
    do {
      consider(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    Rng rng(seed);
    for (uint64_t s = 0; s < max_samples; ++s) {
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      consider(perm);
    }
  }
  return best;
}

/// Labeled similarity matrix, for export.
struct SimilarityMatrix {
  std::vector<std::string> row_symbols, col_symbols;
  Eigen::MatrixXd values;
};

inline void export_similarity_csv(const SimilarityMatrix& sim, std::ostream& out) {
  if (sim.values.rows() != static_cast<Eigen::Index>(sim.row_symbols.size()) ||
      sim.values.cols() != static_cast<Eigen::Index>(sim.col_symbols.size())) {
    throw ConfigError("similarity matrix labels disagree with its shape");
  }
  for (const auto& sym : sim.col_symbols) out << ',' << sym;
  out << '\n';
  for (size_t i = 0; i < sim.row_symbols.size(); ++i) {
    out << sim.row_symbols[i];
    for (Eigen::Index j = 0; j < sim.values.cols(); ++j) {
      out << ',' << detail::format_weight(sim.values(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

}  // namespace xsl
