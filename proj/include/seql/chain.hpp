#pragma once

// Exact inference for linear-chain models. Scores are unnormalized log
// potentials: emissions is T x L (token, label) and transitions is L x L
// (from-label, to-label). A path's score is the sum of its emission entries
// plus the transitions between consecutive labels; there are no start/stop
// transitions.

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

namespace seql::chain {

double path_score(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions,
                  std::span<const std::size_t> path);

// log of the sum of exp(path_score) over all L^T paths. Throws on T == 0.
double log_partition(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions);

struct ViterbiResult {
  std::vector<std::size_t> path;
  double score = 0.0;
};

// Ties are broken toward the lower label index, both for the final label and
// at every backpointer.
ViterbiResult viterbi(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions);

struct Marginals {
  Eigen::MatrixXd node;               // T x L, P(y_t = y)
  std::vector<Eigen::MatrixXd> edge;  // T-1 slices of L x L, P(y_t = a, y_{t+1} = b)
  double log_partition = 0.0;
};

Marginals marginals(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions);

}  // namespace seql::chain
