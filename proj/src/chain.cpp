#include "seql/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seql/error.hpp"

namespace seql::chain {

namespace {

void check_shapes(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions) {
  if (emissions.rows() == 0) throw Error("chain inference needs at least one token");
  if (emissions.cols() == 0) throw ShapeError("chain inference needs at least one label");
  if (transitions.rows() != emissions.cols() || transitions.cols() != emissions.cols())
    throw ShapeError("transition matrix must be L x L");
}

template <typename Vec>
double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// alpha(t, y): log-sum of scores of all prefixes ending in y at t.
Eigen::MatrixXd forward(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions) {
  const Eigen::Index T = emissions.rows();
  const Eigen::Index L = emissions.cols();
  Eigen::MatrixXd alpha(T, L);
  alpha.row(0) = emissions.row(0);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index y = 0; y < L; ++y) {
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index p = 0; p < L; ++p) m = std::max(m, alpha(t - 1, p) + transitions(p, y));
      double sum = 0.0;
      for (Eigen::Index p = 0; p < L; ++p) sum += std::exp(alpha(t - 1, p) + transitions(p, y) - m);
      alpha(t, y) = emissions(t, y) + m + std::log(sum);
    }
  }
  return alpha;
}

// beta(t, y): log-sum of scores of all suffixes after t given y at t.
Eigen::MatrixXd backward(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions) {
  const Eigen::Index T = emissions.rows();
  const Eigen::Index L = emissions.cols();
  Eigen::MatrixXd beta(T, L);
  beta.row(T - 1).setZero();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index y = 0; y < L; ++y) {
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index n = 0; n < L; ++n)
        m = std::max(m, transitions(y, n) + emissions(t + 1, n) + beta(t + 1, n));
      double sum = 0.0;
      for (Eigen::Index n = 0; n < L; ++n)
        sum += std::exp(transitions(y, n) + emissions(t + 1, n) + beta(t + 1, n) - m);
      beta(t, y) = m + std::log(sum);
    }
  }
  return beta;
}

}  // namespace

double path_score(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions,
                  std::span<const std::size_t> path) {
  check_shapes(emissions, transitions);
  if (path.size() != static_cast<std::size_t>(emissions.rows()))
    throw ShapeError("path length does not match emissions");
  double score = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] >= static_cast<std::size_t>(emissions.cols())) throw Error("label index out of range");
    score += emissions(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(path[t]));
    if (t > 0)
      score += transitions(static_cast<Eigen::Index>(path[t - 1]), static_cast<Eigen::Index>(path[t]));
  }
  return score;
}

double log_partition(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions) {
  check_shapes(emissions, transitions);
  const Eigen::MatrixXd alpha = forward(emissions, transitions);
  return log_sum_exp(alpha.row(alpha.rows() - 1));
}

ViterbiResult viterbi(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions) {
  check_shapes(emissions, transitions);
  const Eigen::Index T = emissions.rows();
  const Eigen::Index L = emissions.cols();
  Eigen::MatrixXd delta(T, L);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> back(T, L);
  delta.row(0) = emissions.row(0);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index y = 0; y < L; ++y) {
      Eigen::Index best = 0;
      double best_score = delta(t - 1, 0) + transitions(0, y);
      for (Eigen::Index p = 1; p < L; ++p) {
        const double s = delta(t - 1, p) + transitions(p, y);
        if (s > best_score) best_score = s, best = p;
      }
      delta(t, y) = best_score + emissions(t, y);
      back(t, y) = best;
    }
  }
  ViterbiResult out;
  out.path.resize(static_cast<std::size_t>(T));
  Eigen::Index last = 0;
  for (Eigen::Index y = 1; y < L; ++y)
    if (delta(T - 1, y) > delta(T - 1, last)) last = y;
  out.score = delta(T - 1, last);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    out.path[static_cast<std::size_t>(t)] = static_cast<std::size_t>(last);
    if (t > 0) last = back(t, last);
  }
  return out;
}

Marginals marginals(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& transitions) {
  check_shapes(emissions, transitions);
  const Eigen::Index T = emissions.rows();
  const Eigen::Index L = emissions.cols();
  const Eigen::MatrixXd alpha = forward(emissions, transitions);
  const Eigen::MatrixXd beta = backward(emissions, transitions);
  Marginals out;
  out.log_partition = log_sum_exp(alpha.row(T - 1));
  out.node = (alpha + beta).array() - out.log_partition;
  out.node = out.node.array().exp();
  out.edge.reserve(static_cast<std::size_t>(T > 0 ? T - 1 : 0));
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    Eigen::MatrixXd e(L, L);
    for (Eigen::Index a = 0; a < L; ++a)
      for (Eigen::Index b = 0; b < L; ++b)
        e(a, b) = std::exp(alpha(t, a) + transitions(a, b) + emissions(t + 1, b) + beta(t + 1, b) -
                           out.log_partition);
    out.edge.push_back(std::move(e));
  }
  return out;
}

}  // namespace seql::chain
