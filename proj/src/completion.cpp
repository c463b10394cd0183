#include "linfa/completion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace linfa {

namespace {

void rank_edges(GraphEdges& graph, std::size_t top_m) {
  graph.empty_graph = std::all_of(graph.edges.begin(), graph.edges.end(),
                                  [](const Edge& e) { return e.weight == 0.0; });
  std::stable_sort(graph.edges.begin(), graph.edges.end(), [](const Edge& x, const Edge& y) {
    const double ax = std::abs(x.weight);
    const double ay = std::abs(y.weight);
    if (ax != ay) return ax > ay;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  graph.edges.resize(top_m);
}

}  // namespace

Vector predict_factors(const FactorParams& params, const IndexSet& subset, const Vector& x) {
  if (static_cast<Index>(subset.size()) != x.size()) {
    throw InputError("observed vector length does not match its subset");
  }
  const Index q = params.factors();
  if (subset.empty()) return Vector::Zero(q);
  const Restriction block = restrict(params, subset);
  const Matrix scaled = block.psi.cwiseInverse().asDiagonal() * block.loadings;
  Eigen::LLT<Matrix> llt(Matrix::Identity(q, q) + scaled.transpose() * block.loadings);
  if (llt.info() != Eigen::Success) throw NumericError("I + B is singular");
  // Lambda^T Sigma^{-1} = (I + B)^{-1} A^T
  return llt.solve(scaled.transpose() * x);
}

CompletedSample complete_sample(const FactorParams& params, const IndexSet& subset, const Vector& x) {
  const Vector z = predict_factors(params, subset, x);
  CompletedSample out{params.loadings() * z, std::vector<bool>(static_cast<std::size_t>(params.dim()), true)};
  for (std::size_t c = 0; c < subset.size(); ++c) {
    out.values(subset[c]) = x(static_cast<Index>(c));
    out.predicted[static_cast<std::size_t>(subset[c])] = false;
  }
  return out;
}

GraphEdges partial_correlation_graph(const FactorParams& params, std::size_t top_m) {
  const Index d = params.dim();
  const std::size_t available = static_cast<std::size_t>(d * (d - 1) / 2);
  if (top_m > available) {
    throw InputError("edge budget " + std::to_string(top_m) + " exceeds the " + std::to_string(available) +
                     " available variable pairs");
  }
  const Matrix rho = partial_correlations(precision_woodbury(params));
  GraphEdges graph;
  graph.kind = GraphKind::partial_correlation;
  graph.variables = d;
  graph.edges.reserve(available);
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) graph.edges.push_back({i, j, rho(i, j)});
  }
  rank_edges(graph, top_m);
  return graph;
}

GraphEdges factor_graph(const FactorParams& params, std::size_t top_m) {
  const Index d = params.dim();
  const Index q = params.factors();
  const std::size_t available = static_cast<std::size_t>(d * q);
  if (top_m > available) {
    throw InputError("edge budget " + std::to_string(top_m) + " exceeds the " + std::to_string(available) +
                     " available variable-factor pairs");
  }
  const Matrix gamma = factor_variable_correlations(params);
  GraphEdges graph;
  graph.kind = GraphKind::factor_graph;
  graph.variables = d;
  graph.factors = q;
  graph.edges.reserve(available);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < q; ++j) graph.edges.push_back({i, j, gamma(i, j)});
  }
  rank_edges(graph, top_m);
  return graph;
}

Matrix factor_positions(const Matrix& gamma, const Matrix& coords) {
  if (gamma.rows() != coords.rows()) throw InputError("coordinate rows must match the variable count");
  const Matrix weights = gamma.cwiseAbs();
  Matrix out(gamma.cols(), coords.cols());
  for (Index j = 0; j < gamma.cols(); ++j) {
    const double total = weights.col(j).sum();
    if (!(total > 0.0)) {
      throw NumericError("factor " + std::to_string(j + 1) + " has all-zero correlations; position undefined");
    }
    out.row(j) = weights.col(j).transpose() * coords / total;
  }
  return out;
}

}  // namespace linfa
