#ifndef LINFA_GVT_HPP
#define LINFA_GVT_HPP

#include "linfa/core.hpp"

#include <vector>

namespace linfa {

/// Minimal partition of the variables into blocks whose members appear in
/// exactly the same datasets.
struct VertexPartition {
  std::vector<IndexSet> blocks;
  /// covers[j] lists the datasets k with blocks[j] contained in V_k.
  std::vector<std::vector<std::size_t>> covers;
  /// Pooled sample count of the covering datasets; filled by fit().
  std::vector<Index> pooled_n;

  std::size_t size() const { return blocks.size(); }
};

/// Group vertex tessellation. Blocks are ordered by their smallest member.
VertexPartition tessellate(const ObservationPattern& pattern);

/// Fills partition.pooled_n from the dataset sample sizes.
void assign_pooled_counts(VertexPartition& partition, const DatasetCollection& data);

}  // namespace linfa

#endif  // LINFA_GVT_HPP
