#include "linfa/gvt.hpp"

#include <map>

namespace linfa {

VertexPartition tessellate(const ObservationPattern& pattern) {
  const Index d = pattern.dim();
  const std::size_t K = pattern.size();

  // Incidence rows, keyed directly; equal keys <=> zero l1 distance.
  std::vector<std::vector<bool>> incidence(static_cast<std::size_t>(d), std::vector<bool>(K, false));
  for (std::size_t k = 0; k < K; ++k) {
    for (Index i : pattern.subset(k)) incidence[static_cast<std::size_t>(i)][k] = true;
  }

  VertexPartition out;
  std::map<std::vector<bool>, std::size_t> block_of;
  for (Index i = 0; i < d; ++i) {
    const auto& row = incidence[static_cast<std::size_t>(i)];
    auto [it, inserted] = block_of.try_emplace(row, out.blocks.size());
    if (inserted) {
      out.blocks.emplace_back();
      std::vector<std::size_t> cover;
      for (std::size_t k = 0; k < K; ++k) {
        if (row[k]) cover.push_back(k);
      }
      out.covers.push_back(std::move(cover));
    }
    out.blocks[it->second].push_back(i);
  }
  out.pooled_n.assign(out.blocks.size(), 0);
  return out;
}

void assign_pooled_counts(VertexPartition& partition, const DatasetCollection& data) {
  partition.pooled_n.assign(partition.blocks.size(), 0);
  for (std::size_t j = 0; j < partition.blocks.size(); ++j) {
    for (std::size_t k : partition.covers[j]) partition.pooled_n[j] += data.samples(k);
  }
}

}  // namespace linfa
