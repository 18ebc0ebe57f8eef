#pragma once

#include "mrkp/point_cloud.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mrkp {

/// Indices into a dataset: first member from group A, second from group B.
using IndexPair = std::pair<std::size_t, std::size_t>;

/// Siamese pair stream over a dataset split into two disjoint groups by a seeded
/// shuffle. Each group is walked in a shuffled order without repetition and is
/// reshuffled once exhausted. Single consumer; the full state serializes so a
/// resumed run continues the same sequence.
class PairSampler {
 public:
  PairSampler() = default;
  PairSampler(std::size_t dataset_size, std::uint64_t seed);

  IndexPair next();
  std::vector<IndexPair> take(std::size_t count);

  const std::vector<std::size_t>& group_a() const { return group_a_; }
  const std::vector<std::size_t>& group_b() const { return group_b_; }

  std::string serialize() const;
  static PairSampler deserialize(const std::string& text);

  bool operator==(const PairSampler& other) const;

 private:
  std::size_t draw(std::vector<std::size_t>& order, std::size_t& cursor);

  std::mt19937_64 rng_;
  std::vector<std::size_t> group_a_, group_b_;
  std::vector<std::size_t> order_a_, order_b_;
  std::size_t cursor_a_ = 0, cursor_b_ = 0;
};

/// One epoch's worth of pairs drawn from a fresh sampler. The clouds must share
/// one category.
std::vector<IndexPair> make_pairs(const std::vector<PointCloud>& clouds, std::uint64_t seed,
                                  std::size_t epoch_pairs);

}  // namespace mrkp
