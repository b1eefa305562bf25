#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "h3trans/dataingest.hpp"

namespace h3t {

/// Sorted training items per (user, domain), for membership tests.
class InteractionIndex {
 public:
  InteractionIndex() = default;
  explicit InteractionIndex(const ingest::Dataset& train)
      : domains_(train.domains), lists_(train.user_count * static_cast<std::size_t>(train.domains)) {
    for (const auto& r : train.records) lists_[slot(r.user, r.domain)].push_back(r.item);
    for (auto& l : lists_) {
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
    }
  }

  std::span<const ItemId> items(UserId u, int m) const { return lists_[slot(u, m)]; }
  bool contains(UserId u, int m, ItemId i) const {
    const auto& l = lists_[slot(u, m)];
    return std::binary_search(l.begin(), l.end(), i);
  }

 private:
  std::size_t slot(UserId u, int m) const { return static_cast<std::size_t>(u) * domains_ + m; }
  int domains_ = 0;
  std::vector<std::vector<ItemId>> lists_;
};

}  // namespace h3t
