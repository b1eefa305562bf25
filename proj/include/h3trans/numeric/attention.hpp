#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "h3trans/numeric/tape.hpp"

namespace h3t::nc {

/// Projection weights of one multi-head attention block. Each is d x d; head
/// p owns columns [p*d/P, (p+1)*d/P) of wq, wk and wv.
struct AttentionWeights {
  Var wq, wk, wv, wo;
};

/// softmax(Q K^T / sqrt(d/P) + bias_p) V per head, heads concatenated, then
/// multiplied by wo. `bias` is empty (no bias) or holds one rows x rows Var
/// per head. Built from the primitive ops, so every step is differentiable.
Var attention(Var q_in, Var k_in, Var v_in, std::span<const Var> bias, int heads,
              const AttentionWeights& w);

/// One independent attention problem inside a larger row pool.
struct AttentionGroup {
  std::vector<int> queries;  // row positions in q
  std::vector<int> keys;     // row positions in k and v
  /// Empty, or |queries| x |keys| distance buckets (row-major) looked up in
  /// the bias table.
  std::vector<std::uint8_t> buckets;
};

/// Fused multi-group attention on already projected q, k, v (same width d).
/// Output row r belongs to the r-th query when the groups' query lists are
/// concatenated; output is not multiplied by an output projection. `bias_table`
/// (heads x buckets) may be an empty Var when no group carries buckets.
Var grouped_attention(Var q, Var k, Var v, const std::vector<AttentionGroup>& groups, int heads,
                      Var bias_table);

}  // namespace h3t::nc
