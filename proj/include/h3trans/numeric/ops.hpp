#pragma once

#include <span>
#include <vector>

#include "h3trans/numeric/tape.hpp"

// Differentiable primitives. Every function records its result on the tape of
// its operands and throws DimensionError (naming the op and the shapes) when
// operands do not fit.
namespace h3t::nc {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double c);

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Index start, Index count);
Var slice_cols(Var a, Index start, Index count);
Var reshape(Var a, Index rows, Index cols);

/// out.row(k) = a.row(ids[k]). Same op as an embedding lookup.
Var gather_rows(Var a, std::span<const int> ids);
inline Var embedding_gather(Var table, std::span<const int> ids) { return gather_rows(table, ids); }
/// Copy of a whose rows `rows[k]` are replaced by replacement.row(k).
Var replace_rows(Var a, std::span<const int> rows, Var replacement);

/// 1 x cols mean over rows.
Var mean_rows(Var a);
/// Row r of the result is the mean of a's rows indices[offsets[r]..offsets[r+1]);
/// an empty segment yields a zero row.
Var segment_mean(Var a, std::span<const int> offsets, std::span<const int> indices);
/// 1 x 1 sum of every entry.
Var sum_all(Var a);

Var softmax_rows(Var a);
/// rows x 1 log-sum-exp per row, max-shifted.
Var logsumexp_rows(Var a);
/// Entries with mask != 0 are set to `value`; they receive no gradient.
Var masked_fill(Var a, const Tensor2& mask, double value);
/// rows x 1 row-wise inner products.
Var inner_product_rows(Var a, Var b);
/// rows x 1 row-wise cosine similarities (0 when a row is zero).
Var cosine_rows(Var a, Var b);

Var log(Var a);
Var exp(Var a);
Var leaky_relu(Var a, double slope);

/// out(r, c) = table(row, buckets[r * cols + c]).
Var table_lookup(Var table, Index row, Index rows, Index cols, std::span<const std::uint8_t> buckets);

}  // namespace h3t::nc
