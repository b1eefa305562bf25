#include "h3trans/numeric/ops.hpp"

#include <cmath>
#include <string>

#include "h3trans/errors.hpp"

namespace h3t::nc {

namespace {

std::string shape(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void mismatch(const char* op, const Tensor2& a, const Tensor2& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape(a) + " and " + shape(b));
}

Tape& tape_of(Var v) {
  if (!v.valid()) throw DimensionError("operation on an empty Var");
  return *v.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor2& A = a.value();
  const Tensor2& B = b.value();
  if (A.cols() != B.rows()) mismatch("matmul", A, B);
  Tensor2 out(A.rows(), B.cols());
  out.noalias() = A * B;
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var transpose(Var a) {
  Tensor2 out = a.value().transpose();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor2& g) {
    t.accumulate(a, g.transpose());
  });
}

Var add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("add", a.value(), b.value());
  Tensor2 out = a.value() + b.value();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("sub", a.value(), b.value());
  Tensor2 out = a.value() - b.value();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var hadamard(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("hadamard", a.value(), b.value());
  Tensor2 out = a.value().cwiseProduct(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
    if (t.requires_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Var a, double c) {
  Tensor2 out = a.value() * c;
  return tape_of(a).record(std::move(out), {a}, [a, c](Tape& t, const Tensor2& g) {
    t.accumulate(a, g * c);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  Index rows = 0;
  const Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) mismatch("concat_rows", parts.front().value(), p.value());
    rows += p.rows();
  }
  Tensor2 out(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return tape_of(parts.front()).record(std::move(out), parts, [parts](Tape& t, const Tensor2& g) {
    Index r = 0;
    for (const Var& p : parts) {
      const Index n = t.value(p).rows();
      t.accumulate(p, g.middleRows(r, n));
      r += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Index cols = 0;
  const Index rows = parts.front().rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) mismatch("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Tensor2 out(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return tape_of(parts.front()).record(std::move(out), parts, [parts](Tape& t, const Tensor2& g) {
    Index c = 0;
    for (const Var& p : parts) {
      const Index n = t.value(p).cols();
      t.accumulate(p, g.middleCols(c, n));
      c += n;
    }
  });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of " + shape(a.value()));
  Tensor2 out = a.value().middleRows(start, count);
  return tape_of(a).record(std::move(out), {a}, [a, start, count](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a).middleRows(start, count) += g;
  });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw DimensionError("slice_cols: cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of " + shape(a.value()));
  Tensor2 out = a.value().middleCols(start, count);
  return tape_of(a).record(std::move(out), {a}, [a, start, count](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a).middleCols(start, count) += g;
  });
}

Var reshape(Var a, Index rows, Index cols) {
  if (rows * cols != a.value().size())
    throw DimensionError("reshape: cannot view " + shape(a.value()) + " as " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  Tensor2 out = Eigen::Map<const Tensor2>(a.value().data(), rows, cols);
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor2& g) {
    if (!t.requires_grad(a)) return;
    Tensor2& ga = t.grad(a);
    Eigen::Map<Tensor2>(ga.data(), g.rows(), g.cols()) += g;
  });
}

Var gather_rows(Var a, std::span<const int> ids) {
  const Tensor2& A = a.value();
  Tensor2 out(static_cast<Index>(ids.size()), A.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= A.rows())
      throw DimensionError("gather_rows: row " + std::to_string(ids[k]) + " out of " + shape(A));
    out.row(static_cast<Index>(k)) = A.row(ids[k]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return tape_of(a).record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, const Tensor2& g) {
    if (!t.requires_grad(a)) return;
    Tensor2& ga = t.grad(a);
    for (std::size_t k = 0; k < idx.size(); ++k) ga.row(idx[k]) += g.row(static_cast<Index>(k));
  });
}

Var replace_rows(Var a, std::span<const int> rows, Var replacement) {
  const Tensor2& A = a.value();
  const Tensor2& R = replacement.value();
  if (R.cols() != A.cols() || R.rows() != static_cast<Index>(rows.size())) mismatch("replace_rows", A, R);
  Tensor2 out = A;
  std::vector<int> idx(rows.begin(), rows.end());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= A.rows())
      throw DimensionError("replace_rows: row " + std::to_string(idx[k]) + " out of " + shape(A));
    out.row(idx[k]) = R.row(static_cast<Index>(k));
  }
  return tape_of(a).record(std::move(out), {a, replacement},
                           [a, replacement, idx = std::move(idx)](Tape& t, const Tensor2& g) {
                             if (t.requires_grad(a)) {
                               Tensor2 ga = g;
                               for (int r : idx) ga.row(r).setZero();
                               t.grad(a) += ga;
                             }
                             if (t.requires_grad(replacement)) {
                               Tensor2& gr = t.grad(replacement);
                               for (std::size_t k = 0; k < idx.size(); ++k)
                                 gr.row(static_cast<Index>(k)) += g.row(idx[k]);
                             }
                           });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw DimensionError("mean_rows: empty operand");
  Tensor2 out = a.value().colwise().mean();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor2& g) {
    if (!t.requires_grad(a)) return;
    Tensor2& ga = t.grad(a);
    ga.rowwise() += g.row(0) / static_cast<double>(ga.rows());
  });
}

Var segment_mean(Var a, std::span<const int> offsets, std::span<const int> indices) {
  const Tensor2& A = a.value();
  if (offsets.empty()) throw DimensionError("segment_mean: offsets must hold at least one entry");
  const Index segments = static_cast<Index>(offsets.size()) - 1;
  Tensor2 out = Tensor2::Zero(segments, A.cols());
  for (Index s = 0; s < segments; ++s) {
    const int lo = offsets[s], hi = offsets[s + 1];
    if (hi == lo) continue;
    for (int k = lo; k < hi; ++k) {
      if (indices[k] < 0 || indices[k] >= A.rows())
        throw DimensionError("segment_mean: row " + std::to_string(indices[k]) + " out of " + shape(A));
      out.row(s) += A.row(indices[k]);
    }
    out.row(s) /= static_cast<double>(hi - lo);
  }
  std::vector<int> off(offsets.begin(), offsets.end()), idx(indices.begin(), indices.end());
  return tape_of(a).record(std::move(out), {a},
                           [a, off = std::move(off), idx = std::move(idx)](Tape& t, const Tensor2& g) {
                             if (!t.requires_grad(a)) return;
                             Tensor2& ga = t.grad(a);
                             for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                               const int lo = off[s], hi = off[s + 1];
                               if (hi == lo) continue;
                               const double w = 1.0 / (hi - lo);
                               for (int k = lo; k < hi; ++k) ga.row(idx[k]) += w * g.row(static_cast<Index>(s));
                             }
                           });
}

Var sum_all(Var a) {
  Tensor2 out(1, 1);
  out(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a).array() += g(0, 0);
  });
}

Var softmax_rows(Var a) {
  const Tensor2& A = a.value();
  Tensor2 out(A.rows(), A.cols());
  for (Index r = 0; r < A.rows(); ++r) {
    const double mx = A.row(r).maxCoeff();
    out.row(r) = (A.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return tape_of(a).record(out, {a}, [a, y = out](Tape& t, const Tensor2& g) {
    if (!t.requires_grad(a)) return;
    Tensor2& ga = t.grad(a);
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var logsumexp_rows(Var a) {
  const Tensor2& A = a.value();
  Tensor2 out(A.rows(), 1);
  Tensor2 probs(A.rows(), A.cols());
  for (Index r = 0; r < A.rows(); ++r) {
    const double mx = A.row(r).maxCoeff();
    probs.row(r) = (A.row(r).array() - mx).exp().matrix();
    const double s = probs.row(r).sum();
    out(r, 0) = mx + std::log(s);
    probs.row(r) /= s;
  }
  return tape_of(a).record(std::move(out), {a}, [a, p = std::move(probs)](Tape& t, const Tensor2& g) {
    if (!t.requires_grad(a)) return;
    Tensor2& ga = t.grad(a);
    for (Index r = 0; r < p.rows(); ++r) ga.row(r) += g(r, 0) * p.row(r);
  });
}

Var masked_fill(Var a, const Tensor2& mask, double value) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) mismatch("masked_fill", a.value(), mask);
  Tensor2 out = (mask.array() != 0.0).select(value, a.value().array());
  return tape_of(a).record(std::move(out), {a}, [a, mask](Tape& t, const Tensor2& g) {
    if (!t.requires_grad(a)) return;
    t.grad(a).array() += (mask.array() != 0.0).select(0.0, g.array());
  });
}

Var inner_product_rows(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("inner_product_rows", a.value(), b.value());
  Tensor2 out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a) += g.col(0).asDiagonal() * t.value(b);
    if (t.requires_grad(b)) t.grad(b) += g.col(0).asDiagonal() * t.value(a);
  });
}

Var cosine_rows(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch("cosine_rows", a.value(), b.value());
  const Tensor2& A = a.value();
  const Tensor2& B = b.value();
  Tensor2 out(A.rows(), 1);
  for (Index r = 0; r < A.rows(); ++r) {
    const double na = A.row(r).norm(), nb = B.row(r).norm();
    out(r, 0) = (na > 0 && nb > 0) ? A.row(r).dot(B.row(r)) / (na * nb) : 0.0;
  }
  return tape_of(a).record(out, {a, b}, [a, b, y = out](Tape& t, const Tensor2& g) {
    const Tensor2& A = t.value(a);
    const Tensor2& B = t.value(b);
    for (Index r = 0; r < A.rows(); ++r) {
      const double na = A.row(r).norm(), nb = B.row(r).norm();
      if (na == 0 || nb == 0) continue;
      const double c = y(r, 0), gr = g(r, 0);
      if (t.requires_grad(a)) t.grad(a).row(r) += gr * (B.row(r) / (na * nb) - c * A.row(r) / (na * na));
      if (t.requires_grad(b)) t.grad(b).row(r) += gr * (A.row(r) / (na * nb) - c * B.row(r) / (nb * nb));
    }
  });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) throw DimensionError("log: non-positive entry");
  Tensor2 out = a.value().array().log().matrix();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a).array() += g.array() / t.value(a).array();
  });
}

Var exp(Var a) {
  Tensor2 out = a.value().array().exp().matrix();
  return tape_of(a).record(out, {a}, [a, y = out](Tape& t, const Tensor2& g) {
    if (t.requires_grad(a)) t.grad(a).array() += g.array() * y.array();
  });
}

Var leaky_relu(Var a, double slope) {
  Tensor2 out = (a.value().array() > 0.0).select(a.value().array(), slope * a.value().array());
  return tape_of(a).record(std::move(out), {a}, [a, slope](Tape& t, const Tensor2& g) {
    if (!t.requires_grad(a)) return;
    t.grad(a).array() += (t.value(a).array() > 0.0).select(g.array(), slope * g.array());
  });
}

Var table_lookup(Var table, Index row, Index rows, Index cols, std::span<const std::uint8_t> buckets) {
  const Tensor2& T = table.value();
  if (row < 0 || row >= T.rows() || static_cast<Index>(buckets.size()) != rows * cols)
    throw DimensionError("table_lookup: bad row or bucket count for table " + shape(T));
  Tensor2 out(rows, cols);
  for (Index k = 0; k < rows * cols; ++k) {
    if (buckets[k] >= T.cols()) throw DimensionError("table_lookup: bucket out of range");
    out(k / cols, k % cols) = T(row, buckets[k]);
  }
  std::vector<std::uint8_t> b(buckets.begin(), buckets.end());
  return tape_of(table).record(std::move(out), {table},
                               [table, row, cols, b = std::move(b)](Tape& t, const Tensor2& g) {
                                 if (!t.requires_grad(table)) return;
                                 Tensor2& gt = t.grad(table);
                                 for (std::size_t k = 0; k < b.size(); ++k)
                                   gt(row, b[k]) += g(static_cast<Index>(k) / cols, static_cast<Index>(k) % cols);
                               });
}

}  // namespace h3t::nc
