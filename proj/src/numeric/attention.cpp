#include "h3trans/numeric/attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "h3trans/errors.hpp"
#include "h3trans/numeric/ops.hpp"

namespace h3t::nc {

namespace {

void check_heads(const char* op, Index d, int heads) {
  if (heads < 1 || d % heads != 0)
    throw DimensionError(std::string(op) + ": " + std::to_string(heads) + " heads do not divide width " +
                         std::to_string(d));
}

}  // namespace

Var attention(Var q_in, Var k_in, Var v_in, std::span<const Var> bias, int heads,
              const AttentionWeights& w) {
  if (q_in.rows() != k_in.rows() || k_in.rows() != v_in.rows())
    throw DimensionError("attention: Q/K/V row counts " + std::to_string(q_in.rows()) + ", " +
                         std::to_string(k_in.rows()) + ", " + std::to_string(v_in.rows()) + " differ");
  const Index d = w.wq.cols();
  check_heads("attention", d, heads);
  if (!bias.empty() && static_cast<int>(bias.size()) != heads)
    throw DimensionError("attention: expected one bias matrix per head");
  const Index n = q_in.rows();
  const Index dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));

  Var q = matmul(q_in, w.wq);
  Var k = matmul(k_in, w.wk);
  Var v = matmul(v_in, w.wv);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int p = 0; p < heads; ++p) {
    Var qp = slice_cols(q, p * dh, dh);
    Var kp = slice_cols(k, p * dh, dh);
    Var vp = slice_cols(v, p * dh, dh);
    Var logits = scale(matmul(qp, transpose(kp)), inv);
    if (!bias.empty()) {
      if (bias[p].rows() != n || bias[p].cols() != n)
        throw DimensionError("attention: bias must be " + std::to_string(n) + "x" + std::to_string(n));
      logits = add(logits, bias[p]);
    }
    outs.push_back(matmul(softmax_rows(logits), vp));
  }
  return matmul(heads == 1 ? outs.front() : concat_cols(outs), w.wo);
}

Var grouped_attention(Var q, Var k, Var v, const std::vector<AttentionGroup>& groups, int heads,
                      Var bias_table) {
  const Tensor2& Q = q.value();
  const Tensor2& K = k.value();
  const Tensor2& V = v.value();
  const Index d = Q.cols();
  if (K.cols() != d || V.cols() != d || K.rows() != V.rows())
    throw DimensionError("grouped_attention: q/k/v widths or key rows differ");
  check_heads("grouped_attention", d, heads);
  const Index dh = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));

  Index out_rows = 0;
  for (const auto& g : groups) {
    if (g.keys.empty()) throw DimensionError("grouped_attention: group without keys");
    for (int r : g.queries)
      if (r < 0 || r >= Q.rows()) throw DimensionError("grouped_attention: query row out of range");
    for (int r : g.keys)
      if (r < 0 || r >= K.rows()) throw DimensionError("grouped_attention: key row out of range");
    if (!g.buckets.empty()) {
      if (!bias_table.valid() || bias_table.rows() != heads)
        throw DimensionError("grouped_attention: buckets given without a heads-row bias table");
      if (g.buckets.size() != g.queries.size() * g.keys.size())
        throw DimensionError("grouped_attention: bucket count does not match |queries| x |keys|");
      for (auto b : g.buckets)
        if (b >= bias_table.cols()) throw DimensionError("grouped_attention: bucket out of range");
    }
    out_rows += static_cast<Index>(g.queries.size());
  }

  // Attention weights of every (group, head), flattened, kept for backward.
  std::size_t prob_size = 0, max_q = 0, max_k = 0;
  for (const auto& g : groups) {
    prob_size += g.queries.size() * g.keys.size() * heads;
    max_q = std::max(max_q, g.queries.size());
    max_k = std::max(max_k, g.keys.size());
  }
  auto probs = std::make_shared<std::vector<double>>(prob_size);
  Tensor2 out(out_rows, d);
  {
    Tensor2 qg(max_q, d), kg(max_k, d), vg(max_k, d);
    Index row = 0;
    std::size_t at = 0;
    for (const auto& g : groups) {
      const Index nq = static_cast<Index>(g.queries.size());
      const Index nk = static_cast<Index>(g.keys.size());
      for (Index a = 0; a < nq; ++a) qg.row(a) = Q.row(g.queries[a]);
      for (Index b = 0; b < nk; ++b) {
        kg.row(b) = K.row(g.keys[b]);
        vg.row(b) = V.row(g.keys[b]);
      }
      for (int p = 0; p < heads; ++p) {
        Eigen::Map<Tensor2> s(probs->data() + at, nq, nk);
        at += static_cast<std::size_t>(nq * nk);
        s.noalias() = qg.topRows(nq).middleCols(p * dh, dh) * kg.topRows(nk).middleCols(p * dh, dh).transpose();
        s *= inv;
        if (!g.buckets.empty()) {
          const Tensor2& table = bias_table.value();
          for (Index a = 0; a < nq; ++a)
            for (Index b = 0; b < nk; ++b) s(a, b) += table(p, g.buckets[a * nk + b]);
        }
        for (Index a = 0; a < nq; ++a) {
          const double mx = s.row(a).maxCoeff();
          s.row(a) = (s.row(a).array() - mx).exp().matrix();
          s.row(a) /= s.row(a).sum();
        }
        out.block(row, p * dh, nq, dh).noalias() = s * vg.topRows(nk).middleCols(p * dh, dh);
      }
      row += nq;
    }
  }

  std::vector<Var> parents{q, k, v};
  if (bias_table.valid()) parents.push_back(bias_table);
  auto shared_groups = std::make_shared<const std::vector<AttentionGroup>>(groups);
  return q.tape()->record(
      std::move(out), parents,
      [q, k, v, bias_table, heads, dh, inv, probs, shared_groups, max_q, max_k](Tape& t, const Tensor2& grad) {
        const Tensor2& Q = t.value(q);
        const Tensor2& K = t.value(k);
        const Tensor2& V = t.value(v);
        const Index d = Q.cols();
        const bool gb = bias_table.valid() && t.requires_grad(bias_table);
        Tensor2* dq = t.requires_grad(q) ? &t.grad(q) : nullptr;
        Tensor2* dk = t.requires_grad(k) ? &t.grad(k) : nullptr;
        Tensor2* dv = t.requires_grad(v) ? &t.grad(v) : nullptr;
        Tensor2* db = gb ? &t.grad(bias_table) : nullptr;
        Tensor2 qg(max_q, d), kg(max_k, d), vg(max_k, d), dqg(max_q, d), dkg(max_k, d), dvg(max_k, d);
        Tensor2 da(max_q, max_k);
        Index row = 0;
        std::size_t at = 0;
        for (const auto& g : *shared_groups) {
          const Index nq = static_cast<Index>(g.queries.size());
          const Index nk = static_cast<Index>(g.keys.size());
          for (Index a = 0; a < nq; ++a) qg.row(a) = Q.row(g.queries[a]);
          for (Index b = 0; b < nk; ++b) {
            kg.row(b) = K.row(g.keys[b]);
            vg.row(b) = V.row(g.keys[b]);
          }
          dqg.topRows(nq).setZero();
          dkg.topRows(nk).setZero();
          dvg.topRows(nk).setZero();
          for (int p = 0; p < heads; ++p) {
            Eigen::Map<const Tensor2> A(probs->data() + at, nq, nk);
            at += static_cast<std::size_t>(nq * nk);
            const auto go = grad.block(row, p * dh, nq, dh);
            dvg.topRows(nk).middleCols(p * dh, dh).noalias() += A.transpose() * go;
            auto ds = da.topLeftCorner(nq, nk);
            ds.noalias() = go * vg.topRows(nk).middleCols(p * dh, dh).transpose();
            for (Index a = 0; a < nq; ++a) {
              const double dot = ds.row(a).dot(A.row(a));
              ds.row(a).array() = A.row(a).array() * (ds.row(a).array() - dot);
            }
            if (db && !g.buckets.empty())
              for (Index a = 0; a < nq; ++a)
                for (Index b = 0; b < nk; ++b) (*db)(p, g.buckets[a * nk + b]) += ds(a, b);
            dqg.topRows(nq).middleCols(p * dh, dh).noalias() += inv * (ds * kg.topRows(nk).middleCols(p * dh, dh));
            dkg.topRows(nk).middleCols(p * dh, dh).noalias() +=
                inv * (ds.transpose() * qg.topRows(nq).middleCols(p * dh, dh));
          }
          if (dq)
            for (Index a = 0; a < nq; ++a) dq->row(g.queries[a]) += dqg.row(a);
          for (Index b = 0; b < nk; ++b) {
            if (dk) dk->row(g.keys[b]) += dkg.row(b);
            if (dv) dv->row(g.keys[b]) += dvg.row(b);
          }
          row += nq;
        }
      });
}

}  // namespace h3t::nc
