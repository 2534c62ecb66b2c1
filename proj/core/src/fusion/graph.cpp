#include "mmtlab/fusion/graph.hpp"

#include <algorithm>
#include <cmath>

#include "mmtlab/error.hpp"

namespace mmtlab::fusion {

Var Graph::push(Tensor2 value, BackwardFn fn, bool needs_grad) {
  nodes_.push_back({std::move(value), std::move(fn), needs_grad});
  return Var{nodes_.size() - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error(Errc::invalid_argument, "variable does not belong to this graph");
  return nodes_[v.id];
}

const Tensor2& Graph::value(Var v) const { return node(v).value; }

Tensor2& Graph::grad_slot(Var v) {
  Tensor2& g = grads_[v.id];
  if (!g.same_shape(nodes_[v.id].value)) g = Tensor2(nodes_[v.id].value.rows(), nodes_[v.id].value.cols());
  return g;
}

void Graph::accumulate(Var v, const Tensor2& g) {
  if (!nodes_[v.id].needs_grad) return;
  grad_slot(v) += g;
}

Var Graph::leaf(Tensor2 value) { return push(std::move(value), nullptr); }

Var Graph::constant(Tensor2 value) { return push(std::move(value), nullptr, false); }

Var Graph::matmul(Var a, Var b) {
  return push(fusion::matmul(value(a), value(b)), [a, b](Graph& g, const Tensor2& d) {
    g.accumulate(a, fusion::matmul_nt(d, g.value(b)));
    g.accumulate(b, matmul_tn(g.value(a), d));
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  return push(fusion::matmul_nt(value(a), value(b)), [a, b](Graph& g, const Tensor2& d) {
    g.accumulate(a, fusion::matmul(d, g.value(b)));
    g.accumulate(b, matmul_tn(d, g.value(a)));
  });
}

Var Graph::add(Var a, Var b) {
  return push(value(a) + value(b), [a, b](Graph& g, const Tensor2& d) {
    g.accumulate(a, d);
    g.accumulate(b, d);
  });
}

Var Graph::sub(Var a, Var b) {
  return push(value(a) - value(b), [a, b](Graph& g, const Tensor2& d) {
    g.accumulate(a, d);
    g.accumulate(b, -1.0 * d);
  });
}

Var Graph::hadamard(Var a, Var b) {
  return push(fusion::hadamard(value(a), value(b)), [a, b](Graph& g, const Tensor2& d) {
    g.accumulate(a, fusion::hadamard(d, g.value(b)));
    g.accumulate(b, fusion::hadamard(d, g.value(a)));
  });
}

Var Graph::scale(Var a, double s) {
  return push(s * value(a), [a, s](Graph& g, const Tensor2& d) { g.accumulate(a, s * d); });
}

Var Graph::one_minus(Var a) {
  Tensor2 out = value(a);
  for (double& v : out.values()) v = 1.0 - v;
  return push(std::move(out), [a](Graph& g, const Tensor2& d) { g.accumulate(a, -1.0 * d); });
}

Var Graph::add_row(Var a, Var row) {
  const Tensor2& x = value(a);
  const Tensor2& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols())
    throw Error(Errc::invalid_argument, "add_row: " + x.shape_string() + " + " + r.shape_string());
  Tensor2 out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += r(0, j);
  return push(std::move(out), [a, row](Graph& g, const Tensor2& d) {
    g.accumulate(a, d);
    Tensor2 colsum(1, d.cols());
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) colsum(0, j) += d(i, j);
    g.accumulate(row, colsum);
  });
}

Var Graph::mul_row(Var a, Var row) {
  const Tensor2& x = value(a);
  const Tensor2& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols())
    throw Error(Errc::invalid_argument, "mul_row: " + x.shape_string() + " * " + r.shape_string());
  Tensor2 out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) *= r(0, j);
  return push(std::move(out), [a, row](Graph& g, const Tensor2& d) {
    const Tensor2& xv = g.value(a);
    const Tensor2& rv = g.value(row);
    Tensor2 da(d.rows(), d.cols()), dr(1, d.cols());
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) {
        da(i, j) = d(i, j) * rv(0, j);
        dr(0, j) += d(i, j) * xv(i, j);
      }
    g.accumulate(a, da);
    g.accumulate(row, dr);
  });
}

Var Graph::sigmoid(Var a) {
  Tensor2 out = value(a);
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  const Var self{nodes_.size()};
  return push(std::move(out), [a, self](Graph& g, const Tensor2& d) {
    const Tensor2& y = g.value(self);
    Tensor2 da(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.size(); ++i) da[i] = d[i] * y[i] * (1.0 - y[i]);
    g.accumulate(a, da);
  });
}

Var Graph::relu(Var a) {
  Tensor2 out = value(a);
  for (double& v : out.values()) v = std::max(0.0, v);
  return push(std::move(out), [a](Graph& g, const Tensor2& d) {
    const Tensor2& x = g.value(a);
    Tensor2 da(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.size(); ++i) da[i] = x[i] > 0.0 ? d[i] : 0.0;
    g.accumulate(a, da);
  });
}

Var Graph::softmax_rows(Var a) {
  Tensor2 out = value(a);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < out.cols(); ++j) mx = std::max(mx, out(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) = std::exp(out(i, j) - mx);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= sum;
  }
  const Var self{nodes_.size()};
  return push(std::move(out), [a, self](Graph& g, const Tensor2& d) {
    const Tensor2& y = g.value(self);
    Tensor2 da(d.rows(), d.cols());
    for (std::size_t i = 0; i < d.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d.cols(); ++j) s += d(i, j) * y(i, j);
      for (std::size_t j = 0; j < d.cols(); ++j) da(i, j) = y(i, j) * (d(i, j) - s);
    }
    g.accumulate(a, da);
  });
}

Var Graph::normalize_rows(Var a, double eps) {
  const Tensor2& x = value(a);
  const std::size_t n = x.cols();
  Tensor2 out(x.rows(), n);
  Tensor2 inv_std(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x(i, j);
    mean /= double(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= double(n);
    inv_std(i, 0) = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = (x(i, j) - mean) * inv_std(i, 0);
  }
  const Var self{nodes_.size()};
  return push(std::move(out), [a, self, inv_std](Graph& g, const Tensor2& d) {
    const Tensor2& y = g.value(self);
    const std::size_t cols = y.cols();
    Tensor2 da(d.rows(), cols);
    for (std::size_t i = 0; i < d.rows(); ++i) {
      double mean_d = 0.0, mean_dy = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        mean_d += d(i, j);
        mean_dy += d(i, j) * y(i, j);
      }
      mean_d /= double(cols);
      mean_dy /= double(cols);
      for (std::size_t j = 0; j < cols; ++j)
        da(i, j) = inv_std(i, 0) * (d(i, j) - mean_d - y(i, j) * mean_dy);
    }
    g.accumulate(a, da);
  });
}

Var Graph::concat_rows(Var top, Var bottom) {
  const Tensor2& t = value(top);
  const Tensor2& b = value(bottom);
  if (t.cols() != b.cols())
    throw Error(Errc::invalid_argument, "concat_rows: " + t.shape_string() + " over " + b.shape_string());
  Tensor2 out(t.rows() + b.rows(), t.cols());
  std::copy(t.values().begin(), t.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(t.size()));
  const std::size_t split = t.size();
  return push(std::move(out), [top, bottom, split](Graph& g, const Tensor2& d) {
    const Tensor2& tv = g.value(top);
    const Tensor2& bv = g.value(bottom);
    Tensor2 dt(tv.rows(), tv.cols()), db(bv.rows(), bv.cols());
    std::copy(d.values().begin(), d.values().begin() + static_cast<std::ptrdiff_t>(split), dt.values().begin());
    std::copy(d.values().begin() + static_cast<std::ptrdiff_t>(split), d.values().end(), db.values().begin());
    g.accumulate(top, dt);
    g.accumulate(bottom, db);
  });
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::invalid_argument, "concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw Error(Errc::invalid_argument, "concat_cols: row count mismatch");
    cols += value(p).cols();
  }
  Tensor2 out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor2& v = value(p);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs](Graph& g, const Tensor2& d) {
    std::size_t off = 0;
    for (Var p : inputs) {
      const Tensor2& v = g.value(p);
      Tensor2 dp(v.rows(), v.cols());
      for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < v.cols(); ++j) dp(i, j) = d(i, off + j);
      g.accumulate(p, dp);
      off += v.cols();
    }
  });
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor2& x = value(a);
  if (begin + count > x.cols())
    throw Error(Errc::invalid_argument, "slice_cols: columns [" + std::to_string(begin) + ", " +
                                            std::to_string(begin + count) + ") of " + x.shape_string());
  Tensor2 out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
  return push(std::move(out), [a, begin, count](Graph& g, const Tensor2& d) {
    const Tensor2& xv = g.value(a);
    Tensor2 da(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < xv.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) da(i, begin + j) = d(i, j);
    g.accumulate(a, da);
  });
}

void Graph::backward(Var output, const Tensor2& upstream) {
  const Node& out = node(output);
  if (!upstream.same_shape(out.value))
    throw Error(Errc::invalid_argument, "upstream gradient " + upstream.shape_string() +
                                            " does not match output " + out.value.shape_string());
  grads_.assign(nodes_.size(), Tensor2());
  for (std::size_t i = 0; i < nodes_.size(); ++i) grads_[i] = Tensor2(nodes_[i].value.rows(), nodes_[i].value.cols());
  grads_[output.id] = upstream;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, grads_[i]);
  }
}

const Tensor2& Graph::grad(Var v) const {
  if (grads_.empty()) throw Error(Errc::state, "backward() has not been run on this graph");
  node(v);
  return grads_[v.id];
}

}  // namespace mmtlab::fusion
