// Copyright 2026 The prefalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefalign/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefalign/error.hpp"
#include "prefalign/numerics/stable.hpp"

namespace prefalign::numerics {

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw Error("tape: operands live on different tapes");
}

void require_shape(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) {
    throw Error(std::string("tape: shape mismatch in ") + op + ": " +
                std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                std::to_string(b.rows) + "x" + std::to_string(b.cols));
  }
}

// c += a * b for row-major a (m x k), b (k x n).
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c += a * b^T for a (m x k), b (n x k).
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// c += a^T * b for a (k x m), b (k x n).
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
                 std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back({std::move(value), {}, record_, {}});
  return {this, nodes_.size() - 1};
}

double Tape::scalar(Var v) const {
  const Tensor& t = nodes_[v.id].value;
  if (t.size() != 1) throw Error("tape: scalar() on a non-scalar node");
  return t.data[0];
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.data.empty()) return Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty() && n.value.size() != 0) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(fn));
}

Var Tape::push(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) {
      if (in.tape != this) throw Error("tape: operand from another tape");
      needs = needs || nodes_[in.id].requires_grad;
    }
  }
  nodes_.push_back({std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var output) {
  if (backward_done_) throw Error("tape: backward() called twice");
  if (!record_) throw Error("tape: backward() on a non-recording tape");
  if (nodes_[output.id].value.size() != 1) throw Error("tape: backward() needs a scalar output");
  backward_done_ = true;
  grad_buffer(output.id).data[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.data.empty()) n.backward(*this, i);
  }
}

void Tape::truncate(std::size_t n) {
  if (n < nodes_.size()) nodes_.resize(n);
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_shape(A.cols == B.rows, "matmul", A, B);
  Tensor out(A.rows, B.cols);
  gemm_acc(A.data.data(), B.data.data(), out.data.data(), A.rows, A.cols, B.cols);
  return t.push(std::move(out), {a, b}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& A = t.value_at(a);
    const Tensor& B = t.value_at(b);
    if (t.needs_grad_at(a)) {
      gemm_nt_acc(g.data.data(), B.data.data(), t.grad_buffer(a).data.data(), g.rows, g.cols,
                  B.rows);
    }
    if (t.needs_grad_at(b)) {
      gemm_tn_acc(A.data.data(), g.data.data(), t.grad_buffer(b).data.data(), A.rows, A.cols,
                  g.cols);
    }
  });
}

Var matmul_transposed(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_shape(A.cols == B.cols, "matmul_transposed", A, B);
  Tensor out(A.rows, B.rows);
  gemm_nt_acc(A.data.data(), B.data.data(), out.data.data(), A.rows, A.cols, B.rows);
  return t.push(std::move(out), {a, b}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);  // m x n
    const Tensor& A = t.value_at(a);    // m x k
    const Tensor& B = t.value_at(b);    // n x k
    if (t.needs_grad_at(a)) {
      gemm_acc(g.data.data(), B.data.data(), t.grad_buffer(a).data.data(), g.rows, g.cols,
               B.cols);
    }
    if (t.needs_grad_at(b)) {
      gemm_tn_acc(g.data.data(), A.data.data(), t.grad_buffer(b).data.data(), g.rows, g.cols,
                  A.cols);
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_shape(A.same_shape(B), "add", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  return t.push(std::move(out), {a, b}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    for (std::size_t in : {a, b}) {
      if (!t.needs_grad_at(in)) continue;
      Tensor& gi = t.grad_buffer(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += g.data[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_shape(A.same_shape(B), "sub", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= B.data[i];
  return t.push(std::move(out), {a, b}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    if (t.needs_grad_at(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad_at(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  require_shape(A.same_shape(B), "mul", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  return t.push(std::move(out), {a, b}, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& A = t.value_at(a);
    const Tensor& B = t.value_at(b);
    if (t.needs_grad_at(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * B.data[i];
    }
    if (t.needs_grad_at(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * A.data[i];
    }
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  const Tensor& R = t.value(row);
  require_shape(R.rows == 1 && R.cols == A.cols, "add_row", A, R);
  Tensor out = A;
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = 0; j < A.cols; ++j) out(i, j) += R.data[j];
  }
  return t.push(std::move(out), {a, row}, [a = a.id, r = row.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    if (t.needs_grad_at(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad_at(r)) {
      Tensor& gr = t.grad_buffer(r);
      for (std::size_t i = 0; i < g.rows; ++i) {
        for (std::size_t j = 0; j < g.cols; ++j) gr.data[j] += g(i, j);
      }
    }
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  Tensor out = t.value(a);
  for (double& v : out.data) v *= c;
  return t.push(std::move(out), {a}, [a = a.id, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
  });
}

Var add_constant(Var a, double c) {
  Tape& t = *a.tape;
  Tensor out = t.value(a);
  for (double& v : out.data) v += c;
  return t.push(std::move(out), {a}, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
  });
}

Var gelu(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double x = A.data[i];
    const double u = kGeluC * (x + kGeluA * x * x * x);
    out.data[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
  return t.push(std::move(out), {a}, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& A = t.value_at(a);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = A.data[i];
      const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      const double d = 0.5 * (1.0 + th) +
                       0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      ga.data[i] += g.data[i] * d;
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  Tape& t = *x.tape;
  const Tensor& X = t.value(x);
  const Tensor& G = t.value(gain);
  const Tensor& B = t.value(bias);
  require_shape(G.rows == 1 && G.cols == X.cols, "layer_norm gain", X, G);
  require_shape(B.rows == 1 && B.cols == X.cols, "layer_norm bias", X, B);
  const std::size_t n = X.cols;
  Tensor out(X.rows, n);
  // Per-row normalised input and inverse std, kept for the backward rule.
  Tensor xhat(X.rows, n);
  std::vector<double> rstd(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    const auto r = X.row(i);
    double mu = 0.0;
    for (double v : r) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : r) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (r[j] - mu) * rstd[i];
      out(i, j) = xhat(i, j) * G.data[j] + B.data[j];
    }
  }
  return t.push(std::move(out), {x, gain, bias},
                [x = x.id, gn = gain.id, bs = bias.id, xhat = std::move(xhat),
                 rstd = std::move(rstd)](Tape& t, std::size_t self) {
                  const Tensor& g = t.grad_at(self);
                  const Tensor& G = t.value_at(gn);
                  const std::size_t n = g.cols;
                  if (t.needs_grad_at(gn) || t.needs_grad_at(bs)) {
                    Tensor& gg = t.grad_buffer(gn);
                    Tensor& gb = t.grad_buffer(bs);
                    for (std::size_t i = 0; i < g.rows; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        gg.data[j] += g(i, j) * xhat(i, j);
                        gb.data[j] += g(i, j);
                      }
                    }
                  }
                  if (t.needs_grad_at(x)) {
                    Tensor& gx = t.grad_buffer(x);
                    for (std::size_t i = 0; i < g.rows; ++i) {
                      double m1 = 0.0;
                      double m2 = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = g(i, j) * G.data[j];
                        m1 += d;
                        m2 += d * xhat(i, j);
                      }
                      m1 /= static_cast<double>(n);
                      m2 /= static_cast<double>(n);
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = g(i, j) * G.data[j];
                        gx(i, j) += rstd[i] * (d - m1 - xhat(i, j) * m2);
                      }
                    }
                  }
                });
}

Var embedding(Var table, std::span<const int> ids) {
  Tape& t = *table.tape;
  const Tensor& W = t.value(table);
  Tensor out(ids.size(), W.cols);
  std::vector<int> idx(ids.begin(), ids.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= W.rows) {
      throw Error("embedding: id " + std::to_string(idx[i]) + " out of range [0, " +
                  std::to_string(W.rows) + ")");
    }
    const auto src = W.row(static_cast<std::size_t>(idx[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return t.push(std::move(out), {table},
                [w = table.id, idx = std::move(idx)](Tape& t, std::size_t self) {
                  const Tensor& g = t.grad_at(self);
                  Tensor& gw = t.grad_buffer(w);
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    auto dst = gw.row(static_cast<std::size_t>(idx[i]));
                    const auto src = g.row(i);
                    for (std::size_t j = 0; j < g.cols; ++j) dst[j] += src[j];
                  }
                });
}

Var slice_cols(Var a, std::size_t start, std::size_t width) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (start + width > A.cols) throw Error("slice_cols: range exceeds columns");
  Tensor out(A.rows, width);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = 0; j < width; ++j) out(i, j) = A(i, start + j);
  }
  return t.push(std::move(out), {a}, [a = a.id, start](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) ga(i, start + j) += g(i, j);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const std::size_t rows = t.value(parts[0]).rows;
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (t.value(p).rows != rows) throw Error("concat_cols: row mismatch");
    cols += t.value(p).cols;
  }
  Tensor out(rows, cols);
  std::vector<std::pair<std::size_t, std::size_t>> layout;  // (id, column offset)
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = t.value(p);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < P.cols; ++j) out(i, off + j) = P(i, j);
    }
    layout.emplace_back(p.id, off);
    off += P.cols;
  }
  return t.push(std::move(out), parts, [layout = std::move(layout)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    for (const auto& [id, off] : layout) {
      if (!t.needs_grad_at(id)) continue;
      Tensor& gp = t.grad_buffer(id);
      for (std::size_t i = 0; i < gp.rows; ++i) {
        for (std::size_t j = 0; j < gp.cols; ++j) gp(i, j) += g(i, off + j);
      }
    }
  });
}

Var causal_softmax(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  if (A.rows != A.cols) throw Error("causal_softmax: matrix must be square");
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    double m = A(i, 0);
    for (std::size_t j = 1; j <= i; ++j) m = std::max(m, A(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      out(i, j) = std::exp(A(i, j) - m);
      s += out(i, j);
    }
    for (std::size_t j = 0; j <= i; ++j) out(i, j) /= s;
  }
  return t.push(std::move(out), {a}, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& P = t.value_at(self);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j <= i; ++j) dot += P(i, j) * g(i, j);
      for (std::size_t j = 0; j <= i; ++j) ga(i, j) += P(i, j) * (g(i, j) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    const auto r = A.row(i);
    double m = r[0];
    for (double v : r) m = std::max(m, v);
    double s = 0.0;
    for (double v : r) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < A.cols; ++j) out(i, j) = r[j] - lse;
  }
  return t.push(std::move(out), {a}, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& L = t.value_at(self);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) gs += g(i, j);
      if (gs == 0.0) {
        for (std::size_t j = 0; j < g.cols; ++j) ga(i, j) += g(i, j);
        continue;
      }
      for (std::size_t j = 0; j < g.cols; ++j) ga(i, j) += g(i, j) - std::exp(L(i, j)) * gs;
    }
  });
}

Var pick_sum(Var a, std::span<const std::pair<std::size_t, std::size_t>> cells) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  double s = 0.0;
  for (const auto& [r, c] : cells) {
    if (r >= A.rows || c >= A.cols) throw Error("pick_sum: cell out of range");
    s += A(r, c);
  }
  std::vector<std::pair<std::size_t, std::size_t>> keep(cells.begin(), cells.end());
  return t.push(Tensor::scalar(s), {a},
                [a = a.id, keep = std::move(keep)](Tape& t, std::size_t self) {
                  const double g = t.grad_at(self).data[0];
                  Tensor& ga = t.grad_buffer(a);
                  for (const auto& [r, c] : keep) ga(r, c) += g;
                });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double v : t.value(a).data) s += v;
  return t.push(Tensor::scalar(s), {a}, [a = a.id](Tape& t, std::size_t self) {
    const double g = t.grad_at(self).data[0];
    for (double& v : t.grad_buffer(a).data) v += g;
  });
}

Var add_n(std::span<const Var> parts) {
  if (parts.empty()) throw Error("add_n: no inputs");
  Tape& t = *parts[0].tape;
  Tensor out = t.value(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const Tensor& P = t.value(parts[k]);
    require_shape(P.same_shape(out), "add_n", out, P);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += P.data[i];
  }
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) ids.push_back(p.id);
  return t.push(std::move(out), parts, [ids = std::move(ids)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    for (std::size_t id : ids) {
      if (!t.needs_grad_at(id)) continue;
      Tensor& gi = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] += g.data[i];
    }
  });
}

Var mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw Error("mean: no inputs");
  return scale(add_n(scalars), 1.0 / static_cast<double>(scalars.size()));
}

namespace {

template <class F, class D>
Var elementwise(Var a, F f, D df) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.size(); ++i) out.data[i] = f(A.data[i]);
  return t.push(std::move(out), {a}, [a = a.id, df](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_at(self);
    const Tensor& A = t.value_at(a);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * df(A.data[i]);
  });
}

}  // namespace

Var log_sigmoid(Var a) {
  return elementwise(
      a,
      [](double x) { return log_sigmoid(x); }, [](double x) { return sigmoid(-x); });
}

Var sigmoid(Var a) {
  return elementwise(a, [](double x) { return sigmoid(x); }, [](double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
  });
}

Var square(Var a) {
  return elementwise(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

// Subgradient 0 at the kink.
Var relu(Var a) {
  return elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

}  // namespace prefalign::numerics
