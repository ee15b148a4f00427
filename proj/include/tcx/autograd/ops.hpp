#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <string>

#include "tcx/autograd/array.hpp"
#include "tcx/autograd/tape.hpp"

// Differentiable primitives. Sequence tensors use the layout [batch, length,
// channels]; "last axis" operations treat every leading index as a row.

namespace tcx::ag {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

inline void same_shape(const Array& a, const Array& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
}

inline std::size_t rows_of(const Array& a) { return a.size() / a.last(); }

inline Shape with_last(Shape s, std::size_t last) {
    s.back() = last;
    return s;
}

inline void require_seq(const Array& a, const char* op) {
    require(a.rank() == 3, std::string(op) + ": expected [batch,length,channels], got " + shape_str(a.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

inline Var add(Var a, Var b) {
    Tape& t = *a.tape;
    detail::same_shape(t.value(a), t.value(b), "add");
    Array y = t.value(a);
    y += t.value(b);
    return t.record(std::move(y), {a, b}, [&t, a, b](const Array& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

inline Var sub(Var a, Var b) {
    Tape& t = *a.tape;
    detail::same_shape(t.value(a), t.value(b), "sub");
    Array y = t.value(a);
    const Array& bv = t.value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    return t.record(std::move(y), {a, b}, [&t, a, b](const Array& g) {
        t.accumulate(a, g);
        if (double* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
}

inline Var mul(Var a, Var b) {
    Tape& t = *a.tape;
    detail::same_shape(t.value(a), t.value(b), "mul");
    const Array& av = t.value(a);
    const Array& bv = t.value(b);
    Array y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    return t.record(std::move(y), {a, b}, [&t, a, b](const Array& g) {
        const Array& av = t.value(a);
        const Array& bv = t.value(b);
        if (double* ga = t.grad_buffer(a))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        if (double* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    });
}

inline Var scale(Var a, double s) {
    Tape& t = *a.tape;
    Array y = t.value(a);
    for (auto& v : y.values()) v *= s;
    return t.record(std::move(y), {a}, [&t, a, s](const Array& g) {
        if (double* ga = t.grad_buffer(a))
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
    });
}

/// x * sigmoid(x)
inline Var swish(Var a) {
    Tape& t = *a.tape;
    const Array& x = t.value(a);
    Array y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] / (1.0 + std::exp(-x[i]));
    return t.record(std::move(y), {a}, [&t, a](const Array& g) {
        const Array& x = t.value(a);
        if (double* ga = t.grad_buffer(a))
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-x[i]));
                ga[i] += g[i] * (s + x[i] * s * (1.0 - s));
            }
    });
}

// ----------------------------------------------------------------- reductions

inline Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double v : t.value(a).values()) s += v;
    return t.record(Array::scalar(s), {a}, [&t, a](const Array& g) {
        if (double* ga = t.grad_buffer(a))
            for (std::size_t i = 0, n = t.value(a).size(); i < n; ++i) ga[i] += g[0];
    });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.tape->value(a).size())); }

// -------------------------------------------------------------- linear algebra

/// x[..., P] @ w[P, Q] -> [..., Q]
inline Var matmul(Var x, Var w) {
    Tape& t = *x.tape;
    const Array& xv = t.value(x);
    const Array& wv = t.value(w);
    detail::require(wv.rank() == 2 && wv.dim(0) == xv.last(),
                    "matmul: " + shape_str(xv.shape()) + " @ " + shape_str(wv.shape()));
    const auto r = detail::rows_of(xv), p = wv.dim(0), q = wv.dim(1);
    Array y(detail::with_last(xv.shape(), q));
    detail::MapM(y.data(), r, q).noalias() = detail::CMapM(xv.data(), r, p) * detail::CMapM(wv.data(), p, q);
    return t.record(std::move(y), {x, w}, [&t, x, w, r, p, q](const Array& g) {
        detail::CMapM G(g.data(), r, q);
        if (double* gx = t.grad_buffer(x))
            detail::MapM(gx, r, p).noalias() += G * detail::CMapM(t.value(w).data(), p, q).transpose();
        if (double* gw = t.grad_buffer(w))
            detail::MapM(gw, p, q).noalias() += detail::CMapM(t.value(x).data(), r, p).transpose() * G;
    });
}

/// x[..., Q] + b[Q]
inline Var add_bias(Var x, Var b) {
    Tape& t = *x.tape;
    const Array& xv = t.value(x);
    const Array& bv = t.value(b);
    detail::require(bv.rank() == 1 && bv.dim(0) == xv.last(), "add_bias: bias " + shape_str(bv.shape()) +
                                                                   " for input " + shape_str(xv.shape()));
    Array y = xv;
    const auto q = xv.last();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % q];
    return t.record(std::move(y), {x, b}, [&t, x, b, q](const Array& g) {
        t.accumulate(x, g);
        if (double* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i % q] += g[i];
    });
}

/// Affine map over the last axis.
inline Var affine(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

/// Batched product a[B, L, P] @ b[B, P, Q] -> [B, L, Q]
inline Var bmm(Var a, Var b) {
    Tape& t = *a.tape;
    const Array& av = t.value(a);
    const Array& bv = t.value(b);
    detail::require(av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0) && av.dim(2) == bv.dim(1),
                    "bmm: " + shape_str(av.shape()) + " @ " + shape_str(bv.shape()));
    const auto B = av.dim(0), L = av.dim(1), P = av.dim(2), Q = bv.dim(2);
    Array y(Shape{B, L, Q});
    for (std::size_t i = 0; i < B; ++i)
        detail::MapM(y.data() + i * L * Q, L, Q).noalias() =
            detail::CMapM(av.data() + i * L * P, L, P) * detail::CMapM(bv.data() + i * P * Q, P, Q);
    return t.record(std::move(y), {a, b}, [&t, a, b, B, L, P, Q](const Array& g) {
        double* ga = t.grad_buffer(a);
        double* gb = t.grad_buffer(b);
        for (std::size_t i = 0; i < B; ++i) {
            detail::CMapM G(g.data() + i * L * Q, L, Q);
            if (ga)
                detail::MapM(ga + i * L * P, L, P).noalias() +=
                    G * detail::CMapM(t.value(b).data() + i * P * Q, P, Q).transpose();
            if (gb)
                detail::MapM(gb + i * P * Q, P, Q).noalias() +=
                    detail::CMapM(t.value(a).data() + i * L * P, L, P).transpose() * G;
        }
    });
}

/// [B, L, P] -> [B, P, L]
inline Var transpose12(Var a) {
    Tape& t = *a.tape;
    const Array& av = t.value(a);
    detail::require(av.rank() == 3, "transpose12: rank " + std::to_string(av.rank()));
    const auto B = av.dim(0), L = av.dim(1), P = av.dim(2);
    Array y(Shape{B, P, L});
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t p = 0; p < P; ++p) y[(i * P + p) * L + l] = av[(i * L + l) * P + p];
    return t.record(std::move(y), {a}, [&t, a, B, L, P](const Array& g) {
        if (double* ga = t.grad_buffer(a))
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t l = 0; l < L; ++l)
                    for (std::size_t p = 0; p < P; ++p) ga[(i * L + l) * P + p] += g[(i * P + p) * L + l];
    });
}

// ------------------------------------------------------------------ softmax

inline Var softmax(Var a) {
    Tape& t = *a.tape;
    const Array& x = t.value(a);
    const auto n = x.last(), r = detail::rows_of(x);
    Array y(x.shape());
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = x.data() + i * n;
        double* yi = y.data() + i * n;
        double mx = xi[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += (yi[j] = std::exp(xi[j] - mx));
        for (std::size_t j = 0; j < n; ++j) yi[j] /= s;
    }
    Array yc = y;
    return t.record(std::move(y), {a}, [&t, a, yc = std::move(yc), n, r](const Array& g) {
        double* ga = t.grad_buffer(a);
        if (!ga) return;
        for (std::size_t i = 0; i < r; ++i) {
            const double* yi = yc.data() + i * n;
            const double* gi = g.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += yi[j] * (gi[j] - dot);
        }
    });
}

// ------------------------------------------------------------ channel plumbing

/// Concatenate along the last axis.
inline Var concat(Var a, Var b) {
    Tape& t = *a.tape;
    const Array& av = t.value(a);
    const Array& bv = t.value(b);
    detail::require(av.rank() == bv.rank() && detail::rows_of(av) == detail::rows_of(bv),
                    "concat: " + shape_str(av.shape()) + " with " + shape_str(bv.shape()));
    for (std::size_t i = 0; i + 1 < av.rank(); ++i)
        detail::require(av.dim(i) == bv.dim(i), "concat: leading extents differ");
    const auto p = av.last(), q = bv.last(), r = detail::rows_of(av);
    Array y(detail::with_last(av.shape(), p + q));
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(av.data() + i * p, p, y.data() + i * (p + q));
        std::copy_n(bv.data() + i * q, q, y.data() + i * (p + q) + p);
    }
    return t.record(std::move(y), {a, b}, [&t, a, b, p, q, r](const Array& g) {
        double* ga = t.grad_buffer(a);
        double* gb = t.grad_buffer(b);
        for (std::size_t i = 0; i < r; ++i) {
            if (ga)
                for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += g[i * (p + q) + j];
            if (gb)
                for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += g[i * (p + q) + p + j];
        }
    });
}

/// Channels [start, start+len) of the last axis.
inline Var slice_last(Var a, std::size_t start, std::size_t len) {
    Tape& t = *a.tape;
    const Array& av = t.value(a);
    const auto p = av.last(), r = detail::rows_of(av);
    detail::require(len > 0 && start + len <= p, "slice_last: out of range");
    Array y(detail::with_last(av.shape(), len));
    for (std::size_t i = 0; i < r; ++i) std::copy_n(av.data() + i * p + start, len, y.data() + i * len);
    return t.record(std::move(y), {a}, [&t, a, start, len, p, r](const Array& g) {
        if (double* ga = t.grad_buffer(a))
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < len; ++j) ga[i * p + start + j] += g[i * len + j];
    });
}

/// Resize the length axis of [B, L, C]: zero-pad when growing, truncate when shrinking.
inline Var resize_length(Var a, std::size_t new_len) {
    Tape& t = *a.tape;
    const Array& av = t.value(a);
    detail::require_seq(av, "resize_length");
    const auto B = av.dim(0), L = av.dim(1), C = av.dim(2), keep = std::min(L, new_len);
    Array y(Shape{B, new_len, C});
    for (std::size_t b = 0; b < B; ++b) std::copy_n(av.data() + b * L * C, keep * C, y.data() + b * new_len * C);
    return t.record(std::move(y), {a}, [&t, a, B, L, C, keep, new_len](const Array& g) {
        if (double* ga = t.grad_buffer(a))
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t j = 0; j < keep * C; ++j) ga[b * L * C + j] += g[b * new_len * C + j];
    });
}

// -------------------------------------------------------------- convolutions

inline std::size_t conv_out_len(std::size_t L, std::size_t K, std::size_t stride, std::size_t pad) {
    if (stride == 0) throw ConfigError("conv1d: stride must be positive");
    if (L + 2 * pad < K) throw DimensionError("conv1d: kernel wider than padded input");
    return (L + 2 * pad - K) / stride + 1;
}

inline std::size_t conv_transpose_out_len(std::size_t L, std::size_t K, std::size_t stride, std::size_t pad,
                                          std::size_t out_pad) {
    if (stride == 0) throw ConfigError("conv_transpose1d: stride must be positive");
    if (out_pad >= stride) throw ConfigError("conv_transpose1d: output padding must be below stride");
    const long n = static_cast<long>((L - 1) * stride + K + out_pad) - 2 * static_cast<long>(pad);
    if (n <= 0) throw DimensionError("conv_transpose1d: empty output");
    return static_cast<std::size_t>(n);
}

/// 1-D convolution over the length axis.
/// x[B, L, Cin], w[K, Cin, Cout], b[Cout] -> [B, Lout, Cout]
inline Var conv1d(Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
    Tape& t = *x.tape;
    const Array& xv = t.value(x);
    const Array& wv = t.value(w);
    detail::require_seq(xv, "conv1d");
    detail::require(wv.rank() == 3 && wv.dim(1) == xv.dim(2), "conv1d: weight " + shape_str(wv.shape()) +
                                                                   " for input " + shape_str(xv.shape()));
    detail::require(t.value(b).size() == wv.dim(2), "conv1d: bias extent");
    const auto B = xv.dim(0), L = xv.dim(1), Ci = xv.dim(2), K = wv.dim(0), Co = wv.dim(2);
    const auto Lo = conv_out_len(L, K, stride, pad);
    // gather rows: for tap k, output o reads input o*stride + k - pad
    auto src = [=](std::size_t o, std::size_t k) -> long {
        const long i = static_cast<long>(o * stride + k) - static_cast<long>(pad);
        return (i >= 0 && i < static_cast<long>(L)) ? i : -1;
    };
    Array y(Shape{B, Lo, Co});
    detail::MapM Y(y.data(), B * Lo, Co);
    detail::RowMat Xk(B * Lo, Ci);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t bb = 0; bb < B; ++bb)
            for (std::size_t o = 0; o < Lo; ++o) {
                const long i = src(o, k);
                if (i < 0) Xk.row(bb * Lo + o).setZero();
                else Xk.row(bb * Lo + o) = detail::CMapM(xv.data() + (bb * L + i) * Ci, 1, Ci);
            }
        Y.noalias() += Xk * detail::CMapM(wv.data() + k * Ci * Co, Ci, Co);
    }
    const Array& bv = t.value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % Co];
    return t.record(std::move(y), {x, w, b}, [&t, x, w, b, B, L, Ci, K, Co, Lo, src](const Array& g) {
        const Array& xv = t.value(x);
        const Array& wv = t.value(w);
        detail::CMapM G(g.data(), B * Lo, Co);
        double* gx = t.grad_buffer(x);
        double* gw = t.grad_buffer(w);
        detail::RowMat Xk(B * Lo, Ci), dXk;
        for (std::size_t k = 0; k < K; ++k) {
            detail::CMapM Wk(wv.data() + k * Ci * Co, Ci, Co);
            if (gw) {
                for (std::size_t bb = 0; bb < B; ++bb)
                    for (std::size_t o = 0; o < Lo; ++o) {
                        const long i = src(o, k);
                        if (i < 0) Xk.row(bb * Lo + o).setZero();
                        else Xk.row(bb * Lo + o) = detail::CMapM(xv.data() + (bb * L + i) * Ci, 1, Ci);
                    }
                detail::MapM(gw + k * Ci * Co, Ci, Co).noalias() += Xk.transpose() * G;
            }
            if (gx) {
                dXk.noalias() = G * Wk.transpose();
                for (std::size_t bb = 0; bb < B; ++bb)
                    for (std::size_t o = 0; o < Lo; ++o) {
                        const long i = src(o, k);
                        if (i >= 0) detail::MapM(gx + (bb * L + i) * Ci, 1, Ci) += dXk.row(bb * Lo + o);
                    }
            }
        }
        if (double* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i % Co] += g[i];
    });
}

/// Transposed 1-D convolution (the adjoint of conv1d's spatial map).
/// x[B, L, Cin], w[K, Cin, Cout], b[Cout] -> [B, Lout, Cout]
inline Var conv_transpose1d(Var x, Var w, Var b, std::size_t stride, std::size_t pad, std::size_t out_pad) {
    Tape& t = *x.tape;
    const Array& xv = t.value(x);
    const Array& wv = t.value(w);
    detail::require_seq(xv, "conv_transpose1d");
    detail::require(wv.rank() == 3 && wv.dim(1) == xv.dim(2), "conv_transpose1d: weight " +
                                                                   shape_str(wv.shape()) + " for input " +
                                                                   shape_str(xv.shape()));
    detail::require(t.value(b).size() == wv.dim(2), "conv_transpose1d: bias extent");
    const auto B = xv.dim(0), L = xv.dim(1), Ci = xv.dim(2), K = wv.dim(0), Co = wv.dim(2);
    const auto Lo = conv_transpose_out_len(L, K, stride, pad, out_pad);
    // input i scatters through tap k into output i*stride + k - pad
    auto dst = [=](std::size_t i, std::size_t k) -> long {
        const long o = static_cast<long>(i * stride + k) - static_cast<long>(pad);
        return (o >= 0 && o < static_cast<long>(Lo)) ? o : -1;
    };
    Array y(Shape{B, Lo, Co});
    detail::CMapM X(xv.data(), B * L, Ci);
    detail::RowMat Zk;
    for (std::size_t k = 0; k < K; ++k) {
        Zk.noalias() = X * detail::CMapM(wv.data() + k * Ci * Co, Ci, Co);
        for (std::size_t bb = 0; bb < B; ++bb)
            for (std::size_t i = 0; i < L; ++i) {
                const long o = dst(i, k);
                if (o >= 0) detail::MapM(y.data() + (bb * Lo + o) * Co, 1, Co) += Zk.row(bb * L + i);
            }
    }
    const Array& bv = t.value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % Co];
    return t.record(std::move(y), {x, w, b}, [&t, x, w, b, B, L, Ci, K, Co, Lo, dst](const Array& g) {
        const Array& xv = t.value(x);
        const Array& wv = t.value(w);
        double* gx = t.grad_buffer(x);
        double* gw = t.grad_buffer(w);
        detail::RowMat Gk(B * L, Co);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t bb = 0; bb < B; ++bb)
                for (std::size_t i = 0; i < L; ++i) {
                    const long o = dst(i, k);
                    if (o < 0) Gk.row(bb * L + i).setZero();
                    else Gk.row(bb * L + i) = detail::CMapM(g.data() + (bb * Lo + o) * Co, 1, Co);
                }
            detail::CMapM Wk(wv.data() + k * Ci * Co, Ci, Co);
            if (gx) detail::MapM(gx, B * L, Ci).noalias() += Gk * Wk.transpose();
            if (gw)
                detail::MapM(gw + k * Ci * Co, Ci, Co).noalias() +=
                    detail::CMapM(xv.data(), B * L, Ci).transpose() * Gk;
        }
        if (double* gb = t.grad_buffer(b))
            for (std::size_t i = 0; i < g.size(); ++i) gb[i % Co] += g[i];
    });
}

// ------------------------------------------------------------ group norm

/// Group normalization of x[B, L, C]: statistics per (batch, channel group) over
/// the length axis and the group's channels (population variance), then the
/// per-channel affine map gamma * xhat + beta.
inline Var group_norm(Var x, Var gamma, Var beta, std::size_t groups, double eps) {
    Tape& t = *x.tape;
    const Array& xv = t.value(x);
    detail::require_seq(xv, "group_norm");
    const auto B = xv.dim(0), L = xv.dim(1), C = xv.dim(2);
    if (groups == 0 || C % groups != 0)
        throw ConfigError("group_norm: " + std::to_string(groups) + " groups do not divide " +
                          std::to_string(C) + " channels");
    detail::require(t.value(gamma).size() == C && t.value(beta).size() == C, "group_norm: affine extent");
    const auto cg = C / groups;
    const double n = static_cast<double>(L * cg);
    Array xhat(xv.shape());
    std::vector<double> inv_std(B * groups);
    for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t gi = 0; gi < groups; ++gi) {
            double mu = 0.0, var = 0.0;
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t c = gi * cg; c < (gi + 1) * cg; ++c) mu += xv[(bb * L + l) * C + c];
            mu /= n;
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t c = gi * cg; c < (gi + 1) * cg; ++c) {
                    const double d = xv[(bb * L + l) * C + c] - mu;
                    var += d * d;
                }
            var /= n;
            if (var + eps <= 0.0) throw NumericError("group_norm: zero variance with eps = 0");
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[bb * groups + gi] = is;
            for (std::size_t l = 0; l < L; ++l)
                for (std::size_t c = gi * cg; c < (gi + 1) * cg; ++c) {
                    const auto idx = (bb * L + l) * C + c;
                    xhat[idx] = (xv[idx] - mu) * is;
                }
        }
    const Array& gv = t.value(gamma);
    const Array& bv = t.value(beta);
    Array y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = gv[i % C] * xhat[i] + bv[i % C];
    return t.record(std::move(y), {x, gamma, beta},
                    [&t, x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), B, L, C, cg,
                     groups, n](const Array& g) {
                        const Array& gv = t.value(gamma);
                        if (double* gg = t.grad_buffer(gamma))
                            for (std::size_t i = 0; i < g.size(); ++i) gg[i % C] += g[i] * xhat[i];
                        if (double* gb = t.grad_buffer(beta))
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i % C] += g[i];
                        double* gx = t.grad_buffer(x);
                        if (!gx) return;
                        for (std::size_t bb = 0; bb < B; ++bb)
                            for (std::size_t gi = 0; gi < groups; ++gi) {
                                double s1 = 0.0, s2 = 0.0;
                                for (std::size_t l = 0; l < L; ++l)
                                    for (std::size_t c = gi * cg; c < (gi + 1) * cg; ++c) {
                                        const auto idx = (bb * L + l) * C + c;
                                        const double dxh = g[idx] * gv[c];
                                        s1 += dxh;
                                        s2 += dxh * xhat[idx];
                                    }
                                const double is = inv_std[bb * groups + gi];
                                for (std::size_t l = 0; l < L; ++l)
                                    for (std::size_t c = gi * cg; c < (gi + 1) * cg; ++c) {
                                        const auto idx = (bb * L + l) * C + c;
                                        const double dxh = g[idx] * gv[c];
                                        gx[idx] += is * (dxh - s1 / n - xhat[idx] * s2 / n);
                                    }
                            }
                    });
}

}  // namespace tcx::ag
