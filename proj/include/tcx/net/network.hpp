#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tcx/autograd/array.hpp"
#include "tcx/autograd/ops.hpp"
#include "tcx/autograd/tape.hpp"

namespace tcx::net {

using ag::Array;
using ag::ConfigError;
using ag::Shape;
using ag::Tape;
using ag::Var;

struct NetConfig {
    std::size_t heads = 4;
    std::size_t c_base = 16;
    std::size_t levels = 4;
    std::size_t kernel = 3;
    std::size_t groups = 4;
    std::size_t C = 16;         // control columns
    std::size_t features = 9;   // input channels per column
    std::uint64_t seed = 0;
    double gn_eps = 1e-5;

    /// Sequence length seen by the U-net: C rounded up to a multiple of 2^levels.
    [[nodiscard]] std::size_t padded_length() const {
        const std::size_t q = std::size_t{1} << levels;
        return ((C + q - 1) / q) * q;
    }

    void validate() const {
        if (heads == 0 || c_base == 0 || C == 0 || features == 0) throw ConfigError("net: zero-sized dimension");
        if (c_base % heads != 0) throw ConfigError("net: c_base must be divisible by the head count");
        if (groups == 0 || c_base % groups != 0) throw ConfigError("net: c_base must be divisible by the group count");
        if (kernel % 2 == 0) throw ConfigError("net: kernel width must be odd");
        if (levels == 0 || levels > 16) throw ConfigError("net: levels must be in [1, 16]");
        if (!(gn_eps > 0.0)) throw ConfigError("net: group-norm epsilon must be positive");
    }
};

/// Tape handles of one forward pass.
struct Forward {
    Var F;    // [B, C, 1] learned correction per column
    Var res;  // [B, Lpad, c_base] residual carried to the previous time step
    std::vector<Var> bound;  // parameters in store order
};

/// Self-attention over control columns, a converging-diverging 1-D U-net over
/// the padded column axis, a linear carry of the previous step's features and
/// a zero-initialized one-channel head.
class ValueNet {
public:
    explicit ValueNet(NetConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build();
    }

    [[nodiscard]] const NetConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] std::vector<std::pair<std::string, Array>>& params() noexcept { return params_; }
    [[nodiscard]] const std::vector<std::pair<std::string, Array>>& params() const noexcept { return params_; }

    Array& param(const std::string& name) { return params_.at(index_.at(name)).second; }
    [[nodiscard]] const Array& param(const std::string& name) const { return params_.at(index_.at(name)).second; }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [_, a] : params_) n += a.size();
        return n;
    }

    /// Parameters of the convolution and transposed-convolution layers only.
    [[nodiscard]] std::size_t conv_parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, a] : params_)
            if ((name.rfind("down", 0) == 0 || name.rfind("up", 0) == 0) && name.find(".gn.") == std::string::npos)
                n += a.size();
        return n;
    }

    /// X is [B, C, features]; res_prev is [B, Lpad, c_base] or null at the
    /// terminal step. It always enters as a constant.
    Forward forward(Tape& t, const Array& X, const Array* res_prev, bool trainable) const {
        std::vector<Var> bound;
        for (const auto& [_, a] : params_) bound.push_back(trainable ? t.param(a) : t.constant(a));
        return forward_with(t, X, res_prev, bound);
    }

    /// Forward pass on caller-supplied parameter handles, one per store entry.
    Forward forward_with(Tape& t, const Array& X, const Array* res_prev, const std::vector<Var>& bound) const {
        if (X.rank() != 3 || X.dim(1) != cfg_.C || X.dim(2) != cfg_.features)
            throw ag::DimensionError("net: input " + ag::shape_str(X.shape()) + " for C=" + std::to_string(cfg_.C) +
                                     ", features=" + std::to_string(cfg_.features));
        const auto p = named(bound);
        Forward out;
        out.bound = bound;
        const Var xa = attend(t, p, t.constant(X));
        const Var u = unet(t, p, ag::resize_length(xa, cfg_.padded_length()));
        Var res = u;
        if (res_prev) {
            if (res_prev->shape() != t.value(u).shape())
                throw ag::DimensionError("net: residual " + ag::shape_str(res_prev->shape()));
            res = ag::add(u, ag::matmul(t.constant(*res_prev), p.at("res.w")));
        }
        out.res = res;
        out.F = ag::affine(ag::resize_length(res, cfg_.C), p.at("head.w"), p.at("head.b"));
        return out;
    }

    /// Map from parameter name to its handle.
    [[nodiscard]] std::map<std::string, Var> named(const std::vector<Var>& bound) const {
        if (bound.size() != params_.size()) throw ag::DimensionError("net: wrong number of bound parameters");
        std::map<std::string, Var> p;
        for (std::size_t j = 0; j < bound.size(); ++j) p.emplace(params_[j].first, bound[j]);
        return p;
    }

    /// Untaped evaluation: F as [B, C]; optionally returns the residual features.
    Array evaluate(const Array& X, const Array* res_prev, Array* res_out = nullptr) const {
        Tape t;
        const auto f = forward(t, X, res_prev, false);
        if (res_out) *res_out = t.value(f.res);
        return t.value(f.F).reshaped({X.dim(0), cfg_.C});
    }

    /// Multi-head attention mix M_H before the skip term and normalization.
    Var attention_heads(Tape& t, const std::map<std::string, Var>& p, Var x) const {
        const std::size_t L = t.value(x).dim(1);
        const double scale = 1.0 / std::sqrt(static_cast<double>(L));
        Var heads{};
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            const auto s = std::to_string(h);
            const Var q = ag::matmul(x, p.at("attn.q" + s));
            const Var k = ag::matmul(x, p.at("attn.k" + s));
            const Var v = ag::matmul(x, p.at("attn.v" + s));
            const Var a = ag::softmax(ag::scale(ag::bmm(q, ag::transpose12(k)), scale));
            const Var o = ag::bmm(a, v);
            heads = h == 0 ? o : ag::concat(heads, o);
        }
        return ag::matmul(heads, p.at("attn.o"));
    }

    /// X_a = GN(M_H + W_a X)
    Var attend(Tape& t, const std::map<std::string, Var>& p, Var x) const {
        const Var mixed = ag::add(attention_heads(t, p, x), ag::matmul(x, p.at("attn.a")));
        return ag::group_norm(mixed, p.at("attn.gn.gamma"), p.at("attn.gn.beta"), cfg_.groups, cfg_.gn_eps);
    }

    /// [B, L, c_base] -> [B, L, c_base]; L must halve `levels` times.
    Var unet(Tape& t, const std::map<std::string, Var>& p, Var x) const {
        const std::size_t pad = cfg_.kernel / 2;
        if (t.value(x).dim(1) % (std::size_t{1} << cfg_.levels) != 0)
            throw ConfigError("net: length " + std::to_string(t.value(x).dim(1)) + " does not halve " +
                              std::to_string(cfg_.levels) + " times");
        std::vector<Var> skips{x};
        for (std::size_t l = 0; l < cfg_.levels; ++l) {
            const auto pre = "down" + std::to_string(l);
            skips.push_back(norm_act(p, pre, ag::conv1d(skips.back(), p.at(pre + ".w"), p.at(pre + ".b"), 2, pad)));
        }
        Var u = skips.back();
        for (std::size_t j = 0; j < cfg_.levels; ++j) {
            const auto pre = "up" + std::to_string(j);
            u = norm_act(p, pre, ag::conv_transpose1d(u, p.at(pre + ".w"), p.at(pre + ".b"), 2, pad, 1));
            u = ag::concat(u, skips[cfg_.levels - 1 - j]);
        }
        return ag::affine(u, p.at("out.w"), p.at("out.b"));
    }

private:
    Var norm_act(const std::map<std::string, Var>& p, const std::string& pre, Var x) const {
        return ag::swish(ag::group_norm(x, p.at(pre + ".gn.gamma"), p.at(pre + ".gn.beta"), cfg_.groups, cfg_.gn_eps));
    }

    void add(const std::string& name, Shape shape, double bound) {
        Array a(std::move(shape));
        for (auto& v : a.values()) v = bound * (2.0 * uniform() - 1.0);
        index_[name] = params_.size();
        params_.emplace_back(name, std::move(a));
    }

    void add_const(const std::string& name, Shape shape, double value) {
        index_[name] = params_.size();
        params_.emplace_back(name, Array(std::move(shape), value));
    }

    void add_norm(const std::string& pre) {
        add_const(pre + ".gn.gamma", {cfg_.c_base}, 1.0);
        add_const(pre + ".gn.beta", {cfg_.c_base}, 0.0);
    }

    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    void build() {
        rng_.seed(cfg_.seed);
        const std::size_t F = cfg_.features, D = cfg_.c_base, dh = D / cfg_.heads, K = cfg_.kernel;
        const auto inv = [](std::size_t fan) { return 1.0 / std::sqrt(static_cast<double>(fan)); };
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            const auto s = std::to_string(h);
            add("attn.q" + s, {F, dh}, inv(F));
            add("attn.k" + s, {F, dh}, inv(F));
            add("attn.v" + s, {F, dh}, inv(F));
        }
        add("attn.o", {D, D}, inv(D));
        add("attn.a", {F, D}, inv(F));
        add_norm("attn");
        for (std::size_t l = 0; l < cfg_.levels; ++l) {
            const auto pre = "down" + std::to_string(l);
            add(pre + ".w", {K, D, D}, inv(K * D));
            add(pre + ".b", {D}, inv(K * D));
            add_norm(pre);
        }
        for (std::size_t j = 0; j < cfg_.levels; ++j) {
            const auto pre = "up" + std::to_string(j);
            const std::size_t cin = j == 0 ? D : 2 * D;
            add(pre + ".w", {K, cin, D}, inv(K * cin));
            add(pre + ".b", {D}, inv(K * cin));
            add_norm(pre);
        }
        add("out.w", {2 * D, D}, inv(2 * D));
        add("out.b", {D}, inv(2 * D));
        add("res.w", {D, D}, inv(D));
        add_const("head.w", {D, 1}, 0.0);
        add_const("head.b", {1}, 0.0);
    }

    NetConfig cfg_;
    std::vector<std::pair<std::string, Array>> params_;
    std::map<std::string, std::size_t> index_;
    std::mt19937_64 rng_;
};

/// Û[m, c] = U^{n+1}[m, c] + F[m, c]
inline std::vector<double> approximate_value(const std::vector<double>& u_next, const Array& F) {
    if (u_next.size() != F.size()) throw ag::DimensionError("approximate_value: size mismatch");
    std::vector<double> u(u_next);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += F[i];
    return u;
}

/// Squared-residual loss of one slice. With Û = U^{n+1} + F the residual
/// U^{n+1} - (Û - fΔt + Z) reduces to target - F, where target = fΔt - Z is
/// held fixed. F is [B, C, 1] and target has B*C entries.
inline Var correction_loss(Tape& t, Var F, const Array& target) {
    const Var r = ag::sub(t.constant(target.reshaped(t.value(F).shape())), F);
    return ag::mean(ag::mul(r, r));
}

}  // namespace tcx::net
