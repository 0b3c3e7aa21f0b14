#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "idstr/errors.hpp"
#include "idstr/log_math.hpp"
#include "idstr/trellis.hpp"

namespace idstr {

/// Per-message-symbol distributions U_l(m), rows summing to 1.
class PosteriorTable {
public:
    PosteriorTable() = default;
    PosteriorTable(int length, int alphabet_size)
        : length_(length), alphabet_(alphabet_size),
          probs_(static_cast<std::size_t>(length) * static_cast<std::size_t>(alphabet_size), 0.0) {}

    [[nodiscard]] int length() const noexcept { return length_; }
    [[nodiscard]] int alphabet_size() const noexcept { return alphabet_; }
    [[nodiscard]] std::span<double> row(int l) {
        return std::span<double>(probs_).subspan(static_cast<std::size_t>(l) * static_cast<std::size_t>(alphabet_),
                                                 static_cast<std::size_t>(alphabet_));
    }
    [[nodiscard]] std::span<const double> row(int l) const {
        return std::span<const double>(probs_).subspan(static_cast<std::size_t>(l) * static_cast<std::size_t>(alphabet_),
                                                       static_cast<std::size_t>(alphabet_));
    }
    [[nodiscard]] double at(int l, int m) const { return row(l)[static_cast<std::size_t>(m)]; }

    /// Most probable symbol at l; ties go to the lowest index.
    [[nodiscard]] Symbol argmax(int l) const {
        auto r = row(l);
        std::size_t best = 0;
        for (std::size_t m = 1; m < r.size(); ++m)
            if (r[m] > r[best]) best = m;
        return static_cast<Symbol>(best);
    }

    [[nodiscard]] Sequence hard_estimate() const {
        Sequence s(static_cast<std::size_t>(length_));
        for (int l = 0; l < length_; ++l) s[static_cast<std::size_t>(l)] = argmax(l);
        return s;
    }

    /// Sets row l from log-domain scores; returns false if every score is -inf.
    bool set_from_logs(int l, std::span<const double> logs) { return normalize_log(logs, row(l)); }

    /// Delta distributions on `s`.
    static PosteriorTable delta(const Sequence& s, int alphabet_size) {
        PosteriorTable t(static_cast<int>(s.size()), alphabet_size);
        for (std::size_t l = 0; l < s.size(); ++l) t.row(static_cast<int>(l))[s[l]] = 1.0;
        return t;
    }

private:
    int length_ = 0;
    int alphabet_ = 0;
    std::vector<double> probs_;
};

/// Log-domain forward values F(v) and backward values B(v).
struct ForwardBackward {
    std::vector<double> forward;
    std::vector<double> backward;
};

/// Recomputes F for vertices [first, end) from their in-edges. The origin keeps F = 0 (log 1).
inline void forward_range(const Trellis& tr, std::span<double> F, int first, int end, std::uint64_t* edge_visits = nullptr) {
    const auto heads = tr.heads();
    const auto logw = tr.log_weights();
    const auto in = tr.in_offsets();
    std::uint64_t visits = 0;
    for (int v = first; v < end; ++v) {
        const auto b = static_cast<std::size_t>(in[static_cast<std::size_t>(v)]);
        const auto e = static_cast<std::size_t>(in[static_cast<std::size_t>(v) + 1]);
        if (v == tr.origin()) {
            F[static_cast<std::size_t>(v)] = 0.0;
            continue;
        }
        visits += e - b;
        double hi = kLogZero;
        for (std::size_t i = b; i < e; ++i) hi = std::max(hi, F[static_cast<std::size_t>(heads[i])] + logw[i]);
        if (hi == kLogZero) {
            F[static_cast<std::size_t>(v)] = kLogZero;
            continue;
        }
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) acc += std::exp(F[static_cast<std::size_t>(heads[i])] + logw[i] - hi);
        F[static_cast<std::size_t>(v)] = hi + std::log(acc);
    }
    if (edge_visits) *edge_visits += visits;
}

/// Recomputes B for vertices [first, end) in reverse order from their out-edges.
/// Absorbing vertices get B = 0 (log 1); other vertices without out-edges get -inf.
inline void backward_range(const Trellis& tr, std::span<double> B, int first, int end, std::uint64_t* edge_visits = nullptr) {
    const auto tails = tr.tails();
    const auto logw = tr.log_weights();
    const auto out = tr.out_offsets();
    const auto ids = tr.out_ids();
    std::uint64_t visits = 0;
    for (int v = end - 1; v >= first; --v) {
        const auto b = static_cast<std::size_t>(out[static_cast<std::size_t>(v)]);
        const auto e = static_cast<std::size_t>(out[static_cast<std::size_t>(v) + 1]);
        if (b == e) {
            B[static_cast<std::size_t>(v)] = tr.is_absorbing(v) ? 0.0 : kLogZero;
            continue;
        }
        visits += e - b;
        double hi = kLogZero;
        for (std::size_t i = b; i < e; ++i) {
            const auto id = static_cast<std::size_t>(ids[i]);
            hi = std::max(hi, B[static_cast<std::size_t>(tails[id])] + logw[id]);
        }
        if (hi == kLogZero) {
            B[static_cast<std::size_t>(v)] = kLogZero;
            continue;
        }
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            const auto id = static_cast<std::size_t>(ids[i]);
            acc += std::exp(B[static_cast<std::size_t>(tails[id])] + logw[id] - hi);
        }
        B[static_cast<std::size_t>(v)] = hi + std::log(acc);
    }
    if (edge_visits) *edge_visits += visits;
}

/// F(v) = sum over in-edges of w(e) F(head(e)), F(origin) = 1; one sweep in topological order.
inline std::vector<double> forward_pass(const Trellis& tr, std::uint64_t* edge_visits = nullptr) {
    std::vector<double> F(static_cast<std::size_t>(tr.vertex_count()), kLogZero);
    forward_range(tr, F, 0, tr.vertex_count(), edge_visits);
    return F;
}

/// B(v) = sum over out-edges of w(e) B(tail(e)), B = 1 on absorbing vertices.
inline std::vector<double> backward_pass(const Trellis& tr, std::uint64_t* edge_visits = nullptr) {
    std::vector<double> B(static_cast<std::size_t>(tr.vertex_count()), kLogZero);
    backward_range(tr, B, 0, tr.vertex_count(), edge_visits);
    return B;
}

inline ForwardBackward forward_backward(const Trellis& tr) { return {forward_pass(tr), backward_pass(tr)}; }

/// log Pr(v on the path, Y^{1:K} = y^{1:K}) = log F(v) + log B(v).
inline double vertex_posterior(const Trellis& tr, std::span<const double> F, std::span<const double> B, int v) {
    if (v < 0 || v >= tr.vertex_count()) throw std::out_of_range("vertex id out of range");
    const double f = F[static_cast<std::size_t>(v)];
    const double b = B[static_cast<std::size_t>(v)];
    if (f == kLogZero || b == kLogZero) return kLogZero;
    return f + b;
}

/// log sum over absorbing vertices of F.
inline double sequence_log_likelihood(const Trellis& tr, std::span<const double> F) {
    double acc = kLogZero;
    for (int v : tr.absorbing()) acc = log_add(acc, F[static_cast<std::size_t>(v)]);
    return acc;
}

/// Per message symbol m: log sum over stage-t vertices holding m of primary(v) * secondary(v)^beta.
/// Used with (F, B) for forward-side beliefs and (B, F) for backward-side beliefs.
inline void stage_message_scores(const Trellis& tr, int stage, std::span<const double> primary,
                                 std::span<const double> secondary, double beta, std::span<double> out) {
    const auto& st = tr.stage(stage);
    std::fill(out.begin(), out.end(), kLogZero);
    for (int v = st.first_vertex; v < st.end_vertex; ++v) {
        const int m = tr.message(v);
        if (m < 0) throw std::logic_error("stage has no on-deck message symbol");
        const double p = primary[static_cast<std::size_t>(v)];
        if (p == kLogZero) continue;
        const double s = pow_log(beta, secondary[static_cast<std::size_t>(v)]);
        out[static_cast<std::size_t>(m)] = log_add(out[static_cast<std::size_t>(m)], p + s);
    }
}

/// Pr(M_l = m | Y^{1:K}) read off the last stage of every input cycle.
inline PosteriorTable message_posteriors(const Trellis& tr, std::span<const double> F, std::span<const double> B) {
    const int L = tr.message_length();
    const int M = tr.message_alphabet_size();
    PosteriorTable table(L, M);
    std::vector<double> scores(static_cast<std::size_t>(M));
    for (int l = 0; l < L; ++l) {
        stage_message_scores(tr, tr.cycles()[static_cast<std::size_t>(l)].output, F, B, 1.0, scores);
        if (!table.set_from_logs(l, scores))
            throw InfeasibleError("zero likelihood: no surviving path explains the traces");
    }
    return table;
}

inline PosteriorTable message_posteriors(const Trellis& tr, const ForwardBackward& fb) {
    return message_posteriors(tr, fb.forward, fb.backward);
}

/// Exact symbolwise posteriors from the multi-trace trellis.
inline PosteriorTable bcjr_decode(const FsmEncoder& enc, std::span<const Sequence> traces, const IdsParams& params,
                                  const MessagePrior& prior, const TrellisOptions& opts = {}) {
    const Trellis tr = build_trellis(enc, traces, params, prior, opts);
    return message_posteriors(tr, forward_backward(tr));
}

} // namespace idstr
