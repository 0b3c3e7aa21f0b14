#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "idstr/bcjr.hpp"
#include "idstr/channel.hpp"
#include "idstr/trellis.hpp"

namespace idstr {

struct BmalaOptions {
    int lookahead = 3;      ///< window length w compared against the consensus
    int bench_steps = 5;    ///< consensus steps a benched trace sits out
    int resync_radius = 2;  ///< pointer offsets tried when a benched trace rejoins
    int min_agreement = 3;  ///< fewest matching window symbols needed to classify a disagreement
    int alphabet_size = 4;
    bool realign_agreeing = true;
    int realign_margin = 0;  ///< extra window matches an indel hypothesis needs over the plain match
    bool two_sided = true;

    void validate() const {
        if (lookahead < 1 || bench_steps < 0 || realign_margin < 0 || resync_radius < 0 || min_agreement < 0 || alphabet_size < 2)
            throw std::invalid_argument("invalid BMALA options");
    }
};

namespace detail {

struct BmalaTrace {
    std::span<const Symbol> y;
    std::size_t ptr = 0;
    bool benched = false;
    std::size_t rejoin_at = 0;
    std::size_t benched_at = 0;
};

inline Symbol plurality(std::span<const int> counts) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < counts.size(); ++s)
        if (counts[s] > counts[best]) best = s;
    return static_cast<Symbol>(best);
}

inline int window_matches(std::span<const Symbol> y, std::size_t from, std::span<const int> consensus) {
    int n = 0;
    for (std::size_t j = 0; j < consensus.size(); ++j) {
        if (consensus[j] < 0) continue;
        const std::size_t at = from + j;
        if (at < y.size() && y[at] == consensus[j]) ++n;
    }
    return n;
}

} // namespace detail

namespace detail {

inline Sequence bmala_one_pass(std::span<const Sequence> traces, int n, const BmalaOptions& opt) {
    const auto q = static_cast<std::size_t>(opt.alphabet_size);
    const auto w = static_cast<std::size_t>(opt.lookahead);

    std::vector<detail::BmalaTrace> st(traces.size());
    for (std::size_t k = 0; k < traces.size(); ++k) {
        for (Symbol s : traces[k])
            if (s >= q) throw std::invalid_argument("trace symbol outside alphabet");
        st[k].y = traces[k];
    }

    Sequence out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<int> counts(q);
    std::vector<int> future(w);
    std::vector<std::size_t> agree, disagree;

    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        // Rejoin benched traces whose time is up, at the pointer that best explains the recent output.
        for (auto& t : st) {
            if (!t.benched || i < t.rejoin_at) continue;
            t.benched = false;
            const std::size_t guess = t.ptr + (i - t.benched_at);
            std::size_t best_ptr = guess;
            int best_score = -1;
            for (int d = -opt.resync_radius; d <= opt.resync_radius; ++d) {
                const long long cand = static_cast<long long>(guess) + d;
                if (cand < static_cast<long long>(t.ptr) || cand > static_cast<long long>(t.y.size())) continue;
                int score = 0;
                for (std::size_t j = 1; j <= w && j <= i && static_cast<std::size_t>(cand) >= j; ++j)
                    score += t.y[static_cast<std::size_t>(cand) - j] == out[i - j];
                if (score > best_score) {
                    best_score = score;
                    best_ptr = static_cast<std::size_t>(cand);
                }
            }
            t.ptr = std::min(best_ptr, t.y.size());
        }

        std::fill(counts.begin(), counts.end(), 0);
        int voters = 0;
        for (const auto& t : st)
            if (!t.benched && t.ptr < t.y.size()) {
                ++counts[t.y[t.ptr]];
                ++voters;
            }
        if (voters == 0) {
            out.push_back(0);
            continue;
        }
        const Symbol c = detail::plurality(counts);
        out.push_back(c);

        agree.clear();
        disagree.clear();
        for (std::size_t k = 0; k < st.size(); ++k) {
            const auto& t = st[k];
            if (t.benched || t.ptr >= t.y.size()) continue;
            (t.y[t.ptr] == c ? agree : disagree).push_back(k);
        }

        // Consensus of the agreeing traces over the w symbols after the current one.
        for (std::size_t j = 0; j < w; ++j) {
            std::fill(counts.begin(), counts.end(), 0);
            int any = 0;
            for (std::size_t k : agree) {
                const auto at = st[k].ptr + 1 + j;
                if (at < st[k].y.size()) {
                    ++counts[st[k].y[at]];
                    ++any;
                }
            }
            future[j] = any ? detail::plurality(counts) : -1;
        }

        // An agreeing trace can still be misaligned when an indel happens to reproduce c;
        // shift it only when another hypothesis explains the upcoming consensus strictly better.
        // A unanimous vote always advances everyone by one.
        const bool realign = opt.realign_agreeing && !disagree.empty();
        for (std::size_t k : agree) {
            auto& t = st[k];
            const int match = detail::window_matches(t.y, t.ptr + 1, future);
            const int del = detail::window_matches(t.y, t.ptr, future);
            const int ins = detail::window_matches(t.y, t.ptr + 2, future);
            if (realign && del > match + opt.realign_margin && del >= ins) continue;
            if (realign && ins > match + opt.realign_margin) t.ptr += 2;
            else t.ptr += 1;
        }
        for (std::size_t k : disagree) {
            auto& t = st[k];
            const int sub = detail::window_matches(t.y, t.ptr + 1, future);
            const int del = detail::window_matches(t.y, t.ptr, future);
            const bool ins_ok = t.ptr + 1 < t.y.size() && t.y[t.ptr + 1] == c;
            const int ins = ins_ok ? detail::window_matches(t.y, t.ptr + 2, future) : -1;
            const int best = std::max({sub, del, ins});
            if (best < opt.min_agreement && agree.size() > 1) {
                t.benched = true;
                t.benched_at = i;
                t.rejoin_at = i + 1 + static_cast<std::size_t>(opt.bench_steps);
                continue;
            }
            if (sub == best) t.ptr += 1;
            else if (del == best) t.ptr += 0;
            else t.ptr += 2;
        }
    }
    return out;
}

} // namespace detail

/// Bitwise majority alignment with lookahead. Each trace keeps a hard pointer; the
/// output symbol is the plurality of the active traces' current symbols, and every
/// disagreeing trace is classified as a substitution, deletion or insertion by which
/// hypothesis best matches the agreeing traces' upcoming consensus. Traces that fit no
/// hypothesis sit out for a few steps and rejoin at the offset that best matches the
/// recent output. With `two_sided`, a second pass runs over the reversed traces and
/// supplies the back half, since pointer drift grows with distance from the start.
/// The result always has length n.
inline Sequence bmala_reconstruct(std::span<const Sequence> traces, int n, const BmalaOptions& opt = {}) {
    opt.validate();
    if (traces.empty()) throw std::invalid_argument("BMALA needs at least one trace");
    if (n < 1) throw std::invalid_argument("BMALA target length must be >= 1");
    Sequence fwd = detail::bmala_one_pass(traces, n, opt);
    if (!opt.two_sided || traces.size() == 1) return fwd;
    std::vector<Sequence> rev(traces.begin(), traces.end());
    for (auto& y : rev) std::reverse(y.begin(), y.end());
    const Sequence bwd = detail::bmala_one_pass(rev, n, opt);
    const std::size_t half = static_cast<std::size_t>(n) / 2;
    for (std::size_t i = half; i < fwd.size(); ++i) fwd[i] = bwd[fwd.size() - 1 - i];
    return fwd;
}

/// BMALA estimate decoded as a single observed trace with the IDS trellis. `params`
/// models the estimate's error profile; by default callers pass the raw channel estimate.
inline PosteriorTable bmala_map(std::span<const Sequence> traces, const FsmEncoder& enc, const IdsParams& params,
                                const MessagePrior& prior, const TrellisOptions& trellis_opts = {},
                                const BmalaOptions& opt = {}) {
    BmalaOptions o = opt;
    o.alphabet_size = enc.output_alphabet_size();
    const std::vector<Sequence> est{bmala_reconstruct(traces, enc.codeword_length(), o)};
    return bcjr_decode(enc, est, params, prior, trellis_opts);
}

} // namespace idstr
