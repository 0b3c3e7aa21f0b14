#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "idstr/bcjr.hpp"
#include "idstr/errors.hpp"
#include "idstr/log_math.hpp"
#include "idstr/trellis.hpp"

namespace idstr {

struct BetaParams {
    double beta_b = 1.0; ///< exponent on the opposite-direction values when reading beliefs
    double beta_e = 0.0; ///< weight of the other traces' beliefs in the new prior
    double beta_i = 0.0; ///< weight of a trace's own belief in its new prior
    double beta_o = 1.0; ///< exponent applied to the combined belief

    void validate() const {
        if (!(beta_b >= 0 && beta_e >= 0 && beta_i >= 0))
            throw std::invalid_argument("betas b, e, i must be >= 0: " + to_string());
        if (!(beta_o > 0)) throw std::invalid_argument("beta_o must be > 0: " + to_string());
    }

    [[nodiscard]] std::string to_string() const {
        std::ostringstream os;
        os << "(b=" << beta_b << ", e=" << beta_e << ", i=" << beta_i << ", o=" << beta_o << ")";
        return os.str();
    }

    /// Independent per-trace decoding with the posteriors multiplied together.
    static constexpr BetaParams multiply() { return {1.0, 0.0, 0.0, 1.0}; }

    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

enum class DataSource { Real, Simulated };
enum class TuneMetric { Hamming, BcjrOnce };

/// Tuned betas for N = 110 strands. `message_length` selects the uncoded (110),
/// 104/110 MR or 100/110 MR table (nearest match); K picks the closest tabulated
/// trace count not above K, or the smallest row.
inline BetaParams default_betas(DataSource source, TuneMetric metric, int message_length, int K) {
    struct Row {
        int k;
        BetaParams b;
    };
    using Table = std::array<Row, 6>;
    // [source][metric][code: uncoded, 104, 100]
    static const Table real[2][3] = {
        {
            {{{1, {1, 1.0, 0, 1.0}}, {2, {0, 0.1, 0.5, 0.5}}, {4, {0, 1, 0.1, 0.9}}, {6, {0, 0.5, 0.1, 1}}, {8, {0, 0.5, 0.5, 0.9}}, {10, {0, 0.5, 0, 1}}}},
            {{{1, {1, 1.0, 0, 1.0}}, {2, {1, 0.1, 0, 0.5}}, {4, {1, 0.1, 0, 0.5}}, {6, {1, 0.1, 0, 0.5}}, {8, {1, 0.1, 0, 0.5}}, {10, {1, 0.02, 0, 0.5}}}},
            {{{1, {1, 1.0, 0, 1.0}}, {2, {1, 0.1, 0, 0.1}}, {4, {1, 0.1, 0, 0.1}}, {6, {1, 0.1, 0, 0.1}}, {8, {1, 0.02, 0, 1.0}}, {10, {1, 0.02, 0, 1.0}}}},
        },
        {
            {{{1, {1, 1.0, 0, 1.0}}, {2, {0, 0.05, 0.5, 0.5}}, {4, {0, 0.5, 0.1, 0.5}}, {6, {0, 0.5, 0.1, 0.5}}, {8, {0, 0.5, 0.5, 0.5}}, {10, {0, 1.0, 0, 0.5}}}},
            {{{1, {1, 1.0, 0, 1.0}}, {2, {1, 0.1, 0, 1.0}}, {4, {1, 0.1, 0, 0.5}}, {6, {1, 0.02, 0, 0.5}}, {8, {1, 0.02, 0, 0.5}}, {10, {1, 0.02, 0, 0.5}}}},
            {{{1, {1, 1.0, 0, 1.0}}, {2, {1, 0.1, 0, 1.0}}, {4, {1, 0.1, 0, 0.5}}, {6, {1, 0.1, 0, 0.5}}, {8, {1, 0.02, 0, 0.5}}, {10, {1, 0.02, 0, 0.5}}}},
        },
    };
    static const Table sim[2][3] = {
        {
            {{{1, {1, 0.5, 0, 0.1}}, {2, {1, 0.1, 0.0, 0.1}}, {4, {0, 1.0, 0.5, 0.5}}, {6, {0, 0.5, 0.1, 1.0}}, {8, {0, 5.0, 0.0, 0.1}}, {10, {0, 0.5, 0.0, 0.1}}}},
            {{{1, {1, 1.0, 0.0, 0.5}}, {2, {1, 0.1, 0.0, 0.1}}, {4, {1, 0.5, 0.5, 1.0}}, {6, {1, 5.0, 0.1, 0.5}}, {8, {1, 1.0, 0.0, 0.5}}, {10, {1, 5.0, 0.5, 0.1}}}},
            {{{1, {1, 0.5, 0.0, 0.5}}, {2, {1, 0.5, 0.0, 0.5}}, {4, {1, 0.5, 0.0, 0.5}}, {6, {1, 0.5, 0.1, 0.5}}, {8, {1, 0.5, 0.1, 0.5}}, {10, {1, 5.0, 0.0, 0.5}}}},
        },
        {
            {{{1, {1, 0.5, 0.0, 1.0}}, {2, {1, 0.1, 0.0, 0.5}}, {4, {0, 1.0, 0.5, 0.5}}, {6, {0, 0.5, 0.1, 0.5}}, {8, {0, 5.0, 0.0, 0.5}}, {10, {0, 0.5, 0.1, 1.0}}}},
            {{{1, {1, 0.5, 0.0, 1.0}}, {2, {1, 0.1, 0.0, 1.0}}, {4, {1, 0.1, 0.0, 0.5}}, {6, {1, 0.1, 0.0, 0.5}}, {8, {1, 0.5, 0.5, 0.5}}, {10, {1, 5.0, 0.5, 1.0}}}},
            {{{1, {1, 1.0, 0.0, 1.0}}, {2, {1, 0.1, 0.0, 1.0}}, {4, {1, 0.5, 0.0, 0.5}}, {6, {1, 0.5, 0.1, 0.5}}, {8, {1, 0.5, 0.1, 0.5}}, {10, {1, 0.5, 0.5, 1.0}}}},
        },
    };
    const int m = metric == TuneMetric::Hamming ? 0 : 1;
    int code = 0;
    if (message_length < 110) code = message_length > 102 ? 1 : 2;
    const Table& t = (source == DataSource::Real ? real : sim)[m][code];
    const Row* best = &t[0];
    for (const Row& r : t)
        if (r.k <= K) best = &r;
    return best->b;
}

/// One single-trace trellis with its forward/backward values.
struct TraceDetector {
    int trace_index = 0; ///< position in the caller's trace list
    Trellis trellis;
    std::vector<double> F;
    std::vector<double> B;
};

/// Builds one trellis per trace and runs a full forward and backward pass on each.
/// Traces whose trellis is infeasible are left out and their indices appended to `dropped`.
inline std::vector<TraceDetector> init_single_trace_trellises(const FsmEncoder& enc, std::span<const Sequence> traces,
                                                              const IdsParams& params, const MessagePrior& prior,
                                                              const TrellisOptions& opts = {},
                                                              std::vector<int>* dropped = nullptr) {
    std::vector<TraceDetector> out;
    out.reserve(traces.size());
    for (std::size_t k = 0; k < traces.size(); ++k) {
        try {
            TraceDetector d;
            d.trace_index = static_cast<int>(k);
            d.trellis = build_trellis(enc, traces.subspan(k, 1), params, prior, opts);
            d.F = forward_pass(d.trellis);
            d.B = backward_pass(d.trellis);
            out.push_back(std::move(d));
        } catch (const InfeasibleError&) {
            if (dropped) dropped->push_back(static_cast<int>(k));
        }
    }
    return out;
}

/// Log-domain beliefs about one message symbol: one row per detector plus their sum.
struct BeliefSet {
    std::vector<std::vector<double>> per_trace;
    std::vector<double> combined;
};

/// V^k(m) = sum over stage vertices holding m of primary(v) * secondary(v)^beta_b, and
/// V = prod_k V^k. `primary`/`secondary` are (F, B) on the forward side, (B, F) on the reverse.
inline BeliefSet combine_beliefs(std::span<const TraceDetector> dets, std::span<const std::vector<double>> primary,
                                 std::span<const std::vector<double>> secondary, std::span<const int> stage,
                                 double beta_b) {
    if (dets.empty()) throw InfeasibleError("no trace left to combine");
    const int M = dets.front().trellis.message_alphabet_size();
    BeliefSet bs;
    bs.per_trace.assign(dets.size(), std::vector<double>(static_cast<std::size_t>(M)));
    bs.combined.assign(static_cast<std::size_t>(M), 0.0);
    for (std::size_t k = 0; k < dets.size(); ++k) {
        auto& row = bs.per_trace[k];
        stage_message_scores(dets[k].trellis, stage[k], primary[k], secondary[k], beta_b, row);
        const double hi = *std::max_element(row.begin(), row.end());
        if (hi == kLogZero) throw InfeasibleError("all-zero belief row");
        for (std::size_t m = 0; m < row.size(); ++m) {
            row[m] -= hi;
            bs.combined[m] += row[m];
        }
    }
    return bs;
}

/// log gamma^k(m) = beta_i log V^k(m) + beta_e sum_{j != k} log V^j(m), shifted so its maximum is 0.
inline std::vector<double> new_prior(const BeliefSet& bs, std::size_t k, const BetaParams& betas) {
    if (k >= bs.per_trace.size()) throw std::out_of_range("belief row index");
    const std::size_t M = bs.per_trace[k].size();
    std::vector<double> g(M, 0.0);
    for (std::size_t j = 0; j < bs.per_trace.size(); ++j) {
        const double beta = j == k ? betas.beta_i : betas.beta_e;
        for (std::size_t m = 0; m < M; ++m) g[m] += pow_log(beta, bs.per_trace[j][m]);
    }
    const double hi = *std::max_element(g.begin(), g.end());
    if (hi == kLogZero) throw InfeasibleError("new prior is zero for every symbol");
    for (double& v : g) v -= hi;
    return g;
}

/// Multiplies F at every vertex of `stage` by gamma(m(v)) and recomputes F forward
/// over vertices [end of stage, until).
inline void update_forward(const Trellis& tr, std::span<double> F, int stage, std::span<const double> log_gamma, int until) {
    const auto& st = tr.stage(stage);
    for (int v = st.first_vertex; v < st.end_vertex; ++v) F[static_cast<std::size_t>(v)] += log_gamma[static_cast<std::size_t>(tr.message(v))];
    forward_range(tr, F, st.end_vertex, until);
}

/// Mirror of update_forward: scales B on `stage` and recomputes B backward over [from, first vertex of stage).
inline void update_backward(const Trellis& tr, std::span<double> B, int stage, std::span<const double> log_gamma, int from) {
    const auto& st = tr.stage(stage);
    for (int v = st.first_vertex; v < st.end_vertex; ++v) B[static_cast<std::size_t>(v)] += log_gamma[static_cast<std::size_t>(tr.message(v))];
    backward_range(tr, B, from, st.first_vertex);
}

struct BmaResult {
    PosteriorTable posteriors;
    std::vector<int> dropped_traces; ///< indices of traces with no feasible path
};

/// Trellis BMA. The first floor(L/2) symbols come from a forward sweep that updates
/// forward values at the output stage of each cycle; the rest come from a reverse sweep
/// that updates backward values at the landing stage (first stage holding M_l).
inline BmaResult run_trellis_bma(const FsmEncoder& enc, std::span<const Sequence> traces, const IdsParams& params,
                                 const MessagePrior& prior, const BetaParams& betas, const TrellisOptions& opts = {}) {
    betas.validate();
    if (traces.empty()) throw std::invalid_argument("trellis BMA needs at least one trace");
    BmaResult res;
    auto dets = init_single_trace_trellises(enc, traces, params, prior, opts, &res.dropped_traces);
    if (dets.empty()) throw InfeasibleError("every trace is infeasible under the drift bound");

    const int L = enc.message_length();
    const int M = enc.message_alphabet_size();
    const std::size_t K = dets.size();
    const int half = L / 2;
    res.posteriors = PosteriorTable(L, M);

    std::vector<std::vector<double>> F(K), B(K);
    for (std::size_t k = 0; k < K; ++k) {
        F[k] = dets[k].F;
        B[k] = dets[k].B;
    }
    std::vector<int> stage(K);
    std::vector<double> out(static_cast<std::size_t>(M));

    auto emit = [&](int l, const BeliefSet& bs) {
        for (std::size_t m = 0; m < out.size(); ++m) out[m] = betas.beta_o * bs.combined[m];
        if (!res.posteriors.set_from_logs(l, out)) throw InfeasibleError("zero combined belief at symbol " + std::to_string(l));
    };

    for (int l = 0; l < half; ++l) {
        for (std::size_t k = 0; k < K; ++k) stage[k] = dets[k].trellis.cycles()[static_cast<std::size_t>(l)].output;
        const auto bs = combine_beliefs(dets, F, B, stage, betas.beta_b);
        emit(l, bs);
        if (l + 1 == half) break;
        for (std::size_t k = 0; k < K; ++k) {
            const auto& tr = dets[k].trellis;
            const auto g = new_prior(bs, k, betas);
            update_forward(tr, F[k], stage[k], g, tr.stage(tr.cycles()[static_cast<std::size_t>(l) + 1].output).end_vertex);
        }
    }

    for (std::size_t k = 0; k < K; ++k) F[k] = dets[k].F;
    for (int l = L - 1; l >= half; --l) {
        for (std::size_t k = 0; k < K; ++k) stage[k] = dets[k].trellis.cycles()[static_cast<std::size_t>(l)].landing;
        const auto bs = combine_beliefs(dets, B, F, stage, betas.beta_b);
        emit(l, bs);
        if (l == half) break;
        for (std::size_t k = 0; k < K; ++k) {
            const auto& tr = dets[k].trellis;
            const auto g = new_prior(bs, k, betas);
            update_backward(tr, B[k], stage[k], g, tr.stage(tr.cycles()[static_cast<std::size_t>(l) - 1].landing).first_vertex);
        }
    }
    return res;
}

/// Trellis BMA with betas (1, 0, 0, 1): the product of the per-trace posteriors.
inline BmaResult multiply_posteriors(const FsmEncoder& enc, std::span<const Sequence> traces, const IdsParams& params,
                                     const MessagePrior& prior, const TrellisOptions& opts = {}) {
    return run_trellis_bma(enc, traces, params, prior, BetaParams::multiply(), opts);
}

} // namespace idstr
