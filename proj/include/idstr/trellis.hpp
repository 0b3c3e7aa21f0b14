#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idstr/alphabet.hpp"
#include "idstr/channel.hpp"
#include "idstr/codes.hpp"
#include "idstr/errors.hpp"
#include "idstr/log_math.hpp"

namespace idstr {

/// Per-position message prior Pr(M_l = m), L rows of |M| probabilities.
class MessagePrior {
public:
    MessagePrior(int length, int alphabet_size, std::vector<double> probs)
        : length_(length), alphabet_(alphabet_size), probs_(std::move(probs)) {
        if (length_ < 1 || alphabet_ < 2) throw std::invalid_argument("prior needs L >= 1 and |M| >= 2");
        if (probs_.size() != static_cast<std::size_t>(length_) * static_cast<std::size_t>(alphabet_))
            throw std::invalid_argument("prior table has wrong size");
        for (int l = 0; l < length_; ++l) {
            double s = 0;
            for (double p : row(l)) {
                if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("prior entries must be probabilities");
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("prior row " + std::to_string(l) + " does not sum to 1");
        }
    }

    static MessagePrior uniform(int length, int alphabet_size) {
        return {length, alphabet_size,
                std::vector<double>(static_cast<std::size_t>(length) * static_cast<std::size_t>(alphabet_size),
                                    1.0 / alphabet_size)};
    }

    [[nodiscard]] int length() const noexcept { return length_; }
    [[nodiscard]] int alphabet_size() const noexcept { return alphabet_; }
    [[nodiscard]] std::span<const double> row(int l) const {
        return std::span<const double>(probs_).subspan(static_cast<std::size_t>(l) * static_cast<std::size_t>(alphabet_),
                                                       static_cast<std::size_t>(alphabet_));
    }
    [[nodiscard]] double at(int l, int m) const { return row(l)[static_cast<std::size_t>(m)]; }

private:
    int length_;
    int alphabet_;
    std::vector<double> probs_;
};

enum class StageKind : std::uint8_t {
    Input,   ///< buffers empty; outgoing edges accept the next message symbol
    Landing, ///< message and first codeword symbol on deck, no IDS event yet
    Ids,     ///< events of one trace for one codeword symbol; only stage kind with intra-stage edges
    Output,  ///< last stage of an input cycle
    Final,   ///< after the last cycle; holds the absorbing vertices
};

enum class EdgeKind : std::uint8_t { Input, Advance, Deletion, Match, Insertion };

struct Stage {
    StageKind kind;
    int cycle;    ///< message index l (L for the final stage)
    int position; ///< on-deck codeword position n (0-based), -1 when none
    int trace;    ///< trace whose events are modeled (Ids only), else -1
    int first_vertex = 0;
    int end_vertex = 0;
};

struct CycleStages {
    int input;
    int landing;
    int output;
};

struct TrellisOptions {
    static constexpr int kUnlimited = -1;
    /// Maximum distance of a trace pointer from its expected position; kUnlimited disables pruning.
    int delta = kUnlimited;
    /// Keep vertices that cannot reach an absorbing vertex (used by structural checks).
    bool keep_dead_ends = false;
    /// Scrambling vector added (mod |Sigma|) to every codeword symbol; empty for none.
    Sequence offset;
};

struct EdgeLabel {
    int trace = -1; ///< -1 for unlabeled edges
    int position = -1;
    [[nodiscard]] bool labeled() const noexcept { return trace >= 0; }
};

/// Weighted DAG whose origin-to-absorbing paths enumerate joint (message, IDS event, trace)
/// outcomes. Vertices are numbered in a breadth-first topological order grouped by stage.
///
/// Pointer values are 0-based: pointer(v, k) == trace_length(k) means trace k is fully explained.
/// For stages inside input cycle l the stored encoder state is the state after accepting M_l.
class Trellis {
public:
    [[nodiscard]] int num_traces() const noexcept { return num_traces_; }
    [[nodiscard]] int message_length() const noexcept { return message_length_; }
    [[nodiscard]] int codeword_length() const noexcept { return codeword_length_; }
    [[nodiscard]] int message_alphabet_size() const noexcept { return message_alphabet_; }
    [[nodiscard]] int output_alphabet_size() const noexcept { return output_alphabet_; }
    [[nodiscard]] int trace_length(int k) const { return trace_lengths_.at(static_cast<std::size_t>(k)); }
    [[nodiscard]] int delta() const noexcept { return delta_; }

    [[nodiscard]] int vertex_count() const noexcept { return static_cast<int>(v_stage_.size()); }
    [[nodiscard]] int edge_count() const noexcept { return static_cast<int>(e_head_.size()); }
    [[nodiscard]] int origin() const noexcept { return 0; }
    [[nodiscard]] std::span<const int> absorbing() const noexcept { return absorbing_; }
    [[nodiscard]] bool is_absorbing(int v) const noexcept {
        return stages_[static_cast<std::size_t>(v_stage_[static_cast<std::size_t>(v)])].kind == StageKind::Final &&
               all_explained(v);
    }

    [[nodiscard]] std::span<const Stage> stages() const noexcept { return stages_; }
    [[nodiscard]] const Stage& stage(int t) const { return stages_.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] std::span<const CycleStages> cycles() const noexcept { return cycles_; }

    [[nodiscard]] int stage_of(int v) const noexcept { return v_stage_[static_cast<std::size_t>(v)]; }
    [[nodiscard]] int state(int v) const noexcept { return v_state_[static_cast<std::size_t>(v)]; }
    /// On-deck message symbol, -1 when empty.
    [[nodiscard]] int message(int v) const noexcept { return v_msg_[static_cast<std::size_t>(v)]; }
    /// On-deck codeword symbol (after scrambling), -1 when empty.
    [[nodiscard]] int codeword_symbol(int v) const noexcept { return v_sym_[static_cast<std::size_t>(v)]; }
    [[nodiscard]] int pointer(int v, int k) const noexcept {
        return v_ptr_[static_cast<std::size_t>(v) * static_cast<std::size_t>(num_traces_) + static_cast<std::size_t>(k)];
    }

    // Edges are stored grouped by tail (the vertex an edge points to).
    [[nodiscard]] int head(int e) const noexcept { return e_head_[static_cast<std::size_t>(e)]; }
    [[nodiscard]] int tail(int e) const noexcept { return e_tail_[static_cast<std::size_t>(e)]; }
    [[nodiscard]] double log_weight(int e) const noexcept { return e_logw_[static_cast<std::size_t>(e)]; }
    [[nodiscard]] double weight(int e) const noexcept { return std::exp(log_weight(e)); }
    [[nodiscard]] EdgeKind kind(int e) const noexcept { return e_kind_[static_cast<std::size_t>(e)]; }
    [[nodiscard]] EdgeLabel label(int e) const noexcept {
        return {e_label_trace_[static_cast<std::size_t>(e)], e_label_pos_[static_cast<std::size_t>(e)]};
    }
    /// Edge ids e with tail(e) == v form the range [in_begin(v), in_begin(v + 1)).
    [[nodiscard]] int in_begin(int v) const noexcept { return in_begin_[static_cast<std::size_t>(v)]; }
    /// Edge ids with head(e) == v.
    [[nodiscard]] std::span<const int> out_edges(int v) const noexcept {
        const auto b = static_cast<std::size_t>(out_begin_[static_cast<std::size_t>(v)]);
        const auto e = static_cast<std::size_t>(out_begin_[static_cast<std::size_t>(v) + 1]);
        return std::span<const int>(out_edge_ids_).subspan(b, e - b);
    }
    /// Raw arrays for the inner loops of inference.
    [[nodiscard]] std::span<const int> heads() const noexcept { return e_head_; }
    [[nodiscard]] std::span<const double> log_weights() const noexcept { return e_logw_; }
    [[nodiscard]] std::span<const int> in_offsets() const noexcept { return in_begin_; }
    [[nodiscard]] std::span<const int> tails() const noexcept { return e_tail_; }
    [[nodiscard]] std::span<const int> out_offsets() const noexcept { return out_begin_; }
    [[nodiscard]] std::span<const int> out_ids() const noexcept { return out_edge_ids_; }

    /// Sum of the generative probabilities of v's outgoing edges: labeled edges count
    /// the probability of their event type marginalized over the emitted symbol.
    [[nodiscard]] double outgoing_event_mass(int v) const {
        double s = 0.0;
        for (int e : out_edges(v)) {
            switch (kind(e)) {
            case EdgeKind::Match: s += params_.p_cor + params_.p_sub; break;
            case EdgeKind::Insertion: s += params_.p_ins; break;
            default: s += weight(e); break;
            }
        }
        return s;
    }

    [[nodiscard]] const IdsParams& params() const noexcept { return params_; }

private:
    [[nodiscard]] bool all_explained(int v) const noexcept {
        for (int k = 0; k < num_traces_; ++k)
            if (pointer(v, k) != trace_lengths_[static_cast<std::size_t>(k)]) return false;
        return true;
    }

    friend class TrellisBuilder;

    int num_traces_ = 0;
    int message_length_ = 0;
    int codeword_length_ = 0;
    int message_alphabet_ = 0;
    int output_alphabet_ = 0;
    int delta_ = TrellisOptions::kUnlimited;
    IdsParams params_;
    std::vector<int> trace_lengths_;
    std::vector<Stage> stages_;
    std::vector<CycleStages> cycles_;

    std::vector<int> v_stage_;
    std::vector<int> v_state_;
    std::vector<std::int16_t> v_msg_;
    std::vector<std::int16_t> v_sym_;
    std::vector<int> v_ptr_;
    std::vector<int> absorbing_;

    std::vector<int> e_head_;
    std::vector<int> e_tail_;
    std::vector<double> e_logw_;
    std::vector<EdgeKind> e_kind_;
    std::vector<std::int16_t> e_label_trace_;
    std::vector<int> e_label_pos_;
    std::vector<int> in_begin_;
    std::vector<int> out_begin_;
    std::vector<int> out_edge_ids_;
};

namespace detail {

/// Breadth-first topological order (Kahn's algorithm) with ready vertices bucketed by
/// stage, so the result is grouped by stage. Throws std::logic_error on a cycle.
inline std::vector<int> staged_kahn_order(int num_vertices, std::span<const int> stage_of, int num_stages,
                                          std::span<const int> edge_from, std::span<const int> edge_to, int origin) {
    std::vector<int> indeg(static_cast<std::size_t>(num_vertices), 0);
    std::vector<int> out_count(static_cast<std::size_t>(num_vertices) + 1, 0);
    for (std::size_t e = 0; e < edge_from.size(); ++e) {
        ++indeg[static_cast<std::size_t>(edge_to[e])];
        ++out_count[static_cast<std::size_t>(edge_from[e]) + 1];
    }
    for (int v = 0; v < num_vertices; ++v) out_count[static_cast<std::size_t>(v) + 1] += out_count[static_cast<std::size_t>(v)];
    std::vector<int> adj(edge_from.size());
    {
        std::vector<int> fill(out_count.begin(), out_count.end() - 1);
        for (std::size_t e = 0; e < edge_from.size(); ++e)
            adj[static_cast<std::size_t>(fill[static_cast<std::size_t>(edge_from[e])]++)] = edge_to[e];
    }
    if (indeg[static_cast<std::size_t>(origin)] != 0) throw std::logic_error("trellis origin has incoming edges");

    std::vector<std::vector<int>> bucket(static_cast<std::size_t>(num_stages));
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(num_vertices));
    bucket[static_cast<std::size_t>(stage_of[static_cast<std::size_t>(origin)])].push_back(origin);
    for (int t = 0; t < num_stages; ++t) {
        auto& q = bucket[static_cast<std::size_t>(t)];
        for (std::size_t i = 0; i < q.size(); ++i) {
            const int v = q[i];
            order.push_back(v);
            for (int j = out_count[static_cast<std::size_t>(v)]; j < out_count[static_cast<std::size_t>(v) + 1]; ++j) {
                const int w = adj[static_cast<std::size_t>(j)];
                if (--indeg[static_cast<std::size_t>(w)] == 0) {
                    const int s = stage_of[static_cast<std::size_t>(w)];
                    if (s < t) throw std::logic_error("trellis edge goes to an earlier stage");
                    bucket[static_cast<std::size_t>(s)].push_back(w);
                }
            }
        }
        std::vector<int>().swap(q);
    }
    if (static_cast<int>(order.size()) != num_vertices)
        throw std::logic_error("trellis is not acyclic or has vertices unreachable from the origin");
    return order;
}

} // namespace detail

class TrellisBuilder {
public:
    TrellisBuilder(const FsmEncoder& enc, std::span<const Sequence> traces, const IdsParams& params,
                   const MessagePrior& prior, const TrellisOptions& opts)
        : enc_(enc), traces_(traces), params_(params), prior_(prior), opts_(opts) {
        K_ = static_cast<int>(traces.size());
        if (K_ < 1) throw std::invalid_argument("trellis needs at least one trace");
        params_.validate();
        if (prior.length() != enc.message_length() || prior.alphabet_size() != enc.message_alphabet_size())
            throw std::invalid_argument("prior does not match encoder message length/alphabet");
        if (!opts.offset.empty() && static_cast<int>(opts.offset.size()) != enc.codeword_length())
            throw std::invalid_argument("scrambling vector length must equal codeword length");
        if (opts.delta < TrellisOptions::kUnlimited) throw std::invalid_argument("delta must be >= 0 or unlimited");
        for (const auto& y : traces)
            for (Symbol s : y)
                if (s >= enc.output_alphabet_size()) throw std::invalid_argument("trace symbol outside output alphabet");
        lens_.resize(static_cast<std::size_t>(K_));
        for (int k = 0; k < K_; ++k) lens_[static_cast<std::size_t>(k)] = static_cast<int>(traces[static_cast<std::size_t>(k)].size());
    }

    Trellis build() {
        layout_stages();
        generate();
        return finish();
    }

private:
    struct StageLayout {
        Stage info;
        int num_labels = 0;
        int label_cycle = -1; ///< cycle whose (state, message) labels this stage uses; -1 for state-only labels
        std::vector<int> lo;      ///< window per trace
        std::vector<int> width;   ///< window width per trace
        std::vector<int> stride;  ///< mixed-radix stride per trace
        int cell_size = 1;        ///< product of widths
        std::int64_t base = 0;    ///< offset in the global dense space
    };

    static constexpr int kNoStage = -1;

    void layout_stages() {
        const int L = enc_.message_length();
        const int N = enc_.codeword_length();
        const int M = enc_.message_alphabet_size();

        // Reachable encoder states before each cycle.
        reachable_states_.assign(static_cast<std::size_t>(L) + 1, {});
        state_index_.assign(static_cast<std::size_t>(L) + 1, std::vector<int>(static_cast<std::size_t>(enc_.num_states()), -1));
        auto add_state = [&](int l, int q) {
            auto& idx = state_index_[static_cast<std::size_t>(l)][static_cast<std::size_t>(q)];
            if (idx < 0) {
                idx = static_cast<int>(reachable_states_[static_cast<std::size_t>(l)].size());
                reachable_states_[static_cast<std::size_t>(l)].push_back(q);
            }
        };
        add_state(0, enc_.initial_state());
        for (int l = 0; l < L; ++l)
            for (int q : reachable_states_[static_cast<std::size_t>(l)])
                for (int m = 0; m < M; ++m)
                    if (prior_.at(l, m) > 0.0) add_state(l + 1, enc_.next_state(q, m));

        auto push = [&](StageKind kind, int cycle, int position, int trace, std::vector<int> consumed) {
            StageLayout s;
            s.info = Stage{kind, cycle, position, trace};
            if (kind == StageKind::Input || kind == StageKind::Final) {
                s.num_labels = static_cast<int>(reachable_states_[static_cast<std::size_t>(cycle)].size());
            } else {
                s.label_cycle = cycle;
                s.num_labels = static_cast<int>(reachable_states_[static_cast<std::size_t>(cycle)].size()) * M;
            }
            s.lo.resize(static_cast<std::size_t>(K_));
            s.width.resize(static_cast<std::size_t>(K_));
            s.stride.resize(static_cast<std::size_t>(K_));
            std::int64_t cells = 1;
            for (int k = K_ - 1; k >= 0; --k) {
                const int R = lens_[static_cast<std::size_t>(k)];
                int lo = 0;
                int hi = R;
                if (opts_.delta != TrellisOptions::kUnlimited) {
                    const auto c = static_cast<int>(std::lround(static_cast<double>(consumed[static_cast<std::size_t>(k)]) * R / N));
                    lo = std::max(0, c - opts_.delta);
                    hi = std::min(R, c + opts_.delta);
                }
                s.lo[static_cast<std::size_t>(k)] = lo;
                s.width[static_cast<std::size_t>(k)] = hi - lo + 1;
                s.stride[static_cast<std::size_t>(k)] = static_cast<int>(cells);
                cells *= (hi - lo + 1);
            }
            if (cells > std::numeric_limits<int>::max() / 4) throw std::length_error("trellis stage too large");
            s.cell_size = static_cast<int>(cells);
            s.base = total_dense_;
            total_dense_ += static_cast<std::int64_t>(s.num_labels) * s.cell_size;
            layouts_.push_back(std::move(s));
            return static_cast<int>(layouts_.size()) - 1;
        };

        std::vector<int> consumed(static_cast<std::size_t>(K_));
        for (int l = 0; l < L; ++l) {
            const int off = enc_.codeword_offset(l);
            const int u = enc_.emissions(l);
            std::fill(consumed.begin(), consumed.end(), off);
            CycleStages cs{};
            cs.input = push(StageKind::Input, l, -1, -1, consumed);
            cs.landing = push(StageKind::Landing, l, off, -1, consumed);
            for (int c = 0; c < u; ++c) {
                for (int k = 0; k < K_; ++k) {
                    for (int j = 0; j < K_; ++j) consumed[static_cast<std::size_t>(j)] = off + c + (j < k ? 1 : 0);
                    push(StageKind::Ids, l, off + c, k, consumed);
                }
            }
            std::fill(consumed.begin(), consumed.end(), off + u);
            cs.output = push(StageKind::Output, l, off + u - 1, -1, consumed);
            cycles_.push_back(cs);
        }
        std::fill(consumed.begin(), consumed.end(), N);
        push(StageKind::Final, L, -1, -1, consumed);
        if (total_dense_ > (std::int64_t{1} << 31) - 1) throw std::length_error("trellis too large; use a drift bound");
    }

    /// Dense index of (label, pointers) in stage t, or -1 when a pointer is outside the window.
    [[nodiscard]] int dense_index(int t, int label, std::span<const int> ptr) const {
        const auto& s = layouts_[static_cast<std::size_t>(t)];
        int idx = 0;
        for (int k = 0; k < K_; ++k) {
            const int d = ptr[static_cast<std::size_t>(k)] - s.lo[static_cast<std::size_t>(k)];
            if (d < 0 || d >= s.width[static_cast<std::size_t>(k)]) return -1;
            idx += d * s.stride[static_cast<std::size_t>(k)];
        }
        return label * s.cell_size + idx;
    }

    void decode_pointers(int t, int cell, std::span<int> ptr) const {
        const auto& s = layouts_[static_cast<std::size_t>(t)];
        for (int k = 0; k < K_; ++k) {
            ptr[static_cast<std::size_t>(k)] =
                s.lo[static_cast<std::size_t>(k)] + (cell / s.stride[static_cast<std::size_t>(k)]) % s.width[static_cast<std::size_t>(k)];
        }
    }

    void add_edge(int from_t, int from_idx, int to_t, int to_idx, double w, EdgeKind kind, int label_trace, int label_pos) {
        if (!(w > 0.0) || to_idx < 0) return;
        const auto to_g = layouts_[static_cast<std::size_t>(to_t)].base + to_idx;
        reach_[static_cast<std::size_t>(to_g)] = 1;
        g_from_.push_back(static_cast<int>(layouts_[static_cast<std::size_t>(from_t)].base + from_idx));
        g_to_.push_back(static_cast<int>(to_g));
        g_logw_.push_back(std::log(w));
        g_kind_.push_back(kind);
        g_label_trace_.push_back(static_cast<std::int16_t>(label_trace));
        g_label_pos_.push_back(label_pos);
    }

    [[nodiscard]] Symbol codeword_at(int q_prev, int m, int cycle, int position) const {
        const int c = position - enc_.codeword_offset(cycle);
        auto x = enc_.output(q_prev, m, cycle, c);
        if (!opts_.offset.empty())
            x = static_cast<Symbol>((x + opts_.offset[static_cast<std::size_t>(position)]) % enc_.output_alphabet_size());
        return x;
    }

    void generate() {
        const int M = enc_.message_alphabet_size();
        const int S = enc_.output_alphabet_size();
        reach_.assign(static_cast<std::size_t>(total_dense_), 0);
        const std::size_t guess = static_cast<std::size_t>(total_dense_) * 2;
        g_from_.reserve(guess);
        g_to_.reserve(guess);
        g_logw_.reserve(guess);
        g_kind_.reserve(guess);
        g_label_trace_.reserve(guess);
        g_label_pos_.reserve(guess);

        std::vector<int> origin_ptr(static_cast<std::size_t>(K_), 0);
        const int origin_idx = dense_index(0, state_index_[0][static_cast<std::size_t>(enc_.initial_state())], origin_ptr);
        if (origin_idx < 0) throw std::logic_error("origin outside pointer window");
        reach_[static_cast<std::size_t>(layouts_[0].base + origin_idx)] = 1;

        const double w_del = params_.p_del;
        const double w_cor = params_.p_cor;
        const double w_sub = params_.p_sub / (S - 1);
        const double w_ins = params_.p_ins / S;

        std::vector<int> ptr(static_cast<std::size_t>(K_));
        const int T = static_cast<int>(layouts_.size());
        for (int t = 0; t < T; ++t) {
            const auto& s = layouts_[static_cast<std::size_t>(t)];
            if (s.info.kind == StageKind::Final) break;
            const int next_t = t + 1;
            const int l = s.info.cycle;
            const auto& states = reachable_states_[static_cast<std::size_t>(l)];
            const int total = s.num_labels * s.cell_size;
            for (int idx = 0; idx < total; ++idx) {
                if (!reach_[static_cast<std::size_t>(s.base + idx)]) continue;
                const int label = idx / s.cell_size;
                const int cell = idx % s.cell_size;
                decode_pointers(t, cell, ptr);
                switch (s.info.kind) {
                case StageKind::Input:
                    for (int m = 0; m < M; ++m)
                        add_edge(t, idx, next_t, dense_index(next_t, label * M + m, ptr), prior_.at(l, m),
                                 EdgeKind::Input, -1, -1);
                    break;
                case StageKind::Landing:
                    add_edge(t, idx, next_t, dense_index(next_t, label, ptr), 1.0, EdgeKind::Advance, -1, -1);
                    break;
                case StageKind::Ids: {
                    const int k = s.info.trace;
                    const int q_prev = states[static_cast<std::size_t>(label / M)];
                    const int m = label % M;
                    const Symbol x = codeword_at(q_prev, m, l, s.info.position);
                    const int p = ptr[static_cast<std::size_t>(k)];
                    add_edge(t, idx, next_t, dense_index(next_t, label, ptr), w_del, EdgeKind::Deletion, -1, -1);
                    if (p < lens_[static_cast<std::size_t>(k)]) {
                        const Symbol y = traces_[static_cast<std::size_t>(k)][static_cast<std::size_t>(p)];
                        ptr[static_cast<std::size_t>(k)] = p + 1;
                        add_edge(t, idx, next_t, dense_index(next_t, label, ptr), y == x ? w_cor : w_sub, EdgeKind::Match,
                                 k, p);
                        add_edge(t, idx, t, dense_index(t, label, ptr), w_ins, EdgeKind::Insertion, k, p);
                        ptr[static_cast<std::size_t>(k)] = p;
                    }
                    break;
                }
                case StageKind::Output: {
                    const int q_prev = states[static_cast<std::size_t>(label / M)];
                    const int m = label % M;
                    const int q_next = enc_.next_state(q_prev, m);
                    const int next_label = state_index_[static_cast<std::size_t>(l) + 1][static_cast<std::size_t>(q_next)];
                    add_edge(t, idx, next_t, dense_index(next_t, next_label, ptr), 1.0, EdgeKind::Advance, -1, -1);
                    break;
                }
                case StageKind::Final: break;
                }
            }
        }
    }

    Trellis finish() {
        const int T = static_cast<int>(layouts_.size());
        const auto& fin = layouts_.back();

        // Co-reachability: walk edges backwards; an edge's tail has all its out-edges
        // emitted after the edge itself, so reverse emission order is a valid sweep.
        std::vector<std::uint8_t> alive(static_cast<std::size_t>(total_dense_), 0);
        for (int label = 0; label < fin.num_labels; ++label) {
            const int idx = dense_index(T - 1, label, lens_);
            if (idx >= 0 && reach_[static_cast<std::size_t>(fin.base + idx)]) alive[static_cast<std::size_t>(fin.base + idx)] = 1;
        }
        for (std::size_t e = g_from_.size(); e-- > 0;)
            if (alive[static_cast<std::size_t>(g_to_[e])]) alive[static_cast<std::size_t>(g_from_[e])] = 1;

        const auto origin_g = static_cast<std::size_t>(layouts_[0].base +
                                                       dense_index(0, state_index_[0][static_cast<std::size_t>(enc_.initial_state())],
                                                                   std::vector<int>(static_cast<std::size_t>(K_), 0)));
        if (!alive[origin_g])
            throw InfeasibleError("no origin-to-absorbing path survives (drift bound " +
                                  (opts_.delta == TrellisOptions::kUnlimited ? std::string("unlimited") : std::to_string(opts_.delta)) +
                                  ")");

        // Keep the selected vertices and assign compact ids.
        std::vector<int> compact(static_cast<std::size_t>(total_dense_), -1);
        std::vector<int> dense_of;
        std::vector<int> stage_of;
        for (int t = 0; t < T; ++t) {
            const auto& s = layouts_[static_cast<std::size_t>(t)];
            const std::int64_t n = static_cast<std::int64_t>(s.num_labels) * s.cell_size;
            for (std::int64_t i = 0; i < n; ++i) {
                const auto g = static_cast<std::size_t>(s.base + i);
                const bool keep = reach_[g] && (alive[g] || opts_.keep_dead_ends);
                if (!keep) continue;
                compact[g] = static_cast<int>(dense_of.size());
                dense_of.push_back(static_cast<int>(g));
                stage_of.push_back(t);
            }
        }
        std::vector<int> ef;
        std::vector<int> et;
        std::vector<std::size_t> eid;
        ef.reserve(g_from_.size());
        et.reserve(g_from_.size());
        eid.reserve(g_from_.size());
        for (std::size_t e = 0; e < g_from_.size(); ++e) {
            const int a = compact[static_cast<std::size_t>(g_from_[e])];
            const int b = compact[static_cast<std::size_t>(g_to_[e])];
            if (a < 0 || b < 0) continue;
            ef.push_back(a);
            et.push_back(b);
            eid.push_back(e);
        }

        const int V = static_cast<int>(dense_of.size());
        const int origin_c = compact[origin_g];
        const auto order = detail::staged_kahn_order(V, stage_of, T, ef, et, origin_c);
        std::vector<int> rank(static_cast<std::size_t>(V));
        for (int i = 0; i < V; ++i) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;

        Trellis tr;
        tr.num_traces_ = K_;
        tr.message_length_ = enc_.message_length();
        tr.codeword_length_ = enc_.codeword_length();
        tr.message_alphabet_ = enc_.message_alphabet_size();
        tr.output_alphabet_ = enc_.output_alphabet_size();
        tr.delta_ = opts_.delta;
        tr.params_ = params_;
        tr.trace_lengths_ = lens_;
        tr.cycles_ = cycles_;
        tr.stages_.reserve(static_cast<std::size_t>(T));
        for (const auto& s : layouts_) tr.stages_.push_back(s.info);

        const int M = enc_.message_alphabet_size();
        tr.v_stage_.resize(static_cast<std::size_t>(V));
        tr.v_state_.resize(static_cast<std::size_t>(V));
        tr.v_msg_.resize(static_cast<std::size_t>(V));
        tr.v_sym_.resize(static_cast<std::size_t>(V));
        tr.v_ptr_.resize(static_cast<std::size_t>(V) * static_cast<std::size_t>(K_));
        std::vector<int> ptr(static_cast<std::size_t>(K_));
        for (int i = 0; i < V; ++i) {
            const int old = order[static_cast<std::size_t>(i)];
            const int t = stage_of[static_cast<std::size_t>(old)];
            const auto& s = layouts_[static_cast<std::size_t>(t)];
            const int idx = static_cast<int>(dense_of[static_cast<std::size_t>(old)] - s.base);
            const int label = idx / s.cell_size;
            decode_pointers(t, idx % s.cell_size, ptr);
            const auto& states = reachable_states_[static_cast<std::size_t>(s.info.cycle)];
            const auto vi = static_cast<std::size_t>(i);
            tr.v_stage_[vi] = t;
            if (s.label_cycle < 0) {
                tr.v_state_[vi] = states[static_cast<std::size_t>(label)];
                tr.v_msg_[vi] = -1;
                tr.v_sym_[vi] = -1;
            } else {
                const int q_prev = states[static_cast<std::size_t>(label / M)];
                const int m = label % M;
                tr.v_state_[vi] = enc_.next_state(q_prev, m);
                tr.v_msg_[vi] = static_cast<std::int16_t>(m);
                tr.v_sym_[vi] = static_cast<std::int16_t>(codeword_at(q_prev, m, s.info.cycle, s.info.position));
            }
            for (int k = 0; k < K_; ++k) tr.v_ptr_[vi * static_cast<std::size_t>(K_) + static_cast<std::size_t>(k)] = ptr[static_cast<std::size_t>(k)];
            if (s.info.kind == StageKind::Final && ptr == lens_) tr.absorbing_.push_back(i);
        }
        // stage ranges
        for (auto& st : tr.stages_) st.first_vertex = st.end_vertex = 0;
        {
            int v = 0;
            for (int t = 0; t < T; ++t) {
                tr.stages_[static_cast<std::size_t>(t)].first_vertex = v;
                while (v < V && tr.v_stage_[static_cast<std::size_t>(v)] == t) ++v;
                tr.stages_[static_cast<std::size_t>(t)].end_vertex = v;
            }
        }

        // Edges grouped by tail, in topological order of tails.
        const std::size_t E = ef.size();
        tr.in_begin_.assign(static_cast<std::size_t>(V) + 1, 0);
        for (std::size_t e = 0; e < E; ++e) ++tr.in_begin_[static_cast<std::size_t>(rank[static_cast<std::size_t>(et[e])]) + 1];
        for (int v = 0; v < V; ++v) tr.in_begin_[static_cast<std::size_t>(v) + 1] += tr.in_begin_[static_cast<std::size_t>(v)];
        tr.e_head_.resize(E);
        tr.e_tail_.resize(E);
        tr.e_logw_.resize(E);
        tr.e_kind_.resize(E);
        tr.e_label_trace_.resize(E);
        tr.e_label_pos_.resize(E);
        {
            std::vector<int> fill(tr.in_begin_.begin(), tr.in_begin_.end() - 1);
            for (std::size_t e = 0; e < E; ++e) {
                const int b = rank[static_cast<std::size_t>(et[e])];
                const auto slot = static_cast<std::size_t>(fill[static_cast<std::size_t>(b)]++);
                const std::size_t src = eid[e];
                tr.e_head_[slot] = rank[static_cast<std::size_t>(ef[e])];
                tr.e_tail_[slot] = b;
                tr.e_logw_[slot] = g_logw_[src];
                tr.e_kind_[slot] = g_kind_[src];
                tr.e_label_trace_[slot] = g_label_trace_[src];
                tr.e_label_pos_[slot] = g_label_pos_[src];
            }
        }
        tr.out_begin_.assign(static_cast<std::size_t>(V) + 1, 0);
        for (std::size_t e = 0; e < E; ++e) ++tr.out_begin_[static_cast<std::size_t>(tr.e_head_[e]) + 1];
        for (int v = 0; v < V; ++v) tr.out_begin_[static_cast<std::size_t>(v) + 1] += tr.out_begin_[static_cast<std::size_t>(v)];
        tr.out_edge_ids_.resize(E);
        {
            std::vector<int> fill(tr.out_begin_.begin(), tr.out_begin_.end() - 1);
            for (std::size_t e = 0; e < E; ++e)
                tr.out_edge_ids_[static_cast<std::size_t>(fill[static_cast<std::size_t>(tr.e_head_[e])]++)] = static_cast<int>(e);
        }
        return tr;
    }

    const FsmEncoder& enc_;
    std::span<const Sequence> traces_;
    IdsParams params_;
    const MessagePrior& prior_;
    const TrellisOptions& opts_;
    int K_ = 0;
    std::vector<int> lens_;

    std::vector<std::vector<int>> reachable_states_;
    std::vector<std::vector<int>> state_index_;
    std::vector<StageLayout> layouts_;
    std::vector<CycleStages> cycles_;
    std::int64_t total_dense_ = 0;

    std::vector<std::uint8_t> reach_;
    std::vector<int> g_from_;
    std::vector<int> g_to_;
    std::vector<double> g_logw_;
    std::vector<EdgeKind> g_kind_;
    std::vector<std::int16_t> g_label_trace_;
    std::vector<int> g_label_pos_;
};

/// Builds the multi-trace IDS trellis for `traces` observed from the codeword of `enc`.
/// Throws InfeasibleError when no origin-to-absorbing path survives.
inline Trellis build_trellis(const FsmEncoder& enc, std::span<const Sequence> traces, const IdsParams& params,
                             const MessagePrior& prior, const TrellisOptions& opts = {}) {
    return TrellisBuilder(enc, traces, params, prior, opts).build();
}

/// Topological order of the vertices, recomputed by a stage-bucketed breadth-first
/// traversal from the origin. Throws std::logic_error if a cycle is found.
inline std::vector<int> topological_order(const Trellis& tr) {
    std::vector<int> stage_of(static_cast<std::size_t>(tr.vertex_count()));
    for (int v = 0; v < tr.vertex_count(); ++v) stage_of[static_cast<std::size_t>(v)] = tr.stage_of(v);
    return detail::staged_kahn_order(tr.vertex_count(), stage_of, static_cast<int>(tr.stages().size()), tr.heads(),
                                     tr.tails(), tr.origin());
}

/// Product of edge weights along a chained path (1 for an empty path).
inline double path_weight(const Trellis& tr, std::span<const int> path) {
    double logw = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const int e = path[i];
        if (e < 0 || e >= tr.edge_count()) throw std::out_of_range("edge id out of range");
        if (i > 0 && tr.head(e) != tr.tail(path[i - 1])) throw std::invalid_argument("path edges are not chained");
        logw += tr.log_weight(e);
    }
    return std::exp(logw);
}

inline const char* to_string(StageKind k) {
    switch (k) {
    case StageKind::Input: return "input";
    case StageKind::Landing: return "landing";
    case StageKind::Ids: return "ids";
    case StageKind::Output: return "output";
    case StageKind::Final: return "final";
    }
    return "?";
}

inline const char* to_string(EdgeKind k) {
    switch (k) {
    case EdgeKind::Input: return "input";
    case EdgeKind::Advance: return "advance";
    case EdgeKind::Deletion: return "del";
    case EdgeKind::Match: return "match";
    case EdgeKind::Insertion: return "ins";
    }
    return "?";
}

/// Plain-text DAG listing, one vertex or edge per line. Pointers are printed 1-based,
/// message/codeword symbols as indices with '*' for an empty buffer.
///
///   V <id> stage=<t> kind=<kind> q=<state> p=<p1,..,pK> m=<m|*> x=<x|*> [absorbing]
///   E <head> <tail> w=<weight> kind=<kind> label=<k,j|->
inline void write_dag(std::ostream& os, const Trellis& tr) {
    os << "# trellis K=" << tr.num_traces() << " L=" << tr.message_length() << " N=" << tr.codeword_length()
       << " vertices=" << tr.vertex_count() << " edges=" << tr.edge_count() << "\n";
    for (int v = 0; v < tr.vertex_count(); ++v) {
        os << "V " << v << " stage=" << tr.stage_of(v) << " kind=" << to_string(tr.stage(tr.stage_of(v)).kind)
           << " q=" << tr.state(v) << " p=";
        for (int k = 0; k < tr.num_traces(); ++k) os << (k ? "," : "") << tr.pointer(v, k) + 1;
        os << " m=";
        if (tr.message(v) < 0) os << '*'; else os << tr.message(v);
        os << " x=";
        if (tr.codeword_symbol(v) < 0) os << '*'; else os << tr.codeword_symbol(v);
        if (tr.is_absorbing(v)) os << " absorbing";
        os << "\n";
    }
    for (int e = 0; e < tr.edge_count(); ++e) {
        os << "E " << tr.head(e) << " " << tr.tail(e) << " w=" << tr.weight(e) << " kind=" << to_string(tr.kind(e))
           << " label=";
        const auto lab = tr.label(e);
        if (lab.labeled()) os << lab.trace + 1 << "," << lab.position + 1; else os << '-';
        os << "\n";
    }
}

} // namespace idstr
