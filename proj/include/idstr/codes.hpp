#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "idstr/alphabet.hpp"
#include "idstr/errors.hpp"

namespace idstr {

/// Deterministic finite-state inner encoder.
///
/// Step l (0-based) consumes message symbol m in state q, moves to next_state(q, m)
/// and emits emissions(l) codeword symbols, selected per step from the base output
/// table of (q, m). Next-state and base outputs are time invariant; the per-step
/// selection carries the time variation (marker repeats, puncturing).
class FsmEncoder {
public:
    struct Transition {
        int next_state;
        std::span<const Symbol> base_outputs;
    };

    FsmEncoder(std::string name, int num_states, int message_alphabet, int output_alphabet,
               std::vector<int> next_state, std::vector<Symbol> base_outputs, int base_width,
               std::vector<std::vector<int>> kept)
        : name_(std::move(name)),
          num_states_(num_states),
          message_alphabet_(message_alphabet),
          output_alphabet_(output_alphabet),
          base_width_(base_width),
          next_state_(std::move(next_state)),
          base_outputs_(std::move(base_outputs)),
          kept_(std::move(kept)) {
        if (num_states_ < 1 || message_alphabet_ < 2 || output_alphabet_ < 2 || base_width_ < 1)
            throw std::invalid_argument("invalid encoder dimensions");
        const auto cells = static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(message_alphabet_);
        if (next_state_.size() != cells || base_outputs_.size() != cells * static_cast<std::size_t>(base_width_))
            throw std::invalid_argument("encoder tables have inconsistent sizes");
        for (int s : next_state_)
            if (s < 0 || s >= num_states_) throw std::invalid_argument("next state out of range");
        for (Symbol x : base_outputs_)
            if (x >= output_alphabet_) throw std::invalid_argument("encoder output symbol out of range");
        if (kept_.empty()) throw std::invalid_argument("encoder must have at least one step");
        offsets_.reserve(kept_.size() + 1);
        offsets_.push_back(0);
        for (const auto& k : kept_) {
            if (k.empty()) throw std::invalid_argument("every encoder step must emit at least one symbol");
            for (int j : k)
                if (j < 0 || j >= base_width_) throw std::invalid_argument("kept output index out of range");
            offsets_.push_back(offsets_.back() + static_cast<int>(k.size()));
        }
    }

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int num_states() const noexcept { return num_states_; }
    [[nodiscard]] int initial_state() const noexcept { return 0; }
    [[nodiscard]] int message_alphabet_size() const noexcept { return message_alphabet_; }
    [[nodiscard]] int output_alphabet_size() const noexcept { return output_alphabet_; }
    [[nodiscard]] int message_length() const noexcept { return static_cast<int>(kept_.size()); }
    [[nodiscard]] int codeword_length() const noexcept { return offsets_.back(); }
    [[nodiscard]] int emissions(int step) const { return static_cast<int>(kept_.at(step).size()); }
    /// Index of the first codeword symbol emitted at `step`.
    [[nodiscard]] int codeword_offset(int step) const { return offsets_.at(step); }
    [[nodiscard]] int max_emissions() const noexcept {
        std::size_t u = 0;
        for (const auto& k : kept_) u = std::max(u, k.size());
        return static_cast<int>(u);
    }

    [[nodiscard]] int next_state(int q, int m) const noexcept { return next_state_[cell(q, m)]; }

    /// The j-th symbol emitted at `step` from state q on input m.
    [[nodiscard]] Symbol output(int q, int m, int step, int j) const noexcept {
        return base_outputs_[cell(q, m) * static_cast<std::size_t>(base_width_) +
                             static_cast<std::size_t>(kept_[static_cast<std::size_t>(step)][static_cast<std::size_t>(j)])];
    }

    [[nodiscard]] Transition transition(int q, int m) const noexcept {
        return {next_state(q, m),
                std::span<const Symbol>(base_outputs_).subspan(cell(q, m) * static_cast<std::size_t>(base_width_),
                                                               static_cast<std::size_t>(base_width_))};
    }

    /// Code rate L log|M| / (N log|Sigma|).
    [[nodiscard]] double rate() const noexcept {
        return message_length() * std::log(message_alphabet_) / (codeword_length() * std::log(output_alphabet_));
    }

    [[nodiscard]] Sequence encode(const Sequence& message) const {
        if (static_cast<int>(message.size()) != message_length())
            throw std::invalid_argument("message length " + std::to_string(message.size()) + " != encoder L " +
                                        std::to_string(message_length()));
        Sequence x;
        x.reserve(static_cast<std::size_t>(codeword_length()));
        int q = initial_state();
        for (int l = 0; l < message_length(); ++l) {
            const int m = message[static_cast<std::size_t>(l)];
            if (m >= message_alphabet_) throw std::invalid_argument("message symbol out of range");
            for (int j = 0; j < emissions(l); ++j) x.push_back(output(q, m, l, j));
            q = next_state(q, m);
        }
        return x;
    }

    /// Recovers the message by walking the FSM and picking, at every step, the input whose
    /// emitted symbols match the codeword. Throws if a step matches no input or several.
    [[nodiscard]] Sequence invert_codeword(const Sequence& codeword) const {
        if (static_cast<int>(codeword.size()) != codeword_length())
            throw std::invalid_argument("codeword length does not match encoder N");
        Sequence m(static_cast<std::size_t>(message_length()));
        int q = initial_state();
        for (int l = 0; l < message_length(); ++l) {
            int found = -1;
            for (int c = 0; c < message_alphabet_; ++c) {
                bool ok = true;
                for (int j = 0; j < emissions(l) && ok; ++j)
                    ok = output(q, c, l, j) == codeword[static_cast<std::size_t>(codeword_offset(l) + j)];
                if (!ok) continue;
                if (found >= 0) throw std::invalid_argument("step " + std::to_string(l) + " is not invertible");
                found = c;
            }
            if (found < 0) throw std::invalid_argument("codeword is not reachable at step " + std::to_string(l));
            m[static_cast<std::size_t>(l)] = static_cast<Symbol>(found);
            q = next_state(q, found);
        }
        return m;
    }

private:
    [[nodiscard]] std::size_t cell(int q, int m) const noexcept {
        return static_cast<std::size_t>(q) * static_cast<std::size_t>(message_alphabet_) + static_cast<std::size_t>(m);
    }

    std::string name_;
    int num_states_;
    int message_alphabet_;
    int output_alphabet_;
    int base_width_;
    std::vector<int> next_state_;
    std::vector<Symbol> base_outputs_;
    std::vector<std::vector<int>> kept_;
    std::vector<int> offsets_;
};

/// Single-state encoder with one output per input, equal to the input.
inline FsmEncoder identity_encoder(int n, int alphabet_size = 4) {
    if (n < 1) throw std::invalid_argument("identity encoder needs N >= 1");
    std::vector<Symbol> out(static_cast<std::size_t>(alphabet_size));
    for (int m = 0; m < alphabet_size; ++m) out[static_cast<std::size_t>(m)] = static_cast<Symbol>(m);
    return FsmEncoder("identity:" + std::to_string(n), 1, alphabet_size, alphabet_size,
                      std::vector<int>(static_cast<std::size_t>(alphabet_size), 0), std::move(out), 1,
                      std::vector<std::vector<int>>(static_cast<std::size_t>(n), std::vector<int>{0}));
}

/// 1-based codeword positions n with x_{n+1} = x_n, i.e. n = floor(iN/(r+1)) for
/// i = 1..r. Duplicates and positions outside 1..N-1 are dropped.
inline std::vector<int> mr_marker_positions(int n, int r) {
    std::vector<int> pos;
    for (int i = 1; i <= r; ++i) {
        const int p = static_cast<int>((static_cast<long long>(i) * n) / (r + 1));
        if (p < 1 || p > n - 1) continue;
        if (!pos.empty() && pos.back() == p) continue;
        pos.push_back(p);
    }
    return pos;
}

/// Marker-repeat code: copies the message and repeats the symbol at every marker position.
inline FsmEncoder mr_encoder(int n, int r, int alphabet_size = 4) {
    if (n < 1 || r < 0 || r >= n)
        throw std::invalid_argument("MR code needs 0 <= r < N (got N=" + std::to_string(n) + ", r=" + std::to_string(r) + ")");
    std::vector<bool> repeat(static_cast<std::size_t>(n) + 1, false); // 1-based: x_p copies x_{p-1}
    for (int p : mr_marker_positions(n, r)) repeat[static_cast<std::size_t>(p) + 1] = true;

    std::vector<std::vector<int>> kept;
    for (int p = 1; p <= n; ++p) {
        if (repeat[static_cast<std::size_t>(p)]) {
            kept.back().push_back(static_cast<int>(kept.back().size()));
        } else {
            kept.push_back({0});
        }
    }
    std::size_t width = 1;
    for (const auto& k : kept) width = std::max(width, k.size());
    std::vector<Symbol> out;
    for (int m = 0; m < alphabet_size; ++m)
        for (std::size_t j = 0; j < width; ++j) out.push_back(static_cast<Symbol>(m));
    return FsmEncoder("mr:" + std::to_string(n) + ":" + std::to_string(r), 1, alphabet_size, alphabet_size,
                      std::vector<int>(static_cast<std::size_t>(alphabet_size), 0), std::move(out),
                      static_cast<int>(width), std::move(kept));
}

namespace gf4 {
// Elements 0, 1, w, w^2 encoded as 0, 1, 2, 3; addition is XOR of the 2-bit representation.
inline constexpr std::array<std::array<Symbol, 4>, 4> kMul{{
    {0, 0, 0, 0},
    {0, 1, 2, 3},
    {0, 2, 3, 1},
    {0, 3, 1, 2},
}};
constexpr Symbol add(Symbol a, Symbol b) noexcept { return static_cast<Symbol>(a ^ b); }
constexpr Symbol mul(Symbol a, Symbol b) noexcept { return kMul[a][b]; }
} // namespace gf4

/// Two generator polynomials over GF(4), coefficient d multiplying the input d steps back.
struct CcGenerators {
    std::vector<Symbol> g1;
    std::vector<Symbol> g2;

    /// Fixed default pairs for memory 3..5. Both taps at delay 0 are nonzero, so every
    /// step that emits at least one symbol determines its input given the state.
    static CcGenerators defaults(int memory) {
        switch (memory) {
        case 3: return {{1, 1, 2, 3}, {1, 2, 3, 1}};
        case 4: return {{1, 1, 2, 3, 1}, {1, 2, 3, 1, 2}};
        case 5: return {{1, 1, 2, 3, 1, 3}, {1, 2, 3, 1, 2, 1}};
        default: throw std::invalid_argument("CC memory must be in 3..5");
        }
    }
};

/// Rate-1/2 quaternary convolutional encoder with a puncturing schedule.
///
/// `keep_mask` is applied periodically over the serialized output stream
/// (two symbols per step); `true` keeps the symbol. Steps whose outputs are all
/// punctured are rejected.
inline FsmEncoder cc_encoder(int memory, const CcGenerators& gens, const std::vector<bool>& keep_mask,
                             int message_length) {
    if (memory < 3 || memory > 5) throw std::invalid_argument("CC memory must be in 3..5");
    if (gens.g1.size() != static_cast<std::size_t>(memory) + 1 || gens.g2.size() != static_cast<std::size_t>(memory) + 1)
        throw std::invalid_argument("CC generators need memory+1 coefficients each");
    for (Symbol c : gens.g1)
        if (c > 3) throw std::invalid_argument("CC generator coefficient outside GF(4)");
    for (Symbol c : gens.g2)
        if (c > 3) throw std::invalid_argument("CC generator coefficient outside GF(4)");
    if (keep_mask.empty()) throw std::invalid_argument("puncture pattern must be nonempty");
    if (message_length < 1) throw std::invalid_argument("CC message length must be >= 1");

    const int states = 1 << (2 * memory);
    std::vector<int> next(static_cast<std::size_t>(states) * 4);
    std::vector<Symbol> out(static_cast<std::size_t>(states) * 4 * 2);
    for (int q = 0; q < states; ++q) {
        for (int m = 0; m < 4; ++m) {
            // state digit d-1 (base 4) holds the input d steps back
            Symbol o1 = gf4::mul(gens.g1[0], static_cast<Symbol>(m));
            Symbol o2 = gf4::mul(gens.g2[0], static_cast<Symbol>(m));
            for (int d = 1; d <= memory; ++d) {
                auto s = static_cast<Symbol>((q >> (2 * (d - 1))) & 3);
                o1 = gf4::add(o1, gf4::mul(gens.g1[static_cast<std::size_t>(d)], s));
                o2 = gf4::add(o2, gf4::mul(gens.g2[static_cast<std::size_t>(d)], s));
            }
            const auto c = static_cast<std::size_t>(q * 4 + m);
            next[c] = ((q << 2) | m) & (states - 1);
            out[2 * c] = o1;
            out[2 * c + 1] = o2;
        }
    }

    std::vector<std::vector<int>> kept(static_cast<std::size_t>(message_length));
    for (int l = 0; l < message_length; ++l) {
        for (int j = 0; j < 2; ++j)
            if (keep_mask[static_cast<std::size_t>(2 * l + j) % keep_mask.size()])
                kept[static_cast<std::size_t>(l)].push_back(j);
        if (kept[static_cast<std::size_t>(l)].empty())
            throw std::invalid_argument("puncture pattern deletes every output of step " + std::to_string(l));
    }
    std::string mask_str;
    for (bool b : keep_mask) mask_str.push_back(b ? '1' : '0');
    return FsmEncoder("cc:" + std::to_string(memory) + ":" + std::to_string(message_length) + ":" + mask_str, states, 4, 4,
                      std::move(next), std::move(out), 2, std::move(kept));
}

/// Puncture mask over 2L outputs that removes 2L-N second outputs spread evenly,
/// so the code has exactly N symbols. Requires L <= N <= 2L.
inline std::vector<bool> rate_matching_mask(int message_length, int codeword_length) {
    const int drop = 2 * message_length - codeword_length;
    if (drop < 0 || drop > message_length)
        throw std::invalid_argument("CC rate matching needs L <= N <= 2L");
    std::vector<bool> mask(static_cast<std::size_t>(2 * message_length), true);
    for (int i = 0; i < drop; ++i) {
        const auto step = static_cast<std::size_t>((2LL * i + 1) * message_length / (2LL * drop));
        mask[2 * step + 1] = false;
    }
    return mask;
}

inline FsmEncoder cc_encoder(int memory, int message_length, int codeword_length) {
    auto e = cc_encoder(memory, CcGenerators::defaults(memory), rate_matching_mask(message_length, codeword_length),
                        message_length);
    return e;
}

/// Parses `identity:N`, `mr:N:r`, `cc:memory:rate` or `cc:memory:L/N[:mask]`.
/// A decimal CC rate assumes N = 110.
inline FsmEncoder parse_encoder(std::string_view spec, int alphabet_size = 4) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : spec) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    auto to_int = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            int v = std::stoi(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw FormatError("bad integer '" + s + "' in encoder spec '" + std::string(spec) + "'");
        }
    };
    try {
        if (parts[0] == "identity" && parts.size() == 2) return identity_encoder(to_int(parts[1]), alphabet_size);
        if (parts[0] == "mr" && parts.size() == 3) return mr_encoder(to_int(parts[1]), to_int(parts[2]), alphabet_size);
        if (parts[0] == "cc" && (parts.size() == 3 || parts.size() == 4)) {
            if (alphabet_size != 4) throw FormatError("CC codes are quaternary");
            const int memory = to_int(parts[1]);
            int l = 0;
            int n = 110;
            if (auto slash = parts[2].find('/'); slash != std::string::npos) {
                l = to_int(parts[2].substr(0, slash));
                n = to_int(parts[2].substr(slash + 1));
            } else {
                double r = 0;
                try {
                    r = std::stod(parts[2]);
                } catch (const std::exception&) {
                    throw FormatError("bad CC rate '" + parts[2] + "'");
                }
                l = static_cast<int>(std::lround(r * n));
            }
            if (parts.size() == 4) {
                std::vector<bool> mask;
                for (char c : parts[3]) {
                    if (c != '0' && c != '1') throw FormatError("puncture mask must be 0/1 characters");
                    mask.push_back(c == '1');
                }
                auto e = cc_encoder(memory, CcGenerators::defaults(memory), mask, l);
                if (e.codeword_length() != n)
                    throw FormatError("puncture mask yields N=" + std::to_string(e.codeword_length()) + ", expected " +
                                      std::to_string(n));
                return e;
            }
            return cc_encoder(memory, l, n);
        }
    } catch (const std::invalid_argument& e) {
        throw FormatError("encoder spec '" + std::string(spec) + "': " + e.what());
    }
    throw FormatError("unknown encoder spec '" + std::string(spec) + "' (expected identity:N, mr:N:r or cc:memory:rate)");
}

/// Coordinate-wise addition mod |Sigma|.
inline Sequence scramble(const Sequence& x, const Sequence& z, int alphabet_size) {
    if (x.size() != z.size()) throw std::invalid_argument("scramble: length mismatch");
    Sequence out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<Symbol>((x[i] + z[i]) % alphabet_size);
    return out;
}

/// Coordinate-wise subtraction mod |Sigma|; inverse of scramble.
inline Sequence unscramble(const Sequence& x, const Sequence& z, int alphabet_size) {
    if (x.size() != z.size()) throw std::invalid_argument("unscramble: length mismatch");
    Sequence out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = static_cast<Symbol>((x[i] + alphabet_size - z[i] % alphabet_size) % alphabet_size);
    return out;
}

} // namespace idstr
