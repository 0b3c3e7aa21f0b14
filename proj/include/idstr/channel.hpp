#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "idstr/alphabet.hpp"
#include "idstr/random.hpp"

namespace idstr {

/// Probabilities of the four IDS events. Stored in the linear domain.
struct IdsParams {
    double p_ins = 0.0;
    double p_del = 0.0;
    double p_sub = 0.0;
    double p_cor = 1.0;

    static constexpr double kSumTolerance = 1e-12;

    /// Builds parameters from the three error rates; p_cor takes the remainder.
    static IdsParams from_error_rates(double ins, double del, double sub) {
        IdsParams p{ins, del, sub, 1.0 - ins - del - sub};
        p.validate();
        return p;
    }

    /// Rates measured on the clustered nanopore dataset.
    static IdsParams nanopore() { return from_error_rates(0.017, 0.02, 0.022); }

    void validate() const {
        auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!in_unit(p_ins) || !in_unit(p_del) || !in_unit(p_sub) || !in_unit(p_cor))
            throw std::invalid_argument("IDS probabilities must lie in [0,1]: " + to_string());
        if (std::abs(p_ins + p_del + p_sub + p_cor - 1.0) > kSumTolerance)
            throw std::invalid_argument("IDS probabilities must sum to 1: " + to_string());
        if (p_ins >= 1.0)
            throw std::invalid_argument("p_ins must be < 1");
    }

    [[nodiscard]] std::string to_string() const {
        std::ostringstream os;
        os.precision(6);
        os << "(p_ins=" << p_ins << ", p_del=" << p_del << ", p_sub=" << p_sub << ", p_cor=" << p_cor << ")";
        return os.str();
    }

    [[nodiscard]] double expected_trace_length(std::size_t n) const {
        return static_cast<double>(n) * (1.0 - p_del) / (1.0 - p_ins);
    }
};

/// Passes x through the IDS channel once.
///
/// Starting at input index i = 0, one of the four events is drawn per step until
/// every input symbol has been consumed. Insertions draw uniformly over the
/// alphabet and substitutions uniformly over the alphabet minus the current input.
/// The loop stops as soon as the last input is consumed, so a trace never ends with
/// insertions generated after the final input symbol.
inline Sequence transmit(const Sequence& x, const IdsParams& params, int alphabet_size, Rng& rng) {
    params.validate();
    if (alphabet_size < 2)
        throw std::invalid_argument("alphabet size must be >= 2");
    const double t_ins = params.p_ins;
    const double t_del = t_ins + params.p_del;
    const double t_sub = t_del + params.p_sub;
    const auto q = static_cast<std::uint64_t>(alphabet_size);

    Sequence y;
    y.reserve(x.size() + x.size() / 8 + 4);
    std::size_t i = 0;
    while (i < x.size()) {
        const double u = rng.uniform();
        if (u < t_ins) {
            y.push_back(static_cast<Symbol>(rng.below(q)));
        } else if (u < t_del) {
            ++i;
        } else if (u < t_sub) {
            auto r = static_cast<Symbol>(rng.below(q - 1));
            y.push_back(r >= x[i] ? static_cast<Symbol>(r + 1) : r);
            ++i;
        } else {
            y.push_back(x[i]);
            ++i;
        }
    }
    return y;
}

inline Sequence transmit(const Sequence& x, const IdsParams& params, int alphabet_size, std::uint64_t seed) {
    Rng rng(seed);
    return transmit(x, params, alphabet_size, rng);
}

/// Event counts of one minimum-edit-cost alignment.
struct EditCounts {
    std::uint64_t insertions = 0;
    std::uint64_t deletions = 0;
    std::uint64_t substitutions = 0;
    std::uint64_t matches = 0;

    EditCounts& operator+=(const EditCounts& o) {
        insertions += o.insertions;
        deletions += o.deletions;
        substitutions += o.substitutions;
        matches += o.matches;
        return *this;
    }
    [[nodiscard]] std::uint64_t total() const { return insertions + deletions + substitutions + matches; }
    [[nodiscard]] std::uint64_t edits() const { return insertions + deletions + substitutions; }
};

/// Needleman-Wunsch with unit insert/delete/substitute cost. The backtrace prefers
/// match/substitute, then deletion (input symbol absent from the trace), then insertion.
inline EditCounts align_counts(const Sequence& input, const Sequence& trace) {
    const std::size_t n = input.size();
    const std::size_t m = trace.size();
    const std::size_t w = m + 1;
    std::vector<std::uint32_t> d((n + 1) * w);
    for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<std::uint32_t>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        d[i * w] = static_cast<std::uint32_t>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            std::uint32_t diag = d[(i - 1) * w + j - 1] + (input[i - 1] == trace[j - 1] ? 0u : 1u);
            std::uint32_t del = d[(i - 1) * w + j] + 1;
            std::uint32_t ins = d[i * w + j - 1] + 1;
            d[i * w + j] = std::min(diag, std::min(del, ins));
        }
    }

    EditCounts c;
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        const std::uint32_t here = d[i * w + j];
        if (i > 0 && j > 0) {
            const bool same = input[i - 1] == trace[j - 1];
            if (here == d[(i - 1) * w + j - 1] + (same ? 0u : 1u)) {
                (same ? c.matches : c.substitutions) += 1;
                --i;
                --j;
                continue;
            }
        }
        if (i > 0 && here == d[(i - 1) * w + j] + 1) {
            ++c.deletions;
            --i;
        } else {
            ++c.insertions;
            --j;
        }
    }
    return c;
}

struct ExpectedCounts {
    double ins = 0, del = 0, sub = 0, cor = 0;
};

/// Posterior expected event counts for one (input, trace) pair under `p`, summed
/// over every channel path. Returns false if the pair has zero likelihood.
inline bool expected_counts(const Sequence& x, const Sequence& y, const IdsParams& p, int q, ExpectedCounts& out) {
    const std::size_t n = x.size(), m = y.size(), w = m + 1;
    const double wi = p.p_ins / q, wd = p.p_del, ws = p.p_sub / (q - 1), wc = p.p_cor;
    auto step = [&](std::size_t i, std::size_t j) { return x[i] == y[j] ? wc : ws; };

    // Row i holds lattice points with i inputs consumed; each row is rescaled by its max.
    std::vector<double> F((n + 1) * w, 0.0), B((n + 1) * w, 0.0), sf(n + 1, 0.0), sb(n + 1, 0.0);
    auto rescale = [&](std::vector<double>& a, std::vector<double>& sc, std::size_t i, double prev) {
        double hi = 0;
        for (std::size_t j = 0; j <= m; ++j) hi = std::max(hi, a[i * w + j]);
        if (hi == 0) return false;
        for (std::size_t j = 0; j <= m; ++j) a[i * w + j] /= hi;
        sc[i] = prev + std::log(hi);
        return true;
    };

    F[0] = 1.0;
    for (std::size_t i = 0; i <= n; ++i) {
        if (i > 0) {
            for (std::size_t j = 0; j <= m; ++j) {
                double v = F[(i - 1) * w + j] * wd;
                if (j > 0) v += F[(i - 1) * w + j - 1] * step(i - 1, j - 1);
                F[i * w + j] = v;
            }
        }
        if (i < n)
            for (std::size_t j = 1; j <= m; ++j) F[i * w + j] += F[i * w + j - 1] * wi;
        if (!rescale(F, sf, i, i > 0 ? sf[i - 1] : 0.0)) return false;
    }
    if (F[n * w + m] == 0) return false;
    const double logz = sf[n] + std::log(F[n * w + m]);

    B[n * w + m] = 1.0;
    if (!rescale(B, sb, n, 0.0)) return false;
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m + 1; j-- > 0;) {
            double v = B[(i + 1) * w + j] * wd;
            if (j < m) v += B[(i + 1) * w + j + 1] * step(i, j) + B[i * w + j + 1] * wi;
            B[i * w + j] = v;
        }
        if (!rescale(B, sb, i, sb[i + 1])) return false;
    }

    for (std::size_t i = 0; i < n; ++i) {
        double del = 0, sub = 0, cor = 0, ins = 0;
        for (std::size_t j = 0; j <= m; ++j) {
            const double f = F[i * w + j];
            if (f == 0) continue;
            del += f * B[(i + 1) * w + j];
            if (j < m) {
                (x[i] == y[j] ? cor : sub) += f * B[(i + 1) * w + j + 1];
                ins += f * B[i * w + j + 1];
            }
        }
        const double down = std::exp(sf[i] + sb[i + 1] - logz), across = std::exp(sf[i] + sb[i] - logz);
        out.del += del * wd * down;
        out.sub += sub * ws * down;
        out.cor += cor * wc * down;
        out.ins += ins * wi * across;
    }
    return true;
}

/// Maximum-likelihood IDS parameters from (input, trace) pairs. Alignment event
/// counts seed an EM loop over all channel paths of each pair.
inline IdsParams estimate_params(const std::vector<std::pair<Sequence, Sequence>>& pairs, int alphabet_size = 4,
                                 int max_iterations = 100, double tolerance = 1e-7) {
    if (pairs.empty())
        throw std::invalid_argument("estimate_params needs at least one (input, trace) pair");
    if (alphabet_size < 2)
        throw std::invalid_argument("alphabet size must be >= 2");
    EditCounts total;
    for (const auto& [x, y] : pairs) {
        if (x.empty())
            throw std::invalid_argument("estimate_params: empty input sequence");
        total += align_counts(x, y);
    }
    auto normalize = [](double i, double d, double s, double c) {
        const double n = i + d + s + c;
        IdsParams p{i / n, d / n, s / n, 0.0};
        p.p_cor = std::max(0.0, 1.0 - p.p_ins - p.p_del - p.p_sub);
        return p;
    };
    IdsParams p = normalize(static_cast<double>(total.insertions), static_cast<double>(total.deletions),
                            static_cast<double>(total.substitutions), static_cast<double>(total.matches));
    for (int it = 0; it < max_iterations; ++it) {
        ExpectedCounts acc;
        for (const auto& [x, y] : pairs) {
            ExpectedCounts c;
            if (expected_counts(x, y, p, alphabet_size, c)) {
                acc.ins += c.ins;
                acc.del += c.del;
                acc.sub += c.sub;
                acc.cor += c.cor;
            }
        }
        const auto next = normalize(acc.ins, acc.del, acc.sub, acc.cor);
        const double change = std::max({std::abs(next.p_ins - p.p_ins), std::abs(next.p_del - p.p_del),
                                         std::abs(next.p_sub - p.p_sub)});
        p = next;
        if (change < tolerance) break;
    }
    return p;
}

} // namespace idstr
