#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "idstr/alphabet.hpp"
#include "idstr/bcjr.hpp"
#include "idstr/bmala.hpp"
#include "idstr/channel.hpp"
#include "idstr/codes.hpp"
#include "idstr/errors.hpp"
#include "idstr/random.hpp"
#include "idstr/trellis.hpp"
#include "idstr/trellis_bma.hpp"

namespace idstr {

// ---------------------------------------------------------------- metrics

inline double hamming_rate(const Sequence& estimate, const Sequence& truth) {
    if (estimate.size() != truth.size())
        throw std::invalid_argument("hamming_rate: length mismatch (" + std::to_string(estimate.size()) + " vs " +
                                    std::to_string(truth.size()) + ")");
    if (truth.empty()) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) diff += estimate[i] != truth[i];
    return static_cast<double>(diff) / static_cast<double>(truth.size());
}

inline constexpr double kPosteriorFloor = 1e-12;

/// Mean of -log2 U_l(m_l) over positions. Probabilities below `floor` are raised to it;
/// floor = 0 turns a zero-probability truth symbol into an error instead.
inline double symbolwise_cross_entropy(const PosteriorTable& post, const Sequence& truth, double floor = kPosteriorFloor) {
    if (post.length() != static_cast<int>(truth.size()))
        throw std::invalid_argument("cross entropy: posterior length " + std::to_string(post.length()) +
                                    " != truth length " + std::to_string(truth.size()));
    if (truth.empty()) return 0.0;
    double h = 0;
    for (int l = 0; l < post.length(); ++l) {
        const Symbol m = truth[static_cast<std::size_t>(l)];
        if (m >= post.alphabet_size()) throw std::invalid_argument("cross entropy: truth symbol outside alphabet");
        const double p = std::max(post.at(l, m), floor);
        if (p <= 0) throw std::domain_error("cross entropy: truth symbol has zero probability at position " + std::to_string(l));
        h -= std::log2(p);
    }
    return h / static_cast<double>(truth.size());
}

/// (log2|M| - H) R, floored at 0; with |M| = 4 this is (2 - H) R bits per base.
inline double bcjr_once_rate(double H, double R, int message_alphabet = 4) {
    if (!(R > 0 && R <= 1)) throw std::invalid_argument("code rate must lie in (0, 1]");
    return std::max(0.0, (std::log2(static_cast<double>(message_alphabet)) - H) * R);
}

/// Rate of a q-ary symmetric channel with symbol error probability e, times R.
/// Used to turn a hard-decision error rate into an achievable rate.
inline double hard_decision_rate(double e, double R, int q = 4) {
    if (!(e >= 0 && e <= 1)) throw std::invalid_argument("error rate must lie in [0, 1]");
    auto xlog = [](double p) { return p > 0 ? p * std::log2(p) : 0.0; };
    const double c = std::log2(static_cast<double>(q)) + xlog(1 - e) + xlog(e) - e * std::log2(static_cast<double>(q - 1));
    return std::max(0.0, c) * R;
}

/// Expected rate when the trace count K is itself random.
inline double air_random_K(const std::map<int, double>& rate_by_K, const std::map<int, double>& dist) {
    double total = 0, mass = 0;
    for (const auto& [K, p] : dist) {
        if (p < 0) throw std::invalid_argument("negative probability for K=" + std::to_string(K));
        if (p == 0) continue;
        const auto it = rate_by_K.find(K);
        if (it == rate_by_K.end()) throw std::out_of_range("no rate computed for K=" + std::to_string(K));
        total += p * it->second;
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-9) throw std::invalid_argument("K distribution must sum to 1");
    return total;
}

// ---------------------------------------------------------------- datasets

struct Cluster {
    Sequence center;
    std::vector<Sequence> traces;
};

namespace detail {

inline bool is_separator(const std::string& line) { return !line.empty() && line.front() == '='; }

inline std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

inline Sequence parse_strand(const std::string& line, const Alphabet& alpha, const std::string& path, std::size_t lineno) {
    Sequence s;
    s.reserve(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (!alpha.contains(line[i]))
            throw FormatError(path + ":" + std::to_string(lineno) + ": invalid character '" + std::string(1, line[i]) +
                              "' at column " + std::to_string(i + 1));
        s.push_back(alpha.index_of(line[i]));
    }
    return s;
}

} // namespace detail

/// Reads a centers file (one strand per line) and a clusters file whose trace groups are
/// delimited by lines starting with '='. If the clusters file opens with a separator, every
/// separator starts a group (so empty groups are possible); otherwise separators end groups.
/// Group i pairs with center i. An empty clusters file yields no clusters and a warning.
inline std::vector<Cluster> load_dataset(const std::string& centers_path, const std::string& clusters_path,
                                         std::vector<std::string>* warnings = nullptr,
                                         const Alphabet& alpha = Alphabet::dna()) {
    std::ifstream cf(centers_path);
    if (!cf) throw IoError("cannot open centers file " + centers_path);
    std::ifstream tf(clusters_path);
    if (!tf) throw IoError("cannot open clusters file " + clusters_path);

    std::vector<Sequence> centers;
    std::string line;
    for (std::size_t no = 1; std::getline(cf, line); ++no) {
        line = detail::trim(line);
        if (line.empty()) continue;
        centers.push_back(detail::parse_strand(line, alpha, centers_path, no));
    }
    if (cf.bad()) throw IoError("read error on " + centers_path);

    std::vector<std::vector<Sequence>> groups;
    std::vector<Sequence> current;
    bool any_line = false, header_mode = false, open = false;
    for (std::size_t no = 1; std::getline(tf, line); ++no) {
        line = detail::trim(line);
        if (line.empty()) continue;
        const bool sep = detail::is_separator(line);
        if (!any_line) {
            any_line = true;
            header_mode = sep;
        }
        if (sep) {
            if (header_mode) {
                if (open) groups.push_back(std::move(current));
                open = true;
            } else {
                groups.push_back(std::move(current));
            }
            current.clear();
            continue;
        }
        current.push_back(detail::parse_strand(line, alpha, clusters_path, no));
        open = true;
    }
    if (tf.bad()) throw IoError("read error on " + clusters_path);
    if (open && (header_mode || !current.empty())) groups.push_back(std::move(current));

    if (!any_line) {
        if (warnings) warnings->push_back("clusters file " + clusters_path + " is empty; no clusters loaded");
        return {};
    }
    if (groups.size() != centers.size())
        throw FormatError("centers file has " + std::to_string(centers.size()) + " strands but clusters file has " +
                          std::to_string(groups.size()) + " groups");
    std::vector<Cluster> out(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) {
        out[i].center = std::move(centers[i]);
        out[i].traces = std::move(groups[i]);
    }
    return out;
}

inline const char* kClusterSeparator = "===============================";

/// Writes the two files read by load_dataset, one separator line before each group.
inline void write_dataset(const std::string& centers_path, const std::string& clusters_path,
                          std::span<const Cluster> clusters, const Alphabet& alpha = Alphabet::dna()) {
    std::ofstream cf(centers_path);
    if (!cf) throw IoError("cannot write " + centers_path);
    std::ofstream tf(clusters_path);
    if (!tf) throw IoError("cannot write " + clusters_path);
    for (const auto& c : clusters) {
        cf << alpha.decode(c.center) << '\n';
        tf << kClusterSeparator << '\n';
        for (const auto& y : c.traces) tf << alpha.decode(y) << '\n';
    }
    cf.flush();
    tf.flush();
    if (!cf || !tf) throw IoError("write failed for " + centers_path + " / " + clusters_path);
}

/// Uniform random centers of length n, each with `traces_per_cluster` IDS traces.
inline std::vector<Cluster> simulate_clusters(int n_clusters, int n, int traces_per_cluster, const IdsParams& params,
                                              std::uint64_t seed, int alphabet_size = 4) {
    params.validate();
    if (n_clusters < 0 || n < 1 || traces_per_cluster < 0)
        throw std::invalid_argument("simulate: need clusters >= 0, N >= 1, traces >= 0");
    std::vector<Cluster> out(static_cast<std::size_t>(n_clusters));
    for (int c = 0; c < n_clusters; ++c) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        auto& cl = out[static_cast<std::size_t>(c)];
        cl.center.resize(static_cast<std::size_t>(n));
        for (auto& v : cl.center) v = static_cast<Symbol>(rng.below(static_cast<std::uint64_t>(alphabet_size)));
        for (int k = 0; k < traces_per_cluster; ++k) cl.traces.push_back(transmit(cl.center, params, alphabet_size, rng));
    }
    return out;
}

/// 1-based inclusive cluster index range.
struct IndexRange {
    std::size_t first = 1;
    std::size_t last = 0;
    [[nodiscard]] std::size_t size() const noexcept { return last >= first ? last - first + 1 : 0; }
};

struct SplitRanges {
    IndexRange train, validation, test;

    /// Clusters 1-2000 train, 2001-2500 validate, the rest test.
    static SplitRanges canonical(std::size_t n_clusters) {
        if (n_clusters < 2500) throw std::invalid_argument("canonical split needs at least 2500 clusters");
        return {{1, 2000}, {2001, 2500}, {2501, n_clusters}};
    }
};

struct DatasetSplit {
    std::vector<Cluster> train, validation, test;
};

inline DatasetSplit split_dataset(std::span<const Cluster> clusters, const SplitRanges& r) {
    const IndexRange* rs[] = {&r.train, &r.validation, &r.test};
    for (const auto* a : rs) {
        if (a->first < 1 || a->last < a->first || a->last > clusters.size())
            throw std::invalid_argument("split range " + std::to_string(a->first) + "-" + std::to_string(a->last) +
                                        " is invalid for " + std::to_string(clusters.size()) + " clusters");
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (rs[i]->first <= rs[j]->last && rs[j]->first <= rs[i]->last)
                throw std::invalid_argument("split ranges overlap");
    auto take = [&](const IndexRange& a) {
        return std::vector<Cluster>(clusters.begin() + static_cast<std::ptrdiff_t>(a.first - 1),
                                    clusters.begin() + static_cast<std::ptrdiff_t>(a.last));
    };
    return {take(r.train), take(r.validation), take(r.test)};
}

/// Training pairs (center, trace) for channel estimation.
inline std::vector<std::pair<Sequence, Sequence>> training_pairs(std::span<const Cluster> clusters) {
    std::vector<std::pair<Sequence, Sequence>> pairs;
    for (const auto& c : clusters)
        for (const auto& y : c.traces) pairs.emplace_back(c.center, y);
    return pairs;
}

// ---------------------------------------------------------------- decoding dispatch

enum class Algorithm { BcjrMultitrace, TrellisBma, MultiplyPosteriors, Bmala, BmalaMap };

inline const char* to_string(Algorithm a) {
    switch (a) {
    case Algorithm::BcjrMultitrace: return "bcjr-multitrace";
    case Algorithm::TrellisBma: return "trellis-bma";
    case Algorithm::MultiplyPosteriors: return "multiply-posteriors";
    case Algorithm::Bmala: return "bmala";
    case Algorithm::BmalaMap: return "bmala-map";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    for (auto a : {Algorithm::BcjrMultitrace, Algorithm::TrellisBma, Algorithm::MultiplyPosteriors, Algorithm::Bmala,
                   Algorithm::BmalaMap})
        if (s == to_string(a)) return a;
    throw std::invalid_argument("unknown algorithm '" + std::string(s) +
                                "' (expected bcjr-multitrace, trellis-bma, multiply-posteriors, bmala or bmala-map)");
}

enum class Metric { Hamming, CrossEntropy, BcjrOnce };

inline const char* to_string(Metric m) {
    switch (m) {
    case Metric::Hamming: return "hamming";
    case Metric::CrossEntropy: return "cross-entropy";
    case Metric::BcjrOnce: return "bcjr-once";
    }
    return "?";
}

inline Metric parse_metric(std::string_view s) {
    for (auto m : {Metric::Hamming, Metric::CrossEntropy, Metric::BcjrOnce})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown metric '" + std::string(s) + "' (expected hamming, cross-entropy or bcjr-once)");
}

inline bool produces_posteriors(Algorithm a) { return a != Algorithm::Bmala; }

struct DecodeConfig {
    Algorithm algorithm = Algorithm::TrellisBma;
    IdsParams params = IdsParams::nanopore();
    int delta = TrellisOptions::kUnlimited;
    BetaParams betas{};
    BmalaOptions bmala{};
    std::optional<IdsParams> bmala_map_params; ///< channel model for the BMALA pseudo-trace
};

struct DecodeOutput {
    Sequence estimate;                       ///< hard message estimate
    std::optional<PosteriorTable> posteriors; ///< absent for plain BMALA
    std::vector<int> dropped_traces;
};

inline bool is_identity_code(const FsmEncoder& enc) {
    if (enc.num_states() != 1 || enc.message_length() != enc.codeword_length() ||
        enc.message_alphabet_size() != enc.output_alphabet_size())
        return false;
    for (int step = 0; step < enc.message_length(); ++step)
        for (int m = 0; m < enc.message_alphabet_size(); ++m)
            if (enc.output(0, m, step, 0) != m) return false;
    return true;
}

/// Decodes one cluster's traces. `offset` is the scrambling vector z (empty for none);
/// estimates and posteriors refer to the message, with z already removed.
inline DecodeOutput decode_traces(const FsmEncoder& enc, std::span<const Sequence> traces, const DecodeConfig& cfg,
                                  const Sequence& offset = {}) {
    const int L = enc.message_length();
    const auto prior = MessagePrior::uniform(L, enc.message_alphabet_size());
    TrellisOptions topt;
    topt.delta = cfg.delta;
    topt.offset = offset;
    DecodeOutput out;
    switch (cfg.algorithm) {
    case Algorithm::BcjrMultitrace:
        out.posteriors = bcjr_decode(enc, traces, cfg.params, prior, topt);
        break;
    case Algorithm::TrellisBma:
    case Algorithm::MultiplyPosteriors: {
        const BetaParams b = cfg.algorithm == Algorithm::TrellisBma ? cfg.betas : BetaParams::multiply();
        auto r = run_trellis_bma(enc, traces, cfg.params, prior, b, topt);
        out.posteriors = std::move(r.posteriors);
        out.dropped_traces = std::move(r.dropped_traces);
        break;
    }
    case Algorithm::Bmala: {
        if (!is_identity_code(enc))
            throw std::invalid_argument("bmala estimates the strand itself; use bmala-map with a coded encoder");
        BmalaOptions o = cfg.bmala;
        o.alphabet_size = enc.output_alphabet_size();
        Sequence x = bmala_reconstruct(traces, enc.codeword_length(), o);
        out.estimate = offset.empty() ? std::move(x) : unscramble(x, offset, o.alphabet_size);
        return out;
    }
    case Algorithm::BmalaMap:
        out.posteriors = bmala_map(traces, enc, cfg.bmala_map_params.value_or(cfg.params), prior, topt, cfg.bmala);
        break;
    }
    out.estimate = out.posteriors->hard_estimate();
    return out;
}

// ---------------------------------------------------------------- scrambled evaluation

struct EvalConfig {
    int K = 1;
    Metric metric = Metric::Hamming;
    std::uint64_t seed = 1;
    int jobs = 1;
    double confidence = 0.95; ///< two-sided normal-approximation level for half_width
};

struct EvalReport {
    std::string algorithm;
    std::string code;
    int K = 0;
    Metric metric = Metric::Hamming;
    double value = 0;      ///< the selected metric
    double half_width = 0; ///< confidence half-width of `value`
    double confidence = 0.95;
    double hamming = 0;                  ///< mean normalized Hamming distance
    double cross_entropy = std::nan(""); ///< mean symbolwise cross-entropy (bits), NaN for hard decoders
    double rate = 0;                     ///< BCJR-once rate (hard-decision rate for hard decoders)
    double code_rate = 1;
    std::size_t n_samples = 0;
    std::size_t skipped = 0;            ///< clusters with fewer than K traces
    std::size_t skipped_infeasible = 0; ///< samples whose trellis had no feasible path
    std::size_t dropped_traces = 0;
};

namespace detail {

/// Two-sided standard normal quantile for the usual levels; falls back to 1.96.
inline double normal_quantile(double confidence) {
    if (std::abs(confidence - 0.90) < 1e-9) return 1.6448536269514722;
    if (std::abs(confidence - 0.99) < 1e-9) return 2.5758293035489004;
    return 1.959963984540054;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!err) err = std::current_exception();
                    next.store(n);
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct SampleResult {
    enum class Status { Ok, TooFewTraces, Infeasible } status = Status::TooFewTraces;
    double hamming = 0;
    double cross_entropy = 0;
    std::size_t dropped = 0;
};

inline void mean_and_half_width(const std::vector<double>& xs, double z, double& mean, double& hw) {
    mean = 0;
    hw = 0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    hw = z * std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

} // namespace detail

/// Draws K distinct indices out of n (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t K, Rng& rng) {
    if (K > n) throw std::invalid_argument("cannot sample more items than available");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < K; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(K);
    return idx;
}

/// One scrambled sample for a cluster: uniform message m, z = x - E(m), K distinct traces.
struct ScrambledSample {
    Sequence message;
    Sequence offset;
    std::vector<Sequence> traces;
};

inline ScrambledSample draw_scrambled_sample(const Cluster& c, const FsmEncoder& enc, int K, Rng& rng) {
    const int q = enc.output_alphabet_size();
    if (static_cast<int>(c.center.size()) != enc.codeword_length())
        throw std::invalid_argument("cluster center length " + std::to_string(c.center.size()) +
                                    " != codeword length " + std::to_string(enc.codeword_length()));
    ScrambledSample s;
    s.message.resize(static_cast<std::size_t>(enc.message_length()));
    for (auto& v : s.message) v = static_cast<Symbol>(rng.below(static_cast<std::uint64_t>(enc.message_alphabet_size())));
    const Sequence cw = enc.encode(s.message);
    s.offset = unscramble(c.center, cw, q);
    if (scramble(cw, s.offset, q) != c.center) throw std::logic_error("scrambling does not reproduce the center");
    for (std::size_t i : sample_without_replacement(c.traces.size(), static_cast<std::size_t>(K), rng))
        s.traces.push_back(c.traces[i]);
    return s;
}

/// Scrambled-encoder evaluation over a set of clusters. Randomness for cluster i comes
/// from derive_seed(seed, i), so results do not depend on `jobs`.
inline EvalReport scrambled_eval(std::span<const Cluster> clusters, const FsmEncoder& enc, const DecodeConfig& dcfg,
                                 const EvalConfig& ecfg) {
    if (ecfg.K < 1) throw std::invalid_argument("K must be >= 1");
    if (ecfg.metric == Metric::CrossEntropy && !produces_posteriors(dcfg.algorithm))
        throw std::invalid_argument(std::string(to_string(dcfg.algorithm)) + " gives no posteriors for cross-entropy");

    using Status = detail::SampleResult::Status;
    std::vector<detail::SampleResult> results(clusters.size());
    detail::parallel_for(clusters.size(), ecfg.jobs, [&](std::size_t i) {
        const Cluster& c = clusters[i];
        auto& r = results[i];
        if (c.traces.size() < static_cast<std::size_t>(ecfg.K)) return;
        Rng rng(derive_seed(ecfg.seed, i));
        const auto s = draw_scrambled_sample(c, enc, ecfg.K, rng);
        try {
            const auto out = decode_traces(enc, s.traces, dcfg, s.offset);
            r.hamming = hamming_rate(out.estimate, s.message);
            if (out.posteriors) r.cross_entropy = symbolwise_cross_entropy(*out.posteriors, s.message);
            r.dropped = out.dropped_traces.size();
            r.status = Status::Ok;
        } catch (const InfeasibleError&) {
            r.status = Status::Infeasible;
        }
    });

    EvalReport rep;
    rep.algorithm = to_string(dcfg.algorithm);
    rep.code = enc.name();
    rep.K = ecfg.K;
    rep.metric = ecfg.metric;
    rep.confidence = ecfg.confidence;
    rep.code_rate = enc.rate();
    std::vector<double> ham, ce;
    for (const auto& r : results) {
        switch (r.status) {
        case Status::TooFewTraces: ++rep.skipped; break;
        case Status::Infeasible: ++rep.skipped_infeasible; break;
        case Status::Ok:
            ham.push_back(r.hamming);
            ce.push_back(r.cross_entropy);
            rep.dropped_traces += r.dropped;
            break;
        }
    }
    rep.n_samples = ham.size();
    if (rep.n_samples == 0)
        throw std::invalid_argument("no usable cluster: " + std::to_string(rep.skipped) + " have fewer than K=" +
                                    std::to_string(ecfg.K) + " traces, " + std::to_string(rep.skipped_infeasible) +
                                    " were infeasible");

    const double z = detail::normal_quantile(ecfg.confidence);
    const int M = enc.message_alphabet_size();
    double ham_hw = 0, ce_hw = 0;
    detail::mean_and_half_width(ham, z, rep.hamming, ham_hw);
    if (produces_posteriors(dcfg.algorithm)) {
        detail::mean_and_half_width(ce, z, rep.cross_entropy, ce_hw);
        rep.rate = bcjr_once_rate(rep.cross_entropy, rep.code_rate, M);
    } else {
        rep.rate = hard_decision_rate(rep.hamming, rep.code_rate, M);
    }

    switch (ecfg.metric) {
    case Metric::Hamming:
        rep.value = rep.hamming;
        rep.half_width = ham_hw;
        break;
    case Metric::CrossEntropy:
        rep.value = rep.cross_entropy;
        rep.half_width = ce_hw;
        break;
    case Metric::BcjrOnce:
        rep.value = rep.rate;
        if (produces_posteriors(dcfg.algorithm)) {
            rep.half_width = rep.code_rate * ce_hw;
        } else {
            // Delta method through the hard-decision rate.
            const double e = std::clamp(rep.hamming, 1e-12, 1 - 1e-12);
            const double slope = rep.code_rate * std::abs(std::log2((1 - e) * (M - 1) / e));
            rep.half_width = slope * ham_hw;
        }
        break;
    }
    return rep;
}

// ---------------------------------------------------------------- sweeps

/// Beta values appearing in the published tuning tables.
inline std::vector<BetaParams> default_beta_grid() {
    std::vector<BetaParams> g;
    for (double b : {0.0, 1.0})
        for (double e : {0.02, 0.05, 0.1, 0.5, 1.0, 5.0})
            for (double i : {0.0, 0.1, 0.5})
                for (double o : {0.1, 0.5, 0.9, 1.0}) g.push_back({b, e, i, o});
    return g;
}

struct SweepResult {
    BetaParams best;
    EvalReport best_report;
    std::vector<std::pair<BetaParams, EvalReport>> table;
};

/// Evaluates Trellis BMA at every grid point; Hamming and cross-entropy are minimized,
/// the BCJR-once rate maximized. Ties keep the earlier grid point.
inline SweepResult sweep_betas(std::span<const Cluster> clusters, const FsmEncoder& enc, DecodeConfig dcfg,
                               const EvalConfig& ecfg, std::span<const BetaParams> grid) {
    if (grid.empty()) throw std::invalid_argument("beta grid is empty");
    dcfg.algorithm = Algorithm::TrellisBma;
    SweepResult res;
    bool have = false;
    const bool maximize = ecfg.metric == Metric::BcjrOnce;
    for (const auto& b : grid) {
        dcfg.betas = b;
        auto rep = scrambled_eval(clusters, enc, dcfg, ecfg);
        const bool better = !have || (maximize ? rep.value > res.best_report.value : rep.value < res.best_report.value);
        if (better) {
            res.best = b;
            res.best_report = rep;
            have = true;
        }
        res.table.emplace_back(b, std::move(rep));
    }
    return res;
}

// ---------------------------------------------------------------- CSV output

inline constexpr const char* kReportCsvHeader = "algorithm,code,K,metric,value,ci,half_width,n_samples,skipped";

inline void write_report_csv_row(std::ostream& os, const EvalReport& r) {
    std::ostringstream row;
    row.precision(10);
    row << r.algorithm << ',' << r.code << ',' << r.K << ',' << to_string(r.metric) << ',' << r.value << ','
        << r.confidence << ',' << r.half_width << ',' << r.n_samples << ',' << (r.skipped + r.skipped_infeasible);
    os << row.str() << '\n';
}

inline void write_report_csv(std::ostream& os, std::span<const EvalReport> reports) {
    os << kReportCsvHeader << '\n';
    for (const auto& r : reports) write_report_csv_row(os, r);
}

/// One row per (series, K): the data behind a "metric vs number of traces" plot.
inline void write_plot_csv(std::ostream& os, std::span<const EvalReport> reports) {
    os << "series,metric,K,value,half_width\n";
    std::ostringstream body;
    body.precision(10);
    for (const auto& r : reports)
        body << r.algorithm << '[' << r.code << "]," << to_string(r.metric) << ',' << r.K << ',' << r.value << ','
             << r.half_width << '\n';
    os << body.str();
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& s) {
    os << "beta_b,beta_e,beta_i,beta_o,metric,value,half_width,n_samples,best\n";
    std::ostringstream body;
    body.precision(10);
    for (const auto& [b, r] : s.table)
        body << b.beta_b << ',' << b.beta_e << ',' << b.beta_i << ',' << b.beta_o << ',' << to_string(r.metric) << ','
             << r.value << ',' << r.half_width << ',' << r.n_samples << ',' << (b == s.best ? 1 : 0) << '\n';
    os << body.str();
}

} // namespace idstr
