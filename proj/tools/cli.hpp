#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "idstr/idstr.hpp"

namespace idstr::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kInfeasible = 3, kIoError = 4 };

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Everything a subcommand may read. Filled from flags, then from --config for unset keys.
struct RunConfig {
    std::string subcommand;
    std::string config_path;

    // channel
    double p_ins = 0.017, p_del = 0.02, p_sub = 0.022;
    bool estimate_params = false;

    // data
    std::string centers, clusters;
    int sim_clusters = 0;
    int sim_traces = 10;
    int length = 110;
    std::string train = "1-2000", validation = "2001-2500", test = "2501-end";
    std::string range = "auto";
    int max_clusters = 0;

    // decoding
    std::string code = "identity";
    std::string algo = "trellis-bma";
    std::string traces = "4";
    int delta = 8;
    std::string betas = "auto";
    std::string data_source = "simulated";
    std::string metric = "hamming";
    std::string grid = "default";
    int bmala_lookahead = BmalaOptions{}.lookahead;
    int bmala_bench = BmalaOptions{}.bench_steps;
    int bmala_min_agreement = BmalaOptions{}.min_agreement;
    bool bmala_one_sided = false;
    std::string bmala_map_params;
    bool allow_large_k = false;
    bool posteriors = false;
    bool skip_infeasible = false;

    // run
    std::uint64_t seed = 1;
    bool ci = false;
    int jobs = 1;
    std::string out_dir = ".";
};

// ---------------------------------------------------------------- parsing helpers

inline std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("bad integer '" + tok + "' in " + what);
        }
    }
    if (out.empty()) throw ConfigError(what + " is empty");
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + tok + "' in " + what);
        }
    }
    return out;
}

/// "a-b" (1-based, inclusive) with "end" standing for the last cluster.
inline IndexRange parse_range(const std::string& s, std::size_t n) {
    const auto dash = s.find('-');
    if (dash == std::string::npos) throw ConfigError("range '" + s + "' must look like a-b");
    auto num = [&](const std::string& t) -> std::size_t {
        if (t == "end") return n;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(t, &used);
            if (used != t.size() || v < 0) throw std::invalid_argument(t);
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("bad range bound '" + t + "' in '" + s + "'");
        }
    };
    return {num(s.substr(0, dash)), num(s.substr(dash + 1))};
}

inline BetaParams parse_betas(const std::string& s) {
    const auto v = parse_double_list(s, "--betas");
    if (v.size() != 4) throw ConfigError("--betas needs four values b,e,i,o (got '" + s + "')");
    BetaParams b{v[0], v[1], v[2], v[3]};
    try {
        b.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return b;
}

inline std::vector<BetaParams> parse_grid(const std::string& s) {
    if (s == "default") return default_beta_grid();
    std::vector<BetaParams> g;
    std::stringstream ss(s);
    std::string point;
    while (std::getline(ss, point, ';'))
        if (!point.empty()) g.push_back(parse_betas(point));
    if (g.empty()) throw ConfigError("--grid is empty");
    return g;
}

inline IdsParams params_from(double ins, double del, double sub) {
    try {
        return IdsParams::from_error_rates(ins, del, sub);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

/// Reads `key = value` lines ('#' starts a comment, surrounding quotes are stripped).
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    for (int no = 1; std::getline(in, line); ++no) {
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(no) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq)), val = detail::trim(line.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(no) + ": empty key");
        kv.emplace_back(std::move(key), std::move(val));
    }
    return kv;
}

// ---------------------------------------------------------------- shared plumbing

struct Data {
    std::vector<Cluster> clusters;
    std::string origin;
};

inline void require_dataset_paths(const RunConfig& c) {
    if (c.centers.empty() || c.clusters.empty()) throw ConfigError("--centers and --clusters are required");
    for (const auto& p : {c.centers, c.clusters})
        if (!std::filesystem::exists(p)) throw IoError("dataset file not found: " + p);
}

/// Loads the dataset, or simulates one when --sim-clusters is set.
inline Data load_data(const RunConfig& c, std::ostream& log) {
    Data d;
    if (c.sim_clusters > 0) {
        d.clusters = simulate_clusters(c.sim_clusters, c.length, c.sim_traces, params_from(c.p_ins, c.p_del, c.p_sub),
                                       derive_seed(c.seed, 0x51u));
        d.origin = "simulated";
        return d;
    }
    require_dataset_paths(c);
    std::vector<std::string> warnings;
    d.clusters = load_dataset(c.centers, c.clusters, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    d.origin = c.clusters;
    return d;
}

inline SplitRanges split_ranges(const RunConfig& c, std::size_t n) {
    return {parse_range(c.train, n), parse_range(c.validation, n), parse_range(c.test, n)};
}

/// Resolves a named or numeric range. "auto" means `fallback` when the three split ranges
/// fit the dataset and every cluster otherwise.
inline std::vector<Cluster> select(const std::vector<Cluster>& all, const RunConfig& c, const std::string& which,
                                   const std::string& fallback) {
    const std::size_t n = all.size();
    std::string name = which;
    if (name == "auto") {
        bool fits = n > 0;
        if (fits) {
            const auto r = split_ranges(c, n);
            for (const auto* x : {&r.train, &r.validation, &r.test}) fits = fits && x->first >= 1 && x->last <= n && x->size() > 0;
        }
        name = fits ? fallback : "all";
    }
    IndexRange r;
    if (name == "all") r = {1, n};
    else if (name == "train") r = parse_range(c.train, n);
    else if (name == "validation") r = parse_range(c.validation, n);
    else if (name == "test") r = parse_range(c.test, n);
    else r = parse_range(name, n);
    if (r.first < 1 || r.last > n || r.size() == 0)
        throw ConfigError("cluster range '" + name + "' (" + std::to_string(r.first) + "-" + std::to_string(r.last) +
                          ") is empty or outside 1-" + std::to_string(n));
    std::vector<Cluster> out(all.begin() + static_cast<std::ptrdiff_t>(r.first - 1),
                             all.begin() + static_cast<std::ptrdiff_t>(r.last));
    if (c.max_clusters > 0 && out.size() > static_cast<std::size_t>(c.max_clusters))
        out.resize(static_cast<std::size_t>(c.max_clusters));
    return out;
}

inline IdsParams channel_params(const RunConfig& c, const std::vector<Cluster>& all, std::ostream& log) {
    if (!c.estimate_params) return params_from(c.p_ins, c.p_del, c.p_sub);
    const auto train = select(all, c, "train", "train");
    const auto pairs = training_pairs(train);
    if (pairs.empty()) throw ConfigError("training range has no traces to estimate the channel from");
    const auto p = estimate_params(pairs);
    log << "estimated channel " << p.to_string() << " from " << pairs.size() << " training pairs\n";
    return p;
}

inline FsmEncoder make_encoder(const RunConfig& c) {
    std::string spec = c.code;
    if (spec == "identity") spec = "identity:" + std::to_string(c.length);
    try {
        return parse_encoder(spec);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad --code: ") + e.what());
    }
}

inline DecodeConfig decode_config(const RunConfig& c, const IdsParams& p) {
    DecodeConfig d;
    try {
        d.algorithm = parse_algorithm(c.algo);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    d.params = p;
    if (c.delta < 0 && c.delta != TrellisOptions::kUnlimited) throw ConfigError("--delta must be >= 0 or -1 (unpruned)");
    d.delta = c.delta;
    d.bmala.lookahead = c.bmala_lookahead;
    d.bmala.bench_steps = c.bmala_bench;
    d.bmala.min_agreement = c.bmala_min_agreement;
    d.bmala.two_sided = !c.bmala_one_sided;
    try {
        d.bmala.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!c.bmala_map_params.empty()) {
        const auto v = parse_double_list(c.bmala_map_params, "--bmala-map-params");
        if (v.size() != 3) throw ConfigError("--bmala-map-params needs ins,del,sub");
        d.bmala_map_params = params_from(v[0], v[1], v[2]);
    }
    return d;
}

inline Metric metric_of(const RunConfig& c) {
    try {
        return parse_metric(c.metric);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

inline BetaParams betas_for(const RunConfig& c, const FsmEncoder& enc, int K) {
    if (c.betas != "auto") return parse_betas(c.betas);
    if (c.data_source != "real" && c.data_source != "simulated")
        throw ConfigError("--data-source must be real or simulated");
    const auto src = c.data_source == "real" ? DataSource::Real : DataSource::Simulated;
    const auto tm = metric_of(c) == Metric::Hamming ? TuneMetric::Hamming : TuneMetric::BcjrOnce;
    return default_betas(src, tm, enc.message_length(), K);
}

inline constexpr int kMultitraceMaxK = 3;

inline void check_multitrace_k(const RunConfig& c, Algorithm a, int K) {
    if (a == Algorithm::BcjrMultitrace && K > kMultitraceMaxK && !c.allow_large_k)
        throw ConfigError("bcjr-multitrace with K=" + std::to_string(K) +
                          " traces: the joint trellis grows exponentially in K and is impractical beyond K=3; "
                          "use trellis-bma, or pass --allow-large-k to run it anyway");
}

inline std::filesystem::path ensure_out_dir(const RunConfig& c) {
    std::filesystem::path p(c.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory " + c.out_dir + ": " + ec.message());
    return p;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
}

inline std::string symbols_to_text(const Sequence& s, int alphabet_size) {
    if (alphabet_size == 4) return Alphabet::dna().decode(s);
    std::string out;
    for (Symbol v : s) out += std::to_string(v) + (alphabet_size > 10 ? " " : "");
    return out;
}

// ---------------------------------------------------------------- subcommands

inline void cmd_simulate(const RunConfig& c, std::ostream& out) {
    if (c.sim_clusters < 0 || c.sim_traces < 0 || c.length < 1)
        throw ConfigError("simulate needs --count >= 0, --traces-per-cluster >= 0 and --length >= 1");
    const auto p = params_from(c.p_ins, c.p_del, c.p_sub);
    const auto dir = ensure_out_dir(c);
    const auto clusters = simulate_clusters(c.sim_clusters, c.length, c.sim_traces, p, c.seed);
    write_dataset((dir / "centers.txt").string(), (dir / "clusters.txt").string(), clusters);
    std::ostringstream msg;
    msg.precision(10);
    msg << "p_ins=" << p.p_ins << " p_del=" << p.p_del << " p_sub=" << p.p_sub << " p_cor=" << p.p_cor << '\n';
    open_out(dir / "channel.txt") << msg.str();
    out << "wrote " << clusters.size() << " clusters x " << c.sim_traces << " traces (N=" << c.length << ") to "
        << dir.string() << '\n'
        << "channel " << msg.str();
}

inline IdsParams cmd_estimate_channel(const RunConfig& c, std::ostream& out) {
    require_dataset_paths(c);
    const auto d = load_data(c, out);
    const auto train = select(d.clusters, c, c.range, "train");
    const auto pairs = training_pairs(train);
    if (pairs.empty()) throw ConfigError("training range contains no traces");
    const auto p = estimate_params(pairs);
    std::ostringstream msg;
    msg.precision(6);
    msg << "p_ins=" << p.p_ins << " p_del=" << p.p_del << " p_sub=" << p.p_sub << " p_cor=" << p.p_cor << '\n';
    out << "estimated from " << train.size() << " clusters, " << pairs.size() << " pairs\n" << msg.str();
    open_out(ensure_out_dir(c) / "channel.txt") << msg.str();
    return p;
}

inline void cmd_reconstruct(const RunConfig& c, std::ostream& out) {
    const auto enc = make_encoder(c);
    const auto ks = parse_int_list(c.traces, "--traces");
    if (ks.size() != 1 || ks[0] < 0) throw ConfigError("reconstruct takes a single K (0 = every trace)");
    const int K = ks[0];
    auto dcfg = decode_config(c, IdsParams{});
    const auto d = load_data(c, out);
    const auto clusters = select(d.clusters, c, c.range, "test");
    for (const auto& cl : clusters)
        check_multitrace_k(c, dcfg.algorithm, K > 0 ? K : static_cast<int>(cl.traces.size()));
    dcfg.params = channel_params(c, d.clusters, out);

    const auto dir = ensure_out_dir(c);
    auto est = open_out(dir / "estimates.txt");
    std::ofstream post;
    if (c.posteriors) {
        if (!produces_posteriors(dcfg.algorithm)) throw ConfigError(c.algo + " produces no posteriors");
        post = open_out(dir / "posteriors.tsv");
        post << "cluster\tposition";
        for (int m = 0; m < enc.message_alphabet_size(); ++m) post << "\tp" << m;
        post << '\n';
        post.precision(10);
    }
    const bool uncoded = is_identity_code(enc);
    double ham = 0;
    std::size_t scored = 0, failed = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto& cl = clusters[i];
        std::span<const Sequence> tr(cl.traces);
        if (K > 0 && tr.size() > static_cast<std::size_t>(K)) tr = tr.first(static_cast<std::size_t>(K));
        if (tr.empty()) {
            est << '\n';
            ++failed;
            continue;
        }
        dcfg.betas = betas_for(c, enc, static_cast<int>(tr.size()));
        DecodeOutput o;
        try {
            o = decode_traces(enc, tr, dcfg);
        } catch (const InfeasibleError& e) {
            if (!c.skip_infeasible) throw InfeasibleError("cluster " + std::to_string(i + 1) + ": " + e.what());
            est << '\n';
            ++failed;
            continue;
        }
        est << symbols_to_text(o.estimate, enc.message_alphabet_size()) << '\n';
        if (uncoded && cl.center.size() == o.estimate.size()) {
            ham += hamming_rate(o.estimate, cl.center);
            ++scored;
        }
        if (c.posteriors)
            for (int l = 0; l < o.posteriors->length(); ++l) {
                post << i + 1 << '\t' << l;
                for (double p : o.posteriors->row(l)) post << '\t' << p;
                post << '\n';
            }
    }
    out << "reconstructed " << clusters.size() - failed << " of " << clusters.size() << " clusters with " << c.algo
        << " -> " << (dir / "estimates.txt").string() << '\n';
    if (scored > 0) out << "mean Hamming vs centers: " << ham / static_cast<double>(scored) << '\n';
}

inline std::vector<EvalReport> cmd_evaluate(const RunConfig& c, std::ostream& out) {
    const auto enc = make_encoder(c);
    const auto ks = parse_int_list(c.traces, "--traces");
    auto dcfg = decode_config(c, IdsParams{});
    const Metric metric = metric_of(c);
    for (int K : ks) {
        if (K < 1) throw ConfigError("K must be >= 1");
        check_multitrace_k(c, dcfg.algorithm, K);
    }
    if (metric == Metric::CrossEntropy && !produces_posteriors(dcfg.algorithm))
        throw ConfigError(c.algo + " gives hard decisions only; use --metric hamming or bcjr-once");
    if (c.sim_clusters <= 0) require_dataset_paths(c);
    const auto d = load_data(c, out);
    const auto clusters = select(d.clusters, c, c.range, "test");
    dcfg.params = channel_params(c, d.clusters, out);

    std::vector<EvalReport> reports;
    for (int K : ks) {
        dcfg.betas = betas_for(c, enc, K);
        EvalConfig ec;
        ec.K = K;
        ec.metric = metric;
        ec.seed = derive_seed(c.seed, static_cast<std::uint64_t>(K));
        ec.jobs = c.jobs;
        reports.push_back(scrambled_eval(clusters, enc, dcfg, ec));
        const auto& r = reports.back();
        out << c.algo << " " << enc.name() << " K=" << K << " " << to_string(metric) << " = " << r.value << " +/- "
            << r.half_width << " (n=" << r.n_samples << ", skipped=" << r.skipped + r.skipped_infeasible << ")\n";
    }
    const auto dir = ensure_out_dir(c);
    {
        auto f = open_out(dir / "results.csv");
        write_report_csv(f, reports);
    }
    {
        auto f = open_out(dir / "plot.csv");
        write_plot_csv(f, reports);
    }
    return reports;
}

inline SweepResult cmd_sweep(const RunConfig& c, std::ostream& out) {
    const auto enc = make_encoder(c);
    const auto ks = parse_int_list(c.traces, "--traces");
    if (ks.size() != 1 || ks[0] < 1) throw ConfigError("sweep takes a single K >= 1");
    const auto grid = parse_grid(c.grid);
    auto dcfg = decode_config(c, IdsParams{});
    const Metric metric = metric_of(c);
    if (c.sim_clusters <= 0) require_dataset_paths(c);
    const auto d = load_data(c, out);
    const auto clusters = select(d.clusters, c, c.range, "validation");
    dcfg.params = channel_params(c, d.clusters, out);

    EvalConfig ec;
    ec.K = ks[0];
    ec.metric = metric;
    ec.seed = derive_seed(c.seed, static_cast<std::uint64_t>(ks[0]));
    ec.jobs = c.jobs;
    auto res = sweep_betas(clusters, enc, dcfg, ec, grid);
    out << "best betas " << res.best.to_string() << " " << to_string(metric) << " = " << res.best_report.value
        << " over " << grid.size() << " grid points\n";
    auto f = open_out(ensure_out_dir(c) / "sweep.csv");
    write_sweep_csv(f, res);
    return res;
}

// ---------------------------------------------------------------- front end

namespace detail {

inline void add_channel(CLI::App* s, RunConfig& c) {
    s->add_option("--p-ins", c.p_ins, "insertion probability");
    s->add_option("--p-del", c.p_del, "deletion probability");
    s->add_option("--p-sub", c.p_sub, "substitution probability");
}

inline void add_dataset(CLI::App* s, RunConfig& c) {
    s->add_option("--centers", c.centers, "centers file, one strand per line");
    s->add_option("--clusters", c.clusters, "clusters file, groups separated by '=' lines");
    s->add_option("--train", c.train, "training cluster range a-b (1-based, 'end' allowed)");
    s->add_option("--validation", c.validation, "validation cluster range");
    s->add_option("--test", c.test, "test cluster range");
    s->add_option("--range", c.range, "clusters to use: auto, all, train, validation, test or a-b");
    s->add_option("--max-clusters", c.max_clusters, "cap on clusters taken from the range (0 = no cap)");
}

inline void add_decoding(CLI::App* s, RunConfig& c) {
    s->add_flag("--estimate-params", c.estimate_params, "estimate the channel from the training range");
    s->add_option("--code", c.code, "identity, identity:N, mr:N:r, cc:memory:rate or cc:memory:L/N");
    s->add_option("--length", c.length, "strand length N for 'identity' and simulated data");
    s->add_option("--algo", c.algo, "bcjr-multitrace, trellis-bma, multiply-posteriors, bmala or bmala-map");
    s->add_option("--delta", c.delta, "drift bound (-1 disables pruning)");
    s->add_option("--betas", c.betas, "Trellis BMA betas b,e,i,o or 'auto' for the tuned tables");
    s->add_option("--data-source", c.data_source, "which tuned table 'auto' betas come from: real or simulated");
    s->add_option("--bmala-lookahead", c.bmala_lookahead, "BMALA lookahead window");
    s->add_option("--bmala-bench", c.bmala_bench, "BMALA steps a benched trace sits out");
    s->add_option("--bmala-min-agreement", c.bmala_min_agreement, "BMALA window matches needed to classify");
    s->add_flag("--bmala-one-sided", c.bmala_one_sided, "BMALA forward pass only");
    s->add_option("--bmala-map-params", c.bmala_map_params, "ins,del,sub channel model for the BMALA estimate");
    s->add_flag("--allow-large-k", c.allow_large_k, "let bcjr-multitrace run with more than 3 traces");
    s->add_option("--sim-clusters", c.sim_clusters, "simulate this many clusters instead of loading a dataset");
    s->add_option("--sim-traces", c.sim_traces, "traces per simulated cluster");
}

inline void add_run(CLI::App* s, RunConfig& c) {
    s->add_option("--seed", c.seed, "random seed");
    s->add_flag("--ci", c.ci, "CI mode: --seed must be given explicitly");
    s->add_option("--jobs,-j", c.jobs, "worker threads")->check(CLI::PositiveNumber);
    s->add_option("--out-dir,-o", c.out_dir, "output directory");
    s->add_option("--config", c.config_path, "key = value file; flags on the command line win");
}

/// Applies config file values to options the command line left unset.
inline void apply_config(CLI::App* s, const std::string& path) {
    for (const auto& [key, val] : read_config_file(path)) {
        auto* opt = s->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config" || key == "help")
            throw ConfigError("unknown key '" + key + "' in " + path + " for " + s->get_name());
        if (opt->count() > 0) continue;
        opt->add_result(val);
        opt->run_callback();
    }
}

/// `key = value` lines for every option, reloadable with --config.
inline std::string effective_config(const CLI::App* s) {
    std::ostringstream os;
    os << "# idstr " << s->get_name() << '\n';
    for (const auto* opt : s->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const auto& name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        std::string v = opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str();
        if (opt->get_expected_max() == 0) v = (opt->count() > 0 && opt->as<bool>()) ? "true" : "false";
        os << name << " = " << v << '\n';
    }
    return os.str();
}

} // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    CLI::App app{"Coded trace reconstruction over IDS channels", "idstr"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "write a synthetic centers/clusters dataset");
    detail::add_channel(sim, c);
    sim->add_option("--count", c.sim_clusters, "number of clusters")->required();
    sim->add_option("--traces-per-cluster", c.sim_traces, "traces per cluster");
    sim->add_option("--length", c.length, "strand length N");
    detail::add_run(sim, c);

    auto* est = app.add_subcommand("estimate-channel", "estimate IDS probabilities from the training range");
    detail::add_dataset(est, c);
    detail::add_run(est, c);

    auto* rec = app.add_subcommand("reconstruct", "decode every cluster and write the estimates");
    detail::add_channel(rec, c);
    detail::add_dataset(rec, c);
    detail::add_decoding(rec, c);
    rec->add_option("--traces,-K", c.traces, "traces per cluster (0 = all)");
    rec->add_flag("--posteriors", c.posteriors, "also dump per-symbol posteriors");
    rec->add_flag("--skip-infeasible", c.skip_infeasible, "leave infeasible clusters blank instead of failing");
    detail::add_run(rec, c);

    auto* ev = app.add_subcommand("evaluate", "scrambled-code evaluation; writes results.csv and plot.csv");
    detail::add_channel(ev, c);
    detail::add_dataset(ev, c);
    detail::add_decoding(ev, c);
    ev->add_option("--traces,-K", c.traces, "comma-separated trace counts");
    ev->add_option("--metric", c.metric, "hamming, cross-entropy or bcjr-once");
    detail::add_run(ev, c);

    auto* sw = app.add_subcommand("sweep", "grid search over Trellis BMA betas; writes sweep.csv");
    detail::add_channel(sw, c);
    detail::add_dataset(sw, c);
    detail::add_decoding(sw, c);
    sw->add_option("--traces,-K", c.traces, "trace count");
    sw->add_option("--metric", c.metric, "hamming, cross-entropy or bcjr-once");
    sw->add_option("--grid", c.grid, "'default' or b,e,i,o;b,e,i,o;...");
    detail::add_run(sw, c);

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            app.exit(e, out, err);
            return kOk;
        } catch (const CLI::CallForAllHelp& e) {
            app.exit(e, out, err);
            return kOk;
        } catch (const CLI::ParseError& e) {
            app.exit(e, out, err);
            return kConfigError;
        }
        CLI::App* sub = app.get_subcommands().front();
        c.subcommand = sub->get_name();
        const bool seed_given = sub->get_option("--seed")->count() > 0;
        if (!c.config_path.empty()) detail::apply_config(sub, c.config_path);
        const char* ci_env = std::getenv("IDSTR_CI");
        if ((c.ci || (ci_env && *ci_env && std::string(ci_env) != "0")) && !seed_given &&
            sub->get_option("--seed")->count() == 0)
            throw ConfigError("--seed is mandatory in CI mode");

        if (c.subcommand == "simulate") cmd_simulate(c, out);
        else if (c.subcommand == "estimate-channel") cmd_estimate_channel(c, out);
        else if (c.subcommand == "reconstruct") cmd_reconstruct(c, out);
        else if (c.subcommand == "evaluate") cmd_evaluate(c, out);
        else cmd_sweep(c, out);

        open_out(ensure_out_dir(c) / "effective.cfg") << detail::effective_config(sub);
        return kOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const CLI::ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const FormatError& e) {
        err << "input format error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
}

} // namespace idstr::cli
