#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "idstr/evaluation.hpp"

using namespace idstr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("idstr_eval_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const auto p = path / name;
        std::ofstream(p) << content;
        return p.string();
    }
};

const IdsParams kP = IdsParams::nanopore();

} // namespace

TEST(Metrics, Hamming) {
    const auto& dna = Alphabet::dna();
    EXPECT_EQ(hamming_rate(dna.encode("ACGT"), dna.encode("ACGT")), 0.0);
    EXPECT_EQ(hamming_rate(dna.encode("ACGT"), dna.encode("CATG")), 1.0);
    EXPECT_EQ(hamming_rate(dna.encode("ACGT"), dna.encode("ACGA")), 0.25);
    EXPECT_THROW(hamming_rate(dna.encode("AC"), dna.encode("ACG")), std::invalid_argument);
}

TEST(Metrics, CrossEntropy) {
    const Sequence m{0, 3, 1, 2};
    EXPECT_EQ(symbolwise_cross_entropy(PosteriorTable::delta(m, 4), m), 0.0);

    PosteriorTable uni(4, 4), half(4, 4);
    for (int l = 0; l < 4; ++l)
        for (int s = 0; s < 4; ++s) {
            uni.row(l)[static_cast<std::size_t>(s)] = 0.25;
            half.row(l)[static_cast<std::size_t>(s)] = s == m[static_cast<std::size_t>(l)] ? 0.5 : 1.0 / 6;
        }
    EXPECT_DOUBLE_EQ(symbolwise_cross_entropy(uni, m), 2.0);
    EXPECT_DOUBLE_EQ(symbolwise_cross_entropy(half, m), 1.0);

    // Confidently wrong: clipped at the floor, error without it.
    const Sequence wrong{1, 3, 1, 2};
    const auto d = PosteriorTable::delta(wrong, 4);
    EXPECT_NEAR(symbolwise_cross_entropy(d, m), -std::log2(1e-12) / 4, 1e-9);
    EXPECT_THROW(symbolwise_cross_entropy(d, m, 0.0), std::domain_error);
    EXPECT_THROW(symbolwise_cross_entropy(d, Sequence{0, 1}), std::invalid_argument);
}

TEST(Metrics, BcjrOnceRate) {
    EXPECT_EQ(bcjr_once_rate(0.0, 1.0), 2.0);
    EXPECT_EQ(bcjr_once_rate(2.0, 1.0), 0.0);
    EXPECT_EQ(bcjr_once_rate(3.0, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(bcjr_once_rate(0.5, 100.0 / 110), 1.5 * 100.0 / 110);
    EXPECT_DOUBLE_EQ(bcjr_once_rate(0.25, 1.0, 2), 0.75);
    EXPECT_THROW(bcjr_once_rate(0.0, 0.0), std::invalid_argument);
}

TEST(Metrics, HardDecisionRate) {
    EXPECT_DOUBLE_EQ(hard_decision_rate(0.0, 1.0), 2.0);
    EXPECT_NEAR(hard_decision_rate(0.75, 1.0), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(hard_decision_rate(0.0, 0.5), 1.0);
    // Binary symmetric channel: 1 - h(0.11).
    const double h = -(0.11 * std::log2(0.11) + 0.89 * std::log2(0.89));
    EXPECT_NEAR(hard_decision_rate(0.11, 1.0, 2), 1 - h, 1e-12);
}

TEST(Metrics, AirRandomK) {
    const std::map<int, double> rates{{1, 0.688}, {2, 1.0}, {4, 1.2554}, {10, 1.5279}};
    EXPECT_DOUBLE_EQ(air_random_K(rates, {{4, 1.0}}), 1.2554);
    EXPECT_DOUBLE_EQ(air_random_K(rates, {{1, 0.5}, {2, 0.5}}), (0.688 + 1.0) / 2);
    EXPECT_NEAR(air_random_K(rates, {{4, 0.5}, {10, 0.5}}), 1.39165, 1e-9);
    EXPECT_THROW(air_random_K(rates, {{3, 1.0}}), std::out_of_range);
    EXPECT_THROW(air_random_K(rates, {{4, 0.7}}), std::invalid_argument);
}

TEST(Dataset, TwoClusters) {
    TempDir d;
    const auto c = d.file("c.txt", "ACGT\nGGCA\n");
    const auto t = d.file("t.txt", "=====\nACGT\nACT\n=====\nGGCAA\n");
    const auto cl = load_dataset(c, t);
    ASSERT_EQ(cl.size(), 2u);
    EXPECT_EQ(cl[0].traces.size(), 2u);
    EXPECT_EQ(cl[1].traces.size(), 1u);
    EXPECT_EQ(Alphabet::dna().decode(cl[1].traces[0]), "GGCAA");
    EXPECT_EQ(Alphabet::dna().decode(cl[1].center), "GGCA");
}

TEST(Dataset, TerminatorSeparators) {
    TempDir d;
    const auto c = d.file("c.txt", "ACGT\nGGCA\n");
    const auto t1 = d.file("t1.txt", "ACGT\n=====\nGGCAA\n");
    const auto t2 = d.file("t2.txt", "ACGT\r\n=====\r\nGGCAA\r\n=====\r\n");
    EXPECT_EQ(load_dataset(c, t1).size(), 2u);
    EXPECT_EQ(load_dataset(c, t2).size(), 2u);
}

TEST(Dataset, EmptyClustersFileWarns) {
    TempDir d;
    const auto c = d.file("c.txt", "ACGT\n");
    const auto t = d.file("t.txt", "");
    std::vector<std::string> warnings;
    EXPECT_TRUE(load_dataset(c, t, &warnings).empty());
    ASSERT_EQ(warnings.size(), 1u);
}

TEST(Dataset, Errors) {
    TempDir d;
    const auto c = d.file("c.txt", "ACGT\nGGCA\n");
    const auto bad = d.file("bad.txt", "=====\nACGT\n=====\nGGXA\n");
    try {
        load_dataset(c, bad);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
    }
    const auto one = d.file("one.txt", "=====\nACGT\n");
    EXPECT_THROW(load_dataset(c, one), FormatError);
    EXPECT_THROW(load_dataset((d.path / "missing.txt").string(), one), IoError);
}

TEST(Dataset, WriteLoadRoundTrip) {
    TempDir d;
    auto cl = simulate_clusters(12, 20, 3, kP, 99);
    cl[4].traces.clear();
    const auto c = (d.path / "c.txt").string(), t = (d.path / "t.txt").string();
    write_dataset(c, t, cl);
    const auto back = load_dataset(c, t);
    ASSERT_EQ(back.size(), cl.size());
    for (std::size_t i = 0; i < cl.size(); ++i) {
        EXPECT_EQ(back[i].center, cl[i].center);
        EXPECT_EQ(back[i].traces, cl[i].traces);
    }
}

TEST(Dataset, SimulateDeterministic) {
    const auto a = simulate_clusters(20, 30, 4, kP, 7);
    const auto b = simulate_clusters(20, 30, 4, kP, 7);
    const auto c = simulate_clusters(20, 30, 4, kP, 8);
    ASSERT_EQ(a.size(), 20u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].center, b[i].center);
        EXPECT_EQ(a[i].traces, b[i].traces);
        EXPECT_EQ(a[i].traces.size(), 4u);
    }
    EXPECT_NE(a[0].center, c[0].center);
}

TEST(Split, Ranges) {
    const auto cl = simulate_clusters(10, 5, 1, kP, 1);
    const auto s = split_dataset(cl, {{1, 6}, {7, 8}, {9, 10}});
    EXPECT_EQ(s.train.size(), 6u);
    EXPECT_EQ(s.validation.size(), 2u);
    EXPECT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.test[1].center, cl[9].center);
    EXPECT_THROW(split_dataset(cl, {{1, 6}, {6, 8}, {9, 10}}), std::invalid_argument);
    EXPECT_THROW(split_dataset(cl, {{1, 6}, {7, 8}, {9, 11}}), std::invalid_argument);
    EXPECT_THROW(split_dataset(cl, {{0, 6}, {7, 8}, {9, 10}}), std::invalid_argument);
}

TEST(Split, Canonical) {
    const auto r = SplitRanges::canonical(10000);
    EXPECT_EQ(r.train.size(), 2000u);
    EXPECT_EQ(r.validation.size(), 500u);
    EXPECT_EQ(r.test.size(), 7500u);
    EXPECT_THROW(SplitRanges::canonical(2499), std::invalid_argument);
}

TEST(Sampling, WithoutReplacement) {
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + rng.below(30), K = rng.below(n + 1);
        const auto idx = sample_without_replacement(n, K, rng);
        ASSERT_EQ(idx.size(), K);
        const std::set<std::size_t> u(idx.begin(), idx.end());
        EXPECT_EQ(u.size(), K);
        for (auto i : idx) EXPECT_LT(i, n);
    }
    EXPECT_THROW(sample_without_replacement(3, 4, rng), std::invalid_argument);
}

TEST(Sampling, ScrambledSampleReproducesCenter) {
    Rng rng(5);
    const auto cl = simulate_clusters(30, 30, 5, kP, 11);
    for (const auto* spec : {"identity:30", "mr:30:3", "cc:3:20/30"}) {
        const auto enc = parse_encoder(spec);
        for (const auto& c : cl) {
            const auto s = draw_scrambled_sample(c, enc, 3, rng);
            EXPECT_EQ(scramble(enc.encode(s.message), s.offset, 4), c.center);
            ASSERT_EQ(s.traces.size(), 3u);
            for (const auto& y : s.traces) EXPECT_NE(std::find(c.traces.begin(), c.traces.end(), y), c.traces.end());
        }
    }
}

TEST(Decode, NoiselessClusterExactForEveryAlgorithm) {
    const auto clean = IdsParams::from_error_rates(0.0, 0.0, 0.0);
    Rng rng(2);
    const auto enc = identity_encoder(16);
    Sequence x(16);
    for (auto& v : x) v = static_cast<Symbol>(rng.below(4));
    const std::vector<Sequence> tr{x, x, x};
    for (auto a : {Algorithm::BcjrMultitrace, Algorithm::TrellisBma, Algorithm::MultiplyPosteriors, Algorithm::Bmala,
                   Algorithm::BmalaMap}) {
        DecodeConfig cfg;
        cfg.algorithm = a;
        cfg.params = clean;
        EXPECT_EQ(decode_traces(enc, tr, cfg).estimate, x) << to_string(a);
    }
}

TEST(Decode, ScrambleOffsetRemoved) {
    const auto clean = IdsParams::from_error_rates(0.0, 0.0, 0.0);
    const auto enc = parse_encoder("mr:20:2");
    Rng rng(4);
    Sequence m(static_cast<std::size_t>(enc.message_length())), z(20);
    for (auto& v : m) v = static_cast<Symbol>(rng.below(4));
    for (auto& v : z) v = static_cast<Symbol>(rng.below(4));
    const Sequence x = scramble(enc.encode(m), z, 4);
    const std::vector<Sequence> tr{x, x};
    for (auto a : {Algorithm::TrellisBma, Algorithm::BmalaMap, Algorithm::BcjrMultitrace}) {
        DecodeConfig cfg;
        cfg.algorithm = a;
        cfg.params = clean;
        EXPECT_EQ(decode_traces(enc, tr, cfg, z).estimate, m) << to_string(a);
    }
    DecodeConfig b;
    b.algorithm = Algorithm::Bmala;
    EXPECT_THROW(decode_traces(enc, tr, b, z), std::invalid_argument);
}

TEST(Decode, AlgorithmNames) {
    for (auto a : {Algorithm::BcjrMultitrace, Algorithm::TrellisBma, Algorithm::MultiplyPosteriors, Algorithm::Bmala,
                   Algorithm::BmalaMap})
        EXPECT_EQ(parse_algorithm(to_string(a)), a);
    EXPECT_THROW(parse_algorithm("viterbi"), std::invalid_argument);
    for (auto m : {Metric::Hamming, Metric::CrossEntropy, Metric::BcjrOnce}) EXPECT_EQ(parse_metric(to_string(m)), m);
    EXPECT_THROW(parse_metric("bleu"), std::invalid_argument);
}

TEST(ScrambledEval, IdentityMatchesPlainReconstruction) {
    // With the identity code, decoding the scrambled sample is plain reconstruction of the center.
    const auto cl = simulate_clusters(40, 40, 4, kP, 21);
    const auto enc = identity_encoder(40);
    DecodeConfig cfg;
    cfg.algorithm = Algorithm::Bmala;
    EvalConfig ec;
    ec.K = 4;
    ec.seed = 5;
    const auto rep = scrambled_eval(cl, enc, cfg, ec);
    double direct = 0;
    for (const auto& c : cl) direct += hamming_rate(bmala_reconstruct(c.traces, 40), c.center);
    EXPECT_NEAR(rep.value, direct / 40, 1e-12);
}

TEST(ScrambledEval, DeterministicAcrossJobs) {
    const auto cl = simulate_clusters(24, 30, 3, kP, 31);
    const auto enc = parse_encoder("mr:30:3");
    DecodeConfig cfg;
    cfg.delta = 6;
    cfg.betas = {0, 1, 0.5, 0.5};
    EvalConfig ec;
    ec.K = 2;
    ec.metric = Metric::BcjrOnce;
    ec.seed = 77;
    const auto a = scrambled_eval(cl, enc, cfg, ec);
    ec.jobs = 4;
    const auto b = scrambled_eval(cl, enc, cfg, ec);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.hamming, b.hamming);
    EXPECT_EQ(a.cross_entropy, b.cross_entropy);
    EXPECT_EQ(a.half_width, b.half_width);
    EXPECT_NEAR(a.rate, (2 - a.cross_entropy) * enc.rate(), 1e-12);
    EXPECT_GE(a.value, 0);
    EXPECT_LE(a.value, 2 * enc.rate());
    EXPECT_GE(a.hamming, 0);
    EXPECT_LE(a.hamming, 1);
}

TEST(ScrambledEval, SkipsSmallClusters) {
    auto cl = simulate_clusters(10, 20, 3, kP, 41);
    cl[2].traces.resize(1);
    cl[7].traces.clear();
    DecodeConfig cfg;
    cfg.algorithm = Algorithm::MultiplyPosteriors;
    cfg.delta = 5;
    EvalConfig ec;
    ec.K = 2;
    const auto rep = scrambled_eval(cl, identity_encoder(20), cfg, ec);
    EXPECT_EQ(rep.n_samples, 8u);
    EXPECT_EQ(rep.skipped, 2u);
    ec.K = 4;
    EXPECT_THROW(scrambled_eval(cl, identity_encoder(20), cfg, ec), std::invalid_argument);
}

TEST(ScrambledEval, CrossEntropyNeedsPosteriors) {
    const auto cl = simulate_clusters(4, 20, 3, kP, 41);
    DecodeConfig cfg;
    cfg.algorithm = Algorithm::Bmala;
    EvalConfig ec;
    ec.metric = Metric::CrossEntropy;
    EXPECT_THROW(scrambled_eval(cl, identity_encoder(20), cfg, ec), std::invalid_argument);
}

TEST(Sweep, GridAndSelection) {
    EXPECT_EQ(default_beta_grid().size(), 2u * 6 * 3 * 4);
    const auto cl = simulate_clusters(12, 24, 3, kP, 51);
    const auto enc = identity_encoder(24);
    DecodeConfig cfg;
    cfg.delta = 5;
    EvalConfig ec;
    ec.K = 3;
    const std::vector<BetaParams> one{{0, 0.1, 0.5, 0.5}};
    const auto s1 = sweep_betas(cl, enc, cfg, ec, one);
    EXPECT_EQ(s1.best, one[0]);
    ASSERT_EQ(s1.table.size(), 1u);

    const std::vector<BetaParams> grid{{1, 0, 0, 1}, {0, 1, 0.5, 0.5}, {1, 0.5, 0, 0.5}};
    const auto s = sweep_betas(cl, enc, cfg, ec, grid);
    ASSERT_EQ(s.table.size(), 3u);
    for (const auto& [b, r] : s.table) EXPECT_LE(s.best_report.value, r.value);
    EXPECT_THROW(sweep_betas(cl, enc, cfg, ec, std::vector<BetaParams>{}), std::invalid_argument);
}

TEST(Csv, HeaderAndRows) {
    EvalReport r;
    r.algorithm = "trellis-bma";
    r.code = "identity:110";
    r.K = 4;
    r.value = 0.05;
    r.half_width = 0.002;
    r.n_samples = 100;
    r.skipped = 3;
    std::ostringstream os;
    const std::vector<EvalReport> rs{r, r};
    write_report_csv(os, rs);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "algorithm,code,K,metric,value,ci,half_width,n_samples,skipped");
    std::getline(in, line);
    EXPECT_EQ(line, "trellis-bma,identity:110,4,hamming,0.05,0.95,0.002,100,3");
    std::ostringstream plot;
    write_plot_csv(plot, rs);
    EXPECT_EQ(plot.str().substr(0, plot.str().find('\n')), "series,metric,K,value,half_width");
}
