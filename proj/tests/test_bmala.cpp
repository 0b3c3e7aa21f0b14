#include <gtest/gtest.h>

#include "idstr/bmala.hpp"

using namespace idstr;

namespace {

Sequence random_seq(Rng& rng, std::size_t n, int q) {
    Sequence s(n);
    for (auto& v : s) v = static_cast<Symbol>(rng.below(static_cast<std::uint64_t>(q)));
    return s;
}

const IdsParams kP = IdsParams::from_error_rates(0.017, 0.02, 0.022);

} // namespace

TEST(Bmala, IdenticalTracesReturnInput) {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const Sequence x = random_seq(rng, 1 + rng.below(60), 4);
        for (int K : {1, 2, 5}) {
            const std::vector<Sequence> tr(static_cast<std::size_t>(K), x);
            EXPECT_EQ(bmala_reconstruct(tr, static_cast<int>(x.size())), x);
        }
    }
}

TEST(Bmala, SingleTracePadsOrTruncates) {
    const Sequence y{1, 2, 3, 0, 1};
    const std::vector<Sequence> tr{y};
    EXPECT_EQ(bmala_reconstruct(tr, 3), (Sequence{1, 2, 3}));
    EXPECT_EQ(bmala_reconstruct(tr, 7), (Sequence{1, 2, 3, 0, 1, 0, 0}));
    BmalaOptions one_sided;
    one_sided.two_sided = false;
    EXPECT_EQ(bmala_reconstruct(tr, 7, one_sided), (Sequence{1, 2, 3, 0, 1, 0, 0}));
}

TEST(Bmala, OutputLengthAlwaysN) {
    Rng rng(5);
    const std::vector<Sequence> empty_traces{Sequence{}, Sequence{}};
    EXPECT_EQ(bmala_reconstruct(empty_traces, 9), Sequence(9, 0));
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 1 + static_cast<int>(rng.below(80));
        const int K = 1 + static_cast<int>(rng.below(8));
        std::vector<Sequence> tr;
        for (int k = 0; k < K; ++k) tr.push_back(random_seq(rng, rng.below(120), 4));
        const Sequence out = bmala_reconstruct(tr, n);
        ASSERT_EQ(out.size(), static_cast<std::size_t>(n));
        for (Symbol s : out) EXPECT_LT(s, 4);
    }
}

TEST(Bmala, MajorityOverridesSingleSubstitution) {
    const Sequence x{0, 1, 2, 3, 0, 1, 2, 3, 3, 2, 1, 0};
    Sequence bad = x;
    bad[5] = 3;
    const std::vector<Sequence> tr{x, bad, x};
    EXPECT_EQ(bmala_reconstruct(tr, 12), x);
}

TEST(Bmala, RecoversFromIsolatedIndels) {
    const Sequence x{0, 1, 2, 3, 0, 2, 1, 3, 3, 0, 2, 1, 0, 3, 2, 1};
    Sequence del = x;
    del.erase(del.begin() + 6);
    Sequence ins = x;
    ins.insert(ins.begin() + 9, 2);
    const std::vector<Sequence> tr{x, del, ins, x};
    EXPECT_EQ(bmala_reconstruct(tr, 16), x);
}

TEST(Bmala, Deterministic) {
    Rng rng(9);
    const Sequence x = random_seq(rng, 110, 4);
    std::vector<Sequence> tr;
    for (int k = 0; k < 6; ++k) tr.push_back(transmit(x, kP, 4, rng));
    EXPECT_EQ(bmala_reconstruct(tr, 110), bmala_reconstruct(tr, 110));
}

TEST(Bmala, TracePermutationDoesNotMatterWithoutTies) {
    // Traces that agree everywhere but one position leave no room for order-dependent ties.
    const Sequence x{2, 0, 3, 1, 1, 0, 2, 3};
    Sequence s = x;
    s[2] = 0;
    std::vector<Sequence> a{x, s, x}, b{s, x, x};
    EXPECT_EQ(bmala_reconstruct(a, 8), bmala_reconstruct(b, 8));
}

TEST(Bmala, MoreTracesHelp) {
    Rng rng(11);
    double err4 = 0, err8 = 0;
    for (int rep = 0; rep < 150; ++rep) {
        const Sequence x = random_seq(rng, 110, 4);
        std::vector<Sequence> tr;
        for (int k = 0; k < 8; ++k) tr.push_back(transmit(x, kP, 4, rng));
        const auto a = bmala_reconstruct(std::span(tr).first(4), 110);
        const auto b = bmala_reconstruct(tr, 110);
        for (std::size_t i = 0; i < 110; ++i) {
            err4 += a[i] != x[i];
            err8 += b[i] != x[i];
        }
    }
    EXPECT_LT(err8, err4);
}

TEST(Bmala, Validation) {
    const std::vector<Sequence> none;
    EXPECT_THROW(bmala_reconstruct(none, 4), std::invalid_argument);
    const std::vector<Sequence> bad{Sequence{0, 5}};
    EXPECT_THROW(bmala_reconstruct(bad, 4), std::invalid_argument);
    const std::vector<Sequence> ok{Sequence{0, 1}};
    EXPECT_THROW(bmala_reconstruct(ok, 0), std::invalid_argument);
    BmalaOptions o;
    o.lookahead = 0;
    EXPECT_THROW(bmala_reconstruct(ok, 2, o), std::invalid_argument);
}

TEST(BmalaMap, NoiselessTracesGiveDelta) {
    Rng rng(13);
    const auto enc = mr_encoder(16, 2);
    const int L = enc.message_length();
    const Sequence m = random_seq(rng, static_cast<std::size_t>(L), 4);
    const Sequence x = enc.encode(m);
    const std::vector<Sequence> tr{x, x, x};
    const IdsParams clean = IdsParams::from_error_rates(0.0, 0.0, 0.0);
    const auto post = bmala_map(tr, enc, clean, MessagePrior::uniform(L, 4));
    ASSERT_EQ(post.length(), L);
    for (int l = 0; l < L; ++l) EXPECT_NEAR(post.at(l, m[static_cast<std::size_t>(l)]), 1.0, 1e-12);
}

TEST(BmalaMap, NoisyTracesDecodeWithValidRows) {
    Rng rng(17);
    const auto enc = cc_encoder(3, 20, 30);
    const Sequence m = random_seq(rng, 20, 4);
    const Sequence x = enc.encode(m);
    std::vector<Sequence> tr;
    for (int k = 0; k < 6; ++k) tr.push_back(transmit(x, kP, 4, rng));
    const auto post = bmala_map(tr, enc, kP, MessagePrior::uniform(20, 4));
    for (int l = 0; l < 20; ++l) {
        double s = 0;
        for (double p : post.row(l)) s += p;
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}
