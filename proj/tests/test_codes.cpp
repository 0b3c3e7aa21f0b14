#include <gtest/gtest.h>

#include <set>

#include "idstr/alphabet.hpp"
#include "idstr/codes.hpp"
#include "oracle.hpp"

using namespace idstr;

namespace {
const Alphabet& dna = Alphabet::dna();

Sequence random_seq(Rng& rng, std::size_t n, int q) {
    Sequence s(n);
    for (auto& v : s) v = static_cast<Symbol>(rng.below(static_cast<std::uint64_t>(q)));
    return s;
}
} // namespace

TEST(Identity, Basics) {
    const auto e = identity_encoder(4);
    EXPECT_EQ(dna.decode(e.encode(dna.encode("ACGT"))), "ACGT");
    EXPECT_EQ(e.num_states(), 1);
    EXPECT_DOUBLE_EQ(e.rate(), 1.0);
    EXPECT_THROW(identity_encoder(0), std::invalid_argument);
}

TEST(MarkerRepeat, Rates) {
    EXPECT_EQ(mr_encoder(110, 6).message_length(), 104);
    EXPECT_NEAR(mr_encoder(110, 6).rate(), 104.0 / 110, 1e-15);
    EXPECT_NEAR(mr_encoder(110, 10).rate(), 100.0 / 110, 1e-15);
    EXPECT_EQ(mr_encoder(110, 10).codeword_length(), 110);
}

TEST(MarkerRepeat, SmallExample) {
    const auto e = mr_encoder(5, 1);
    EXPECT_EQ(mr_marker_positions(5, 1), std::vector<int>{2});
    EXPECT_EQ(dna.decode(e.encode(dna.encode("ACGT"))), "ACCGT");
}

TEST(MarkerRepeat, ZeroRepeatsIsIdentity) {
    Rng rng(1);
    const auto m = random_seq(rng, 17, 4);
    EXPECT_EQ(mr_encoder(17, 0).encode(m), m);
}

TEST(MarkerRepeat, RejectsBadR) {
    EXPECT_THROW(mr_encoder(10, 10), std::invalid_argument);
    EXPECT_THROW(mr_encoder(10, -1), std::invalid_argument);
}

TEST(MarkerRepeat, DuplicatePositionsCollapse) {
    // r = N-1 gives floor(iN/N) = i, all distinct; r large relative to N collides.
    const auto pos = mr_marker_positions(5, 4);
    EXPECT_EQ(std::set<int>(pos.begin(), pos.end()).size(), pos.size());
    const auto e = mr_encoder(5, 4);
    EXPECT_EQ(e.message_length(), 5 - static_cast<int>(pos.size()));
    EXPECT_EQ(e.codeword_length(), 5);
}

TEST(MarkerRepeat, ConstraintAndPayload) {
    Rng rng(2);
    for (int r : {1, 6, 10}) {
        const auto e = mr_encoder(110, r);
        const auto pos = mr_marker_positions(110, r);
        for (int t = 0; t < 50; ++t) {
            const auto m = random_seq(rng, static_cast<std::size_t>(e.message_length()), 4);
            const auto x = e.encode(m);
            ASSERT_EQ(x.size(), 110u);
            Sequence payload;
            std::set<int> rep;
            for (int p : pos) {
                EXPECT_EQ(x[static_cast<std::size_t>(p)], x[static_cast<std::size_t>(p) - 1]); // x_{p+1} = x_p, 1-based
                rep.insert(p + 1);
            }
            for (int n = 1; n <= 110; ++n)
                if (!rep.count(n)) payload.push_back(x[static_cast<std::size_t>(n) - 1]);
            EXPECT_EQ(payload, m);
        }
    }
}

TEST(Fsm, RoundTripIdentityMrCc) {
    Rng rng(3);
    std::vector<FsmEncoder> encs{identity_encoder(30), mr_encoder(110, 10), mr_encoder(40, 3), cc_encoder(3, 55, 110),
                                 cc_encoder(4, 80, 110), cc_encoder(5, 60, 100)};
    for (const auto& e : encs) {
        for (int t = 0; t < 20; ++t) {
            const auto m = random_seq(rng, static_cast<std::size_t>(e.message_length()), e.message_alphabet_size());
            EXPECT_EQ(e.invert_codeword(e.encode(m)), m) << e.name();
        }
    }
}

TEST(Fsm, EmissionCountsSumToN) {
    for (const auto& e : {mr_encoder(110, 6), cc_encoder(3, 80, 110), identity_encoder(9)}) {
        int total = 0;
        for (int l = 0; l < e.message_length(); ++l) total += e.emissions(l);
        EXPECT_EQ(total, e.codeword_length());
        EXPECT_NEAR(e.rate(), static_cast<double>(e.message_length()) / e.codeword_length(), 1e-15);
    }
}

TEST(Fsm, InjectiveExhaustive) {
    std::vector<FsmEncoder> encs{identity_encoder(4), mr_encoder(6, 2), cc_encoder(3, 4, 8), cc_encoder(3, 5, 7),
                                 cc_encoder(4, 4, 6)};
    for (const auto& e : encs) {
        std::set<Sequence> seen;
        int count = 0;
        oracle::for_each_message(e.message_length(), e.message_alphabet_size(), [&](const Sequence& m) {
            seen.insert(e.encode(m));
            ++count;
        });
        EXPECT_EQ(static_cast<int>(seen.size()), count) << e.name();
    }
}

TEST(Convolutional, StatesAndRates) {
    EXPECT_EQ(cc_encoder(3, 55, 110).num_states(), 64);
    EXPECT_EQ(cc_encoder(4, 55, 110).num_states(), 256);
    EXPECT_EQ(cc_encoder(5, 55, 110).num_states(), 1024);
    EXPECT_DOUBLE_EQ(cc_encoder(3, 55, 110).rate(), 0.5);
    const auto e = cc_encoder(3, 80, 110);
    EXPECT_EQ(e.codeword_length(), 110);
    EXPECT_NEAR(e.rate(), 80.0 / 110, 1e-15);
    EXPECT_THROW(cc_encoder(2, 10, 20), std::invalid_argument);
    EXPECT_THROW(cc_encoder(3, 10, 25), std::invalid_argument);
}

TEST(Convolutional, LinearOverGf4) {
    const auto e = cc_encoder(3, CcGenerators::defaults(3), {true, true}, 12);
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        const auto a = random_seq(rng, 12, 4), b = random_seq(rng, 12, 4);
        Sequence s(12);
        for (int i = 0; i < 12; ++i) s[static_cast<std::size_t>(i)] = gf4::add(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]);
        const auto xa = e.encode(a), xb = e.encode(b), xs = e.encode(s);
        for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(xs[i], gf4::add(xa[i], xb[i]));
    }
}

TEST(Convolutional, PunctureRejectsEmptyStep) {
    EXPECT_THROW(cc_encoder(3, CcGenerators::defaults(3), {false, false, true, true}, 4), std::invalid_argument);
    EXPECT_THROW(cc_encoder(3, CcGenerators::defaults(3), {}, 4), std::invalid_argument);
}

TEST(ParseEncoder, Specs) {
    EXPECT_EQ(parse_encoder("identity:110").codeword_length(), 110);
    EXPECT_EQ(parse_encoder("mr:110:10").message_length(), 100);
    const auto cc = parse_encoder("cc:3:0.7272");
    EXPECT_EQ(cc.message_length(), 80);
    EXPECT_EQ(cc.codeword_length(), 110);
    EXPECT_EQ(parse_encoder("cc:4:60/100").codeword_length(), 100);
    EXPECT_EQ(parse_encoder("cc:3:4/6:110").codeword_length(), 6);
    EXPECT_THROW(parse_encoder("cc:3:4/7:110"), FormatError);
    EXPECT_THROW(parse_encoder("bogus:3"), FormatError);
    EXPECT_THROW(parse_encoder("mr:10:x"), FormatError);
    EXPECT_THROW(parse_encoder("mr:10:10"), FormatError);
    EXPECT_THROW(parse_encoder("cc:9:0.5"), FormatError);
}

TEST(Scramble, Examples) {
    EXPECT_EQ(scramble({1, 2}, {3, 3}, 4), (Sequence{0, 1}));
    EXPECT_EQ(scramble({1, 2, 3}, {0, 0, 0}, 4), (Sequence{1, 2, 3}));
    EXPECT_THROW(scramble({1, 2}, {1}, 4), std::invalid_argument);
    EXPECT_THROW(unscramble({1, 2}, {1}, 4), std::invalid_argument);
}

TEST(Scramble, RoundTrip) {
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        const auto x = random_seq(rng, 50, 4), z = random_seq(rng, 50, 4);
        EXPECT_EQ(unscramble(scramble(x, z, 4), z, 4), x);
    }
}

TEST(Scramble, BijectiveExhaustive) {
    for (int n = 1; n <= 4; ++n) {
        Rng rng(static_cast<std::uint64_t>(n));
        const auto c = random_seq(rng, static_cast<std::size_t>(n), 4);
        const auto z0 = random_seq(rng, static_cast<std::size_t>(n), 4);
        std::set<Sequence> over_z, over_x;
        int count = 0;
        oracle::for_each_message(n, 4, [&](const Sequence& s) {
            over_z.insert(scramble(c, s, 4)); // c + z for all z
            over_x.insert(scramble(s, z0, 4)); // x + z0 for all x
            ++count;
        });
        EXPECT_EQ(count, 1 << (2 * n));
        EXPECT_EQ(static_cast<int>(over_z.size()), count);
        EXPECT_EQ(static_cast<int>(over_x.size()), count);
    }
}
