#include "doctest.h"
#include "nedsim/valuation.hpp"
#include "oracles.hpp"

using namespace nedsim;
using namespace nedsim::valuation;

TEST_CASE("fa_value matches brute force and the spec examples") {
    CHECK(fa_value({}) == 0.0);
    OfferSet two{{{1.0, 0.5}, {0.5, 0.5}}};
    CHECK(fa_value(two) == doctest::Approx(0.5625).epsilon(1e-12));
    CHECK(fa_value(two) == doctest::Approx(oracles::enum_fa(two)).epsilon(1e-12));

    OfferSet witness{{{1.0, 0.9}, {0.1, 0.9}}};
    CHECK(std::abs(fa_value(witness) - 0.5445) < 1e-12);
    OfferSet alone{{{1.0, 0.9}}};
    CHECK(fa_value(alone) == doctest::Approx(0.9));
    CHECK(fa_value(witness) < fa_value(alone));  // FA is non-monotone
}

TEST_CASE("ba_value: singleton, brute force, and spec examples") {
    OfferSet single{{{0.7, 0.4}}};
    CHECK(ba_value(single) == doctest::Approx(0.28).epsilon(1e-12));
    OfferSet two{{{1.0, 0.5}, {0.5, 0.5}}};
    CHECK(ba_value(two) == doctest::Approx(0.625).epsilon(1e-12));
    OfferSet witness{{{1.0, 0.9}, {0.1, 0.9}}};
    CHECK(std::abs(ba_value(witness) - 0.909) < 1e-12);
    CHECK(ba_value(witness) > 0.9);
}

TEST_CASE("k_accept_value boundaries and the 3-driver example") {
    OfferSet three{{{1.0, 0.5}, {0.5, 0.5}, {0.2, 0.5}}};
    CHECK(k_accept_value(three, 2) == doctest::Approx(0.629167).epsilon(1e-5));
    CHECK(k_accept_value(three, 2) ==
          doctest::Approx(oracles::enum_k_accept(three, 2)).epsilon(1e-12));

    CHECK(value(Protocol::k_accept(2), three) ==
          doctest::Approx(k_accept_value(three, 2)));
    CHECK(value(Protocol::fa(), {}) == 0.0);
    CHECK(value(Protocol::ba(), OfferSet{{{1.0, 1.0}}}) == doctest::Approx(1.0));
}

TEST_CASE("protocol boundary identities: k=1 is FA, k=|S| is BA") {
    Rng rng = make_rng(11);
    for (int i = 0; i < 300; ++i) {
        OfferSet s = oracles::random_offer_set(rng);
        CHECK(k_accept_value(s, 1) == doctest::Approx(fa_value(s)).epsilon(1e-12));
        const int n = std::max<int>(1, int(s.size()));
        CHECK(k_accept_value(s, n) == doctest::Approx(ba_value(s)).epsilon(1e-12));
        CHECK(k_accept_value(s, n + 3) == doctest::Approx(ba_value(s)).epsilon(1e-12));
    }
}

TEST_CASE("marginal gains match the spec examples") {
    CHECK(marginal_gain(Protocol::ba(), {}, {0.8, 0.25}) == doctest::Approx(0.2));
    OfferSet base{{{1.0, 0.9}}};
    CHECK(std::abs(marginal_gain(Protocol::fa(), base, {0.1, 0.9}) - (-0.3555)) < 1e-12);
    CHECK(std::abs(marginal_gain(Protocol::ba(), base, {0.1, 0.9}) - 0.009) < 1e-12);
}

TEST_CASE("valuation properties on random offer sets") {
    Rng rng = make_rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        OfferSet s = oracles::random_offer_set(rng);

        // Exact implementations agree with the independent enumerations.
        CHECK(fa_value(s) == doctest::Approx(oracles::enum_fa(s)).epsilon(1e-12));
        CHECK(ba_value(s) == doctest::Approx(oracles::enum_ba(s)).epsilon(1e-12));
        CHECK(ba_value(s) == doctest::Approx(ba_value_enum(s)).epsilon(1e-12));

        // FA <= BA always.
        CHECK(fa_value(s) <= ba_value(s) + 1e-12);

        // k-Accept is weakly increasing in k.
        double prev = -1.0;
        for (int k = 1; k <= int(s.size()) + 1; ++k) {
            const double v = k_accept_value(s, k);
            CHECK(v >= prev - 1e-12);
            prev = v;
        }

        // Equal weights collapse all protocols to w * (1 - prod(1-p)).
        OfferSet flat = s;
        const double w = 0.3 + unit(rng);
        double miss = 1.0;
        for (auto& o : flat.entries) {
            o.weight = w;
            miss *= 1.0 - o.accept_prob;
        }
        const double expected = flat.entries.empty() ? 0.0 : w * (1.0 - miss);
        CHECK(fa_value(flat) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(ba_value(flat) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("ba_value is monotone and submodular") {
    Rng rng = make_rng(77);
    std::uniform_real_distribution<double> wd(0.0, 2.0), pd(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        OfferSet t = oracles::random_offer_set(rng, 5);
        const Offer extra{wd(rng), pd(rng)};

        // Monotone: adding any candidate never decreases the value.
        CHECK(marginal_gain(Protocol::ba(), t, extra) >= -1e-12);

        // Submodular: the marginal of `extra` on a subset dominates the
        // marginal on the full set.
        OfferSet sub;
        for (const auto& o : t.entries)
            if (pd(rng) < 0.5) sub.entries.push_back(o);
        const double on_sub = marginal_gain(Protocol::ba(), sub, extra);
        const double on_full = marginal_gain(Protocol::ba(), t, extra);
        CHECK(on_sub >= on_full - 1e-12);
    }
}

TEST_CASE("weight ties leave BA invariant under permutation") {
    OfferSet a{{{0.5, 0.2}, {0.5, 0.7}, {0.9, 0.4}}};
    OfferSet b{{{0.5, 0.7}, {0.5, 0.2}, {0.9, 0.4}}};
    CHECK(ba_value(a) == doctest::Approx(ba_value(b)).epsilon(1e-15));
}

TEST_CASE("mc_value_oracle agrees with exact values") {
    const auto det = mc_value_oracle(Protocol::fa(), OfferSet{{{1.0, 1.0}}}, 1000, 3);
    CHECK(det.mean == doctest::Approx(1.0));
    CHECK(det.std_err == doctest::Approx(0.0));

    OfferSet two{{{1.0, 0.5}, {0.5, 0.5}}};
    const auto ba_est = mc_value_oracle(Protocol::ba(), two, 1000000, 4);
    CHECK(std::abs(ba_est.mean - 0.625) <= 4.0 * ba_est.std_err);

    OfferSet three{{{1.0, 0.5}, {0.5, 0.5}, {0.2, 0.5}}};
    const auto k_est = mc_value_oracle(Protocol::k_accept(2), three, 1000000, 5);
    CHECK(std::abs(k_est.mean - 0.629167) <= 4.0 * k_est.std_err + 1e-6);

    const auto fa_est = mc_value_oracle(Protocol::fa(), three, 1000000, 6);
    CHECK(std::abs(fa_est.mean - fa_value(three)) <= 4.0 * fa_est.std_err);

    // Deterministic given the seed.
    const auto again = mc_value_oracle(Protocol::fa(), three, 10000, 6);
    const auto again2 = mc_value_oracle(Protocol::fa(), three, 10000, 6);
    CHECK(again.mean == again2.mean);
}

TEST_CASE("enumeration cap is enforced") {
    OfferSet big;
    for (int i = 0; i < 21; ++i) big.entries.push_back({0.5, 0.5});
    CHECK_THROWS_AS(fa_value(big), Error);
    CHECK_THROWS_AS(ba_value(big), Error);
    CHECK_THROWS_AS(k_accept_value(big, 2), Error);
}
