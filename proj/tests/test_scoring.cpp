#include <catch2/catch_amalgamated.hpp>

#include "slicebench/scoring.hpp"

using namespace slicebench;

namespace {
const ScoreConstants kC{};
}

TEST_CASE("eMBB score worked values") {
    REQUIRE(score_embb(0.0, 0.0, kC) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(score_embb(6.0, 0.0, kC) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(score_embb(0.0, 187500.0, kC) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(score_embb(100.0, 0.0, kC) == 1.0);  // clipped
    REQUIRE(score_embb(0.0, 1e9, kC) == 0.0);    // clipped below
}

TEST_CASE("URLLC score worked values") {
    REQUIRE(score_urllc(0.0, 0.0, kC) == 1.0);
    REQUIRE(score_urllc(4.0, 0.0, kC) == 1.0);
    REQUIRE(score_urllc(4.0, 250000.0, kC) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(score_urllc(1.0, 1e6, kC) == 0.0);  // 8 s delay, floored
    REQUIRE(score_urllc(0.0, 1.0, kC) == 0.0);  // backlog with no service
}

TEST_CASE("mMTC score worked values") {
    REQUIRE(score_mmtc(0.0, 0.0, 3, kC) == Catch::Approx(1.0 / 3.0).margin(1e-12));
    REQUIRE(score_mmtc(10.0, 5.0, 3, kC) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(score_mmtc(4.0, 9.0, 3, kC) == 1.0);  // clamped
    REQUIRE_THROWS_AS(score_mmtc(0.0, 0.0, 0, kC), std::domain_error);
}

TEST_CASE("reward composes the three idle-case scores") {
    KpiFrame frame;
    frame.of(Slice::mmtc).slice_prb = 3;
    frame.of(Slice::urllc).slice_prb = 3;
    frame.of(Slice::embb).slice_prb = 44;
    REQUIRE(reward(frame, kC) == Catch::Approx(11.0 / 18.0).margin(1e-12));

    // all-ones frame: high eMBB drain, clean URLLC, exact mMTC utilization
    frame.of(Slice::embb).tx_brate_mbps = 6.0;
    frame.of(Slice::urllc).tx_brate_mbps = 1.0;
    frame.of(Slice::mmtc).prb_req = 10;
    frame.of(Slice::mmtc).prb_granted = 10;
    REQUIRE(reward(frame, kC) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("score ranges hold for a grid of non-negative inputs") {
    for (double tx : {0.0, 0.5, 3.0, 20.0, 300.0})
        for (double buf : {0.0, 1e3, 1e5, 1e7, 1e9}) {
            double e = score_embb(tx, buf, kC);
            double u = score_urllc(tx, buf, kC);
            REQUIRE((e >= 0.0 && e <= 1.0));
            REQUIRE((u >= 0.0 && u <= 1.0));
        }
    for (double req : {0.0, 1.0, 5.0, 1e4})
        for (double got : {0.0, 1.0, 5.0, 1e4})
            for (int prb : {1, 3, 44}) {
                double m = score_mmtc(req, got, prb, kC);
                REQUIRE((m >= 0.0 && m <= 1.0));
            }
}

TEST_CASE("score monotonicity") {
    // eMBB: non-increasing in buffer, non-decreasing in rate
    double prev = 1.0;
    for (double buf = 0.0; buf <= 5e5; buf += 2.5e4) {
        double v = score_embb(2.0, buf, kC);
        REQUIRE(v <= prev + 1e-12);
        prev = v;
    }
    prev = 0.0;
    for (double tx = 0.0; tx <= 10.0; tx += 0.5) {
        double v = score_embb(tx, 2e5, kC);
        REQUIRE(v >= prev - 1e-12);
        prev = v;
    }
    // URLLC: non-increasing in buffer for fixed positive rate
    prev = 1.0;
    for (double buf = 0.0; buf <= 1e6; buf += 5e4) {
        double v = score_urllc(4.0, buf, kC);
        REQUIRE(v <= prev + 1e-12);
        prev = v;
    }
    // mMTC: active branch non-decreasing in granted; idle branch strictly
    // decreasing in slice_prb
    REQUIRE(score_mmtc(10, 4, 3, kC) <= score_mmtc(10, 6, 3, kC));
    REQUIRE(score_mmtc(0, 0, 3, kC) > score_mmtc(0, 0, 6, kC));
    REQUIRE(score_mmtc(0, 0, 6, kC) > score_mmtc(0, 0, 44, kC));
}

TEST_CASE("URLLC score is continuous in the buffer at positive rate") {
    const double eps = 1e-6;
    for (double buf : {1.0, 1e3, 124999.0, 125000.0}) {
        double lo = score_urllc(4.0, buf - eps, kC);
        double hi = score_urllc(4.0, buf + eps, kC);
        REQUIRE(std::abs(hi - lo) < 1e-9);
    }
}

TEST_CASE("constants validate") {
    ScoreConstants bad = kC;
    bad.alpha = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    REQUIRE_NOTHROW(kC.validate());
    REQUIRE(kC.alpha == Catch::Approx(1.0 / 3.0));
    REQUIRE(kC.beta == Catch::Approx(1.5));
    REQUIRE(kC.gamma_delay == Catch::Approx(1.0));
    REQUIRE(kC.kappa == Catch::Approx(8e-6));
    REQUIRE(kC.period_s == Catch::Approx(0.25));
}
