#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qkdsim/keyrate.hpp"

using namespace qkdsim;

TEST_CASE("channel parameters", "[keyrate]") {
    const ChannelParams c = channel_from_loss(3.0);
    CHECK(c.transmission == Catch::Approx(std::pow(10.0, -0.3)).epsilon(1e-12));
    CHECK(c.chi_line() ==
          Catch::Approx((1.0 - c.transmission) / c.transmission).epsilon(1e-12));

    const ChannelParams lossless = channel_from_loss(0.0, 0.05);
    CHECK(lossless.chi_line() == Catch::Approx(0.05).epsilon(1e-12));

    CHECK_THROWS_AS(channel_from_loss(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(channel_from_loss(1.0, -0.1).validate(), std::invalid_argument);
}

TEST_CASE("detection parameters", "[keyrate]") {
    const DetectionParams det;  // 2.4 dB receiver, crossover-derived v_el
    CHECK(det.eta == Catch::Approx(std::pow(10.0, -0.24)).epsilon(1e-9));
    CHECK(det.v_el == 0.01);
    CHECK(det.chi_hom() == Catch::Approx(0.7551788371502).epsilon(1e-10));

    DetectionParams perfect;
    perfect.eta = 1.0;
    perfect.v_el = 0.0;
    CHECK(perfect.chi_hom() == 0.0);
}

TEST_CASE("ideal reverse-reconciliation rate against closed forms", "[keyrate]") {
    const DetectionParams det;  // ignored in ideal mode
    KeyRateParams p;
    p.mode = KeyRateMode::Ideal;

    SECTION("lossless noiseless channel leaks nothing") {
        p.modulation_variance = 60.0;
        const KeyRateResult r = key_rate_rr_individual(channel_from_loss(0.0), det, p);
        CHECK(r.i_ab == Catch::Approx(0.5 * std::log2(61.0)).epsilon(1e-12));
        CHECK(r.i_be == Catch::Approx(0.0).margin(1e-12));
        CHECK(r.delta_i == Catch::Approx(2.9653686687814).epsilon(1e-10));
    }

    SECTION("hand-computed point at 0.88 dB") {
        p.modulation_variance = 2.0 * 30.0 / 9.0;
        const KeyRateResult r = key_rate_rr_individual(channel_from_loss(0.88), det, p);
        CHECK(r.delta_i == Catch::Approx(0.8931157853727).epsilon(1e-10));
    }

    SECTION("3 dB loss limit does not apply to reverse reconciliation") {
        p.modulation_variance = 6.0;
        for (double loss : {4.0, 10.0, 20.0, 30.0}) {
            const KeyRateResult r = key_rate_rr_individual(channel_from_loss(loss), det, p);
            CHECK(r.delta_i > 0.0);
        }
    }
}

TEST_CASE("realistic-mode rate against frozen values", "[keyrate]") {
    const DetectionParams det;
    KeyRateParams p;
    p.mode = KeyRateMode::Realistic;

    SECTION("short link, V_A = 2*30/9") {
        p.modulation_variance = 2.0 * 30.0 / 9.0;
        const KeyRateResult r = key_rate_rr_individual(channel_from_loss(0.88), det, p);
        CHECK(r.delta_i == Catch::Approx(0.6301249232970).epsilon(1e-10));
        CHECK(r.chi_hom == Catch::Approx(0.7551788371502).epsilon(1e-10));
    }

    SECTION("long link, V_A = 2*20/9") {
        p.modulation_variance = 2.0 * 20.0 / 9.0;
        const KeyRateResult r = key_rate_rr_individual(channel_from_loss(3.1), det, p);
        CHECK(r.delta_i == Catch::Approx(0.2320950439302).epsilon(1e-10));
    }

    SECTION("alternate modulation-variance readings stay distinct") {
        p.modulation_variance = 60.0;
        CHECK(key_rate_rr_individual(channel_from_loss(0.88), det, p).delta_i ==
              Catch::Approx(0.8667267255173).epsilon(1e-10));
        p.modulation_variance = 30.0;
        CHECK(key_rate_rr_individual(channel_from_loss(0.88), det, p).delta_i ==
              Catch::Approx(0.8268589011883).epsilon(1e-10));
        p.modulation_variance = 40.0;
        CHECK(key_rate_rr_individual(channel_from_loss(3.1), det, p).delta_i ==
              Catch::Approx(0.3026851305117).epsilon(1e-10));
        p.modulation_variance = 20.0;
        CHECK(key_rate_rr_individual(channel_from_loss(3.1), det, p).delta_i ==
              Catch::Approx(0.2915683781040).epsilon(1e-10));
    }

    SECTION("reduces exactly to the ideal rate for a perfect receiver") {
        DetectionParams perfect;
        perfect.eta = 1.0;
        perfect.v_el = 0.0;
        KeyRateParams ideal = p;
        ideal.mode = KeyRateMode::Ideal;
        for (double loss : {0.0, 0.88, 3.1, 10.0}) {
            for (double va : {2.0, 6.0, 20.0, 60.0}) {
                p.modulation_variance = va;
                ideal.modulation_variance = va;
                const double real =
                    key_rate_rr_individual(channel_from_loss(loss), perfect, p).delta_i;
                const double id =
                    key_rate_rr_individual(channel_from_loss(loss), det, ideal).delta_i;
                CHECK(real == Catch::Approx(id).margin(1e-14));
            }
        }
    }

    SECTION("trusted receiver beats untrusted accounting") {
        // Attributing receiver loss to Eve can only lower the rate.
        p.modulation_variance = 6.0;
        const ChannelParams direct = channel_from_loss(0.88);
        const ChannelParams pess = channel_from_loss(0.88 + 2.4);
        DetectionParams perfect;
        perfect.eta = 1.0;
        perfect.v_el = 0.0;
        KeyRateParams ideal = p;
        ideal.mode = KeyRateMode::Ideal;
        const double trusted = key_rate_rr_individual(direct, det, p).delta_i;
        const double untrusted = key_rate_rr_individual(pess, perfect, ideal).delta_i;
        CHECK(trusted > untrusted);
    }

    SECTION("excess noise reduces the rate") {
        p.modulation_variance = 6.0;
        const double clean =
            key_rate_rr_individual(channel_from_loss(0.88, 0.0), det, p).delta_i;
        const double noisy =
            key_rate_rr_individual(channel_from_loss(0.88, 0.1), det, p).delta_i;
        CHECK(noisy < clean);
    }

    SECTION("reconciliation efficiency scales only I_AB") {
        p.modulation_variance = 6.0;
        p.reconciliation_efficiency = 0.9;
        const KeyRateResult r = key_rate_rr_individual(channel_from_loss(0.88), det, p);
        p.reconciliation_efficiency = 1.0;
        const KeyRateResult r1 = key_rate_rr_individual(channel_from_loss(0.88), det, p);
        CHECK(r.i_ab == Catch::Approx(r1.i_ab).epsilon(1e-14));
        CHECK(r.delta_i == Catch::Approx(0.9 * r1.i_ab - r1.i_be).epsilon(1e-12));
    }
}

TEST_CASE("bits per second", "[keyrate]") {
    CHECK(bits_per_second(0.63, 50e3) == Catch::Approx(31500.0).epsilon(1e-12));
    CHECK(bits_per_second(0.18, 6.7e3) == Catch::Approx(1206.0).epsilon(1e-12));
    CHECK(bits_per_second(-0.2, 50e3) == 0.0);
    CHECK(bits_per_second(0.5, 0.0) == 0.0);
    CHECK_THROWS_AS(bits_per_second(0.5, -1.0), std::invalid_argument);
}

TEST_CASE("rate decreases with loss, stays positive deep into the loss budget", "[keyrate]") {
    const DetectionParams det;
    KeyRateParams p;
    p.mode = KeyRateMode::Ideal;
    p.modulation_variance = 2.0 * 30.0 / 9.0;
    double prev = 1e9;
    for (double loss = 0.0; loss <= 30.0 + 1e-9; loss += 0.5) {
        const double di = key_rate_rr_individual(channel_from_loss(loss), det, p).delta_i;
        CHECK(di > 0.0);
        CHECK(di < prev);
        prev = di;
    }
}
