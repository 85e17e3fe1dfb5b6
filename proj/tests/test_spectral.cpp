#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "vapormem/spectral.hpp"

using namespace vapormem;
using namespace vapormem::spectral;

namespace {

SpectralCurve gaussian_curve(double delta0, double step, std::size_t count, double center,
                             double fwhm, double peak = 1.0) {
    std::vector<double> v(count);
    const double k = 4.0 * std::numbers::ln2 / (fwhm * fwhm);
    for (std::size_t i = 0; i < count; ++i) {
        const double d = delta0 + static_cast<double>(i) * step;
        v[i] = peak * std::exp(-k * sqr(d - center));
    }
    return SpectralCurve(delta0, step, std::move(v));
}

// Brute-force reference for broaden: the discrete sum written directly from
// its definition, independently of the library loop.
std::vector<double> direct_broadened(const SpectralCurve& c, double w_d, std::ptrdiff_t i_max) {
    const double pref = std::sqrt(std::numbers::ln2) / (w_d * std::sqrt(std::numbers::pi));
    double wsum = 0.0;
    for (std::ptrdiff_t i = -i_max; i <= i_max; ++i) {
        const double d = static_cast<double>(i) * c.delta_step;
        wsum += pref / (1.0 + sqr(2.0 * d / w_d));
    }
    const auto n = static_cast<std::ptrdiff_t>(c.size());
    std::vector<double> out(c.size(), 0.0);
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -i_max; i <= i_max; ++i) {
            const std::ptrdiff_t k = j + i;
            if (k < 0 || k >= n) continue;
            const double d = static_cast<double>(i) * c.delta_step;
            const double a = pref / (1.0 + sqr(2.0 * d / w_d));
            acc += (a / wsum) * c.values[static_cast<std::size_t>(k)];
        }
        out[static_cast<std::size_t>(j)] = acc;
    }
    return out;
}

} // namespace

TEST_CASE("spectral curve validation") {
    CHECK_THROWS_AS(SpectralCurve(0.0, 1.0, {}), physics_error);
    CHECK_THROWS_AS(SpectralCurve(0.0, 0.0, {1.0}), physics_error);
    CHECK_THROWS_AS(SpectralCurve(0.0, 1.0, {std::nan("")}), physics_error);

    const SpectralCurve c(-1.0e9, 0.5e9, {1.0, 2.0, 3.0});
    CHECK(c.delta_at(2) == 0.0);
    CHECK(curve_integral(c) == Catch::Approx(3.0e9));
}

TEST_CASE("curve argmax ties break toward small |delta|") {
    SpectralCurve c(-100.0, 25.0, {0.0, 5.0, 1.0, 2.0, 5.0, 0.0, 0.0});
    // equal maxima at delta = -75 and delta = 0
    c.values[4] = 5.0;
    c.values[1] = 5.0;
    c.values[4] = 5.0;
    CHECK(c.delta_at(curve_argmax(c)) == 0.0);
}

TEST_CASE("velocity distribution peak and half width") {
    const VelocityDistribution dist{960.0e6};

    const double peak = velocity_weight(0.0, dist);
    const double expected = std::sqrt(std::numbers::ln2) / (960.0e6 * std::sqrt(std::numbers::pi));
    CHECK(std::abs(peak - expected) <= 1e-7 * expected);
    // per-MHz value quoted to four digits
    CHECK(peak * 1.0e6 == Catch::Approx(4.893e-4).epsilon(1e-4));

    // half maximum exactly at w_d / 2
    CHECK(velocity_weight(dist.w_d / 2.0, dist) == 0.5 * peak);
    CHECK(velocity_weight(-dist.w_d / 2.0, dist) == 0.5 * peak);

    // symmetric, vanishing tail
    CHECK(velocity_weight(3.7e8, dist) == velocity_weight(-3.7e8, dist));
    CHECK(velocity_weight(1.0e15, dist) < 1e-20);

    CHECK_THROWS_AS(velocity_weight(0.0, VelocityDistribution{0.0}), physics_error);
}

TEST_CASE("broaden matches the direct double sum") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> amp(0.0, 1.0);
    const double step = 25.0e6;
    std::vector<double> v(512);
    for (auto& x : v) x = amp(rng);
    const SpectralCurve c(-6.4e9, step, std::move(v));

    const VelocityDistribution dist{960.0e6};
    const std::size_t i_max = 128; // 3.2 GHz window > 3 w_d
    const auto lib = broaden(c, dist, i_max);
    const auto ref = direct_broadened(c, dist.w_d, static_cast<std::ptrdiff_t>(i_max));
    for (std::size_t i = 0; i < c.size(); ++i)
        REQUIRE(std::abs(lib.values[i] - ref[i]) <= 1e-10);
}

TEST_CASE("broaden of a discrete delta reproduces the distribution shape") {
    const double step = 20.0e6;
    std::vector<double> v(401, 0.0);
    v[200] = 1.0;
    const SpectralCurve c(-4.0e9, step, std::move(v));
    const VelocityDistribution dist{960.0e6};
    const std::size_t i_max = 150;

    const auto out = broaden(c, dist, i_max);

    double wsum = 0.0;
    for (std::ptrdiff_t i = -150; i <= 150; ++i)
        wsum += velocity_weight(static_cast<double>(i) * step, dist);

    for (std::size_t j = 0; j < out.size(); ++j) {
        const double d = out.delta_at(j) - c.delta_at(200);
        const double expect =
            std::abs(d) <= 150.0 * step + 1.0 ? velocity_weight(d, dist) / wsum : 0.0;
        REQUIRE(out.values[j] == Catch::Approx(expect).margin(1e-14));
    }
}

TEST_CASE("broaden keeps a constant curve fixed in periodic mode") {
    const SpectralCurve c(-2.0e9, 40.0e6, std::vector<double>(128, 0.7));
    const auto out = broaden(c, VelocityDistribution{960.0e6}, 80, Padding::periodic);
    for (double x : out.values) REQUIRE(std::abs(x - 0.7) <= 1e-10);
}

TEST_CASE("broaden widens a narrow line to the distribution width") {
    const double step = 10.0e6;
    const auto c = gaussian_curve(-8.0e9, step, 1601, 0.0, 10.0e6);
    const VelocityDistribution dist{960.0e6};
    const auto out = broaden(c, dist, 400);
    const double fwhm = curve_fwhm(out);
    CHECK(fwhm == Catch::Approx(960.0e6).epsilon(0.05));

    // never exceeds the input maximum, integral preserved by normalization
    CHECK(curve_max(out) <= curve_max(c));
    CHECK(curve_integral(out) == Catch::Approx(curve_integral(c)).epsilon(0.01));
}

TEST_CASE("broaden rejects an undersized window") {
    const SpectralCurve c(0.0, 25.0e6, std::vector<double>(64, 1.0));
    CHECK_THROWS_AS(broaden(c, VelocityDistribution{960.0e6}, 10), physics_error);
}

TEST_CASE("manifold composition") {
    const double step = 0.5e6;
    const auto g = gaussian_curve(-2.0e9, step, 8001, 0.0, 50.0e6);

    SECTION("zero weight returns the first curve") {
        const auto out = manifold_compose(g, g, 814.5e6, 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(out.values[i] == g.values[i]);
    }

    SECTION("zero splitting with unit weight is a pointwise sum") {
        const auto out = manifold_compose(g, g, 0.0, 1.0);
        for (std::size_t i = 0; i < g.size(); ++i)
            REQUIRE(out.values[i] == Catch::Approx(2.0 * g.values[i]));
    }

    SECTION("two unit peaks end up split by the line splitting") {
        const auto out = manifold_compose(g, g, 814.5e6, 1.0);
        const std::size_t first = curve_argmax(g);
        // second maximum: look beyond the midpoint between the lines
        std::size_t second = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out.delta_at(i) < 400.0e6) continue;
            if (out.values[i] > best) {
                best = out.values[i];
                second = i;
            }
        }
        const double separation = out.delta_at(second) - g.delta_at(first);
        CHECK(std::abs(separation - 814.5e6) <= step);
    }

    SECTION("misaligned splitting is rejected") {
        CHECK_THROWS_AS(manifold_compose(g, g, 814.5e6 + 0.2e6, 1.0), physics_error);
    }

    SECTION("grid mismatch is rejected") {
        const auto other = gaussian_curve(-2.0e9, 1.0e6, 4001, 0.0, 50.0e6);
        CHECK_THROWS_AS(manifold_compose(g, other, 0.0, 1.0), physics_error);
    }
}

TEST_CASE("etalon transmission") {
    const EtalonParams et{0.9955, 2.0e-4, 13.6e9, 0.0};

    SECTION("peak equals (1-A)^2") {
        CHECK(std::abs(etalon_transmission(0.0, et) - sqr(1.0 - et.a)) <= 1e-12);
        CHECK(etalon_transmission(0.0, et) == Catch::Approx(0.99960).epsilon(1e-4));
    }

    SECTION("exact periodicity") {
        for (int k : {-3, -1, 1, 2, 5}) {
            const double d = 1.0e9;
            CHECK(etalon_transmission(d + k * et.fsr, et) == etalon_transmission(d, et));
        }
        CHECK(etalon_transmission(et.fsr, et) == etalon_transmission(0.0, et));
    }

    SECTION("half-FSR rejection") {
        const double t = etalon_transmission(et.fsr / 2.0, et);
        const double expect = sqr((1.0 - et.r) * (1.0 - et.a)) / sqr(1.0 + et.r);
        CHECK(t == Catch::Approx(expect).epsilon(1e-12));
        CHECK(t == Catch::Approx(5.08e-6).epsilon(1e-2));
    }

    SECTION("FWHM agrees with the finesse formula") {
        // numerical root find on either side of the peak
        const double half = 0.5 * etalon_transmission(0.0, et);
        auto solve = [&](double lo, double hi) {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (etalon_transmission(mid, et) > half ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        };
        const double right = solve(0.0, et.fsr / 2.0);
        const double fwhm = 2.0 * right;
        const double finesse = std::numbers::pi * std::sqrt(et.r) / (1.0 - et.r);
        CHECK(fwhm == Catch::Approx(et.fsr / finesse).epsilon(0.02));
        CHECK(fwhm == Catch::Approx(19.5e6).epsilon(0.02));
    }

    SECTION("parameter validation") {
        CHECK_THROWS_AS(etalon_transmission(0.0, EtalonParams{1.0, 0.0, 1.0e9, 0.0}),
                        physics_error);
        CHECK_THROWS_AS(etalon_transmission(0.0, EtalonParams{0.5, -0.1, 1.0e9, 0.0}),
                        physics_error);
        CHECK_THROWS_AS(etalon_transmission(0.0, EtalonParams{0.5, 0.0, 0.0, 0.0}), physics_error);
    }
}

TEST_CASE("etalon cascade") {
    const EtalonParams et{0.9955, 2.0e-4, 13.6e9, 0.0};
    const EtalonParams other{0.995, 2.0e-4, 9.1e9, 0.0};

    CHECK(cascade_transmission({et}, 3.7e9) == etalon_transmission(3.7e9, et));
    CHECK(cascade_transmission({et, et}, 0.0) ==
          Catch::Approx(sqr(sqr(1.0 - et.a))).epsilon(1e-10));
    CHECK(cascade_transmission({et, et}, 0.0) == Catch::Approx(0.9992).epsilon(1e-4));

    const double t = cascade_transmission({et, other}, 2.3e9);
    CHECK(t == Catch::Approx(etalon_transmission(2.3e9, et) * etalon_transmission(2.3e9, other)));
    CHECK(t <= std::min(etalon_transmission(2.3e9, et), etalon_transmission(2.3e9, other)));

    CHECK_THROWS_AS(cascade_transmission({}, 0.0), physics_error);
}

TEST_CASE("background filtering through the cascade") {
    const double step = 50.0e6;

    SECTION("transparent filter passes the photon total") {
        std::vector<double> qs(81, 0.01), qk(81, 0.002);
        const SpectralCurve scatter(-2.0e9, step, qs);
        const SpectralCurve stokes(-2.0e9 + 13.6e9, step, qk);
        const EtalonParams open{1.0e-12, 0.0, 1.0e12, 0.0};
        const auto out = filter_background(scatter, stokes, {open}, 0.0);
        CHECK(out.total == Catch::Approx(81 * 0.01 + 81 * 0.002).epsilon(1e-9));
    }

    SECTION("delta component sifts through the Airy peak") {
        std::vector<double> qs(81, 0.0);
        qs[40] = 0.37; // delta = 0
        const SpectralCurve scatter(-2.0e9, step, qs);
        const SpectralCurve stokes(11.6e9, step, std::vector<double>(81, 0.0));
        const EtalonParams et{0.9955, 2.0e-4, 13.6e9, 0.0};
        const auto out = filter_background(scatter, stokes, {et}, 0.0);
        CHECK(out.scatter == Catch::Approx(0.37 * sqr(1.0 - et.a)).epsilon(1e-10));
        CHECK(out.stokes == 0.0);
    }

    SECTION("FSR-matched stokes transmits, detuned FSR suppresses it") {
        // broad stokes pedestal carried 13.6 GHz up; narrow scatter at 0
        auto scatter = gaussian_curve(-2.0e9, step, 81, 0.0, 100.0e6, 0.05);
        auto stokes = gaussian_curve(-2.0e9 + 13.6e9, step, 81, 13.6e9, 2.5e9, 0.01);

        const EtalonParams matched{0.9955, 2.0e-4, 13.6e9, 0.0};
        const EtalonParams detuned{0.9955, 2.0e-4, 9.1e9, 0.0};

        const auto pass = filter_background(scatter, stokes, {matched, matched}, 0.0);
        const auto block = filter_background(scatter, stokes, {matched, detuned}, 0.0);

        CHECK(pass.stokes > 0.0);
        CHECK(block.stokes < 1e-4 * pass.stokes); // > 40 dB
        // the scatter line at zero detuning survives either stack
        CHECK(block.scatter == Catch::Approx(pass.scatter).epsilon(1e-2));
    }

    SECTION("offset outside the covered span is rejected") {
        const SpectralCurve scatter(-1.0e9, step, std::vector<double>(41, 0.1));
        const SpectralCurve stokes(12.6e9, step, std::vector<double>(41, 0.1));
        const EtalonParams et{0.9955, 2.0e-4, 13.6e9, 0.0};
        CHECK_THROWS_AS(filter_background(scatter, stokes, {et}, 80.0e9), physics_error);
    }
}

TEST_CASE("parametric cell transmission") {
    SECTION("no absorption") {
        const TransmissionModel empty;
        const auto t = medium_transmission(-2.0e9, 25.0e6, 161, empty);
        for (double x : t.values) REQUIRE(x == 1.0);
    }

    SECTION("Beer-Lambert at line center") {
        const TransmissionModel one{{{2.0, 0.0, 960.0e6}}};
        CHECK(transmission_at(0.0, one) == Catch::Approx(std::exp(-2.0)).epsilon(1e-12));
        CHECK(transmission_at(0.0, one) == Catch::Approx(0.1353).epsilon(1e-3));
    }

    SECTION("two lines give a double-dip profile") {
        const TransmissionModel model{{{2.2, 0.0, 500.0e6}, {3.2, 814.5e6, 500.0e6}}};
        const auto t = medium_transmission(-3.0e9, 25.0e6, 241, model);
        const double at_l1 = transmission_at(0.0, model);
        const double at_l2 = transmission_at(814.5e6, model);
        const double between = transmission_at(410.0e6, model);
        const double far = transmission_at(-3.0e9, model);
        CHECK(at_l1 < between);
        CHECK(at_l2 < between);
        CHECK(between < far);
        CHECK(far > 0.8);
        for (double x : t.values) {
            REQUIRE(x > 0.0);
            REQUIRE(x <= 1.0);
        }
    }
}

TEST_CASE("measured transmission table") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "vapormem_spectral_test";
    fs::create_directories(dir);
    const fs::path good = dir / "trt.txt";
    {
        std::ofstream out(good);
        out << "# delta_hz transmission\n";
        out << "-1.0e9 0.9\n";
        out << "0.0    0.2   # line center\n";
        out << "1.0e9  0.8\n";
    }

    SECTION("loads and interpolates") {
        const auto table = load_transmission_table(good.string());
        REQUIRE(table.size() == 3);
        const auto curve = sample_transmission_table(table, -0.5e9, 0.5e9, 3);
        CHECK(curve.values[0] == Catch::Approx(0.55));
        CHECK(curve.values[1] == Catch::Approx(0.2));
        CHECK(curve.values[2] == Catch::Approx(0.5));
    }

    SECTION("grid outside the table range is rejected") {
        const auto table = load_transmission_table(good.string());
        CHECK_THROWS_AS(sample_transmission_table(table, -2.0e9, 1.0e9, 5), physics_error);
    }

    SECTION("non-increasing rows are rejected") {
        const fs::path bad = dir / "bad.txt";
        std::ofstream(bad) << "0 0.5\n0 0.6\n";
        CHECK_THROWS_AS(load_transmission_table(bad.string()), io_error);
    }

    SECTION("out-of-range transmission is rejected") {
        const fs::path bad = dir / "bad2.txt";
        std::ofstream(bad) << "0 0.5\n1 1.5\n";
        CHECK_THROWS_AS(load_transmission_table(bad.string()), io_error);
    }

    SECTION("missing file is an io error") {
        CHECK_THROWS_AS(load_transmission_table((dir / "nope.txt").string()), io_error);
    }

    fs::remove_all(dir);
}
