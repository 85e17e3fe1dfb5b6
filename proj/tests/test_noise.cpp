#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "vapormem/noise.hpp"

using namespace vapormem;
using namespace vapormem::noise;
using spectral::SpectralCurve;

namespace {

StokesVector random_stokes(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        StokesVector s{u(rng), u(rng), u(rng)};
        if (s.norm2() <= 1.0) return s;
    }
}

std::vector<StokesVector> cardinal_states() {
    return {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
}

} // namespace

TEST_CASE("sbr curve ratio and optimum") {
    SECTION("pointwise ratio") {
        const SpectralCurve eta(0.0, 1.0, {0.06});
        const SpectralCurve t(0.0, 1.0, {1.0});
        const SpectralCurve q(0.0, 1.0, {0.02});
        const auto report = sbr_curve(eta, t, q, 0.0);
        CHECK(report.sbr_curve.values[0] == Catch::Approx(3.0));
        CHECK(report.sbr_at_optimum == Catch::Approx(3.0));
    }

    SECTION("uniform background keeps the eta*T optimum") {
        const SpectralCurve eta(-500.0, 250.0, {0.01, 0.03, 0.05, 0.02, 0.01});
        const SpectralCurve t(-500.0, 250.0, {1.0, 1.0, 1.0, 1.0, 1.0});
        const SpectralCurve q(-500.0, 250.0, {0.4, 0.4, 0.4, 0.4, 0.4});
        const auto report = sbr_curve(eta, t, q, 0.1);
        CHECK(report.optimal_delta == 0.0);
        CHECK(report.sbr_at_optimum == Catch::Approx(0.05 / 0.5));
    }

    SECTION("optimum is invariant under uniform scaling of eta") {
        const SpectralCurve eta(-500.0, 100.0, {0.01, 0.05, 0.04, 0.9, 0.02, 0.01, 0.2});
        const SpectralCurve t(-500.0, 100.0, {0.9, 0.8, 0.7, 0.2, 0.9, 0.95, 0.5});
        const SpectralCurve q(-500.0, 100.0, {0.1, 0.2, 0.15, 0.4, 0.05, 0.21, 0.3});
        const auto a = sbr_curve(eta, t, q, 0.02);
        SpectralCurve scaled = eta;
        for (auto& v : scaled.values) v *= 137.0;
        const auto b = sbr_curve(scaled, t, q, 0.02);
        CHECK(a.optimal_delta == b.optimal_delta);
    }

    SECTION("tie breaks toward the smallest |delta|") {
        const SpectralCurve eta(-200.0, 100.0, {0.5, 0.1, 0.1, 0.5, 0.1});
        const SpectralCurve t(-200.0, 100.0, {1.0, 1.0, 1.0, 1.0, 1.0});
        const SpectralCurve q(-200.0, 100.0, {1.0, 1.0, 1.0, 1.0, 1.0});
        CHECK(sbr_curve(eta, t, q, 0.0).optimal_delta == 100.0);
    }

    SECTION("grid mismatch and nonpositive denominator are rejected") {
        const SpectralCurve eta(0.0, 1.0, {0.1, 0.1});
        const SpectralCurve offgrid(0.5, 1.0, {1.0, 1.0});
        const SpectralCurve t(0.0, 1.0, {1.0, 1.0});
        const SpectralCurve zero(0.0, 1.0, {0.0, 0.0});
        CHECK_THROWS_AS(sbr_curve(eta, offgrid, zero, 1.0), physics_error);
        CHECK_THROWS_AS(sbr_curve(eta, t, zero, 0.0), physics_error);
    }
}

TEST_CASE("stokes fidelity formula") {
    CHECK(fidelity({0, 0, 1}, {0, 0, 1}) == 1.0);
    CHECK(fidelity({1, 0, 0}, {-1, 0, 0}) == 0.0);

    const double expect = 0.5 * (1.0 + 0.4 + std::sqrt(0.36 * 0.75));
    CHECK(fidelity({0, 0, 0.8}, {0, 0, 0.5}) == Catch::Approx(expect).margin(1e-12));
    CHECK(fidelity({0, 0, 0.8}, {0, 0, 0.5}) == Catch::Approx(0.9598).margin(1e-4));

    CHECK_THROWS_AS(fidelity({1.1, 0, 0}, {0, 0, 1}), physics_error);
}

TEST_CASE("fidelity symmetry and bounds over random pairs") {
    std::mt19937 rng(42);
    for (int i = 0; i < 100'000; ++i) {
        const auto a = random_stokes(rng);
        const auto b = random_stokes(rng);
        const double f = fidelity(a, b);
        REQUIRE(f >= 0.0);
        REQUIRE(f <= 1.0);
        REQUIRE(f == fidelity(b, a));
    }
}

TEST_CASE("frame alignment recovers rotations") {
    const auto inputs = cardinal_states();

    SECTION("identity") {
        const auto result = align_frames(inputs, inputs);
        CHECK((result.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(result.mean_fidelity == Catch::Approx(1.0));
    }

    SECTION("quarter turn about S3") {
        const Eigen::Matrix3d rz =
            Eigen::AngleAxisd(std::numbers::pi / 2.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
        std::vector<StokesVector> outputs;
        for (const auto& s : inputs) outputs.push_back(StokesVector::from(rz * s.vec()));
        const auto result = align_frames(inputs, outputs);
        CHECK((result.rotation - rz).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(result.mean_fidelity == Catch::Approx(1.0));
    }

    SECTION("shrunk and noisy outputs stay within two degrees") {
        std::mt19937 rng(3);
        std::normal_distribution<double> noise(0.0, 0.01);
        const Eigen::Matrix3d truth =
            (Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitZ()) *
             Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitX()))
                .toRotationMatrix();
        std::vector<StokesVector> outputs;
        for (const auto& s : inputs) {
            Eigen::Vector3d v = 0.6 * (truth * s.vec());
            v += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
            outputs.push_back(StokesVector::from(v));
        }
        const auto result = align_frames(inputs, outputs);
        const double cosang = 0.5 * ((result.rotation.transpose() * truth).trace() - 1.0);
        const double angle = std::acos(std::clamp(cosang, -1.0, 1.0));
        CHECK(angle <= 2.0 * std::numbers::pi / 180.0);
    }

    SECTION("result is always a proper rotation") {
        std::mt19937 rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<StokesVector> outputs;
            for (std::size_t i = 0; i < inputs.size(); ++i) outputs.push_back(random_stokes(rng));
            const auto result = align_frames(inputs, outputs);
            const Eigen::Matrix3d should_be_identity =
                result.rotation * result.rotation.transpose();
            REQUIRE((should_be_identity - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <=
                    1e-10);
            REQUIRE(result.rotation.determinant() == Catch::Approx(1.0).margin(1e-10));
        }
    }

    SECTION("degenerate span is rejected") {
        const std::vector<StokesVector> line = {{0, 0, 1}, {0, 0, -1}, {0, 0, 0.5}};
        CHECK_THROWS_AS(align_frames(line, line), physics_error);
        const std::vector<StokesVector> two = {{1, 0, 0}, {0, 1, 0}};
        CHECK_THROWS_AS(align_frames(two, two), physics_error);
    }
}

TEST_CASE("sbr to fidelity mixing model") {
    CHECK(sbr_to_fidelity(2.9) == Catch::Approx(3.4 / 3.9).margin(1e-15));
    CHECK(std::abs(sbr_to_fidelity(2.9) - 0.866) < 0.01);
    CHECK(sbr_to_fidelity(0.0) == 0.5);
    CHECK(std::abs(sbr_to_fidelity(25.0) - 0.98) < 0.005);
    CHECK(std::abs(sbr_to_fidelity(3.7) - 0.90) < 0.01);

    SECTION("monotone in sbr") {
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> u(0.0, 50.0);
        for (int i = 0; i < 10'000; ++i) {
            double a = u(rng), b = u(rng);
            if (a > b) std::swap(a, b);
            REQUIRE(sbr_to_fidelity(a) <= sbr_to_fidelity(b));
        }
    }

    SECTION("bounded by the intrinsic fidelity") {
        CHECK(sbr_to_fidelity(1e9, 0.97) <= 0.97);
        CHECK(sbr_to_fidelity(12.0, 0.8) >= 0.5);
    }

    SECTION("contract violations") {
        CHECK_THROWS_AS(sbr_to_fidelity(-0.1), physics_error);
        CHECK_THROWS_AS(sbr_to_fidelity(1.0, 0.4), physics_error);
        CHECK_THROWS_AS(sbr_to_fidelity(1.0, 1.1), physics_error);
    }
}

TEST_CASE("classical thresholds at the tabulated operating point") {
    const auto th = classical_thresholds(1.0, 0.05);
    CHECK(th.intercept_resend == 0.71);
    CHECK(th.nonunitary == 0.836);

    const auto report = make_fidelity_report(0.866, th);
    CHECK(report.vs_intercept_resend == Catch::Approx(0.156).margin(1e-12));
    CHECK(report.vs_nonunitary_bound == Catch::Approx(0.030).margin(1e-12));
    CHECK(report.qber + report.fidelity == 1.0);

    CHECK_THROWS_AS(classical_thresholds(2.0, 0.1), physics_error);
    CHECK_THROWS_AS(classical_thresholds(1.0, 0.06), physics_error);
}

TEST_CASE("lifetime fit") {
    SECTION("exact exponential recovery") {
        std::vector<LifetimePoint> pts;
        const double eta0 = 0.1, tau = 20.0e-6;
        for (double t : {2.0e-6, 10.0e-6, 25.0e-6, 40.0e-6})
            pts.push_back({t, eta0 * std::exp(-t / tau)});
        const auto fit = lifetime_fit(pts);
        CHECK(fit.eta0 == Catch::Approx(eta0).epsilon(1e-9));
        CHECK(fit.tau_c == Catch::Approx(tau).epsilon(1e-9));
        for (double r : fit.residuals) REQUIRE(std::abs(r) <= 1e-12);
    }

    SECTION("two points interpolate exactly") {
        const std::vector<LifetimePoint> pts = {{1.0e-6, 0.2}, {5.0e-6, 0.05}};
        const auto fit = lifetime_fit(pts);
        CHECK(fit.eta0 * std::exp(-1.0e-6 / fit.tau_c) == Catch::Approx(0.2).epsilon(1e-12));
        CHECK(fit.eta0 * std::exp(-5.0e-6 / fit.tau_c) == Catch::Approx(0.05).epsilon(1e-12));
    }

    SECTION("measured storage-time points land in the expected band") {
        const std::vector<LifetimePoint> pts = {
            {1.0e-6, 0.11}, {14.0e-6, 0.056}, {28.0e-6, 0.031}, {42.0e-6, 0.011}};
        const auto fit = lifetime_fit(pts);
        CHECK(fit.tau_c >= 15.0e-6);
        CHECK(fit.tau_c <= 25.0e-6);

        // independent oracle: normal equations in long double
        long double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& pt : pts) {
            const long double x = pt.storage_time;
            const long double y = std::log((long double)pt.efficiency);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const long double n = pts.size();
        const long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        CHECK(fit.tau_c == Catch::Approx(static_cast<double>(-1.0L / slope)).epsilon(1e-9));
    }

    SECTION("contract violations") {
        CHECK_THROWS_AS(lifetime_fit({{1.0e-6, 0.1}}), physics_error);
        CHECK_THROWS_AS(lifetime_fit({{1.0e-6, 0.1}, {2.0e-6, 0.0}}), physics_error);
        CHECK_THROWS_AS(lifetime_fit({{1.0e-6, 0.1}, {1.0e-6, 0.2}}), physics_error);
        // growing efficiency has no decaying-exponential fit
        CHECK_THROWS_AS(lifetime_fit({{1.0e-6, 0.1}, {2.0e-6, 0.2}}), physics_error);
    }
}
