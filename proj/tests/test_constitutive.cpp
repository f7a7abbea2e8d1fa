#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "icrflow/assembly.hpp"
#include "icrflow/constitutive.hpp"
#include "support/oracles.hpp"

using namespace icrflow;

namespace {

SymTensor random_sym(std::mt19937& rng, double scale = 10.0) {
    std::uniform_real_distribution<double> unit(-scale, scale);
    return {unit(rng), unit(rng), unit(rng)};
}

StressElementContext make_context() {
    const QuadMesh mesh = build_mesh({Domain::UnitSquare, 1});
    return build_assembly_context(mesh).stress;
}

Eigen::VectorXd constant_tensor_coeffs(const SymTensor& t) {
    Eigen::VectorXd c(27);
    for (int l = 0; l < 9; ++l) {
        c[l] = t.t11;
        c[9 + l] = t.t12;
        c[18 + l] = t.t22;
    }
    return c;
}

}  // namespace

TEST_CASE("mu values and bound", "[constitutive]") {
    CHECK(default_mu(0.0) == 1.0);
    CHECK(default_mu(1.0) == Catch::Approx(1.0 / std::sqrt(2.0)));
    for (double s : {10.0, 100.0, 1e6}) {
        CHECK(default_mu(s) > 0.0);
        CHECK(default_mu(s) * s < 1.0);  // C1 = 1
    }
    // d/ds (mu(s) s) = (1+s^2)^{-3/2} > 0
    for (double s : {0.1, 1.0, 7.5}) {
        const double d = oracles::central_diff([](double t) { return default_mu(t) * t; }, s);
        CHECK(d > 0.0);
        CHECK(default_dmu(s) == Catch::Approx(oracles::central_diff([](double t) { return default_mu(t); }, s)).margin(1e-8));
    }
}

TEST_CASE("apply_map basics", "[constitutive]") {
    ConstitutiveModel m;
    m.alpha = 1.0;
    m.gamma = 0.0;
    const SymTensor T{0.3, -0.2, 0.7};
    const SymTensor r0 = apply_map(m, {0, 0, 0});
    CHECK(r0.norm() == 0.0);
    const SymTensor r1 = apply_map(m, T);
    CHECK(r1.t11 == Catch::Approx(T.t11));
    CHECK(r1.t12 == Catch::Approx(T.t12));
    CHECK(r1.t22 == Catch::Approx(T.t22));

    m.gamma = 1.0;
    const SymTensor d{1.0, 0.0, -1.0};  // |T| = sqrt(2), mu = 1/sqrt(3)
    const SymTensor r2 = apply_map(m, d);
    const double factor = 1.0 + 1.0 / std::sqrt(3.0);
    CHECK(r2.t11 == Catch::Approx(factor));
    CHECK(r2.t22 == Catch::Approx(-factor));
}

TEST_CASE("map_jacobian: limits and finite differences", "[constitutive]") {
    ConstitutiveModel m;
    m.alpha = 0.8;
    m.gamma = 1.7;
    const Eigen::Matrix3d J0 = map_jacobian(m, {0, 0, 0});
    CHECK((J0 - (m.alpha + m.gamma) * Eigen::Matrix3d::Identity()).norm() == Catch::Approx(0.0).margin(1e-14));

    ConstitutiveModel lin;
    lin.alpha = 2.5;
    lin.gamma = 0.0;
    const Eigen::Matrix3d Jlin = map_jacobian(lin, {1.0, 2.0, -0.5});
    CHECK((Jlin - 2.5 * Eigen::Matrix3d::Identity()).norm() == Catch::Approx(0.0).margin(1e-14));

    std::mt19937 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const SymTensor T = random_sym(rng, 3.0);
        const Eigen::Matrix3d J = map_jacobian(m, T);
        const double eps = 1e-6;
        for (int d = 0; d < 3; ++d) {
            SymTensor Tp = T, Tm = T;
            (d == 0 ? Tp.t11 : d == 1 ? Tp.t12 : Tp.t22) += eps;
            (d == 0 ? Tm.t11 : d == 1 ? Tm.t12 : Tm.t22) -= eps;
            const SymTensor fp = apply_map(m, Tp), fm = apply_map(m, Tm);
            CHECK(J(0, d) == Catch::Approx((fp.t11 - fm.t11) / (2 * eps)).margin(1e-7));
            CHECK(J(1, d) == Catch::Approx((fp.t12 - fm.t12) / (2 * eps)).margin(1e-7));
            CHECK(J(2, d) == Catch::Approx((fp.t22 - fm.t22) / (2 * eps)).margin(1e-7));
        }
    }
}

TEST_CASE("monotonicity and Lipschitz sampling", "[constitutive][property]") {
    std::mt19937 rng(2024);
    const auto map = [](const SymTensor& T) { return default_mu(T.norm()) * T; };
    for (int trial = 0; trial < 10000; ++trial) {
        const SymTensor R = random_sym(rng), S = random_sym(rng);
        const SymTensor dM = map(R) - map(S);
        const SymTensor dT = R - S;
        CHECK(dM.ddot(dT) >= -1e-14);             // monotone
        CHECK(dM.norm() <= dT.norm() + 1e-12);    // Lipschitz with Lambda = 1
    }
}

TEST_CASE("local stress solve", "[constitutive]") {
    const StressElementContext ctx = make_context();
    ConstitutiveModel m;

    SECTION("b = 0 reduces to one linear solve") {
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        Eigen::VectorXd rhs(27);
        for (int i = 0; i < 27; ++i) rhs[i] = unit(rng);
        LocalStressProblem pb{&ctx, 2.0, 0.0, rhs};
        const Eigen::VectorXd t = solve_local_stress(m, pb, Eigen::VectorXd::Zero(27), 1e-12);
        CHECK((2.0 * (ctx.mass * t) - rhs).norm() == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("zero data gives zero solution") {
        LocalStressProblem pb{&ctx, 1.0, 1.0, Eigen::VectorXd::Zero(27)};
        const Eigen::VectorXd t = solve_local_stress(m, pb, constant_tensor_coeffs({0.4, -0.1, 0.2}), 1e-12);
        CHECK(t.norm() == Catch::Approx(0.0).margin(1e-10));
    }

    SECTION("rank-one data against the scalar bisection oracle") {
        // data = d*E with E = diag(1,-1)/sqrt(2), |E| = 1: the solution is
        // t*E with t + t*mu(t) = d.
        const double d = 1.5;
        const SymTensor E{1.0 / std::sqrt(2.0), 0.0, -1.0 / std::sqrt(2.0)};
        LocalStressProblem pb{&ctx, 1.0, 1.0, ctx.mass * constant_tensor_coeffs(d * E)};
        const Eigen::VectorXd t = solve_local_stress(m, pb, Eigen::VectorXd::Zero(27), 1e-12);

        const double t_star = oracles::bisect(
            [&](double s) { return s + s * default_mu(s) - d; }, 0.0, d, 1e-14);
        const Eigen::VectorXd expected = constant_tensor_coeffs(t_star * E);
        CHECK((t - expected).lpNorm<Eigen::Infinity>() <= 1e-10);
    }

    SECTION("solved scalar profile is nondecreasing in the data scale") {
        const SymTensor E{1.0 / std::sqrt(2.0), 0.0, -1.0 / std::sqrt(2.0)};
        double prev = -1.0;
        for (double c : {0.0, 0.5, 1.0, 2.0, 5.0, 20.0}) {
            LocalStressProblem pb{&ctx, 1.0, 2.0, ctx.mass * constant_tensor_coeffs(c * E)};
            const Eigen::VectorXd t = solve_local_stress(m, pb, Eigen::VectorXd::Zero(27), 1e-12);
            const double profile = t[0] * std::sqrt(2.0);  // scalar multiple of E
            CHECK(profile >= prev - 1e-12);
            prev = profile;
        }
    }

    SECTION("solution plugged back reproduces the data in Galerkin form") {
        std::mt19937 rng(31);
        std::uniform_real_distribution<double> unit(-2.0, 2.0);
        Eigen::VectorXd rhs(27);
        for (int i = 0; i < 27; ++i) rhs[i] = unit(rng);
        LocalStressProblem pb{&ctx, 1.3, 0.7, rhs};
        const double tol = ctx.local_tolerance();
        const Eigen::VectorXd t = solve_local_stress(m, pb, Eigen::VectorXd::Zero(27), tol);
        const Eigen::VectorXd res = 1.3 * (ctx.mass * t) + 0.7 * nonlinear_moments(ctx, m.mu, t) - rhs;
        CHECK(std::sqrt(res.dot(ctx.mass_llt.solve(res))) <= tol);
    }
}

TEST_CASE("lm_step1", "[constitutive]") {
    const StressElementContext ctx = make_context();
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::VectorXd t_k(27), mom(27);
    for (int i = 0; i < 27; ++i) {
        t_k[i] = unit(rng);
        mom[i] = unit(rng);
    }

    SECTION("gamma = 0 closed form") {
        ConstitutiveModel m;
        m.alpha = 1.2;
        m.gamma = 0.0;
        const double tau = 0.37;
        const Eigen::VectorXd t = lm_step1(m, tau, t_k, mom, ctx);
        const Eigen::VectorXd expected = tau * ctx.mass_llt.solve(mom) + (1.0 - m.alpha * tau) * t_k;
        CHECK((t - expected).lpNorm<Eigen::Infinity>() <= 1e-12);
    }

    SECTION("tau*alpha = 1, gamma = 0, zero data gives zero") {
        ConstitutiveModel m;
        m.alpha = 2.0;
        m.gamma = 0.0;
        const Eigen::VectorXd t = lm_step1(m, 0.5, t_k, Eigen::VectorXd::Zero(27), ctx);
        CHECK(t.norm() == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("scalar-profile data matches the bisection oracle") {
        ConstitutiveModel m;  // alpha = gamma = 1
        const double tau = 0.5, dval = 2.0, tk_scale = 0.3;
        const SymTensor E{1.0 / std::sqrt(2.0), 0.0, -1.0 / std::sqrt(2.0)};
        const Eigen::VectorXd tk = constant_tensor_coeffs(tk_scale * E);
        const Eigen::VectorXd data = ctx.mass * constant_tensor_coeffs(dval * E);
        const Eigen::VectorXd t = lm_step1(m, tau, tk, data, ctx);
        // t + tau*t*mu(t) = tau*d + (1 - tau) tk
        const double rhs = tau * dval + (1.0 - m.alpha * tau) * tk_scale;
        const double t_star =
            oracles::bisect([&](double s) { return s + tau * s * default_mu(s) - rhs; }, 0.0, rhs, 1e-14);
        // accuracy limited by the inner tolerance 1e-6 sqrt(|E|/|Omega|)
        CHECK((t - constant_tensor_coeffs(t_star * E)).lpNorm<Eigen::Infinity>() <= 5e-8);
    }
}

TEST_CASE("lm_step2_stress", "[constitutive]") {
    const StressElementContext ctx = make_context();
    ConstitutiveModel m;
    std::mt19937 rng(123);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    SECTION("zero inputs give zero") {
        ConstitutiveModel m0;
        m0.gamma = 0.0;
        const Eigen::VectorXd t =
            lm_step2_stress(m0, 0.4, Eigen::VectorXd::Zero(27), Eigen::VectorXd::Zero(27), ctx);
        CHECK(t.norm() == 0.0);
    }

    SECTION("consistency: a Galerkin-converged half step is a fixed point") {
        Eigen::VectorXd t_half(27);
        for (int i = 0; i < 27; ++i) t_half[i] = unit(rng);
        const Eigen::VectorXd mom_data = m.alpha * (ctx.mass * t_half) + m.gamma * nonlinear_moments(ctx, m.mu, t_half);
        const Eigen::VectorXd t = lm_step2_stress(m, 0.25, t_half, mom_data, ctx);
        CHECK((t - t_half).lpNorm<Eigen::Infinity>() <= 1e-12);
    }

    SECTION("generic inputs match a dense 27x27 oracle") {
        Eigen::VectorXd t_half(27), mom(27);
        for (int i = 0; i < 27; ++i) {
            t_half[i] = unit(rng);
            mom[i] = unit(rng);
        }
        const double tau = 0.6;
        const Eigen::VectorXd t = lm_step2_stress(m, tau, t_half, mom, ctx);

        std::vector<std::vector<double>> M(27, std::vector<double>(27));
        for (int i = 0; i < 27; ++i)
            for (int j = 0; j < 27; ++j) M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = (1.0 / tau + m.alpha) * ctx.mass(i, j);
        const Eigen::VectorXd rhs =
            (1.0 / tau) * (ctx.mass * t_half) + mom - m.gamma * nonlinear_moments(ctx, m.mu, t_half);
        const Eigen::VectorXd t_ref = oracles::dense_solve(M, rhs);
        CHECK((t - t_ref).lpNorm<Eigen::Infinity>() <= 1e-11);
    }
}
