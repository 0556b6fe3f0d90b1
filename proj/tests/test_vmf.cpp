#include <cmath>

#include <gtest/gtest.h>

#include "dirsmooth/rng.hpp"
#include "dirsmooth/vmf.hpp"
#include "support/oracles.hpp"

using namespace dirsmooth;

namespace {

Eigen::VectorXd make_z(int d, double t, int axis = 0) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
    z[axis] = t;
    return z;
}

} // namespace

TEST(DensityHd, KnownValues) {
    EXPECT_NEAR(density_hd(0.3, Dimension(3)), 0.5, 1e-15);
    // C_2 = 1/B(1/2, 1/2) = 1/pi, checked against the beta-function oracle
    EXPECT_NEAR(density_hd(0.0, Dimension(2)), 1.0 / std::beta(0.5, 0.5), 1e-15);
    EXPECT_NEAR(density_hd(0.0, Dimension(2)), 1.0 / M_PI, 1e-15);
}

TEST(DensityHd, Even) {
    CounterRng rng(7, 0, 0);
    for (int d = 2; d <= 6; ++d) {
        const Dimension dim(d);
        for (int i = 0; i < 50; ++i) {
            const double u = 2.0 * rng.uniform() - 1.0;
            EXPECT_DOUBLE_EQ(density_hd(u, dim), density_hd(-u, dim));
        }
    }
}

TEST(DensityHd, DomainErrors) {
    EXPECT_THROW(density_hd(1.0, Dimension(3)), std::domain_error);
    EXPECT_THROW(density_hd(-1.5, Dimension(2)), std::domain_error);
    EXPECT_THROW(Dimension(1), std::invalid_argument);
}

TEST(GSeries, ZeroArgumentIsOne) {
    for (int d : {2, 3, 5, 9}) EXPECT_DOUBLE_EQ(g_series(Dimension(d), 0.0, 1e-14), 1.0);
}

TEST(GSeries, MatchesSinhClosedFormInDimensionThree) {
    const Dimension d3(3);
    for (double t : {0.1, 0.5, 2.0, 7.5, 20.0}) {
        const double exact = std::sinh(t) / t;
        EXPECT_NEAR(g_series(d3, t, 1e-14), exact, 1e-12 * exact) << "t=" << t;
    }
    EXPECT_NEAR(g_series(d3, 2.0, 1e-14), 1.813430203923509, 1e-12);
}

TEST(GSeries, MatchesCoefficientFormulaOracle) {
    // independent evaluation of the Taylor coefficients via gamma functions
    auto coeff = [](int d, int k) {
        return std::exp(-2.0 * k * std::log(2.0) + std::lgamma(0.5 * d) -
                        std::lgamma(k + 1.0) - std::lgamma(k + 0.5 * d));
    };
    EXPECT_NEAR(coeff(2, 1), 0.25, 1e-15);  // c_{2,1} = 2^-2 Gamma(1)/(1! Gamma(2))
    for (int d : {2, 4, 7}) {
        for (double t : {0.3, 1.5, 4.0}) {
            double ref = 0;
            for (int k = 0; k < 80; ++k) ref += coeff(d, k) * std::pow(t, 2 * k);
            EXPECT_NEAR(g_series(Dimension(d), t, 1e-15), ref, 1e-13 * ref);
        }
    }
}

TEST(GSeries, TruncationRespectsEps) {
    const Dimension d2(2);
    for (double eps : {1e-4, 1e-8, 1e-12}) {
        const double loose = g_series(d2, 3.0, eps);
        const double tight = g_series(d2, 3.0, 1e-15);
        EXPECT_LE(std::abs(loose - tight), eps);
    }
}

TEST(GSeries, RangeAndArgumentErrors) {
    const Dimension d2(2);
    EXPECT_THROW(g_series(d2, 201.0, 1e-12), std::out_of_range);
    EXPECT_NO_THROW(g_series(d2, 199.0, 1e-12));
    EXPECT_THROW(g_series(d2, 0.5, 0.0), std::invalid_argument);
    VmfOptions wide;
    wide.t_switch_override = 500;
    EXPECT_NO_THROW(g_series(d2, 400.0, 1e-12, wide));
}

TEST(GDeriv, SpecialValues) {
    for (int d : {2, 3, 6}) EXPECT_DOUBLE_EQ(g_deriv(Dimension(d), 0.0, 1), 0.0);
    EXPECT_NEAR(g_deriv(Dimension(4), 0.0, 2), 0.25, 1e-15);  // 1/d at t = 0
    EXPECT_THROW(g_deriv(Dimension(3), 1.0, 3), std::invalid_argument);
    EXPECT_THROW(g_deriv(Dimension(3), 0.5, 0), std::invalid_argument);
}

TEST(GDeriv, MatchesFiniteDifferences) {
    const Dimension d3(3);
    auto g3 = [&](double t) { return g_series(d3, t, 1e-15); };
    const double fd = oracle::central_diff(g3, 1.5, 1e-5);
    EXPECT_NEAR(g_deriv(d3, 1.5, 1), fd, 1e-8 * std::abs(fd));

    for (int d = 2; d <= 10; ++d) {
        const Dimension dim(d);
        auto g = [&](double t) { return g_series(dim, t, 1e-15); };
        for (double t = 0.0; t <= 30.0; t += 3.0) {
            const double fd1 = oracle::central_diff(g, t, 1e-5);
            const double v1 = g_deriv(dim, t, 1);
            EXPECT_NEAR(v1, fd1, 1e-6 * std::max({std::abs(v1), std::abs(fd1), 1e-12}))
                << "d=" << d << " t=" << t;
            auto g1 = [&](double s) { return g_deriv(dim, s, 1); };
            const double fd2 = oracle::central_diff(g1, t, 1e-5);
            const double v2 = g_deriv(dim, t, 2);
            EXPECT_NEAR(v2, fd2, 1e-6 * std::max({std::abs(v2), std::abs(fd2), 1e-12}))
                << "d=" << d << " t=" << t;
        }
    }
}

TEST(VmfMoments, UniformCase) {
    for (int d : {2, 3, 5}) {
        const auto m = vmf_moments(VmfParam(Eigen::VectorXd::Zero(d)));
        EXPECT_EQ(m.mu.norm(), 0.0);
        EXPECT_NEAR((m.sigma - Eigen::MatrixXd::Identity(d, d) / d).norm(), 0.0, 1e-15);
        EXPECT_EQ(m.gamma, 0.0);
        EXPECT_EQ(m.eut, 0.0);
    }
}

TEST(VmfMoments, DimensionThreeClosedForm) {
    // E U_t = coth(t) - 1/t for d = 3
    const auto m = vmf_moments(VmfParam(make_z(3, 1.0)));
    EXPECT_NEAR(m.eut, 1.0 / std::tanh(1.0) - 1.0, 1e-12);
    EXPECT_NEAR(m.gamma, std::log(std::sinh(1.0)), 1e-12);
}

TEST(VmfMoments, LargeConcentrationMatchesExpansionAndOracle) {
    const auto m = vmf_moments(VmfParam(make_z(3, 500.0)));
    const double a = 1.0;  // a_3
    const double first_expansion = 1.0 - a / 500.0 * (1.0 - (a - 1.0) / 1000.0);
    EXPECT_NEAR(m.eut, first_expansion, 1e-6 * first_expansion);
    const auto o = oracle::log_series_moments(3, 500.0);
    EXPECT_NEAR(m.eut, o.eut, 1e-9 * o.eut);
    EXPECT_NEAR(m.gamma, o.gamma, 1e-9 * std::abs(o.gamma));
}

TEST(VmfMoments, TraceIdentity) {
    CounterRng rng(11, 0, 0);
    for (int d : {2, 3, 4, 6}) {
        for (double t : {0.2, 1.0, 9.0, 40.0, 350.0, 2000.0}) {
            Eigen::VectorXd dir(d);
            for (int i = 0; i < d; ++i) dir[i] = rng.normal();
            dir.normalize();
            const auto m = vmf_moments(VmfParam(t * dir));
            EXPECT_NEAR(m.sigma.trace(), 1.0 - m.mu.squaredNorm(), 1e-10)
                << "d=" << d << " t=" << t;
        }
    }
}

TEST(VmfMoments, SigmaEigenStructure) {
    const Eigen::VectorXd z = make_z(4, 3.0, 1);
    const auto m = vmf_moments(VmfParam(z));
    const Eigen::VectorXd v = z / z.norm();
    EXPECT_NEAR((m.sigma * v - m.vut * v).norm(), 0.0, 1e-12);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w[0] = 1.0;  // orthogonal to the axis-1 direction
    EXPECT_NEAR((m.sigma * w - m.perp * w).norm(), 0.0, 1e-12);
}

TEST(VmfMoments, EvenInZ) {
    Eigen::VectorXd z(3);
    z << 0.7, -1.9, 0.4;
    const auto mp = vmf_moments(VmfParam(z));
    const auto mn = vmf_moments(VmfParam(Eigen::VectorXd(-z)));
    EXPECT_DOUBLE_EQ(mp.gamma, mn.gamma);
    EXPECT_NEAR((mp.mu + mn.mu).norm(), 0.0, 1e-15);
    EXPECT_NEAR((mp.sigma - mn.sigma).norm(), 0.0, 1e-15);
}

TEST(VmfMoments, SeamContinuityAgainstLogDomainOracle) {
    for (int d : {2, 3, 5, 10}) {
        const Dimension dim(d);
        const double ts = t_switch(dim);
        for (int i = 0; i <= 10; ++i) {
            const double t = ts * (0.9 + 0.02 * i);
            const auto m = detail::scalar_moments(dim, t);
            const auto o = oracle::log_series_moments(d, t);
            EXPECT_NEAR(m.gamma, o.gamma, 1e-6 * std::abs(o.gamma)) << "d=" << d << " t=" << t;
            EXPECT_NEAR(m.eut, o.eut, 1e-6 * o.eut) << "d=" << d << " t=" << t;
            EXPECT_NEAR(m.vut, o.vut, 1e-6 * o.vut) << "d=" << d << " t=" << t;
            EXPECT_NEAR(m.perp, o.perp, 1e-6 * o.perp) << "d=" << d << " t=" << t;
        }
    }
}

TEST(VmfMoments, QuadratureOracle) {
    for (int d : {2, 3, 4}) {
        for (double t : {0.5, 2.0, 10.0}) {
            const auto m = vmf_moments(VmfParam(make_z(d, t)));
            const double eu = oracle::vmf_expected_cosine(d, t, 1);
            const double eu2 = oracle::vmf_expected_cosine(d, t, 2);
            EXPECT_NEAR(m.eut, eu, 1e-8) << "d=" << d << " t=" << t;
            EXPECT_NEAR(m.vut, eu2 - eu * eu, 1e-8) << "d=" << d << " t=" << t;
            EXPECT_NEAR(m.perp, (1.0 - eu2) / (d - 1.0), 1e-8) << "d=" << d << " t=" << t;
        }
    }
}

TEST(MuInverse, ZeroAndRoundTrip) {
    EXPECT_EQ(mu_inverse(Eigen::VectorXd::Zero(3), Dimension(3)).z.norm(), 0.0);
    CounterRng rng(23, 0, 0);
    for (int d : {2, 3, 5}) {
        const Dimension dim(d);
        for (double t : {1e-3, 0.5, 3.0, 20.0, 50.0}) {
            Eigen::VectorXd dir(d);
            for (int i = 0; i < d; ++i) dir[i] = rng.normal();
            dir.normalize();
            const Eigen::VectorXd z = t * dir;
            const auto z_back = mu_inverse(vmf_moments(VmfParam(z)).mu, dim);
            EXPECT_NEAR((z_back.z - z).norm(), 0.0, 1e-8) << "d=" << d << " t=" << t;
        }
    }
}

TEST(MuInverse, InvertsDimensionThreeOracle) {
    Eigen::VectorXd m(3);
    m << 1.0 / std::tanh(1.0) - 1.0, 0.0, 0.0;
    const auto z = mu_inverse(m, Dimension(3));
    EXPECT_NEAR(z.z[0], 1.0, 1e-9);
    EXPECT_NEAR(z.z[1], 0.0, 1e-15);
}

TEST(MuInverse, BoundaryBehaviour) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
    m[0] = 1.0 - 1e-10;
    EXPECT_THROW(mu_inverse(m, Dimension(2)), std::domain_error);
    m[0] = 1.0 - 1e-6;  // just inside the boundary
    const auto z = mu_inverse(m, Dimension(2));
    EXPECT_NEAR(vmf_moments(z).mu[0], m[0], 1e-9);
}

TEST(VmfParam, DegenerateNormSnapsToZero) {
    Eigen::VectorXd z(2);
    z << 1e-15, 0.0;
    EXPECT_EQ(VmfParam(z).concentration(), 0.0);
    EXPECT_THROW(VmfParam(z).direction(), std::domain_error);
}

TEST(SampleVmf, UniformSecondMoment) {
    const int d = 3;
    const auto draws = sample_vmf(VmfParam(Eigen::VectorXd::Zero(d)), 100000, 99);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(d, d);
    for (const auto& y : draws) m2 += y * y.transpose();
    m2 /= static_cast<double>(draws.size());
    EXPECT_LE((m2 - Eigen::MatrixXd::Identity(d, d) / d).norm(), 0.02);
}

TEST(SampleVmf, MeanMatchesMoments) {
    const Eigen::VectorXd z = 2.0 * Eigen::Vector3d(0.36, -0.48, 0.8);
    const VmfParam p{Eigen::VectorXd(z)};
    const auto draws = sample_vmf(p, 100000, 4242);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
    for (const auto& y : draws) mean += y;
    mean /= static_cast<double>(draws.size());
    EXPECT_LE((mean - vmf_moments(p).mu).norm(), 0.01);
}

TEST(SampleVmf, CircleCaseMatchesMoments) {
    Eigen::VectorXd z(2);
    z << 0.9, -1.2;
    const VmfParam p{z};
    const auto draws = sample_vmf(p, 100000, 7);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    for (const auto& y : draws) mean += y;
    mean /= static_cast<double>(draws.size());
    EXPECT_LE((mean - vmf_moments(p).mu).norm(), 0.01);
}

TEST(SampleVmf, UnitNormAndDeterminism) {
    for (int d : {2, 3, 5}) {
        for (double t : {0.0, 2.0, 50.0}) {
            const VmfParam p{Eigen::VectorXd(make_z(d, t))};
            const auto draws = sample_vmf(p, 200, 5);
            for (const auto& y : draws) EXPECT_NEAR(y.norm(), 1.0, 1e-12);
            const auto again = sample_vmf(p, 200, 5);
            for (std::size_t i = 0; i < draws.size(); ++i)
                EXPECT_EQ((draws[i] - again[i]).norm(), 0.0);
        }
    }
    EXPECT_TRUE(sample_vmf(VmfParam(Eigen::VectorXd::Zero(2)), 0, 1).empty());
    EXPECT_THROW(sample_vmf(VmfParam(Eigen::VectorXd::Zero(2)), -1, 1),
                 std::invalid_argument);
}
