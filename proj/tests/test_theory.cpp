#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ingnn/theory.hpp"
#include "oracles.hpp"

using namespace ingnn;
using namespace ingnn::theory;

TEST_CASE("bayes error closed forms") {
    CHECK(bayes_error(1.5, 2.0, 1.5, 2.0) == 1.0);
    // symmetric unit gaussians two apart: 2*Phi(-1)
    CHECK(bayes_error(0.0, 1.0, 2.0, 1.0) ==
          Catch::Approx(2.0 * normal_cdf(-1.0, 0.0, 1.0)).epsilon(1e-12));
    CHECK(bayes_error(0.0, 1.0, 2.0, 1.0) == Catch::Approx(0.3173105078629141).epsilon(1e-9));
    CHECK_THROWS_AS(bayes_error(0.0, -1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("bayes error equals the quadrature overlap") {
    SECTION("worked unequal-variance case") {
        double got = bayes_error(0.0, 1.0, 0.0, 2.0);
        double want = oracle::overlap_by_quadrature(0.0, 1.0, 0.0, 2.0);
        CHECK(got == Catch::Approx(want).margin(1e-6));
    }
    SECTION("random cases") {
        Rng rng(50);
        for (int trial = 0; trial < 120; ++trial) {
            double mu1 = rng.next_normal() * 3.0;
            double mu2 = rng.next_normal() * 3.0;
            double s1 = 0.2 + 2.0 * rng.next_double();
            double s2 = 0.2 + 2.0 * rng.next_double();
            double got = bayes_error(mu1, s1, mu2, s2);
            double want = oracle::overlap_by_quadrature(mu1, s1, mu2, s2);
            CHECK(got == Catch::Approx(want).margin(1e-6));
        }
    }
}

TEST_CASE("bayes error is symmetric under swapping the distributions") {
    Rng rng(51);
    for (int trial = 0; trial < 100; ++trial) {
        double mu1 = rng.next_normal() * 2.0, mu2 = rng.next_normal() * 2.0;
        double s1 = 0.3 + rng.next_double(), s2 = 0.3 + rng.next_double();
        CHECK(bayes_error(mu1, s1, mu2, s2) ==
              Catch::Approx(bayes_error(mu2, s2, mu1, s1)).epsilon(1e-12));
    }
}

TEST_CASE("bayes error strictly decreases as the means separate") {
    double previous = 1.0;
    for (int step = 1; step <= 20; ++step) {
        double eps = bayes_error(0.0, 1.0, 0.25 * step, 1.0);
        CHECK(eps < previous);
        previous = eps;
    }
}

TEST_CASE("aggregated parameters reproduce the three homophily cases") {
    double mu1 = -1.0, s1 = 0.8, mu2 = 2.0, s2 = 1.3, d = 5.0;
    SECTION("h=1: same means, variances shrunk by d") {
        AggregatedParams p = aggregated_params(mu1, s1, mu2, s2, 1.0, d);
        CHECK(p.mean1 == mu1);
        CHECK(p.mean2 == mu2);
        CHECK(p.var1 == Catch::Approx(s1 * s1 / d));
        CHECK(p.var2 == Catch::Approx(s2 * s2 / d));
    }
    SECTION("h=0: distributions exchanged") {
        AggregatedParams p = aggregated_params(mu1, s1, mu2, s2, 0.0, d);
        CHECK(p.mean1 == mu2);
        CHECK(p.mean2 == mu1);
        CHECK(p.var1 == Catch::Approx(s2 * s2 / d));
        CHECK(p.var2 == Catch::Approx(s1 * s1 / d));
    }
    SECTION("h=0.5: both classes collapse to one distribution") {
        AggregatedParams p = aggregated_params(mu1, s1, mu2, s2, 0.5, d);
        CHECK(p.mean1 == p.mean2);
        CHECK(p.var1 == p.var2);
        CHECK(p.mean1 == Catch::Approx(0.5 * (mu1 + mu2)));
        CHECK(p.var1 == Catch::Approx((s1 * s1 + s2 * s2) / (2.0 * d)));
    }
}

namespace {

synth::GaussianClassSpec paper_spec() {
    synth::GaussianClassSpec spec;
    spec.mu1 = 0.0;
    spec.sigma1 = 1.0;
    spec.mu2 = 2.0;
    spec.sigma2 = 1.0;
    spec.degree = 5;
    return spec;
}

std::vector<double> tenth_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    return grid;
}

}  // namespace

TEST_CASE("epsilon curve") {
    EpsilonCurve curve = epsilon_curve(paper_spec(), tenth_grid());

    SECTION("eps_agg(0.5) is exactly 1") { CHECK(curve.eps_agg[5] == 1.0); }
    SECTION("curve is symmetric about 0.5") {
        for (int i = 0; i <= 10; ++i)
            CHECK(curve.eps_agg[i] ==
                  Catch::Approx(curve.eps_agg[10 - i]).epsilon(1e-12));
    }
    SECTION("maximum 1.0 attained exactly at h=0.5") {
        for (int i = 0; i <= 10; ++i) {
            if (i == 5) continue;
            CHECK(curve.eps_agg[i] < 1.0);
        }
    }
    SECTION("aggregation helps at the extremes for d>=1") {
        CHECK(curve.eps_agg[0] == Catch::Approx(curve.eps_agg[10]).epsilon(1e-12));
        CHECK(curve.eps_agg[10] < curve.eps_raw);
        CHECK(curve.eps_agg[10] ==
              Catch::Approx(2.0 * normal_cdf(-std::sqrt(5.0), 0.0, 1.0)).epsilon(1e-9));
    }
    SECTION("crossing interval brackets 0.5") {
        REQUIRE(curve.h_lower.has_value());
        REQUIRE(curve.h_upper.has_value());
        CHECK(*curve.h_lower > 0.0);
        CHECK(*curve.h_lower < 0.5);
        CHECK(*curve.h_upper > 0.5);
        CHECK(*curve.h_upper < 1.0);
        // the crossing is where eps_agg equals eps_raw, to bisection tolerance
        CHECK(bayes_error_aggregated(paper_spec(), *curve.h_lower) ==
              Catch::Approx(curve.eps_raw).margin(1e-4));
    }
    SECTION("corollary: the min-rule never exceeds the aggregated-only error") {
        for (std::size_t i = 0; i < curve.h_grid.size(); ++i)
            CHECK(std::min(curve.eps_raw, curve.eps_agg[i]) <= curve.eps_agg[i]);
    }
    SECTION("grid must ascend") {
        CHECK_THROWS_AS(epsilon_curve(paper_spec(), {0.5, 0.2}), std::invalid_argument);
    }
}

TEST_CASE("monte carlo error") {
    synth::GaussianClassSpec spec = paper_spec();

    SECTION("n=0 rejected") {
        CHECK_THROWS_AS(monte_carlo_error(spec, 0, McMode::raw, 1), std::invalid_argument);
    }
    SECTION("raw mode agrees with the analytic overlap") {
        MonteCarloResult mc = monte_carlo_error(spec, 200000, McMode::raw, 2);
        double analytic = bayes_error(spec.mu1, spec.sigma1, spec.mu2, spec.sigma2);
        CHECK(std::fabs(mc.epsilon - analytic) < 3.0 * mc.stderr_epsilon);
    }
    SECTION("aggregate h=0.5 is a coin flip: epsilon estimate 1.0") {
        spec.homophily = 0.5;
        MonteCarloResult mc = monte_carlo_error(spec, 20000, McMode::aggregate_direct, 3);
        CHECK(mc.error_rate == 0.5);
        CHECK(mc.epsilon == 1.0);
    }
    SECTION("direct aggregate mode matches the analytic curve") {
        for (double h : {0.1, 0.3, 0.8}) {
            spec.homophily = h;
            MonteCarloResult mc =
                monte_carlo_error(spec, 100000, McMode::aggregate_direct, 4);
            double analytic = bayes_error_aggregated(spec, h);
            CHECK(std::fabs(mc.epsilon - analytic) < 3.0 * mc.stderr_epsilon + 1e-9);
        }
    }
    SECTION("graph mode matches the analytic value at its realized mixing") {
        spec.homophily = 0.8;  // h*d = 4 exactly, no rounding
        MonteCarloResult mc = monte_carlo_error(spec, 20000, McMode::aggregate_graph, 5);
        double analytic = bayes_error_aggregated(spec, effective_homophily(spec));
        CHECK(std::fabs(mc.epsilon - analytic) < 4.0 * mc.stderr_epsilon + 1e-9);
    }
}

TEST_CASE("monte carlo raw agrees with analytic across random specs") {
    Rng rng(52);
    for (int trial = 0; trial < 100; ++trial) {
        synth::GaussianClassSpec spec;
        spec.mu1 = rng.next_normal();
        spec.mu2 = spec.mu1 + 0.5 + 2.0 * rng.next_double();
        spec.sigma1 = 0.4 + rng.next_double();
        spec.sigma2 = 0.4 + rng.next_double();
        spec.degree = 1 + rng.next_index(10);
        MonteCarloResult mc =
            monte_carlo_error(spec, 4000, McMode::raw, 600 + trial);
        double analytic = bayes_error(spec.mu1, spec.sigma1, spec.mu2, spec.sigma2);
        CHECK(std::fabs(mc.epsilon - analytic) < 4.5 * mc.stderr_epsilon + 1e-9);
    }
}
