#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "topoinfer/prob.hpp"
#include "topoinfer/rng.hpp"

using namespace topoinfer;

namespace {

LikelihoodParams make_params(double lat_mean, double lat_var, double proc_mean, double proc_var,
                             double eps = 5.0, int max_hops = 9) {
    return LikelihoodParams{NormalParams{lat_mean, lat_var}, NormalParams{proc_mean, proc_var},
                            eps, max_hops};
}

}  // namespace

TEST_CASE("hop prior matches the geometric form") {
    const HopPrior prior{16.0, 300};
    const double p = 16.0 / 299.0;
    CHECK(hop_prior_prob(prior, 1) == Catch::Approx(p).epsilon(1e-12));
    CHECK(hop_prior_prob(prior, 1) == Catch::Approx(0.053512).margin(5e-7));
    CHECK(hop_prior_prob(prior, 2) == Catch::Approx((1.0 - p) * p).epsilon(1e-12));
    CHECK(hop_prior_prob(prior, 2) == Catch::Approx(0.050648).margin(5e-7));
}

TEST_CASE("hop prior strictly decreases and its partial sums rise to 1") {
    const HopPrior prior{16.0, 300};
    double prev = hop_prior_prob(prior, 1);
    double sum = prev;
    for (int h = 2; h <= 2000; ++h) {
        const double cur = hop_prior_prob(prior, h);
        CHECK(cur < prev);
        const double next_sum = sum + cur;
        CHECK(next_sum >= sum);
        sum = next_sum;
        prev = cur;
        if (h > 20 && cur < 1e-280) break;
    }
    double total = 0.0;
    for (int h = 1; h <= 3000; ++h) total += hop_prior_prob(prior, h);
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("hop prior rejects invalid inputs") {
    CHECK_THROWS_AS(hop_prior_prob(HopPrior{16.0, 300}, 0), std::invalid_argument);
    CHECK_THROWS_AS(hop_prior_prob(HopPrior{299.0, 300}, 1), std::invalid_argument);
    CHECK_THROWS_AS(hop_prior_prob(HopPrior{-1.0, 300}, 1), std::invalid_argument);
    CHECK_THROWS_AS(hop_prior_prob(HopPrior{1.0, 2}, 1), std::invalid_argument);
}

TEST_CASE("single-hop likelihood at the mean equals the +-0.5 sigma mass") {
    const LikelihoodParams params = make_params(100.0, 100.0, 0.0, 0.0);
    CHECK(hop_likelihood(params, 1, 100.0) == Catch::Approx(0.38292).margin(1e-5));
    // Mode at the mean: off-center values are smaller.
    CHECK(hop_likelihood(params, 1, 200.0) < hop_likelihood(params, 1, 100.0));
    CHECK(hop_likelihood(params, 1, 60.0) < hop_likelihood(params, 1, 100.0));
}

TEST_CASE("likelihood accepts negative time differences") {
    const LikelihoodParams params = make_params(50.0, 400.0, 0.0, 0.0);
    const double v = hop_likelihood(params, 1, -30.0);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
}

TEST_CASE("likelihood rejects degenerate variance and bad hop counts") {
    CHECK_THROWS_AS(hop_likelihood(make_params(100.0, 0.0, 10.0, 0.0), 1, 100.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(hop_likelihood(make_params(100.0, 100.0, 0.0, 0.0), 0, 100.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(hop_likelihood(make_params(100.0, -4.0, 0.0, 0.0), 1, 100.0),
                    std::invalid_argument);
}

TEST_CASE("closed-form likelihood agrees with numeric convolution") {
    const LikelihoodParams split = make_params(120.0, 144.0, 40.0, 25.0, 4.0);
    for (int h = 1; h <= 3; ++h) {
        const double t = h * 160.0 + 20.0;
        const double closed = hop_likelihood(split, h, t);
        const double numeric =
            oracles::conv_likelihood(split.latency, split.processing, h, t, split.tolerance_ms);
        CHECK(closed == Catch::Approx(numeric).margin(1e-6));
    }
}

TEST_CASE("doubling the tolerance never shrinks the likelihood") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const double mean = 10.0 + 400.0 * rng.uniform();
        const double sd = mean * (0.05 + 0.5 * rng.uniform());
        const double eps = 0.5 + 20.0 * rng.uniform();
        const int h = 1 + static_cast<int>(rng.below(5));
        const double t = h * mean * (0.2 + 2.0 * rng.uniform());
        LikelihoodParams params = make_params(mean, sd * sd, 0.0, 0.0, eps);
        const double narrow = hop_likelihood(params, h, t);
        params.tolerance_ms = 2.0 * eps;
        const double wide = hop_likelihood(params, h, t);
        CHECK(wide >= narrow);
    }
}

TEST_CASE("likelihood peaks at h times the per-hop mean") {
    const LikelihoodParams params = make_params(80.0, 64.0, 20.0, 16.0, 3.0);
    for (int h = 1; h <= 4; ++h) {
        const double mu = h * 100.0;
        const double sd = std::sqrt(h * 80.0);
        const double peak = hop_likelihood(params, h, mu);
        for (int k = -30; k <= 30; ++k) {
            const double t = mu + k * sd / 10.0;
            CHECK(hop_likelihood(params, h, t) <= peak + 1e-15);
        }
    }
}

TEST_CASE("evidence matches a direct summation oracle") {
    const HopPrior prior{16.0, 300};
    const LikelihoodParams params = make_params(100.0, 100.0, 0.0, 0.0);
    const double lib = evidence(prior, params, 100.0);
    long double direct = 0.0L;
    for (int h = 1; h <= params.max_hops; ++h)
        direct += static_cast<long double>(hop_likelihood(params, h, 100.0)) *
                  static_cast<long double>(hop_prior_prob(prior, h));
    CHECK(lib == Catch::Approx(static_cast<double>(direct)).margin(1e-12));
}

TEST_CASE("evidence reduces to a single term when max_hops is 1") {
    const HopPrior prior{16.0, 300};
    const LikelihoodParams params = make_params(100.0, 100.0, 0.0, 0.0, 5.0, 1);
    CHECK(evidence(prior, params, 90.0) ==
          Catch::Approx(hop_likelihood(params, 1, 90.0) * hop_prior_prob(prior, 1)).epsilon(1e-15));
}

TEST_CASE("evidence stays below the largest likelihood term") {
    const HopPrior prior{16.0, 300};
    const LikelihoodParams params = make_params(100.0, 225.0, 10.0, 25.0);
    for (double t : {50.0, 110.0, 220.0, 500.0, 900.0}) {
        double max_lik = 0.0;
        for (int h = 1; h <= params.max_hops; ++h)
            max_lik = std::max(max_lik, hop_likelihood(params, h, t));
        CHECK(evidence(prior, params, t) <= max_lik + 1e-15);
    }
}

TEST_CASE("far-out measurements give zero evidence and no posterior") {
    const HopPrior prior{16.0, 300};
    const LikelihoodParams params = make_params(100.0, 4.0, 0.0, 0.0);
    CHECK(evidence(prior, params, 1e9) == 0.0);
    CHECK(!posterior(prior, params, 1e9).has_value());
}

TEST_CASE("posterior concentrates on the only supported hop count") {
    // Narrow windows: only h = 2 has mass at t = 200.
    const HopPrior prior{16.0, 300};
    const LikelihoodParams params = make_params(100.0, 1.0, 0.0, 0.0);
    const auto post = posterior(prior, params, 200.0);
    REQUIRE(post.has_value());
    CHECK(post->at_hop(2) == Catch::Approx(1.0).margin(1e-12));
    CHECK(decltype(post->probs)::size_type(9) == post->probs.size());
}

TEST_CASE("posterior argmax sits at hop 1 when the measurement equals one hop") {
    const HopPrior prior{16.0, 300};
    const LikelihoodParams params = make_params(100.0, 100.0, 20.0, 4.0);
    const auto post = posterior(prior, params, 120.0);
    REQUIRE(post.has_value());
    // Brute-force argmax over the unnormalized terms.
    int best = 1;
    double best_term = 0.0;
    for (int h = 1; h <= 9; ++h) {
        const double term = hop_likelihood(params, h, 120.0) * hop_prior_prob(prior, h);
        if (term > best_term) {
            best_term = term;
            best = h;
        }
    }
    CHECK(best == 1);
    int lib_best = 1;
    for (int h = 2; h <= 9; ++h)
        if (post->at_hop(h) > post->at_hop(lib_best)) lib_best = h;
    CHECK(lib_best == 1);
}

TEST_CASE("posterior sums to one across random valid inputs") {
    Rng rng(99);
    int informative = 0;
    for (int i = 0; i < 2000; ++i) {
        const int n = 10 + static_cast<int>(rng.below(990));
        const double deg = 1.0 + rng.uniform() * (n - 2.5);
        const HopPrior prior{deg, n};
        const double lat_mean = 5.0 + 300.0 * rng.uniform();
        const double lat_sd = lat_mean * (0.05 + 0.45 * rng.uniform());
        const double proc_mean = 200.0 * rng.uniform();
        const double proc_sd = proc_mean * 0.3 * rng.uniform();
        const double eps = 0.5 + 25.0 * rng.uniform();
        const int max_hops = 1 + static_cast<int>(rng.below(12));
        const LikelihoodParams params = make_params(lat_mean, lat_sd * lat_sd, proc_mean,
                                                    proc_sd * proc_sd, eps, max_hops);
        const int h_near = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_hops)));
        const double t = h_near * (lat_mean + proc_mean) + (rng.uniform() - 0.5) * 6.0 * lat_sd;
        const auto post = posterior(prior, params, t);
        if (!post) continue;
        ++informative;
        double sum = 0.0;
        for (double p : post->probs) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            sum += p;
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    }
    CHECK(informative > 1500);
}
