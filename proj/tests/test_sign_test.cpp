#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sfit/sign_test.hpp"

using namespace sfit;

namespace {

// Independent oracle: Pascal's-triangle row by repeated addition, tail sum
// in 128-bit integers, converted through long double.
long double pascal_tail(unsigned n, unsigned k) {
    std::vector<unsigned __int128> row{1};  // row of C(n, .)
    for (unsigned i = 1; i <= n; ++i) {
        std::vector<unsigned __int128> next(i + 1, 1);
        for (unsigned j = 1; j < i; ++j) next[j] = row[j - 1] + row[j];
        row = std::move(next);
    }
    unsigned __int128 sum = 0;
    for (unsigned i = k; i <= n; ++i) sum += row[i];
    return static_cast<long double>(sum) / std::pow(2.0L, static_cast<int>(n));
}

double rel_err(double a, long double b) {
    if (b == 0.0L) return std::fabs(a);
    return static_cast<double>(std::fabs((static_cast<long double>(a) - b) / b));
}

}  // namespace

TEST_CASE("binomial tail matches exact rational enumeration up to n=16") {
    for (unsigned n = 1; n <= 16; ++n)
        for (unsigned k = 0; k <= n; ++k)
            CHECK(rel_err(binomial_tail_half(n, k), pascal_tail(n, k)) < 1e-12);
}

TEST_CASE("binomial tail worked examples") {
    CHECK(binomial_tail_half(10, 6) == doctest::Approx(386.0 / 1024.0).epsilon(1e-15));
    CHECK(binomial_tail_half(10, 6) == 0.376953125);  // exactly representable
    CHECK(binomial_tail_half(10, 0) == 1.0);
    CHECK(binomial_tail_half(10, 10) == doctest::Approx(1.0 / 1024.0).epsilon(1e-15));
    CHECK(binomial_tail_half(5, 6) == 0.0);  // k > n
}

TEST_CASE("log-domain path agrees with the exact path at the crossover") {
    for (unsigned n : {32u, 50u, 64u})
        for (unsigned k = 0; k <= n; k += 3)
            CHECK(rel_err(detail::tail_log_domain(n, k),
                          static_cast<long double>(detail::tail_exact_small(n, k))) < 1e-12);
}

TEST_CASE("log-domain path matches frozen independent values") {
    // Computed from exact integer arithmetic with arbitrary precision.
    struct Row {
        unsigned n, k;
        double tail;
    };
    const Row rows[] = {
        {64, 40, 0.029970594783499616},   {64, 32, 0.5496733768739834},
        {65, 40, 0.04084076697077003},    {65, 5, 0.9999999999999805},
        {200, 120, 0.0028425779983751527}, {200, 100, 0.5281742395046282},
        {10000, 5100, 0.023292763852473693}, {10000, 5000, 0.5039893230696911},
        {10000, 4950, 0.8437523952446604},
    };
    for (const Row& r : rows) {
        // thousands of lgamma-based terms cost a couple of digits at n=10000
        const double tol = r.n > 1000 ? 1e-10 : 1e-12;
        CHECK(binomial_tail_half(r.n, r.k) == doctest::Approx(r.tail).epsilon(tol));
    }
}

TEST_CASE("binomial tail is nonincreasing in k") {
    for (unsigned n : {7u, 40u, 999u}) {
        double prev = 2.0;
        for (unsigned k = 0; k <= n; ++k) {
            const double t = binomial_tail_half(n, k);
            CHECK(t <= prev);
            prev = t;
        }
    }
}

TEST_CASE("normal quantile matches frozen high-precision values") {
    struct Row {
        double p, q;
    };
    const Row rows[] = {
        {1e-12, -7.034483825301131},  {1e-9, -5.9978070150076865},
        {1e-6, -4.753424308822899},   {0.001, -3.090232306167813},
        {0.025, -1.9599639845400545}, {0.1, -1.2815515655446004},
        {0.3, -0.5244005127080409},   {0.5, 0.0},
        {0.7, 0.5244005127080407},    {0.975, 1.959963984540054},
        {0.999, 3.090232306167813},   {0.999999999, 5.997807019601637},
    };
    for (const Row& r : rows)
        CHECK(normal_quantile(r.p) == doctest::Approx(r.q).epsilon(1e-13));
    CHECK_THROWS(normal_quantile(0.0));
    CHECK_THROWS(normal_quantile(1.0));
    CHECK_THROWS(normal_quantile(-0.5));
}

TEST_CASE("normal quantile antisymmetry") {
    // dyadic p so that 1-p is exact and both tails see the same number
    for (double p : {std::ldexp(1.0, -23), 0.01, 0.2, 0.49})
        CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1.0 - p)).epsilon(1e-12));
}

TEST_CASE("sign test counts strict positives and ties count against") {
    Eigen::VectorXd d(6);
    d << 1.0, 2.0, 0.0, -1.0, 0.5, 0.0;  // 3 positive, 2 exact zeros
    SignTestResult r = sign_test(d, 0.05);
    CHECK(r.n == 6);
    CHECK(r.n_plus == 3);
    CHECK(r.p_value == doctest::Approx(binomial_tail_half(6, 3)).epsilon(1e-15));
    CHECK_FALSE(r.significant);

    Eigen::VectorXd all_pos = Eigen::VectorXd::Constant(12, 0.25);
    SignTestResult r2 = sign_test(all_pos, 0.05);
    CHECK(r2.n_plus == 12);
    CHECK(r2.p_value == doctest::Approx(std::ldexp(1.0, -12)).epsilon(1e-15));
    CHECK(r2.significant);
}

TEST_CASE("median conventions") {
    Eigen::VectorXd odd(3);
    odd << -1.0, 0.2, 0.5;
    CHECK(median(odd) == 0.2);
    Eigen::VectorXd even(2);
    even << 1.0, 3.0;
    CHECK(median(even) == 2.0);
    Eigen::VectorXd unsorted(4);
    unsorted << 9.0, -3.0, 1.0, 2.0;
    CHECK(median(unsorted) == 1.5);

    // Monte-Carlo sanity: median of many standard normals is near 0.
    std::mt19937_64 eng(7);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd z(10001);
    for (int i = 0; i < z.size(); ++i) z[i] = gauss(eng);
    CHECK(std::fabs(median(z)) < 0.05);
}

TEST_CASE("exact confidence interval selection and coverage") {
    Eigen::VectorXd d(10);
    d << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
    ExactCi ci = median_ci_exact(d, 0.05);
    CHECK(ci.k == 1);  // 2*P(B<=1)=0.0215 <= 0.05 < 2*P(B<=2)=0.109
    CHECK(ci.coverage == doctest::Approx(0.978515625).epsilon(1e-15));
    CHECK(ci.lo == 2.0);   // order statistic 1+k
    CHECK(ci.hi == 9.0);   // order statistic n-k
    CHECK_FALSE(ci.widest_fallback);

    Eigen::VectorXd tiny(3);
    tiny << 5.0, 1.0, 3.0;
    ExactCi fallback = median_ci_exact(tiny, 0.01);
    CHECK(fallback.widest_fallback);  // 2*P(B<=0) = 0.25 > 0.01
    CHECK(fallback.k == 0);
    CHECK(fallback.lo == 1.0);
    CHECK(fallback.hi == 5.0);
    CHECK(fallback.coverage == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("exact interval at n=101 alpha=0.05") {
    Eigen::VectorXd d(101);
    for (int i = 0; i < 101; ++i) d[i] = i;
    ExactCi ci = median_ci_exact(d, 0.05);
    CHECK(ci.k == 40);  // frozen from exact binomial CDF enumeration
    CHECK(ci.coverage == doctest::Approx(0.9539559330706572).epsilon(1e-12));
}

TEST_CASE("asymptotic interval index formula") {
    Eigen::VectorXd d(10000);
    for (int i = 0; i < d.size(); ++i) d[i] = i + 1;  // order statistic i+1 = value
    AsymptoticCi ci = median_ci_asymptotic(d, 0.05);
    CHECK(ci.lo_index == 4902);
    CHECK(ci.hi_index == 5099);
    CHECK(ci.lo == 4902.0);
    CHECK(ci.hi == 5099.0);

    // alpha -> 1 degenerates to the central order statistics.
    AsymptoticCi center = median_ci_asymptotic(d, 0.999999);
    CHECK(center.lo_index >= 4999);
    CHECK(center.hi_index <= 5002);

    // Indices stay clamped inside [1, n] for tiny n and small alpha.
    Eigen::VectorXd small(5);
    small << 1, 2, 3, 4, 5;
    AsymptoticCi clamped = median_ci_asymptotic(small, 1e-6);
    CHECK(clamped.lo_index >= 1);
    CHECK(clamped.hi_index <= 5);
}

TEST_CASE("exact CI coverage Monte-Carlo at n=101") {
    // Shifted exponential with median exactly 0; fewer resamples than the
    // full gate run but the same contract.
    std::mt19937_64 eng(20240817);
    std::exponential_distribution<double> expo(1.0);
    const int resamples = 20000;
    const int n = 101;
    const double shift = std::log(2.0);
    int covered = 0;
    double reported = 0.0;
    for (int r = 0; r < resamples; ++r) {
        Eigen::VectorXd d(n);
        for (int i = 0; i < n; ++i) d[i] = expo(eng) - shift;
        ExactCi ci = median_ci_exact(d, 0.05);
        reported = ci.coverage;
        if (ci.lo <= 0.0 && 0.0 <= ci.hi) ++covered;
    }
    const double empirical = static_cast<double>(covered) / resamples;
    CHECK(empirical == doctest::Approx(reported).epsilon(0.015));
}

TEST_CASE("FDR step-up worked examples") {
    // BY thresholds with m=3, alpha=0.05: i*alpha/(m*c(3)), c(3)=11/6.
    std::vector<bool> none = fdr_reject({0.01, 0.02, 0.04}, 0.05, FdrMethod::by);
    CHECK(none == std::vector<bool>{false, false, false});

    std::vector<bool> one = fdr_reject({0.001, 0.2, 0.9}, 0.05, FdrMethod::by);
    CHECK(one == std::vector<bool>{true, false, false});

    std::vector<bool> raw = fdr_reject({0.01, 0.2, 0.04}, 0.05, FdrMethod::none);
    CHECK(raw == std::vector<bool>{true, false, true});

    // BH rejects all three (p_(3)=0.04 <= 3/3 * 0.05).
    std::vector<bool> bh = fdr_reject({0.01, 0.02, 0.04}, 0.05, FdrMethod::bh);
    CHECK(bh == std::vector<bool>{true, true, true});

    CHECK(fdr_reject({}, 0.05, FdrMethod::by).empty());
}

TEST_CASE("BY rejections are a subset of BH rejections") {
    std::mt19937_64 eng(99);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = 1 + static_cast<int>(eng() % 20);
        std::vector<double> p(m);
        for (double& v : p) v = std::pow(unif(eng), 2.0);  // skew toward small
        std::vector<bool> by = fdr_reject(p, 0.05, FdrMethod::by);
        std::vector<bool> bh = fdr_reject(p, 0.05, FdrMethod::bh);
        for (int i = 0; i < m; ++i)
            if (by[i]) CHECK(bh[i]);
    }
}

TEST_CASE("input validation") {
    Eigen::VectorXd empty;
    CHECK_THROWS(sign_test(empty, 0.05));
    CHECK_THROWS(median(empty));
    CHECK_THROWS(median_ci_exact(empty, 0.05));
    CHECK_THROWS(binomial_tail_half(0, 0));
}
