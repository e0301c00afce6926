#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

namespace sfit {

// P(B >= k) for B ~ Binomial(n, 1/2).
//
// Small n (<= 64) is evaluated in exact integer arithmetic: the tail count
// sum_{i>=k} C(n,i) fits in 128 bits and dividing by 2^n is exact in binary
// floating point, so the result is correctly rounded. Larger n falls back to
// log-domain terms exp(lchoose(n,i) - n log 2) accumulated with compensated
// (Kahan) summation.
double binomial_tail_half(std::size_t n, std::size_t k);

namespace detail {
double tail_exact_small(std::size_t n, std::size_t k);  // requires n <= 64
double tail_log_domain(std::size_t n, std::size_t k);
}  // namespace detail

// Inverse standard normal CDF (Wichura's PPND16 rational approximations,
// accurate to ~1e-16 for p in (0,1)). Throws outside (0,1).
double normal_quantile(double p);

struct SignTestResult {
    std::size_t n = 0;       // number of deltas
    std::size_t n_plus = 0;  // strictly positive deltas; ties count against
    double p_value = 1.0;    // P(B >= n_plus) under the fair-coin null
    bool significant = false;
};

// One-sided sign test of H0: median <= 0 against H1: median > 0.
SignTestResult sign_test(const Eigen::VectorXd& deltas, double alpha);

double median(Eigen::VectorXd v);  // midpoint convention for even length

// Distribution-free CI for the median from order statistics:
// [d_(1+k), d_(n-k)] with k the largest integer such that the two-sided
// exclusion mass 2 P(B <= k) stays within alpha. When even k = 0 exceeds
// alpha (tiny samples) the widest interval [d_(1), d_(n)] is reported with
// `widest_fallback` set; `coverage` is the achieved level either way.
struct ExactCi {
    double lo = 0.0, hi = 0.0;
    std::size_t k = 0;
    double coverage = 0.0;
    bool widest_fallback = false;
};
ExactCi median_ci_exact(const Eigen::VectorXd& deltas, double alpha);

// Large-sample CI using the normal approximation to the order-statistic
// indices: lower index floor((n+1)/2 - z sqrt(n)/2), upper index
// ceil((n+1)/2 + z sqrt(n)/2) with z = normal_quantile(1 - alpha/2),
// clamped to [1, n]. Indices are reported 1-based.
struct AsymptoticCi {
    double lo = 0.0, hi = 0.0;
    std::size_t lo_index = 0, hi_index = 0;
};
AsymptoticCi median_ci_asymptotic(const Eigen::VectorXd& deltas, double alpha);

enum class FdrMethod { none, bh, by };

std::string to_string(FdrMethod m);
FdrMethod parse_fdr(const std::string& s);

// Multiple-testing adjustment over a family of p-values. `none` compares
// each p-value to alpha directly; `bh` is the Benjamini-Hochberg step-up;
// `by` is the Benjamini-Yekutieli variant whose per-rank thresholds are
// shrunk by the harmonic sum c(m) = sum_{j<=m} 1/j, valid under arbitrary
// dependence. Returns rejection flags in the original order.
std::vector<bool> fdr_reject(const std::vector<double>& pvals, double alpha, FdrMethod method);

}  // namespace sfit
