#pragma once

// Mallows phi model over permutations with Kendall's tau distance.
//
// A permutation of length n is stored in one-line notation with one-based
// values: mapping[i] = pi(i + 1). The reference order is the identity
// (1, 2, ..., n), so d(pi, identity) is the inversion count of pi.

#include <wordorder/errors.hpp>
#include <wordorder/rng.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace wordorder {

class Permutation {
public:
    using value_type = std::uint32_t;

    /// Validates that `mapping` is a bijection on {1, ..., n}, n >= 1.
    explicit Permutation(std::vector<value_type> mapping) : mapping_(std::move(mapping)) {
        if (mapping_.empty()) throw UsageError("permutation must have length >= 1");
        std::vector<bool> seen(mapping_.size() + 1, false);
        for (const value_type v : mapping_) {
            if (v < 1 || v > mapping_.size() || seen[v]) {
                throw UsageError("not a bijection on 1.." + std::to_string(mapping_.size()) +
                                 " (offending value " + std::to_string(v) + ")");
            }
            seen[v] = true;
        }
    }

    static Permutation identity(std::size_t n) {
        std::vector<value_type> m(n);
        std::iota(m.begin(), m.end(), value_type{1});
        return Permutation(std::move(m));
    }

    static Permutation reversal(std::size_t n) {
        std::vector<value_type> m(n);
        for (std::size_t i = 0; i < n; ++i) m[i] = static_cast<value_type>(n - i);
        return Permutation(std::move(m));
    }

    std::size_t size() const noexcept { return mapping_.size(); }
    /// One-based access: at(i) = pi(i), 1 <= i <= n.
    value_type at(std::size_t i) const { return mapping_.at(i - 1); }
    std::span<const value_type> mapping() const noexcept { return mapping_; }

    Permutation inverse() const {
        std::vector<value_type> inv(mapping_.size());
        for (std::size_t i = 0; i < mapping_.size(); ++i) inv[mapping_[i] - 1] = static_cast<value_type>(i + 1);
        return Permutation(std::move(inv));
    }

    /// (this o other)(i) = this(other(i)).
    Permutation compose(const Permutation& other) const {
        if (other.size() != size()) throw UsageError("compose: length mismatch");
        std::vector<value_type> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = mapping_[other.mapping_[i] - 1];
        return Permutation(std::move(out));
    }

    bool is_identity() const noexcept {
        for (std::size_t i = 0; i < mapping_.size(); ++i)
            if (mapping_[i] != i + 1) return false;
        return true;
    }

    /// Reorders `units` so that output position i holds units[pi(i)].
    template <class T>
    std::vector<T> apply(std::span<const T> units) const {
        if (units.size() != size()) throw UsageError("apply: sequence length does not match permutation");
        std::vector<T> out;
        out.reserve(units.size());
        for (const value_type v : mapping_) out.push_back(units[v - 1]);
        return out;
    }

    /// Inverse of apply(): unapply(apply(x)) == x.
    template <class T>
    std::vector<T> unapply(std::span<const T> units) const {
        if (units.size() != size()) throw UsageError("unapply: sequence length does not match permutation");
        std::vector<T> out(units.size());
        for (std::size_t i = 0; i < mapping_.size(); ++i) out[mapping_[i] - 1] = units[i];
        return out;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<value_type> mapping_;
};

namespace detail {

inline std::uint64_t merge_count(std::vector<std::uint32_t>& a, std::vector<std::uint32_t>& buf,
                                 std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t count = merge_count(a, buf, lo, mid) + merge_count(a, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (a[j] < a[i]) {
            count += mid - i;
            buf[k++] = a[j++];
        } else {
            buf[k++] = a[i++];
        }
    }
    while (i < mid) buf[k++] = a[i++];
    while (j < hi) buf[k++] = a[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              a.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

// 1/(e^x - 1) - 1/x, finite at x = 0.
inline double recip_expm1_excess(double x) {
    if (std::abs(x) < 1e-2) {
        const double x2 = x * x;
        return -0.5 + x / 12.0 - x * x2 / 720.0 + x * x2 * x2 / 30240.0;
    }
    return 1.0 / std::expm1(x) - 1.0 / x;
}

// e^x / (e^x - 1)^2 - 1/x^2, finite at x = 0.
inline double recip_sinh2_excess(double x) {
    if (std::abs(x) < 1e-2) {
        const double x2 = x * x;
        return -1.0 / 12.0 + x2 / 240.0 - x2 * x2 / 6048.0 + x2 * x2 * x2 / 172800.0;
    }
    const double s = std::sinh(0.5 * x);
    return 1.0 / (4.0 * s * s) - 1.0 / (x * x);
}

// log sum_{r=0}^{j-1} e^{-theta r}
inline double log_truncated_geometric_norm(std::size_t j, double theta) {
    if (j == 1) return 0.0;
    const double jd = static_cast<double>(j);
    if (theta < 0) return -theta * (jd - 1.0) + log_truncated_geometric_norm(j, -theta);
    return std::log(-std::expm1(-jd * theta)) - std::log(-std::expm1(-theta));
}

}  // namespace detail

/// Kendall's tau distance d(pi, pi0) = inv(pi o pi0^-1), by merge counting.
inline std::uint64_t kendall_tau(const Permutation& pi, const Permutation& pi0) {
    if (pi.size() != pi0.size()) {
        throw UsageError("kendall_tau: length mismatch (" + std::to_string(pi.size()) + " vs " +
                         std::to_string(pi0.size()) + ")");
    }
    const Permutation rel = pi.compose(pi0.inverse());
    std::vector<std::uint32_t> a(rel.mapping().begin(), rel.mapping().end());
    std::vector<std::uint32_t> buf(a.size());
    return detail::merge_count(a, buf, 0, a.size());
}

inline std::uint64_t kendall_tau(const Permutation& pi) { return kendall_tau(pi, Permutation::identity(pi.size())); }

/// Below this |theta| the sampler draws insertion values uniformly.
inline constexpr double kThetaZeroEpsilon = 1e-8;

struct MallowsMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and variance of d_tau under Mallows(n, theta).
///
/// Evaluated as a sum of per-position truncated-geometric moments,
///   E_j = 1/(e^t - 1) - j/(e^{jt} - 1),   V_j = e^t/(e^t - 1)^2 - j^2 e^{jt}/(e^{jt} - 1)^2,
/// with the 1/t and 1/t^2 poles cancelled analytically, which keeps the
/// result accurate near theta = 0 and free of overflow for large |theta|.
inline MallowsMoments analytic_moments(std::size_t n, double theta) {
    if (n < 1) throw UsageError("analytic_moments: n must be >= 1");
    const double nd = static_cast<double>(n);
    if (theta == 0.0) {
        return {nd * (nd - 1.0) / 4.0, nd * (nd - 1.0) * (2.0 * nd + 5.0) / 72.0};
    }
    MallowsMoments m;
    const double k1 = detail::recip_expm1_excess(theta);
    const double g1 = detail::recip_sinh2_excess(theta);
    for (std::size_t j = 2; j <= n; ++j) {
        const double jd = static_cast<double>(j);
        m.mean += k1 - jd * detail::recip_expm1_excess(jd * theta);
        m.variance += g1 - jd * jd * detail::recip_sinh2_excess(jd * theta);
    }
    return m;
}

/// log Z(theta, n) = sum_j log((1 - e^{-j theta}) / (1 - e^{-theta})), log(n!) at theta = 0.
inline double log_partition(std::size_t n, double theta) {
    if (n < 1) throw UsageError("log_partition: n must be >= 1");
    if (theta == 0.0) return std::lgamma(static_cast<double>(n) + 1.0);
    double z = 0.0;
    for (std::size_t j = 2; j <= n; ++j) z += detail::log_truncated_geometric_norm(j, theta);
    return z;
}

struct MallowsDistribution {
    std::size_t n = 1;
    double theta = 0.0;
    double log_partition = 0.0;
    double mean_distance = 0.0;
    double variance_distance = 0.0;
    std::uint64_t d_max = 0;
    double v_max = 0.0;

    MallowsDistribution(std::size_t length, double order) : n(length), theta(order) {
        if (n < 1) throw UsageError("MallowsDistribution: n must be >= 1");
        if (!std::isfinite(theta)) throw UsageError("MallowsDistribution: theta must be finite");
        const double nd = static_cast<double>(n);
        log_partition = wordorder::log_partition(n, theta);
        const auto mom = analytic_moments(n, theta);
        mean_distance = mom.mean;
        variance_distance = mom.variance;
        d_max = static_cast<std::uint64_t>(n) * (n - 1) / 2;
        v_max = nd * (nd - 1.0) * (2.0 * nd + 5.0) / 72.0;
    }
};

inline double log_probability(const MallowsDistribution& dist, const Permutation& pi) {
    if (pi.size() != dist.n) throw UsageError("log_probability: permutation length does not match n");
    return -dist.theta * static_cast<double>(kendall_tau(pi)) - dist.log_partition;
}

/// Builds the permutation whose insertion code is `codes`: codes[j-1] is the
/// number of values smaller than j that appear after j, in [0, j-1]. The
/// inversion count of the result equals the sum of the codes.
inline Permutation from_insertion_code(std::span<const std::uint32_t> codes) {
    const std::size_t n = codes.size();
    if (n == 0) throw UsageError("from_insertion_code: empty code");
    // Fenwick tree over free output slots; place values from n down to 1.
    // When value j is placed exactly j slots are free, and all of them are
    // later filled by smaller values, so j takes free slot (j - 1 - code).
    std::vector<std::uint32_t> tree(n + 1, 0);
    auto add = [&](std::size_t i, int delta) {
        for (; i <= n; i += i & (~i + 1)) tree[i] = static_cast<std::uint32_t>(static_cast<int>(tree[i]) + delta);
    };
    for (std::size_t i = 1; i <= n; ++i) add(i, 1);
    std::size_t top = 1;
    while (top * 2 <= n) top *= 2;
    std::vector<Permutation::value_type> mapping(n);
    for (std::size_t j = n; j >= 1; --j) {
        const std::uint32_t code = codes[j - 1];
        if (code >= j) throw UsageError("from_insertion_code: code out of range at position " + std::to_string(j));
        // Find the slot holding the (j - code)-th free position (one-based rank).
        std::size_t rank = j - code;
        std::size_t pos = 0;
        for (std::size_t step = top; step > 0; step /= 2) {
            if (pos + step <= n && tree[pos + step] < rank) {
                pos += step;
                rank -= tree[pos];
            }
        }
        const std::size_t slot = pos + 1;
        mapping[slot - 1] = static_cast<Permutation::value_type>(j);
        add(slot, -1);
    }
    return Permutation(std::move(mapping));
}

/// Draws V in {0, ..., j-1} with P(V = r) proportional to e^{-theta r} by inverting the CDF.
inline std::uint32_t sample_insertion_value(std::size_t j, double theta, Rng& rng) {
    const double u = rng.uniform();
    if (j == 1) return 0;
    const double jd = static_cast<double>(j);
    if (std::abs(theta) < kThetaZeroEpsilon) {
        return static_cast<std::uint32_t>(std::min(jd - 1.0, std::floor(u * jd)));
    }
    const double a = std::abs(theta);
    // CDF for rate a > 0: F(r) = (1 - e^{-a(r+1)}) / (1 - e^{-aj}).
    const double x = std::log1p(u * std::expm1(-a * jd)) / -a;
    double r = std::floor(x);
    if (r < 0.0) r = 0.0;
    if (r > jd - 1.0) r = jd - 1.0;
    const auto v = static_cast<std::uint32_t>(r);
    // Negative theta is the mirror image: V -> (j - 1) - V.
    return theta > 0 ? v : static_cast<std::uint32_t>(j - 1) - v;
}

/// Exact Mallows sample via independent insertion codes; consumes one uniform
/// per position j = 1..n from `rng`.
inline Permutation sample_permutation(const MallowsDistribution& dist, Rng& rng) {
    std::vector<std::uint32_t> codes(dist.n);
    for (std::size_t j = 1; j <= dist.n; ++j) codes[j - 1] = sample_insertion_value(j, dist.theta, rng);
    return from_insertion_code(codes);
}

}  // namespace wordorder
