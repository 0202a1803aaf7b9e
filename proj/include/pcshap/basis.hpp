#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcshap/error.hpp"
#include "pcshap/orthopoly.hpp"

namespace pcshap {

/// Per-variable polynomial degrees (alpha_1, ..., alpha_M).
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> degrees) : degrees_(std::move(degrees)) {}
    MultiIndex(std::initializer_list<int> degrees) : degrees_(degrees) {}

    std::size_t dims() const { return degrees_.size(); }
    int operator[](std::size_t k) const { return degrees_[k]; }
    const std::vector<int>& degrees() const { return degrees_; }
    int total_degree() const { return std::accumulate(degrees_.begin(), degrees_.end(), 0); }
    bool is_constant() const {
        return std::all_of(degrees_.begin(), degrees_.end(), [](int d) { return d == 0; });
    }

    /// Bit k set iff alpha_k > 0.
    std::uint64_t support_mask() const {
        std::uint64_t m = 0;
        for (std::size_t k = 0; k < degrees_.size(); ++k)
            if (degrees_[k] > 0) m |= std::uint64_t{1} << k;
        return m;
    }

    std::string to_string() const {
        std::string s = "(";
        for (std::size_t k = 0; k < degrees_.size(); ++k) {
            if (k) s += ',';
            s += std::to_string(degrees_[k]);
        }
        return s + ")";
    }

    auto operator<=>(const MultiIndex&) const = default;

private:
    std::vector<int> degrees_;
};

/// A sorted, duplicate-free set of 0-based variable positions. Printed
/// 1-based, e.g. "{1,3}".
class VariableSubset {
public:
    VariableSubset() = default;
    VariableSubset(std::initializer_list<int> members) : VariableSubset(std::vector<int>(members)) {}
    explicit VariableSubset(std::vector<int> members) : members_(std::move(members)) {
        std::sort(members_.begin(), members_.end());
        if (std::adjacent_find(members_.begin(), members_.end()) != members_.end())
            throw ConfigError("variable subset has duplicate members");
        if (!members_.empty() && (members_.front() < 0 || members_.back() > 63))
            throw ConfigError("variable subset member out of range");
    }

    static VariableSubset from_mask(std::uint64_t mask) {
        VariableSubset s;
        for (int k = 0; k < 64; ++k)
            if (mask & (std::uint64_t{1} << k)) s.members_.push_back(k);
        return s;
    }

    std::uint64_t mask() const {
        std::uint64_t m = 0;
        for (int k : members_) m |= std::uint64_t{1} << k;
        return m;
    }

    const std::vector<int>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    bool contains(int k) const { return std::binary_search(members_.begin(), members_.end(), k); }

    std::string to_string() const {
        std::string s = "{";
        for (std::size_t i = 0; i < members_.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(members_[i] + 1);
        }
        return s + "}";
    }

    /// Orders by cardinality first, then lexicographically.
    friend bool operator<(const VariableSubset& a, const VariableSubset& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a.members_ < b.members_;
    }
    friend bool operator==(const VariableSubset&, const VariableSubset&) = default;

private:
    std::vector<int> members_;
};

enum class SupportClass { ExactSupport, ProperSubsetSupport, Outside };

/// Where the support {k : alpha_k > 0} of alpha sits relative to u.
inline SupportClass classify_index(const MultiIndex& alpha, const VariableSubset& u) {
    const std::uint64_t s = alpha.support_mask();
    const std::uint64_t m = u.mask();
    if (s == m) return SupportClass::ExactSupport;
    if ((s & ~m) == 0) return SupportClass::ProperSubsetSupport;
    return SupportClass::Outside;
}

/// (M+P)! / (M! P!), saturating at SIZE_MAX.
inline std::size_t basis_size(int dims, int degree) {
    // C(M+P, P) built incrementally; each partial product is itself a binomial.
    unsigned long long c = 1;
    for (int k = 1; k <= degree; ++k) {
        const unsigned long long num = static_cast<unsigned long long>(dims) + k;
        if (c > ~0ULL / num) return static_cast<std::size_t>(-1);
        c = c * num / k;
    }
    return static_cast<std::size_t>(c);
}

inline constexpr std::size_t kDefaultMaxTerms = 1'000'000;

/// All multi-indices of total degree <= P, graded by total degree with the
/// constant index first; within a degree, lexicographically descending.
inline std::vector<MultiIndex> enumerate_indices(int dims, int degree, std::size_t max_terms = kDefaultMaxTerms) {
    if (dims < 1) throw ConfigError("enumerate_indices: dimension must be >= 1");
    if (degree < 0) throw ConfigError("enumerate_indices: degree must be >= 0");
    const std::size_t count = basis_size(dims, degree);
    if (count > max_terms)
        throw ConfigError("basis with M=" + std::to_string(dims) + ", P=" + std::to_string(degree) + " has " +
                          (count == static_cast<std::size_t>(-1) ? std::string("too many") : std::to_string(count)) +
                          " terms, above the cap of " + std::to_string(max_terms));

    std::vector<MultiIndex> out;
    out.reserve(count);
    std::vector<int> cur(dims, 0);
    // Fill positions k.. with exactly `remaining` total degree.
    auto fill = [&](auto&& self, int k, int remaining) -> void {
        if (k == dims - 1) {
            cur[k] = remaining;
            out.emplace_back(cur);
            return;
        }
        for (int d = remaining; d >= 0; --d) {
            cur[k] = d;
            self(self, k + 1, remaining - d);
        }
    };
    for (int total = 0; total <= degree; ++total) fill(fill, 0, total);
    return out;
}

/// Tensor-product basis of total degree <= P over independent inputs.
class PceBasis {
public:
    PceBasis(std::vector<InputVariable> variables, int degree, std::size_t max_terms = kDefaultMaxTerms)
        : variables_(std::move(variables)), degree_(degree) {
        if (variables_.empty()) throw ConfigError("basis needs at least one variable");
        if (variables_.size() > 63) throw ConfigError("basis supports at most 63 variables");
        for (const auto& v : variables_)
            if (is_bounded(v.family) != v.map.is_bounded())
                throw ConfigError("variable '" + v.name + "': family and input map disagree on boundedness");
        indices_ = enumerate_indices(static_cast<int>(variables_.size()), degree, max_terms);
        norms_.reserve(indices_.size());
        masks_.reserve(indices_.size());
        for (std::size_t i = 0; i < indices_.size(); ++i) {
            double n = 1.0;
            for (std::size_t k = 0; k < dims(); ++k) n *= norm_sq(variables_[k].family, indices_[i][k]);
            norms_.push_back(n);
            masks_.push_back(indices_[i].support_mask());
            position_.emplace(indices_[i], i);
        }
    }

    std::size_t dims() const { return variables_.size(); }
    int degree() const { return degree_; }
    std::size_t size() const { return indices_.size(); }

    const std::vector<InputVariable>& variables() const { return variables_; }
    const InputVariable& variable(std::size_t k) const { return variables_[k]; }
    PolynomialFamily family(std::size_t k) const { return variables_[k].family; }

    const std::vector<MultiIndex>& indices() const { return indices_; }
    const MultiIndex& index(std::size_t i) const { return indices_[i]; }
    /// E[Phi_alpha^2] aligned with indices().
    const std::vector<double>& norms() const { return norms_; }
    const std::vector<std::uint64_t>& support_masks() const { return masks_; }

    std::optional<std::size_t> find(const MultiIndex& alpha) const {
        auto it = position_.find(alpha);
        if (it == position_.end()) return std::nullopt;
        return it->second;
    }

    /// Position of the first-order index with degree 1 in dimension k.
    std::size_t linear_index(std::size_t k) const {
        std::vector<int> a(dims(), 0);
        a[k] = 1;
        auto pos = find(MultiIndex(std::move(a)));
        if (!pos) throw ConfigError("basis of degree 0 has no linear terms");
        return *pos;
    }

    /// Evaluates every basis function at a standard-space point.
    void eval_all(std::span<const double> zeta, std::span<double> out) const {
        const std::size_t m = dims();
        const std::size_t stride = static_cast<std::size_t>(degree_) + 1;
        thread_local std::vector<double> table;
        table.resize(m * stride);
        for (std::size_t k = 0; k < m; ++k)
            pcshap::eval_all(variables_[k].family, zeta[k], std::span<double>(table).subspan(k * stride, stride));
        for (std::size_t i = 0; i < indices_.size(); ++i) {
            double v = 1.0;
            for (std::size_t k = 0; k < m; ++k) v *= table[k * stride + indices_[i][k]];
            out[i] = v;
        }
    }

    std::vector<double> to_standard(std::span<const double> x) const {
        std::vector<double> z(dims());
        for (std::size_t k = 0; k < dims(); ++k) z[k] = variables_[k].map.from_physical(x[k]);
        return z;
    }

    std::vector<double> to_physical(std::span<const double> zeta) const {
        std::vector<double> x(dims());
        for (std::size_t k = 0; k < dims(); ++k) x[k] = variables_[k].map.to_physical(zeta[k]);
        return x;
    }

private:
    std::vector<InputVariable> variables_;
    int degree_;
    std::vector<MultiIndex> indices_;
    std::vector<double> norms_;
    std::vector<std::uint64_t> masks_;
    std::map<MultiIndex, std::size_t> position_;
};

/// Product of univariate polynomials, Phi_alpha(zeta).
inline double eval_multivariate(const PceBasis& basis, const MultiIndex& alpha, std::span<const double> zeta) {
    double v = 1.0;
    for (std::size_t k = 0; k < basis.dims(); ++k) v *= eval_univariate(basis.family(k), alpha[k], zeta[k]);
    return v;
}

}  // namespace pcshap
