#include "mml/stats.hpp"

#include <cmath>
#include <map>

#include "mml/errors.hpp"

namespace mml::stats {

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("tv_distance: support size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("kl_divergence: support size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] <= 0.0) throw DomainError("kl_divergence: q vanishes where p does not", i);
        s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

double binary_entropy(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
    return h;
}

double total_correlation(const std::vector<std::vector<int>>& codewords,
                         std::span<const double> weights) {
    if (codewords.empty()) return 0.0;
    if (codewords.size() != weights.size())
        throw ShapeError("total_correlation: one weight per codeword");
    const std::size_t m = codewords[0].size();

    std::vector<double> marginal(m, 0.0);
    std::map<std::vector<int>, double> joint;
    for (std::size_t k = 0; k < codewords.size(); ++k) {
        if (codewords[k].size() != m)
            throw ShapeError("total_correlation: ragged codewords");
        joint[codewords[k]] += weights[k];
        for (std::size_t i = 0; i < m; ++i)
            if (codewords[k][i] != 0) marginal[i] += weights[k];
    }

    double sum_marginal_entropy = 0.0;
    for (double p : marginal) sum_marginal_entropy += binary_entropy(p);

    double joint_entropy = 0.0;
    for (const auto& [code, p] : joint)
        if (p > 0.0) joint_entropy -= p * std::log(p);

    return sum_marginal_entropy - joint_entropy;
}

}  // namespace mml::stats
