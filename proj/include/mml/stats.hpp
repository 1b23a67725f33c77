#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mml::stats {

// entropy in nats of a discrete distribution (zero-probability terms drop out)
double entropy(std::span<const double> probs);

// total variation distance between two distributions over the same support
double tv_distance(std::span<const double> p, std::span<const double> q);

// KL(p || q) in nats; requires q > 0 wherever p > 0
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Sum_i H(Y_i) - H(Y) in nats over binary codewords with the given pattern
// weights; zero exactly when the components are independent.
double total_correlation(const std::vector<std::vector<int>>& codewords,
                         std::span<const double> weights);

double binary_entropy(double p);

}  // namespace mml::stats
