#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mml/engine.hpp"
#include "mml/nets.hpp"
#include "mml/rng.hpp"

namespace mml::pm {

struct PatternSet {
    std::vector<std::vector<double>> patterns;
    std::vector<double> weights;  // sums to 1; filled uniformly when empty

    std::size_t dim() const { return patterns.empty() ? 0 : patterns[0].size(); }
    std::size_t size() const { return patterns.size(); }
    void validate() const;

    static PatternSet uniform(std::vector<std::vector<double>> patterns);

    // eight equiprobable scalar patterns at 1/16, 3/16, ..., 15/16
    static PatternSet eight_level_scalar();
};

struct PMOptions {
    std::size_t code_units = 3;
    std::size_t encoder_hidden = 16;
    std::size_t predictor_hidden = 8;
    // optional explicit variance reward for the encoder; the minimax objective
    // already induces variance maximization, so this stays off by default
    double variance_bonus = 0.0;
};

// Encoder (n -> m, sigmoid outputs) against a bank of m predictors, each
// reading the other m-1 code units. Predictor i never sees y_i: the exclusion
// is structural, each predictor net simply has no input wired to it.
struct PMSystem {
    PMOptions options;
    nets::NetworkSpec encoder_spec;
    nets::ParameterSet encoder;
    std::vector<nets::NetworkSpec> predictor_specs;
    std::vector<nets::ParameterSet> predictors;
    std::optional<nets::NetworkSpec> decoder_spec;
    std::optional<nets::ParameterSet> decoder;

    std::size_t code_units() const { return options.code_units; }
    std::size_t input_dim() const { return encoder_spec.input_dim(); }

    static PMSystem create(std::size_t input_dim, const PMOptions& options,
                           std::uint64_t seed);
};

struct CodeVector {
    std::vector<double> y;            // code unit activations, in [0,1]
    std::vector<double> predictions;  // p_i = predictor_i output
};

CodeVector evaluate(const PMSystem& system, std::span<const double> pattern);

// Shared minimax objective: mean over patterns and units of (y_i - p_i)^2.
// Predictors descend it, the encoder ascends it.
double pm_objective(const PMSystem& system, const PatternSet& data);

// Alternating minimax training; predictors are the minimizer block, the
// encoder the maximizer block. Full-batch gradients over the pattern set.
engine::GameTrace pm_train(PMSystem& system, const PatternSet& data,
                           engine::GameConfig game, std::uint64_t steps,
                           std::uint64_t seed);

// Gradient norms of the two blocks at the current parameters.
std::pair<double, double> pm_equilibrium_residual(const PMSystem& system,
                                                  const PatternSet& data);

// Defaults that drive the eight-pattern problem to a factorial code.
engine::GameConfig pm_default_game();

struct CodeStatistics {
    double binarity = 0.0;                        // mean |y - round(y)|
    std::vector<double> marginals;                // mean y_i
    std::vector<std::vector<double>> pairwise_cov;  // over rounded codes
    double total_correlation = 0.0;               // nats, over rounded codewords
    std::size_t distinct_codewords = 0;
    std::vector<double> unit_variance;            // variance of continuous y_i
    std::vector<double> mean_predictions;         // mean p_i
};

CodeStatistics code_statistics(const PMSystem& system, const PatternSet& data);
void write_json(std::ostream& os, const CodeStatistics& stats);

struct FactorialThresholds {
    double binarity = 0.05;
    double marginal_low = 0.45;
    double marginal_high = 0.55;
    double total_correlation = 0.05;  // nats
};

bool factorial_certified(const CodeStatistics& stats, std::size_t expected_codewords,
                         const FactorialThresholds& thresholds = {});

struct UnconditionalProbability {
    double value;
    bool warning;  // set when preconditions were bypassed via force
};

// Mean predictor activation over the data; for a binary factorial code this
// equals P(y_i = 1). Throws NotFactorialError unless the code is certified
// binary and independent, or force is set.
UnconditionalProbability unconditional_probability(const PMSystem& system,
                                                   std::size_t unit,
                                                   const PatternSet& data,
                                                   bool force = false,
                                                   const FactorialThresholds& thresholds = {});

struct DecoderOptions {
    std::size_t hidden = 16;
    double learning_rate = 0.5;
};

// Plain (non-adversarial) gradient descent on the reconstruction error with
// the encoder frozen. Returns the final mean squared reconstruction error.
double train_decoder(PMSystem& system, const PatternSet& data, std::uint64_t steps,
                     std::uint64_t seed, const DecoderOptions& options = {});

double reconstruction_error(const PMSystem& system, const PatternSet& data);

// Draws each code bit independently from its unconditional probability (read
// off the predictors over `data`) and decodes. StateError without a decoder;
// factorial preconditions as in unconditional_probability.
std::vector<std::vector<double>> sample_generative(const PMSystem& system,
                                                   const PatternSet& data,
                                                   std::size_t count, Rng& rng,
                                                   bool force = false);

}  // namespace mml::pm
