#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mml/autodiff.hpp"
#include "mml/errors.hpp"
#include "mml/rng.hpp"

namespace mml::engine {

// Constant rate or 1/t decay: lr(t) = base / (1 + decay * t).
struct LearningRate {
    double base = 0.1;
    double decay = 0.0;
    double at(std::uint64_t t) const { return base / (1.0 + decay * static_cast<double>(t)); }
};

struct PlayerConfig {
    LearningRate lr;
    ad::OptimizerKind optimizer = ad::OptimizerKind::Sgd;
    double momentum = 0.0;
};

enum class Schedule { Simultaneous, Alternating };

// Two players share one scalar objective: the minimizer descends it, the
// maximizer ascends it. Alternating(k_min, k_max) freezes one block while the
// other takes its steps; max_steps counts rounds (one joint update, or one
// full alternating cycle).
struct GameConfig {
    Schedule schedule = Schedule::Alternating;
    int k_min = 1;
    int k_max = 1;
    PlayerConfig minimizer;
    PlayerConfig maximizer;
    std::uint64_t max_steps = 1000;
    double stop_tolerance = 0.0;  // on per-round parameter movement; 0 disables
    std::uint64_t snapshot_every = 0;
    double divergence_threshold = 1e12;
};

struct TraceRow {
    std::uint64_t step;  // player-step index
    double objective;
    double grad_norm_min;
    double grad_norm_max;

    // zero-sum bookkeeping: the two payoffs negate each other exactly
    double payoff_minimizer() const { return -objective; }
    double payoff_maximizer() const { return objective; }
};

struct Snapshot {
    std::uint64_t step;
    std::vector<double> a;
    std::vector<double> b;
};

struct GameTrace {
    std::vector<TraceRow> rows;
    std::vector<Snapshot> snapshots;

    // header: step,objective,grad_norm_min,grad_norm_max
    void write_csv(std::ostream& os) const;

    bool operator==(const GameTrace& other) const;
};

struct DivergedError : Error {
    DivergedError(const std::string& what, GameTrace partial)
        : Error(what), trace(std::move(partial)) {}
    GameTrace trace;
};

struct StepContext {
    std::uint64_t round;
    std::uint64_t player_step;
    Rng& rng;
};

// Builds the shared objective on the tape from the two parameter blocks.
// All minibatch and noise draws happen inside the builder via ctx.rng, so the
// engine itself consumes no randomness.
using Objective = std::function<ad::NodeId(
    ad::Tape&, std::span<const ad::NodeId> a, std::span<const ad::NodeId> b, StepContext&)>;

struct PlayResult {
    std::vector<double> a;
    std::vector<double> b;
    GameTrace trace;
};

// maximizer_objective, when given, replaces the shared objective on maximizer
// steps (used by the non-saturating GAN heuristic; breaks the zero-sum
// bookkeeping and is excluded from the invariant suites).
PlayResult play(const GameConfig& game, const Objective& objective,
                std::vector<double> init_a, std::vector<double> init_b, std::uint64_t seed,
                const Objective* maximizer_objective = nullptr);

// Gradient norms (‖∇_a f‖, ‖∇_b f‖) at a point; both small at a candidate
// equilibrium.
std::pair<double, double> equilibrium_residual(const Objective& objective,
                                               std::span<const double> a,
                                               std::span<const double> b,
                                               std::uint64_t seed = 0);

}  // namespace mml::engine
