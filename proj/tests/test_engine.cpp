#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mml/engine.hpp"

using namespace mml;
using namespace mml::engine;

namespace {

// f(a, b) = a^2 - b^2: strongly convex-concave, unique saddle at the origin
ad::NodeId quad_saddle(ad::Tape& t, std::span<const ad::NodeId> a,
                       std::span<const ad::NodeId> b, StepContext&) {
    return t.sub(t.mul(a[0], a[0]), t.mul(b[0], b[0]));
}

// f(a, b) = a*b: bilinear, simultaneous GDA provably spirals outward
ad::NodeId bilinear(ad::Tape& t, std::span<const ad::NodeId> a,
                    std::span<const ad::NodeId> b, StepContext&) {
    return t.mul(a[0], b[0]);
}

// f(a, b) = a^2 - b^2 + a*b/2
ad::NodeId quad_coupled(ad::Tape& t, std::span<const ad::NodeId> a,
                        std::span<const ad::NodeId> b, StepContext&) {
    const ad::NodeId f = t.sub(t.mul(a[0], a[0]), t.mul(b[0], b[0]));
    return t.add(f, t.mul(t.constant(0.5), t.mul(a[0], b[0])));
}

double norm2(double x, double y) { return std::sqrt(x * x + y * y); }

}  // namespace

TEST_CASE("simultaneous GDA on a^2 - b^2 converges to the saddle") {
    GameConfig game;
    game.schedule = Schedule::Simultaneous;
    game.minimizer.lr.base = 0.1;
    game.maximizer.lr.base = 0.1;
    game.max_steps = 200;
    const auto res = play(game, quad_saddle, {1.0}, {1.0}, 0);
    CHECK(norm2(res.a[0], res.b[0]) < 1e-4);
}

TEST_CASE("bilinear game under equal-rate simultaneous GDA diverges monotonically") {
    GameConfig game;
    game.schedule = Schedule::Simultaneous;
    game.minimizer.lr.base = 0.1;
    game.maximizer.lr.base = 0.1;
    game.max_steps = 50;
    game.snapshot_every = 1;
    const auto res = play(game, bilinear, {1.0}, {0.0}, 0);

    // closed form: the GDA map scales the norm by sqrt(1 + lr^2) per step
    const double factor = std::sqrt(1.0 + 0.01);
    REQUIRE(res.trace.snapshots.size() == 50);
    double prev = norm2(1.0, 0.0);
    for (std::size_t i = 1; i < res.trace.snapshots.size(); ++i) {
        const auto& s = res.trace.snapshots[i];
        const double n = norm2(s.a[0], s.b[0]);
        CHECK(n > prev);  // strictly increasing every step
        CHECK(n == doctest::Approx(prev * factor).epsilon(1e-12));
        prev = n;
    }
    const double final_norm = norm2(res.a[0], res.b[0]);
    CHECK(final_norm == doctest::Approx(std::pow(factor, 50)).epsilon(1e-9));
}

TEST_CASE("two-timescale schedule settles the coupled quadratic game") {
    GameConfig game;
    game.schedule = Schedule::Simultaneous;
    game.minimizer.lr.base = 0.01;
    game.maximizer.lr.base = 0.1;
    game.max_steps = 10000;
    const auto res = play(game, quad_coupled, {1.0}, {1.0}, 0);
    CHECK(norm2(res.a[0], res.b[0]) < 1e-3);
}

TEST_CASE("equilibrium_residual reports gradient norms") {
    const auto at_origin = equilibrium_residual(quad_saddle, std::vector<double>{0.0},
                                                std::vector<double>{0.0});
    CHECK(at_origin.first == 0.0);
    CHECK(at_origin.second == 0.0);

    const auto off = equilibrium_residual(quad_saddle, std::vector<double>{1.0},
                                          std::vector<double>{0.0});
    CHECK(off.first == 2.0);
    CHECK(off.second == 0.0);
}

TEST_CASE("zero-sum bookkeeping: payoffs negate exactly on every row") {
    GameConfig game;
    game.minimizer.lr.base = 0.05;
    game.maximizer.lr.base = 0.05;
    game.max_steps = 25;
    const auto res = play(game, quad_coupled, {0.4}, {-0.7}, 0);
    REQUIRE(!res.trace.rows.empty());
    for (const auto& row : res.trace.rows)
        CHECK(row.payoff_minimizer() + row.payoff_maximizer() == 0.0);
}

TEST_CASE("a maximizer step on a locally linear objective never decreases it") {
    // f = a*b with a frozen at 2: linear in b, slope 2
    GameConfig game;
    game.schedule = Schedule::Alternating;
    game.k_min = 1;
    game.k_max = 1;
    game.minimizer.lr.base = 1e-12;  // minimizer effectively frozen
    game.maximizer.lr.base = 0.1;
    game.max_steps = 20;
    const auto res = play(game, bilinear, {2.0}, {0.0}, 0);
    // objective rows alternate min/max steps; collect the objective before
    // and after each maximizer step
    double prev_obj = -1e300;
    bool increased = true;
    for (std::size_t i = 1; i < res.trace.rows.size(); i += 2) {
        // row i is the maximizer's evaluation point
        if (res.trace.rows[i].objective < prev_obj) increased = false;
        prev_obj = res.trace.rows[i].objective;
    }
    CHECK(increased);
    CHECK(res.b[0] > 0.0);
}

TEST_CASE("alternating(1,1) with maximizer rate ~0 matches plain gradient descent") {
    // pure descent reference on f(a) = a^2 - 0.25 (b frozen at 0.5)
    const double lr = 0.07;
    double ref = 1.3;
    for (int i = 0; i < 40; ++i) ref -= lr * 2.0 * ref;

    GameConfig game;
    game.schedule = Schedule::Alternating;
    game.minimizer.lr.base = lr;
    game.maximizer.lr.base = 0.0;  // frozen maximizer
    game.max_steps = 40;
    const auto res = play(game, quad_saddle, {1.3}, {0.5}, 0);
    CHECK(res.a[0] == ref);  // bitwise
}

TEST_CASE("divergence raises an error carrying the partial trace") {
    // maximizer on f = b^2 explodes; b doubles each step under lr 0.6
    const Objective obj = [](ad::Tape& t, std::span<const ad::NodeId>,
                             std::span<const ad::NodeId> b, StepContext&) {
        return t.mul(b[0], b[0]);
    };
    GameConfig game;
    game.schedule = Schedule::Alternating;
    game.minimizer.lr.base = 0.01;
    game.maximizer.lr.base = 0.6;
    game.max_steps = 100000;
    game.divergence_threshold = 1e12;
    bool caught = false;
    try {
        play(game, obj, {0.0}, {1.0}, 0);
    } catch (const DivergedError& e) {
        caught = true;
        CHECK(!e.trace.rows.empty());
    }
    CHECK(caught);
}

TEST_CASE("learning-rate schedules decay as 1/t") {
    LearningRate lr{0.5, 0.1};
    CHECK(lr.at(0) == 0.5);
    CHECK(lr.at(10) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("trace CSV has the documented header and one row per player step") {
    GameConfig game;
    game.minimizer.lr.base = 0.1;
    game.maximizer.lr.base = 0.1;
    game.max_steps = 3;
    const auto res = play(game, quad_saddle, {1.0}, {1.0}, 0);
    std::stringstream ss;
    res.trace.write_csv(ss);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "step,objective,grad_norm_min,grad_norm_max");
    std::size_t rows = 0;
    while (std::getline(ss, line)) ++rows;
    CHECK(rows == 6);  // alternating(1,1): two player steps per round
}

TEST_CASE("alternating counts must be at least one") {
    GameConfig game;
    game.k_min = 0;
    CHECK_THROWS_AS(play(game, quad_saddle, {1.0}, {1.0}, 0), ConfigError);
}
