#include "mml/engine.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mml::engine {

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

bool finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

struct Evaluation {
    double objective;
    std::vector<double> grad_a;
    std::vector<double> grad_b;
};

Evaluation evaluate(const Objective& objective, std::span<const double> a,
                    std::span<const double> b, StepContext& ctx) {
    ad::Tape tape;
    std::vector<ad::NodeId> ida, idb;
    ida.reserve(a.size());
    idb.reserve(b.size());
    for (double v : a) ida.push_back(tape.leaf(v));
    for (double v : b) idb.push_back(tape.leaf(v));
    const ad::NodeId out = objective(tape, ida, idb, ctx);
    tape.backward(out);
    Evaluation ev;
    ev.objective = tape.value(out);
    ev.grad_a.reserve(a.size());
    ev.grad_b.reserve(b.size());
    for (ad::NodeId id : ida) ev.grad_a.push_back(tape.grad(id));
    for (ad::NodeId id : idb) ev.grad_b.push_back(tape.grad(id));
    return ev;
}

}  // namespace

void GameTrace::write_csv(std::ostream& os) const {
    os << "step,objective,grad_norm_min,grad_norm_max\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(r.step), r.objective, r.grad_norm_min,
                      r.grad_norm_max);
        os << buf;
    }
}

bool GameTrace::operator==(const GameTrace& other) const {
    if (rows.size() != other.rows.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& x = rows[i];
        const auto& y = other.rows[i];
        if (x.step != y.step || x.objective != y.objective ||
            x.grad_norm_min != y.grad_norm_min || x.grad_norm_max != y.grad_norm_max)
            return false;
    }
    return true;
}

PlayResult play(const GameConfig& game, const Objective& objective,
                std::vector<double> init_a, std::vector<double> init_b, std::uint64_t seed,
                const Objective* maximizer_objective) {
    if (game.k_min < 1 || game.k_max < 1)
        throw ConfigError("play: alternating counts must be >= 1");

    PlayResult res;
    res.a = std::move(init_a);
    res.b = std::move(init_b);
    GameTrace& trace = res.trace;

    Rng rng(seed);
    ad::Optimizer opt_min(game.minimizer.optimizer, game.minimizer.lr.base,
                          game.minimizer.momentum);
    ad::Optimizer opt_max(game.maximizer.optimizer, game.maximizer.lr.base,
                          game.maximizer.momentum);

    std::uint64_t player_step = 0;
    std::vector<double> neg;

    const auto check = [&](const Evaluation& ev) {
        if (!std::isfinite(ev.objective) || std::abs(ev.objective) > game.divergence_threshold ||
            !finite(ev.grad_a) || !finite(ev.grad_b))
            throw DivergedError("play: objective or gradient diverged at step " +
                                    std::to_string(player_step),
                                trace);
    };

    const auto record = [&](const Evaluation& ev) {
        trace.rows.push_back({player_step, ev.objective, norm(ev.grad_a), norm(ev.grad_b)});
    };

    const auto snapshot = [&](std::uint64_t round) {
        if (game.snapshot_every != 0 && round % game.snapshot_every == 0)
            trace.snapshots.push_back({player_step, res.a, res.b});
    };

    for (std::uint64_t round = 0; round < game.max_steps; ++round) {
        snapshot(round);
        const std::vector<double> prev_a = res.a;
        const std::vector<double> prev_b = res.b;

        if (game.schedule == Schedule::Simultaneous) {
            StepContext ctx{round, player_step, rng};
            const Evaluation ev = evaluate(objective, res.a, res.b, ctx);
            record(ev);
            check(ev);
            opt_min.set_learning_rate(game.minimizer.lr.at(round));
            opt_min.step(res.a, ev.grad_a);
            neg.assign(ev.grad_b.size(), 0.0);
            for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -ev.grad_b[i];
            opt_max.set_learning_rate(game.maximizer.lr.at(round));
            opt_max.step(res.b, neg);
            ++player_step;
        } else {
            for (int i = 0; i < game.k_min; ++i) {
                StepContext ctx{round, player_step, rng};
                const Evaluation ev = evaluate(objective, res.a, res.b, ctx);
                record(ev);
                check(ev);
                opt_min.set_learning_rate(game.minimizer.lr.at(round));
                opt_min.step(res.a, ev.grad_a);
                ++player_step;
            }
            for (int i = 0; i < game.k_max; ++i) {
                StepContext ctx{round, player_step, rng};
                const Objective& obj =
                    maximizer_objective != nullptr ? *maximizer_objective : objective;
                const Evaluation ev = evaluate(obj, res.a, res.b, ctx);
                record(ev);
                check(ev);
                neg.assign(ev.grad_b.size(), 0.0);
                for (std::size_t k = 0; k < neg.size(); ++k) neg[k] = -ev.grad_b[k];
                opt_max.set_learning_rate(game.maximizer.lr.at(round));
                opt_max.step(res.b, neg);
                ++player_step;
            }
        }

        if (game.stop_tolerance > 0.0) {
            double moved = 0.0;
            for (std::size_t i = 0; i < res.a.size(); ++i)
                moved += (res.a[i] - prev_a[i]) * (res.a[i] - prev_a[i]);
            for (std::size_t i = 0; i < res.b.size(); ++i)
                moved += (res.b[i] - prev_b[i]) * (res.b[i] - prev_b[i]);
            if (std::sqrt(moved) < game.stop_tolerance) break;
        }
    }
    return res;
}

std::pair<double, double> equilibrium_residual(const Objective& objective,
                                               std::span<const double> a,
                                               std::span<const double> b, std::uint64_t seed) {
    Rng rng(seed);
    StepContext ctx{0, 0, rng};
    const Evaluation ev = evaluate(objective, a, b, ctx);
    return {norm(ev.grad_a), norm(ev.grad_b)};
}

}  // namespace mml::engine
