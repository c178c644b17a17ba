#include "eoslab/dynamics.hpp"

#include <cmath>

namespace eoslab::dynamics {

std::string to_string(RunOutcome o) {
    switch (o) {
        case RunOutcome::Converged: return "converged";
        case RunOutcome::Diverged: return "diverged";
        default: return "max_steps";
    }
}

namespace {

void validate_common(const RunConfig& cfg) {
    if (cfg.loss_goal <= 0.0) throw InvalidArgument("run config: loss_goal must be > 0");
    if (cfg.max_steps < 1) throw InvalidArgument("run config: max_steps must be >= 1");
    if (cfg.record_every < 1) throw InvalidArgument("run config: record_every must be >= 1");
    if (cfg.divergence_factor <= 1.0)
        throw InvalidArgument("run config: divergence_factor must be > 1");
}

// smallest E with 10^-E <= goal, capped; thresholds run 10^-1 .. 10^-E
int goal_exponent(double goal) {
    int e = 1;
    while (e < 300 && std::pow(10.0, -e) > goal * (1.0 + 1e-12)) ++e;
    return e;
}

struct Instrument {
    const TrainModel& model;
    std::uint64_t seed;
    std::vector<double> warm;

    double sharpness_at(std::span<const double> theta) {
        if (!model.has_hessian()) return std::numeric_limits<double>::quiet_NaN();
        try {
            auto est = model_sharpness(model, theta, seed, warm);
            warm = est.vector;
            return est.value;
        } catch (const Error&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    }

    TrajectoryEntry entry_at(double step_or_time, double loss,
                             std::span<const double> theta) {
        TrajectoryEntry e;
        e.step_or_time = step_or_time;
        e.loss = loss;
        e.sharpness = sharpness_at(theta);
        try {
            const auto n = model.norms(theta);
            e.l1 = n.l1;
            e.l2 = n.l2;
            e.nuclear = n.nuclear;
        } catch (const Error&) {
            e.l1 = e.l2 = e.nuclear = std::numeric_limits<double>::quiet_NaN();
        }
        return e;
    }
};

void take_checkpoints(TrajectoryRecord& rec, int max_exp, double loss,
                      const ParamVector& theta) {
    for (int e = 1; e <= max_exp; ++e) {
        if (loss < std::pow(10.0, -e) && !rec.checkpoints.count(e))
            rec.checkpoints.emplace(e, theta);
    }
}

}  // namespace

TrajectoryRecord gd_run(const TrainModel& model, const ParamVector& theta0,
                        const RunConfig& cfg) {
    validate_common(cfg);
    if (cfg.eta <= 0.0) throw InvalidArgument("gd_run: eta must be > 0");
    if (theta0.size() != model.dim()) throw DimensionMismatch("gd_run: theta0 dim mismatch");
    if (!all_finite(theta0)) throw InvalidArgument("gd_run: non-finite theta0");

    const int max_exp = goal_exponent(cfg.loss_goal);
    TrajectoryRecord rec;
    Instrument inst{model, cfg.seed, {}};

    ParamVector theta = theta0;
    ParamVector grad(theta.size());
    double diverge_at = std::numeric_limits<double>::infinity();

    for (long k = 0;; ++k) {
        double loss;
        bool overflow = false;
        try {
            loss = model.loss_and_grad(theta, grad);
        } catch (const NumericalOverflow&) {
            loss = std::numeric_limits<double>::infinity();
            overflow = true;
        }
        if (k == 0) {
            rec.initial_loss = loss;
            diverge_at = cfg.divergence_factor * loss;
        }
        rec.step_losses.push_back(loss);
        rec.step_grad_norms.push_back(overflow ? std::numeric_limits<double>::infinity()
                                               : norm2(grad));
        if (std::isfinite(loss)) take_checkpoints(rec, max_exp, loss, theta);

        const bool converged = std::isfinite(loss) && loss <= cfg.loss_goal;
        const bool diverged = !std::isfinite(loss) || loss >= diverge_at;
        const bool maxed = !converged && !diverged && k == cfg.max_steps;
        const bool terminal = converged || diverged || maxed;

        if (terminal || k % cfg.record_every == 0) {
            rec.entries.push_back(inst.entry_at(static_cast<double>(k), loss, theta));
            if (cfg.record_theta) rec.theta_path.emplace_back(static_cast<double>(k), theta);
        }

        if (terminal) {
            rec.outcome = converged ? RunOutcome::Converged
                                    : (diverged ? RunOutcome::Diverged : RunOutcome::MaxSteps);
            rec.final_theta = theta;
            rec.final_loss = loss;
            rec.final_sharpness = rec.entries.back().sharpness;
            rec.steps = k;
            return rec;
        }
        axpy(-cfg.eta, grad, theta);
    }
}

namespace {

// one classical RK4 step of theta' = -grad L; g1 is the gradient at theta
bool rk4_step(const TrainModel& model, const ParamVector& theta, const ParamVector& g1,
              double h, ParamVector& out) {
    const std::size_t d = theta.size();
    ParamVector stage(d), g(d);
    ParamVector sum = g1;  // k1 + 2k2 + 2k3 + k4 accumulated with signs folded in

    try {
        // k2
        stage = theta;
        axpy(-0.5 * h, g1, stage);
        model.loss_and_grad(stage, g);
        axpy(2.0, g, sum);
        // k3
        stage = theta;
        axpy(-0.5 * h, g, stage);
        model.loss_and_grad(stage, g);
        axpy(2.0, g, sum);
        // k4
        stage = theta;
        axpy(-h, g, stage);
        model.loss_and_grad(stage, g);
        axpy(1.0, g, sum);
    } catch (const NumericalOverflow&) {
        return false;
    }
    out = theta;
    axpy(-h / 6.0, sum, out);
    return all_finite(out);
}

}  // namespace

TrajectoryRecord gf_run(const TrainModel& model, const ParamVector& theta0,
                        const RunConfig& cfg) {
    validate_common(cfg);
    if (theta0.size() != model.dim()) throw DimensionMismatch("gf_run: theta0 dim mismatch");
    if (!all_finite(theta0)) throw InvalidArgument("gf_run: non-finite theta0");

    const int max_exp = goal_exponent(cfg.loss_goal);
    TrajectoryRecord rec;
    rec.time_indexed = true;
    Instrument inst{model, cfg.seed, {}};

    double h = cfg.h;
    if (h <= 0.0) {
        const double s0 = model_sharpness(model, theta0, cfg.seed).value;
        if (!std::isfinite(s0) || s0 <= 0.0)
            throw InvalidArgument("gf_run: default step needs a positive initial sharpness; pass h");
        h = 1.0 / (10.0 * s0);
    }
    rec.used_h = h;
    const double h_floor = h * 0x1.0p-48;

    ParamVector theta = theta0;
    ParamVector grad(theta.size()), candidate(theta.size());
    double t = 0.0;
    double diverge_at = std::numeric_limits<double>::infinity();

    for (long k = 0;; ++k) {
        double loss;
        try {
            loss = model.loss_and_grad(theta, grad);
        } catch (const NumericalOverflow&) {
            loss = std::numeric_limits<double>::infinity();
        }
        if (k == 0) {
            rec.initial_loss = loss;
            diverge_at = cfg.divergence_factor * loss;
        }
        if (std::isfinite(loss)) take_checkpoints(rec, max_exp, loss, theta);

        const bool converged = std::isfinite(loss) && loss <= cfg.loss_goal;
        if (converged && std::isnan(rec.t_eps)) rec.t_eps = t;
        const bool diverged = !std::isfinite(loss) || loss >= diverge_at;
        const bool maxed = !converged && !diverged && k == cfg.max_steps;
        const bool terminal = converged || diverged || maxed;

        if (terminal || k % cfg.record_every == 0) {
            rec.entries.push_back(inst.entry_at(t, loss, theta));
            if (cfg.record_theta) rec.theta_path.emplace_back(t, theta);
        }

        if (terminal) {
            rec.outcome = converged ? RunOutcome::Converged
                                    : (diverged ? RunOutcome::Diverged : RunOutcome::MaxSteps);
            rec.final_theta = theta;
            rec.final_loss = loss;
            rec.final_sharpness = rec.entries.back().sharpness;
            rec.steps = k;
            rec.final_time = t;
            return rec;
        }
        // retry with halved step while the integrator overshoots uphill
        while (true) {
            const bool ok = rk4_step(model, theta, grad, h, candidate);
            double cand_loss = std::numeric_limits<double>::infinity();
            if (ok) {
                try {
                    cand_loss = model.loss(candidate);
                } catch (const NumericalOverflow&) {
                }
            }
            if (cand_loss <= loss || h <= h_floor) {
                theta = candidate;
                t += h;
                break;
            }
            h *= 0.5;
        }
    }
}

namespace {

// fixed-step integration to an exact final time, no stopping rules; returns
// the final loss (inf on overflow)
double integrate_fixed(const TrainModel& model, const ParamVector& theta0, double h,
                       long n_steps) {
    ParamVector theta = theta0;
    ParamVector grad(theta.size()), next(theta.size());
    for (long k = 0; k < n_steps; ++k) {
        try {
            model.loss_and_grad(theta, grad);
        } catch (const NumericalOverflow&) {
            return std::numeric_limits<double>::infinity();
        }
        if (!rk4_step(model, theta, grad, h, next))
            return std::numeric_limits<double>::infinity();
        theta = next;
    }
    try {
        return model.loss(theta);
    } catch (const NumericalOverflow&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

TrajectoryRecord gf_run_certified(const TrainModel& model, const ParamVector& theta0,
                                  const RunConfig& cfg, double rel_tol,
                                  int max_refinements) {
    RunConfig local = cfg;
    TrajectoryRecord rec;
    for (int attempt = 0;; ++attempt) {
        rec = gf_run(model, theta0, local);
        if (rec.outcome != RunOutcome::Converged || rec.steps == 0) return rec;

        // convergence-order check at a shared final time
        const double T = rec.final_time;
        const long n = rec.steps;
        const double lc = integrate_fixed(model, theta0, T / static_cast<double>(n), n);
        const double lf =
            integrate_fixed(model, theta0, T / static_cast<double>(2 * n), 2 * n);
        rec.step_doubling_rel_err =
            std::abs(lc - lf) / std::max(std::abs(lf), 1e-300);
        if (rec.step_doubling_rel_err < rel_tol) {
            rec.certified = true;
            return rec;
        }
        if (attempt >= max_refinements) return rec;
        local.h = rec.used_h * 0.5;
        if (local.max_steps < (1L << 40)) local.max_steps *= 2;
    }
}

double s_gf(const TrajectoryRecord& record, double eps) {
    if (record.entries.empty()) throw InvalidArgument("s_gf: empty record");
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const auto& e : record.entries) {
        if (std::isnan(best) || e.sharpness > best) best = e.sharpness;
        if (e.loss <= eps) return best;
    }
    throw Error("s_gf: loss goal never reached by the record");
}

long descent_diagnostic(const TrajectoryRecord& record, double eta,
                        double smoothness_estimate) {
    const auto& L = record.step_losses;
    const auto& G = record.step_grad_norms;
    long violations = 0;
    for (std::size_t k = 0; k + 1 < L.size() && k < G.size(); ++k) {
        const double allowed =
            L[k] - eta * (1.0 - smoothness_estimate * eta / 2.0) * G[k] * G[k];
        if (L[k + 1] > allowed) ++violations;
    }
    return violations;
}

}  // namespace eoslab::dynamics
