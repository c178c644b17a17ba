#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "eoslab/common.hpp"
#include "eoslab/model.hpp"

namespace eoslab::dynamics {

struct RunConfig {
    double eta = 0.0;       // GD learning rate
    double h = 0.0;         // GF integration step; <= 0 selects 1/(10*S(theta0))
    double loss_goal = 1e-8;
    long max_steps = 100000;
    long record_every = 10;
    double divergence_factor = 1e3;
    std::uint64_t seed = 0;  // sharpness power-iteration starts
    bool record_theta = false;  // capture the iterate at the recording cadence
};

enum class RunOutcome { Converged, Diverged, MaxSteps };

std::string to_string(RunOutcome o);

struct TrajectoryEntry {
    double step_or_time = 0.0;
    double loss = 0.0;
    double sharpness = 0.0;  // NaN when the model has no Hessian action
    double l1 = 0.0, l2 = 0.0, nuclear = 0.0;
};

struct TrajectoryRecord {
    std::vector<TrajectoryEntry> entries;
    // iterates at the entry cadence, only when RunConfig::record_theta is set
    std::vector<std::pair<double, ParamVector>> theta_path;
    // key k holds the first iterate whose loss dropped below 10^-k
    std::map<int, ParamVector> checkpoints;
    RunOutcome outcome = RunOutcome::MaxSteps;

    ParamVector final_theta;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_sharpness = 0.0;
    long steps = 0;          // iterations taken (GD) or RK4 steps (GF)
    bool time_indexed = false;
    double final_time = 0.0;                                      // GF
    double t_eps = std::numeric_limits<double>::quiet_NaN();      // GF first crossing
    double used_h = 0.0;                                          // GF actual initial step

    // per-step series, kept for the descent diagnostic (GD only)
    std::vector<double> step_losses;
    std::vector<double> step_grad_norms;

    // step-doubling certification (GF only, filled by gf_run_certified)
    bool certified = false;
    double step_doubling_rel_err = std::numeric_limits<double>::quiet_NaN();
};

// Full-batch gradient descent theta <- theta - eta * grad. Stops at
// loss <= loss_goal (Converged), loss >= divergence_factor * initial or
// non-finite (Diverged), or max_steps (MaxSteps). Metrics are recorded every
// record_every steps and at the final iterate.
TrajectoryRecord gd_run(const TrainModel& model, const ParamVector& theta0,
                        const RunConfig& cfg);

// Classical fixed-step RK4 on theta' = -grad L. Same stopping and checkpoint
// rules, time-indexed entries. A step that increases the loss is retried with
// half the step size.
TrajectoryRecord gf_run(const TrainModel& model, const ParamVector& theta0,
                        const RunConfig& cfg);

// Runs gf_run, then re-integrates at half step until the final losses of the
// h and h/2 runs agree to rel_tol; returns the finest run with the
// certification fields set. At most max_refinements halvings.
TrajectoryRecord gf_run_certified(const TrainModel& model, const ParamVector& theta0,
                                  const RunConfig& cfg, double rel_tol = 1e-6,
                                  int max_refinements = 12);

// Max recorded sharpness over entries up to the first recorded crossing of
// eps. Throws when the record never reaches eps.
double s_gf(const TrajectoryRecord& record, double eps);

// Count of steps violating the descent guarantee
// L(k+1) <= L(k) - eta*(1 - smoothness*eta/2)*||grad L(k)||^2.
long descent_diagnostic(const TrajectoryRecord& record, double eta,
                        double smoothness_estimate);

}  // namespace eoslab::dynamics
