#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "eoslab/common.hpp"
#include "eoslab/dynamics.hpp"
#include "eoslab/model.hpp"

namespace eoslab::sweep {

// Learning-rate grids around the stability threshold 2/s_gf. The fine grid
// is the 12 rates k/(2*s_gf); the coarse grid holds 9 uniform rates on
// [6/s_gf, 2/s0] and is empty when that interval is (2/s0 <= 6/s_gf).
// run_sweep extends past the top of the grid until a run diverges.
struct Schedule {
    std::vector<double> fine;
    std::vector<double> coarse;
    double s0 = 0.0;
    double s_gf = 0.0;
};

Schedule build_schedule(double s0, double s_gf);

enum class Regime { FlowAligned, EoS, Diverged, Unclassified };

std::string to_string(Regime r);

struct SweepRecord {
    double eta = 0.0;
    dynamics::RunOutcome outcome = dynamics::RunOutcome::MaxSteps;
    long steps_to_goal = 0;  // steps run when the goal was not reached
    double final_sharpness = std::numeric_limits<double>::quiet_NaN();
    double max_training_sharpness = std::numeric_limits<double>::quiet_NaN();
    double l1 = std::numeric_limits<double>::quiet_NaN();
    double l2 = std::numeric_limits<double>::quiet_NaN();
    double nuclear = std::numeric_limits<double>::quiet_NaN();
    double l1_distance_gf = std::numeric_limits<double>::quiet_NaN();
    double test_metric = std::numeric_limits<double>::quiet_NaN();
    Regime regime = Regime::Unclassified;
    std::string error;  // non-empty when the run itself failed
};

// FlowAligned: converged, final sharpness within tau_flow of s_gf, and
// eta <= (2/s_gf)(1 + tau_flow). EoS: converged past 2/s_gf with max training
// sharpness at least (2/eta)(1 - tau_eos). FlowAligned wins when both hold;
// Diverged passes through; anything else is Unclassified.
Regime classify_regime(const SweepRecord& rec, double s_gf, double tau_flow = 0.10,
                       double tau_eos = 0.10);

struct InsufficientData : Error {
    using Error::Error;
};

struct EtaCEstimate {
    double estimate = 0.0;
    double theory = 0.0;  // 2/s_gf
    double ratio = 0.0;   // estimate / theory
};

// Midpoint between the largest FlowAligned rate and the smallest EoS rate.
// Throws InsufficientData when either regime is absent from the records.
EtaCEstimate estimate_eta_c(const std::vector<SweepRecord>& records, double s_gf);

// Spearman rank correlation with averaged tie ranks. NaN when either input
// is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// One gd_run per scheduled rate, every run from the same theta0, results
// sorted by rate. gf_reference must be a finished flow run to the same goal;
// its endpoint anchors the l1 distances. A failed run is kept as a record
// with its error string set instead of aborting the sweep. Divergence inside
// the coarse window halves the coarse spacing once; while no run has
// diverged the grid is extended above its top rate, at most 32 extra rates.
std::vector<SweepRecord> run_sweep(const TrainModel& model, const ParamVector& theta0,
                                   const Schedule& schedule, double loss_goal,
                                   const dynamics::TrajectoryRecord& gf_reference);

std::vector<std::string> records_csv_header();
std::vector<std::string> record_csv_row(const SweepRecord& rec);
void write_records_csv(const std::string& path, const std::vector<SweepRecord>& records);

// Serialized manifest for one sweep: eta_c_estimate (null when it could not
// be estimated), loss_goal, s0, s_gf, seed, spec.
std::string manifest_json(std::uint64_t seed, const std::string& spec, double loss_goal,
                          const Schedule& schedule, double eta_c_estimate);

// Rate against final sharpness (with the 2/eta stability envelope) and final
// l1 norm, log-log.
void write_chart_svg(const std::string& path, const std::vector<SweepRecord>& records);

}  // namespace eoslab::sweep
