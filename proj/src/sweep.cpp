#include "eoslab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "eoslab/data_io.hpp"
#include "eoslab/sharpness.hpp"

namespace eoslab::sweep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SweepRecord run_one(const TrainModel& model, const ParamVector& theta0, double eta,
                    double loss_goal, const dynamics::TrajectoryRecord& gf_reference,
                    double s_gf) {
    SweepRecord rec;
    rec.eta = eta;
    try {
        dynamics::RunConfig cfg;
        cfg.eta = eta;
        cfg.loss_goal = loss_goal;
        dynamics::TrajectoryRecord run = dynamics::gd_run(model, theta0, cfg);
        rec.outcome = run.outcome;
        rec.steps_to_goal = run.steps;
        rec.final_sharpness = run.final_sharpness;
        double max_s = kNaN;
        for (const auto& entry : run.entries) {
            if (std::isfinite(entry.sharpness) &&
                (!std::isfinite(max_s) || entry.sharpness > max_s)) {
                max_s = entry.sharpness;
            }
        }
        if (std::isfinite(run.final_sharpness) &&
            (!std::isfinite(max_s) || run.final_sharpness > max_s)) {
            max_s = run.final_sharpness;
        }
        rec.max_training_sharpness = max_s;
        // a diverged endpoint is non-finite; its norms carry no information
        if (all_finite(run.final_theta)) {
            sharpness::ParamNorms n = model.norms(run.final_theta);
            rec.l1 = n.l1;
            rec.l2 = n.l2;
            rec.nuclear = n.nuclear;
            rec.l1_distance_gf =
                sharpness::l1_distance(run.final_theta, gf_reference.final_theta);
            rec.test_metric = model.test_metric(run.final_theta);
        }
        rec.regime = classify_regime(rec, s_gf);
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.regime = Regime::Unclassified;
    }
    return rec;
}

bool any_diverged(const std::vector<SweepRecord>& records) {
    return std::any_of(records.begin(), records.end(), [](const SweepRecord& r) {
        return r.outcome == dynamics::RunOutcome::Diverged && r.error.empty();
    });
}

// ranks with ties averaged, 1-based
std::vector<double> tie_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

std::string sanitize_cell(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return s;
}

}  // namespace

Schedule build_schedule(double s0, double s_gf) {
    if (!(s0 > 0.0) || !(s_gf > 0.0)) {
        throw InvalidArgument("schedule needs positive initial and flow sharpness");
    }
    Schedule sched;
    sched.s0 = s0;
    sched.s_gf = s_gf;
    for (int k = 1; k <= 12; ++k) {
        sched.fine.push_back(static_cast<double>(k) / (2.0 * s_gf));
    }
    const double lo = 6.0 / s_gf;
    const double hi = 2.0 / s0;
    if (hi > lo) {
        for (int i = 0; i <= 8; ++i) {
            sched.coarse.push_back(lo + static_cast<double>(i) * (hi - lo) / 8.0);
        }
    }
    return sched;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::FlowAligned: return "FlowAligned";
        case Regime::EoS: return "EoS";
        case Regime::Diverged: return "Diverged";
        case Regime::Unclassified: return "Unclassified";
    }
    return "Unclassified";
}

Regime classify_regime(const SweepRecord& rec, double s_gf, double tau_flow,
                       double tau_eos) {
    if (rec.outcome == dynamics::RunOutcome::Diverged) return Regime::Diverged;
    if (rec.outcome != dynamics::RunOutcome::Converged) return Regime::Unclassified;
    const double threshold = 2.0 / s_gf;
    if (std::abs(rec.final_sharpness - s_gf) <= tau_flow * s_gf &&
        rec.eta <= threshold * (1.0 + tau_flow)) {
        return Regime::FlowAligned;
    }
    if (rec.max_training_sharpness >= (2.0 / rec.eta) * (1.0 - tau_eos) &&
        rec.eta > threshold) {
        return Regime::EoS;
    }
    return Regime::Unclassified;
}

EtaCEstimate estimate_eta_c(const std::vector<SweepRecord>& records, double s_gf) {
    double max_flow = -std::numeric_limits<double>::infinity();
    double min_eos = std::numeric_limits<double>::infinity();
    for (const SweepRecord& r : records) {
        if (r.regime == Regime::FlowAligned) max_flow = std::max(max_flow, r.eta);
        if (r.regime == Regime::EoS) min_eos = std::min(min_eos, r.eta);
    }
    if (!std::isfinite(max_flow)) {
        throw InsufficientData("no flow-aligned record below the threshold");
    }
    if (!std::isfinite(min_eos)) {
        throw InsufficientData("no edge-of-stability record above the threshold");
    }
    EtaCEstimate est;
    est.estimate = 0.5 * (max_flow + min_eos);
    est.theory = 2.0 / s_gf;
    est.ratio = est.estimate / est.theory;
    return est;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionMismatch("rank correlation needs equal lengths");
    if (x.size() < 2) throw InvalidArgument("rank correlation needs at least two points");
    const std::vector<double> rx = tie_ranks(x);
    const std::vector<double> ry = tie_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return kNaN;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<SweepRecord> run_sweep(const TrainModel& model, const ParamVector& theta0,
                                   const Schedule& schedule, double loss_goal,
                                   const dynamics::TrajectoryRecord& gf_reference) {
    if (gf_reference.outcome != dynamics::RunOutcome::Converged) {
        throw InvalidArgument("sweep needs a reference flow run that reached the goal");
    }
    std::vector<double> rates = schedule.fine;
    rates.insert(rates.end(), schedule.coarse.begin(), schedule.coarse.end());
    std::sort(rates.begin(), rates.end());
    rates.erase(std::unique(rates.begin(), rates.end()), rates.end());
    if (rates.empty()) return {};

    std::vector<SweepRecord> records;
    records.reserve(rates.size());
    for (double eta : rates) {
        records.push_back(run_one(model, theta0, eta, loss_goal, gf_reference, schedule.s_gf));
    }

    // a diverged rate inside the coarse window: rerun it at half the spacing,
    // one round only
    if (!schedule.coarse.empty()) {
        const double lo = schedule.coarse.front();
        const double hi = schedule.coarse.back();
        const bool inside = std::any_of(
            records.begin(), records.end(), [&](const SweepRecord& r) {
                return r.outcome == dynamics::RunOutcome::Diverged && r.error.empty() &&
                       r.eta >= lo && r.eta <= hi;
            });
        if (inside) {
            for (std::size_t i = 0; i + 1 < schedule.coarse.size(); ++i) {
                const double mid = 0.5 * (schedule.coarse[i] + schedule.coarse[i + 1]);
                records.push_back(
                    run_one(model, theta0, mid, loss_goal, gf_reference, schedule.s_gf));
            }
        }
    }

    // push the grid upward until something diverges, bounded
    const bool degenerate = schedule.coarse.empty();
    const double top = degenerate ? 6.0 / schedule.s_gf : 2.0 / schedule.s0;
    const double step = degenerate
                            ? 1.0 / (2.0 * schedule.s_gf)
                            : (2.0 / schedule.s0 - 6.0 / schedule.s_gf) / 8.0;
    for (int extra = 1; extra <= 32 && !any_diverged(records); ++extra) {
        const double eta = top + static_cast<double>(extra) * step;
        records.push_back(run_one(model, theta0, eta, loss_goal, gf_reference, schedule.s_gf));
    }

    std::sort(records.begin(), records.end(),
              [](const SweepRecord& a, const SweepRecord& b) { return a.eta < b.eta; });
    return records;
}

std::vector<std::string> records_csv_header() {
    return {"eta",     "outcome", "regime",  "steps_to_goal",  "final_sharpness",
            "max_training_sharpness", "l1",  "l2",             "nuclear",
            "l1_distance_gf",         "test_metric",           "error"};
}

std::vector<std::string> record_csv_row(const SweepRecord& rec) {
    return {format_double(rec.eta),
            dynamics::to_string(rec.outcome),
            to_string(rec.regime),
            std::to_string(rec.steps_to_goal),
            format_double(rec.final_sharpness),
            format_double(rec.max_training_sharpness),
            format_double(rec.l1),
            format_double(rec.l2),
            format_double(rec.nuclear),
            format_double(rec.l1_distance_gf),
            format_double(rec.test_metric),
            sanitize_cell(rec.error)};
}

void write_records_csv(const std::string& path, const std::vector<SweepRecord>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const SweepRecord& r : records) rows.push_back(record_csv_row(r));
    data_io::write_csv(path, records_csv_header(), rows);
}

std::string manifest_json(std::uint64_t seed, const std::string& spec, double loss_goal,
                          const Schedule& schedule, double eta_c_estimate) {
    nlohmann::json j;
    if (std::isfinite(eta_c_estimate)) {
        j["eta_c_estimate"] = eta_c_estimate;
    } else {
        j["eta_c_estimate"] = nullptr;
    }
    j["loss_goal"] = loss_goal;
    j["s0"] = schedule.s0;
    j["s_gf"] = schedule.s_gf;
    j["seed"] = seed;
    j["spec"] = spec;
    return j.dump(2) + "\n";
}

void write_chart_svg(const std::string& path, const std::vector<SweepRecord>& records) {
    data_io::Series sharp{"final sharpness", {}, {}};
    data_io::Series envelope{"2/eta", {}, {}};
    data_io::Series l1{"final l1", {}, {}};
    for (const SweepRecord& r : records) {
        if (!r.error.empty()) continue;
        envelope.x.push_back(r.eta);
        envelope.y.push_back(2.0 / r.eta);
        if (r.outcome != dynamics::RunOutcome::Converged) continue;
        sharp.x.push_back(r.eta);
        sharp.y.push_back(r.final_sharpness);
        l1.x.push_back(r.eta);
        l1.y.push_back(r.l1);
    }
    data_io::ChartOptions opt;
    opt.title = "learning-rate sweep";
    opt.x_label = "eta";
    opt.y_label = "final sharpness / l1";
    opt.log_x = true;
    opt.log_y = true;
    data_io::write_svg_chart(path, {sharp, envelope, l1}, opt);
}

}  // namespace eoslab::sweep
