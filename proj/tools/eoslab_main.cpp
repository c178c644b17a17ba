#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eoslab/common.hpp"
#include "eoslab/data_io.hpp"
#include "eoslab/diagnet.hpp"
#include "eoslab/dynamics.hpp"
#include "eoslab/logit.hpp"
#include "eoslab/model.hpp"
#include "eoslab/network.hpp"
#include "eoslab/risk.hpp"
#include "eoslab/rng.hpp"
#include "eoslab/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eoslab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitMaxSteps = 4;

int outcome_exit(dynamics::RunOutcome o) {
    switch (o) {
        case dynamics::RunOutcome::Converged: return kExitOk;
        case dynamics::RunOutcome::Diverged: return kExitDiverged;
        case dynamics::RunOutcome::MaxSteps: return kExitMaxSteps;
    }
    return kExitConfig;
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// flat key=value lines, '#' comments, blank lines ignored
std::vector<std::pair<std::string, std::string>> load_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("config line is not key=value: " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line has an empty key: " + t);
        pairs.emplace_back(key, value);
    }
    return pairs;
}

// Injects config-file entries as --key=value right after the subcommand, so
// flags the user actually typed land later and win under TakeLast.
std::vector<std::string> assemble_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string cfg_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
            cfg_path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            cfg_path = args[i].substr(9);
        }
    }
    // only inject after a leading subcommand token; anything else fails parse
    if (cfg_path.empty() || args.empty() || args[0].starts_with("-")) return args;
    std::vector<std::string> out{args[0]};
    for (const auto& [k, v] : load_kv_file(cfg_path)) out.push_back("--" + k + "=" + v);
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const std::string tok = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
        try {
            std::size_t used = 0;
            values.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("not a number in list: '" + tok + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return values;
}

std::vector<std::size_t> parse_dim_list(const std::string& s) {
    std::vector<std::size_t> dims;
    for (double v : parse_double_list(s)) {
        if (v < 1.0 || v != std::floor(v)) throw ConfigError("layer sizes must be positive integers");
        dims.push_back(static_cast<std::size_t>(v));
    }
    return dims;
}

struct CommonOpts {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 0;
    bool svg = false;
};

struct ModelOpts {
    std::string model = "diagnet";
    std::string x = "1,2";
    double y = 2.0;
    int depth = 2;
    double alpha = 0.01;
    std::string layers = "2,16,16,1";
    std::string activation = "tanh";
    std::string loss = "mse";
    double init_scale = 1.0;
    std::string data = "gaussian";
    std::size_t n = 64;
    double noise = 1.0;
    double mu_norm = 1.0;
    std::string images;
    std::string labels;
    std::size_t take = 0;
};

struct RunOpts {
    double loss_goal = 1e-8;
    long max_steps = 100000;
    long record_every = 10;
    double eta = 0.0;
    double h = 0.0;
};

constexpr auto kTakeLast = CLI::MultiOptionPolicy::TakeLast;

void add_common_flags(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config, "flat key=value config file; flags override it")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--out", c.out, "output directory")->multi_option_policy(kTakeLast);
    sub->add_option("--seed", c.seed, "seed for every stochastic piece")
        ->multi_option_policy(kTakeLast);
    sub->add_flag("--svg", c.svg, "emit an SVG chart next to the CSV output")
        ->multi_option_policy(kTakeLast);
}

void add_model_flags(CLI::App* sub, ModelOpts& m) {
    sub->add_option("--model", m.model, "diagnet | mlp")
        ->check(CLI::IsMember({"diagnet", "mlp"}))
        ->multi_option_policy(kTakeLast);
    sub->add_option("--x", m.x, "diagnet features, comma separated")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--y", m.y, "diagnet target")->multi_option_policy(kTakeLast);
    sub->add_option("--depth", m.depth, "diagnet weight power")->multi_option_policy(kTakeLast);
    sub->add_option("--alpha", m.alpha, "diagnet init scale: theta0 = alpha * ones")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--layers", m.layers, "mlp layer sizes, comma separated")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--activation", m.activation, "mlp activation: tanh | relu | identity")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--loss", m.loss, "mlp loss: mse | ce")->multi_option_policy(kTakeLast);
    sub->add_option("--init-scale", m.init_scale, "mlp weight init multiplier")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--data", m.data,
                    "mlp training data: gaussian | folded | sphere | two_point | idx")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--n", m.n, "synthetic sample count")->multi_option_policy(kTakeLast);
    sub->add_option("--noise", m.noise, "regression label noise scale")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--mu-norm", m.mu_norm, "sphere cluster center distance")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--images", m.images, "idx image file")->multi_option_policy(kTakeLast);
    sub->add_option("--labels", m.labels, "idx label file")->multi_option_policy(kTakeLast);
    sub->add_option("--take", m.take, "idx: keep only the first n records, 0 = all")
        ->multi_option_policy(kTakeLast);
}

void add_run_flags(CLI::App* sub, RunOpts& r, bool with_eta, bool with_h) {
    sub->add_option("--loss-goal", r.loss_goal, "stop once the loss reaches this value")
        ->multi_option_policy(kTakeLast);
    sub->add_option("--max-steps", r.max_steps, "iteration cap")->multi_option_policy(kTakeLast);
    sub->add_option("--record-every", r.record_every, "metric recording stride")
        ->multi_option_policy(kTakeLast);
    if (with_eta) {
        sub->add_option("--eta", r.eta, "learning rate")
            ->required()
            ->multi_option_policy(kTakeLast);
    }
    if (with_h) {
        sub->add_option("--h0", r.h, "flow integration step, 0 picks 1/(10 s0)")
            ->multi_option_policy(kTakeLast);
    }
}

struct BuiltModel {
    std::unique_ptr<TrainModel> model;
    ParamVector theta0;
    json manifest;
};

BuiltModel build_model(const ModelOpts& m, std::uint64_t seed) {
    BuiltModel built;
    if (m.model == "diagnet") {
        diagnet::Problem p;
        p.x = parse_double_list(m.x);
        p.y = m.y;
        p.depth = m.depth;
        diagnet::validate(p);
        if (m.alpha <= 0.0) throw ConfigError("--alpha must be positive");
        built.theta0.assign(p.x.size(), m.alpha);
        built.manifest["model"] = "diagnet";
        built.manifest["x"] = p.x;
        built.manifest["y"] = p.y;
        built.manifest["depth"] = p.depth;
        built.manifest["alpha"] = m.alpha;
        built.model = std::make_unique<DiagNetModel>(std::move(p));
        return built;
    }

    network::MLPSpec spec;
    spec.layer_dims = parse_dim_list(m.layers);
    spec.activation = network::activation_from_string(m.activation);
    spec.loss_kind = network::loss_kind_from_string(m.loss);
    network::validate(spec);

    // one root stream so data and init draws stay decoupled
    SplitMix64 root(seed);
    const std::uint64_t data_seed = root.next_u64();
    const std::uint64_t init_seed = root.next_u64();

    // short aliases for the synthetic generators
    std::string data_name = m.data;
    if (data_name == "gaussian") data_name = "gaussian_regression";
    if (data_name == "folded") data_name = "folded_gaussian_regression";
    if (data_name == "sphere") data_name = "sphere_cluster_classification";
    if (data_name == "two_point") data_name = "two_point_toy";

    network::Dataset data;
    built.manifest["data"] = data_name;
    if (data_name == "idx") {
        if (m.images.empty() || m.labels.empty())
            throw ConfigError("idx data needs --images and --labels");
        // the net's loss contracts take one-hot targets for both mse and ce
        auto loaded = data_io::load_idx(m.images, m.labels, m.take,
                                        data_io::LabelEncoding::OneHot);
        data = std::move(loaded.data);
        built.manifest["images"] = m.images;
        built.manifest["labels"] = m.labels;
        built.manifest["take"] = m.take;
    } else {
        data_io::SyntheticSpec sspec;
        sspec.kind = data_io::synthetic_kind_from_string(data_name);
        sspec.d = spec.layer_dims.front();
        sspec.n = m.n;
        sspec.noise = m.noise;
        sspec.mu_norm = m.mu_norm;
        sspec.seed = data_seed;
        data = data_io::generate(sspec);
        built.manifest["n"] = m.n;
        built.manifest["noise"] = m.noise;
        built.manifest["mu_norm"] = m.mu_norm;
    }
    network::validate_dataset(spec, data);

    built.theta0 = network::init_lecun_uniform(spec, init_seed, m.init_scale);
    built.manifest["model"] = "mlp";
    built.manifest["layers"] = spec.layer_dims;
    built.manifest["activation"] = network::to_string(spec.activation);
    built.manifest["loss"] = network::to_string(spec.loss_kind);
    built.manifest["init_scale"] = m.init_scale;
    built.model = std::make_unique<MlpModel>(std::move(spec), std::move(data));
    return built;
}

json run_manifest(const std::string& command, const CommonOpts& c, const BuiltModel& built,
                  const RunOpts& r) {
    json j = built.manifest;
    j["command"] = command;
    j["out"] = c.out;
    j["seed"] = c.seed;
    j["svg"] = c.svg;
    j["loss_goal"] = r.loss_goal;
    j["max_steps"] = r.max_steps;
    j["record_every"] = r.record_every;
    return j;
}

void write_manifest(const std::string& out_dir, const json& j) {
    data_io::write_text_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

void write_trajectory_csv(const std::string& path, const dynamics::TrajectoryRecord& rec) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(rec.entries.size());
    for (const auto& e : rec.entries) {
        rows.push_back(data_io::csv_row({e.step_or_time, e.loss, e.sharpness, e.l1, e.l2,
                                         e.nuclear}));
    }
    data_io::write_csv(path, {"step_or_time", "loss", "sharpness", "l1", "l2", "nuclear"},
                       rows);
}

void write_checkpoints(const std::string& out_dir, const dynamics::TrajectoryRecord& rec,
                       const std::string& spec, std::uint64_t seed) {
    for (const auto& [decade, theta] : rec.checkpoints) {
        data_io::CheckpointManifest m;
        m.spec = spec;
        m.seed = seed;
        // the step field holds the decade exponent; loss is the crossed bound
        m.step = decade;
        m.loss = std::pow(10.0, -decade);
        m.count = theta.size();
        data_io::write_checkpoint(
            out_dir + "/checkpoint_decade" + std::to_string(decade) + ".ckpt", m, theta);
    }
    if (all_finite(rec.final_theta) && std::isfinite(rec.final_loss)) {
        data_io::CheckpointManifest m;
        m.spec = spec;
        m.seed = seed;
        m.step = rec.steps;
        m.loss = rec.final_loss;
        m.count = rec.final_theta.size();
        data_io::write_checkpoint(out_dir + "/final.ckpt", m, rec.final_theta);
    }
}

void write_run_chart(const std::string& path, const dynamics::TrajectoryRecord& rec) {
    data_io::Series loss{"loss", {}, {}};
    data_io::Series sharp{"sharpness", {}, {}};
    for (const auto& e : rec.entries) {
        loss.x.push_back(e.step_or_time);
        loss.y.push_back(e.loss);
        sharp.x.push_back(e.step_or_time);
        sharp.y.push_back(e.sharpness);
    }
    data_io::ChartOptions opt;
    opt.title = rec.time_indexed ? "gradient flow" : "gradient descent";
    opt.x_label = rec.time_indexed ? "time" : "step";
    opt.y_label = "loss / sharpness";
    opt.log_y = true;
    data_io::write_svg_chart(path, {loss, sharp}, opt);
}

int cmd_gf(const CommonOpts& c, const ModelOpts& m, const RunOpts& r) {
    BuiltModel built = build_model(m, c.seed);
    dynamics::RunConfig cfg;
    cfg.h = r.h;
    cfg.loss_goal = r.loss_goal;
    cfg.max_steps = r.max_steps;
    cfg.record_every = r.record_every;
    cfg.seed = c.seed;
    const auto rec = dynamics::gf_run_certified(*built.model, built.theta0, cfg);

    double s0 = std::numeric_limits<double>::quiet_NaN();
    double sgf = std::numeric_limits<double>::quiet_NaN();
    if (built.model->has_hessian()) {
        s0 = model_sharpness(*built.model, built.theta0, c.seed).value;
        if (rec.outcome == dynamics::RunOutcome::Converged) sgf = dynamics::s_gf(rec, r.loss_goal);
    }

    json manifest = run_manifest("gf", c, built, r);
    manifest["h0"] = r.h;
    fs::create_directories(c.out);
    write_manifest(c.out, manifest);
    write_trajectory_csv(c.out + "/gf_trajectory.csv", rec);
    write_checkpoints(c.out, rec, built.model->describe(), c.seed);
    if (c.svg) write_run_chart(c.out + "/gf_chart.svg", rec);

    std::printf("outcome = %s\n", dynamics::to_string(rec.outcome).c_str());
    std::printf("s0 = %s\n", format_double(s0).c_str());
    std::printf("s_gf = %s\n", format_double(sgf).c_str());
    std::printf("final_loss = %s\n", format_double(rec.final_loss).c_str());
    std::printf("t_eps = %s\n", format_double(rec.t_eps).c_str());
    return outcome_exit(rec.outcome);
}

int cmd_gd(const CommonOpts& c, const ModelOpts& m, const RunOpts& r) {
    BuiltModel built = build_model(m, c.seed);
    if (r.eta <= 0.0) throw ConfigError("--eta must be positive");
    dynamics::RunConfig cfg;
    cfg.eta = r.eta;
    cfg.loss_goal = r.loss_goal;
    cfg.max_steps = r.max_steps;
    cfg.record_every = r.record_every;
    cfg.seed = c.seed;
    const auto rec = dynamics::gd_run(*built.model, built.theta0, cfg);

    json manifest = run_manifest("gd", c, built, r);
    manifest["eta"] = r.eta;
    fs::create_directories(c.out);
    write_manifest(c.out, manifest);
    write_trajectory_csv(c.out + "/gd_trajectory.csv", rec);
    write_checkpoints(c.out, rec, built.model->describe(), c.seed);
    if (c.svg) write_run_chart(c.out + "/gd_chart.svg", rec);

    std::printf("outcome = %s\n", dynamics::to_string(rec.outcome).c_str());
    std::printf("steps = %ld\n", rec.steps);
    std::printf("final_loss = %s\n", format_double(rec.final_loss).c_str());
    std::printf("final_sharpness = %s\n", format_double(rec.final_sharpness).c_str());
    const double test = built.model->test_metric(rec.final_theta);
    if (std::isfinite(test)) std::printf("test_metric = %s\n", format_double(test).c_str());
    return outcome_exit(rec.outcome);
}

int cmd_sweep(const CommonOpts& c, const ModelOpts& m, const RunOpts& r) {
    BuiltModel built = build_model(m, c.seed);
    dynamics::RunConfig cfg;
    cfg.h = r.h;
    cfg.loss_goal = r.loss_goal;
    cfg.max_steps = r.max_steps;
    cfg.record_every = r.record_every;
    cfg.seed = c.seed;
    const auto ref = dynamics::gf_run_certified(*built.model, built.theta0, cfg);
    if (ref.outcome != dynamics::RunOutcome::Converged) {
        std::fprintf(stderr, "reference flow run did not reach the goal (%s)\n",
                     dynamics::to_string(ref.outcome).c_str());
        return outcome_exit(ref.outcome);
    }

    const double s0 = model_sharpness(*built.model, built.theta0, c.seed).value;
    const double sgf = dynamics::s_gf(ref, r.loss_goal);
    const auto schedule = sweep::build_schedule(s0, sgf);
    const auto records = sweep::run_sweep(*built.model, built.theta0, schedule, r.loss_goal, ref);

    double eta_c = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();
    try {
        const auto est = sweep::estimate_eta_c(records, sgf);
        eta_c = est.estimate;
        ratio = est.ratio;
    } catch (const sweep::InsufficientData&) {
    }

    json manifest = json::parse(sweep::manifest_json(c.seed, built.model->describe(),
                                                     r.loss_goal, schedule, eta_c));
    manifest.update(run_manifest("sweep", c, built, r));
    manifest["h0"] = r.h;
    fs::create_directories(c.out);
    write_manifest(c.out, manifest);
    sweep::write_records_csv(c.out + "/sweep_records.csv", records);
    if (c.svg) sweep::write_chart_svg(c.out + "/sweep_chart.svg", records);

    int flow = 0, eos = 0, diverged = 0, other = 0;
    for (const auto& rec : records) {
        switch (rec.regime) {
            case sweep::Regime::FlowAligned: ++flow; break;
            case sweep::Regime::EoS: ++eos; break;
            case sweep::Regime::Diverged: ++diverged; break;
            case sweep::Regime::Unclassified: ++other; break;
        }
    }
    std::printf("records = %zu (flow-aligned %d, eos %d, diverged %d, unclassified %d)\n",
                records.size(), flow, eos, diverged, other);
    std::printf("s0 = %s\n", format_double(s0).c_str());
    std::printf("s_gf = %s\n", format_double(sgf).c_str());
    std::printf("eta_c_theory = %s\n", format_double(2.0 / sgf).c_str());
    std::printf("eta_c_estimate = %s\n", format_double(eta_c).c_str());
    std::printf("eta_c_ratio = %s\n", format_double(ratio).c_str());
    return kExitOk;
}

std::string support_string(const std::vector<std::size_t>& support) {
    std::string s = "{";
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(support[i] + 1);  // 1-based for humans
    }
    return s + "}";
}

void print_minimizer_set(const char* name, const diagnet::MinimizerSet& set) {
    std::printf("%s: support (1-based) = %s, radius_sq = %s, objective = %s\n", name,
                support_string(set.support).c_str(), format_double(set.radius_sq).c_str(),
                format_double(set.objective_value).c_str());
}

void print_riemannian_checks(const diagnet::Problem& p, const diagnet::MinimizerSet& set,
                             diagnet::ManifoldObjective objective, const char* name,
                             std::uint64_t seed) {
    const ParamVector& w = set.canonical;
    const ParamVector g = diagnet::riemannian_grad(p, w, objective);
    SplitMix64 rng(seed);
    double min_quad = std::numeric_limits<double>::infinity();
    int probes = 0;
    while (probes < 64) {
        ParamVector v(w.size());
        for (double& vi : v) vi = rng.next_gaussian();
        ParamVector u = diagnet::tangent_project(p, w, v);
        const double nu = norm2(u);
        if (nu < 1e-12) continue;
        scale(u, 1.0 / nu);
        min_quad = std::min(min_quad, diagnet::riemannian_hess_quadform(p, w, u, objective));
        ++probes;
    }
    std::printf("%s: |riemannian_grad|_inf = %s, min quadform over %d tangent probes = %s\n",
                name, format_double(norm_inf(g)).c_str(), probes,
                format_double(min_quad).c_str());
}

int cmd_diagnet(const CommonOpts& c, const ModelOpts& m, const RunOpts& r) {
    diagnet::Problem p;
    p.x = parse_double_list(m.x);
    p.y = m.y;
    p.depth = m.depth;
    diagnet::validate(p);
    if (p.depth != 2) throw ConfigError("the analytic suite covers depth 2 only");
    if (m.alpha <= 0.0) throw ConfigError("--alpha must be positive");

    const auto l1_set = diagnet::l1_minimizer_set(p);
    const auto sharp_set = diagnet::sharpness_minimizer_set(p);

    json manifest;
    manifest["command"] = "diagnet";
    manifest["x"] = p.x;
    manifest["y"] = p.y;
    manifest["depth"] = p.depth;
    manifest["alpha"] = m.alpha;
    manifest["loss_goal"] = r.loss_goal;
    manifest["out"] = c.out;
    manifest["seed"] = c.seed;
    manifest["svg"] = c.svg;
    fs::create_directories(c.out);

    print_minimizer_set("l1 minimizer set", l1_set);
    print_minimizer_set("sharpness minimizer set", sharp_set);
    print_riemannian_checks(p, l1_set, diagnet::ManifoldObjective::L1,
                            "l1 objective at its canonical point", c.seed);
    print_riemannian_checks(p, sharp_set, diagnet::ManifoldObjective::Sharpness,
                            "sharpness objective at its canonical point", c.seed);

    if (p.x.size() == 2) {
        DiagNetModel model(p);
        const ParamVector theta0(2, m.alpha);
        dynamics::RunConfig cfg;
        cfg.loss_goal = r.loss_goal;
        cfg.max_steps = r.max_steps;
        cfg.record_every = r.record_every;
        cfg.seed = c.seed;
        cfg.record_theta = true;

        const auto gf = dynamics::gf_run_certified(model, theta0, cfg);
        std::vector<std::vector<std::string>> gf_rows;
        for (std::size_t i = 0; i < gf.theta_path.size(); ++i) {
            const auto& [t, w] = gf.theta_path[i];
            gf_rows.push_back(data_io::csv_row({t, w[0], w[1], gf.entries[i].loss}));
        }
        data_io::write_csv(c.out + "/gf_path.csv", {"time", "w1", "w2", "loss"}, gf_rows);

        std::vector<data_io::Series> plane;
        plane.push_back({"gf", {}, {}});
        for (const auto& [t, w] : gf.theta_path) {
            plane.back().x.push_back(w[0]);
            plane.back().y.push_back(w[1]);
        }

        const double s0 = model_sharpness(model, theta0, c.seed).value;
        const double sgf = dynamics::s_gf(gf, r.loss_goal);
        const auto schedule = sweep::build_schedule(s0, sgf);
        std::vector<std::vector<std::string>> gd_rows;
        for (double eta : schedule.fine) {
            dynamics::RunConfig gd_cfg = cfg;
            gd_cfg.eta = eta;
            const auto run = dynamics::gd_run(model, theta0, gd_cfg);
            plane.push_back({"gd eta=" + format_double(eta), {}, {}});
            for (std::size_t i = 0; i < run.theta_path.size(); ++i) {
                const auto& [step, w] = run.theta_path[i];
                gd_rows.push_back(data_io::csv_row({eta, step, w[0], w[1], run.entries[i].loss}));
                plane.back().x.push_back(w[0]);
                plane.back().y.push_back(w[1]);
            }
        }
        data_io::write_csv(c.out + "/gd_paths.csv", {"eta", "step", "w1", "w2", "loss"},
                           gd_rows);
        manifest["s0"] = s0;
        manifest["s_gf"] = sgf;

        if (c.svg) {
            data_io::ChartOptions opt;
            opt.title = "parameter-plane trajectories";
            opt.x_label = "w1";
            opt.y_label = "w2";
            data_io::write_svg_chart(c.out + "/diagnet_paths.svg", plane, opt);
        }
    }
    write_manifest(c.out, manifest);
    return kExitOk;
}

int cmd_risk(const CommonOpts& c, const std::string& model_name, std::size_t d,
             long n_samples) {
    const risk::DataModel model = model_name == "folded"
                                      ? risk::folded_gaussian_model(d)
                                      : risk::folded_gaussian_noise_model(d);

    json manifest;
    manifest["command"] = "risk";
    manifest["model"] = model_name;
    manifest["d"] = d;
    manifest["n_samples"] = n_samples;
    manifest["out"] = c.out;
    manifest["seed"] = c.seed;
    manifest["svg"] = c.svg;

    const risk::Algorithm algs[] = {risk::Algorithm::L1, risk::Algorithm::Sharp,
                                    risk::Algorithm::Opt};
    std::vector<std::vector<std::string>> rows;
    std::vector<data_io::Series> bars;
    for (risk::Algorithm alg : algs) {
        const auto est = risk::expected_risk_mc(alg, model, n_samples, c.seed);
        const std::string name = risk::to_string(alg);
        rows.push_back({name, std::to_string(d), std::to_string(n_samples),
                        format_double(est.estimate), format_double(est.std_error),
                        std::to_string(est.nonrealizable)});
        std::printf("%s: estimate = %s, std_error = %s, nonrealizable = %ld\n", name.c_str(),
                    format_double(est.estimate).c_str(),
                    format_double(est.std_error).c_str(), est.nonrealizable);
        const double idx = static_cast<double>(bars.size());
        bars.push_back({name, {idx + 0.8, idx + 1.2}, {est.estimate, est.estimate}});
    }
    fs::create_directories(c.out);
    write_manifest(c.out, manifest);
    data_io::write_csv(c.out + "/risk.csv",
                       {"algorithm", "d", "n_samples", "estimate", "std_error",
                        "nonrealizable_count"},
                       rows);
    if (c.svg) {
        data_io::ChartOptions opt;
        opt.title = "expected risk by algorithm";
        opt.x_label = "algorithm";
        opt.y_label = "estimate";
        opt.log_y = true;
        data_io::write_svg_chart(c.out + "/risk_chart.svg", bars, opt);
    }
    return kExitOk;
}

int cmd_logit(const CommonOpts& c, std::size_t d, double mu_norm, long n_samples,
              int resolution) {
    const auto data = logit::sample_data(d, c.seed);
    const auto ms = logit::min_sharpness_params(data, resolution);
    const auto mm = logit::max_margin_params(data);

    json manifest;
    manifest["command"] = "logit";
    manifest["d"] = d;
    manifest["mu_norm"] = mu_norm;
    manifest["n_samples"] = n_samples;
    manifest["resolution"] = resolution;
    manifest["out"] = c.out;
    manifest["seed"] = c.seed;
    manifest["svg"] = c.svg;
    fs::create_directories(c.out);
    write_manifest(c.out, manifest);

    std::printf("min sharpness = %s at (z, b) = (%s, %s)\n", format_double(ms.value).c_str(),
                format_double(ms.z).c_str(), format_double(ms.b).c_str());

    // sharpness over the feasible margin box, same parametrization as the
    // optimizer: z in (0,1], b in (-z, 0]
    std::vector<std::vector<std::string>> grid_rows;
    const int res = resolution;
    for (int i = 1; i <= res; ++i) {
        const double z = static_cast<double>(i) / res;
        for (int j = 0; j < res; ++j) {
            const double b = j == 0 ? 0.0 : -z * static_cast<double>(j) / res;
            logit::AffineClassifier cls;
            cls.w_tilde = data.x2_tilde;
            scale(cls.w_tilde, z);
            cls.b = b;
            grid_rows.push_back(
                data_io::csv_row({z, b, logit::sharpness_closed_form(cls, data)}));
        }
    }
    data_io::write_csv(c.out + "/landscape.csv", {"z", "b", "sharpness"}, grid_rows);

    ParamVector mu = data.x2_tilde;
    scale(mu, mu_norm);
    std::vector<std::vector<std::string>> err_rows;
    const auto report = [&](const char* name, const logit::AffineClassifier& cls) {
        const auto err = logit::expected_gen_error_mc(cls, mu, n_samples, c.seed);
        err_rows.push_back({name, std::to_string(d), format_double(mu_norm),
                            format_double(err.estimate), format_double(err.std_error)});
        std::printf("%s: gen_error = %s, std_error = %s\n", name,
                    format_double(err.estimate).c_str(), format_double(err.std_error).c_str());
    };
    report("min_sharpness", ms.classifier);
    report("max_margin", mm);
    data_io::write_csv(c.out + "/gen_error.csv",
                       {"classifier", "d", "mu_norm", "estimate", "std_error"}, err_rows);

    if (c.svg) {
        data_io::Series edge{"b = 0", {}, {}};
        data_io::Series mid{"b = -z/2", {}, {}};
        for (int i = 1; i <= res; ++i) {
            const double z = static_cast<double>(i) / res;
            logit::AffineClassifier cls;
            cls.w_tilde = data.x2_tilde;
            scale(cls.w_tilde, z);
            cls.b = 0.0;
            edge.x.push_back(z);
            edge.y.push_back(logit::sharpness_closed_form(cls, data));
            cls.b = -0.5 * z;
            mid.x.push_back(z);
            mid.y.push_back(logit::sharpness_closed_form(cls, data));
        }
        data_io::ChartOptions opt;
        opt.title = "sharpness along the margin box";
        opt.x_label = "z";
        opt.y_label = "sharpness";
        data_io::write_svg_chart(c.out + "/logit_chart.svg", {edge, mid}, opt);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"edge-of-stability laboratory"};
    app.require_subcommand(1);

    CommonOpts common[6];
    ModelOpts model[4];
    RunOpts run[4];

    auto* gf = app.add_subcommand("gf", "integrate gradient flow to the loss goal");
    add_common_flags(gf, common[0]);
    add_model_flags(gf, model[0]);
    add_run_flags(gf, run[0], false, true);

    auto* gd = app.add_subcommand("gd", "run full-batch gradient descent");
    add_common_flags(gd, common[1]);
    add_model_flags(gd, model[1]);
    add_run_flags(gd, run[1], true, false);

    auto* sw = app.add_subcommand("sweep", "learning-rate sweep around 2/s_gf");
    add_common_flags(sw, common[2]);
    add_model_flags(sw, model[2]);
    add_run_flags(sw, run[2], false, true);

    auto* dn = app.add_subcommand("diagnet", "analytic minimizer sets and d=2 trajectories");
    add_common_flags(dn, common[3]);
    dn->add_option("--x", model[3].x)->multi_option_policy(kTakeLast);
    dn->add_option("--y", model[3].y)->multi_option_policy(kTakeLast);
    dn->add_option("--depth", model[3].depth)->multi_option_policy(kTakeLast);
    dn->add_option("--alpha", model[3].alpha)->multi_option_policy(kTakeLast);
    add_run_flags(dn, run[3], false, false);

    auto* rk = app.add_subcommand("risk", "expected-risk comparison of the three algorithms");
    add_common_flags(rk, common[4]);
    std::string risk_model = "folded";
    std::size_t risk_d = 5;
    long risk_n = 100000;
    rk->add_option("--model", risk_model, "folded | folded_noise")
        ->check(CLI::IsMember({"folded", "folded_noise"}))
        ->multi_option_policy(kTakeLast);
    rk->add_option("--d", risk_d, "feature dimension")->multi_option_policy(kTakeLast);
    rk->add_option("--n-samples", risk_n, "Monte-Carlo draws")->multi_option_policy(kTakeLast);

    auto* lg = app.add_subcommand("logit", "two-point logistic landscape and test errors");
    add_common_flags(lg, common[5]);
    std::size_t logit_d = 3;
    double logit_mu = 1.0;
    long logit_n = 100000;
    int logit_res = 200;
    lg->add_option("--d", logit_d, "feature dimension")->multi_option_policy(kTakeLast);
    lg->add_option("--mu-norm", logit_mu, "test cluster center distance")
        ->multi_option_policy(kTakeLast);
    lg->add_option("--n-samples", logit_n, "Monte-Carlo draws")->multi_option_policy(kTakeLast);
    lg->add_option("--resolution", logit_res, "landscape grid resolution")
        ->multi_option_policy(kTakeLast);

    try {
        auto args = assemble_args(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    }

    try {
        if (gf->parsed()) return cmd_gf(common[0], model[0], run[0]);
        if (gd->parsed()) return cmd_gd(common[1], model[1], run[1]);
        if (sw->parsed()) return cmd_sweep(common[2], model[2], run[2]);
        if (dn->parsed()) return cmd_diagnet(common[3], model[3], run[3]);
        if (rk->parsed()) return cmd_risk(common[4], risk_model, risk_d, risk_n);
        if (lg->parsed()) return cmd_logit(common[5], logit_d, logit_mu, logit_n, logit_res);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
