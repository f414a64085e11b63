#include "cli_app.hpp"

#include "gridsafe/report_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

namespace gridsafe {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;

// Paper-era defaults: coupling radii live in the network file; the droop
// values under test default to the nominal study constants.
struct CommonFlags {
    std::string input;
    std::string node = "all";
    double tol = 1e-6;
    std::uint64_t budget = 1'000'000;
    std::string engine = "exact";
    std::string vi_mode = "free";
    double lambda_p = 2.51;
    double lambda_q = 0.2;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool node_is_single) {
    cmd->add_option("--input", f.input, "network file (format_version 1)")->required();
    cmd->add_option("--node", f.node,
                    node_is_single ? "node id (default: lowest declared id)"
                                   : "node id or 'all'");
    cmd->add_option("--tol", f.tol, "optimizer enclosure tolerance, p.u.")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--budget", f.budget, "branch-and-bound box budget")->capture_default_str();
    cmd->add_option("--engine", f.engine, "power-flow form driving the envelopes")
        ->check(CLI::IsMember({"exact", "taylor3"}))->capture_default_str();
    cmd->add_option("--vi-mode", f.vi_mode,
                    "own voltage in frequency envelopes: free over the safe set or pinned nominal")
        ->check(CLI::IsMember({"free", "nominal"}))->capture_default_str();
    cmd->add_option("--lambda-p", f.lambda_p, "active-power droop under test, rad/s per p.u.")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--lambda-q", f.lambda_q, "reactive-power droop under test, p.u. per p.u.")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--out", f.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
    cmd->add_option("--jobs", f.jobs, "parallel jobs across nodes")->capture_default_str();
}

VerifyOptions make_options(const CommonFlags& f) {
    VerifyOptions opt;
    opt.tol = f.tol;
    opt.max_boxes = f.budget;
    opt.form = f.engine == "taylor3" ? PowerForm::taylor3 : PowerForm::exact;
    opt.own_voltage = f.vi_mode == "nominal" ? OwnVoltageMode::pinned_nominal
                                             : OwnVoltageMode::free_in_safe_set;
    return opt;
}

json echo_common(const std::string& subcommand, const CommonFlags& f) {
    return json{{"subcommand", subcommand}, {"input", f.input},   {"node", f.node},
                {"tol", f.tol},             {"budget", f.budget}, {"engine", f.engine},
                {"vi_mode", f.vi_mode},     {"lambda_p", f.lambda_p},
                {"lambda_q", f.lambda_q},   {"out", f.out_dir},   {"seed", f.seed},
                {"jobs", f.jobs}};
}

std::vector<int> select_nodes(const NetworkModel& model, const std::string& node_flag) {
    std::vector<int> ids;
    if (node_flag == "all") {
        for (const auto& n : model.nodes()) ids.push_back(n.id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }
    const int id = std::stoi(node_flag);
    if (!model.has_node(id)) throw std::out_of_range("unknown node id " + node_flag);
    return {id};
}

int single_node(const NetworkModel& model, const std::string& node_flag) {
    if (node_flag == "all") {
        int lowest = model.nodes().front().id;
        for (const auto& n : model.nodes()) lowest = std::min(lowest, n.id);
        return lowest;
    }
    const int id = std::stoi(node_flag);
    if (!model.has_node(id)) throw std::out_of_range("unknown node id " + node_flag);
    return id;
}

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

void parallel_over(unsigned jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const unsigned n_threads = std::min<std::size_t>(jobs, count);
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

std::vector<double> linspace(double start, double stop, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) {
        g[i] = (points == 1) ? start : start + (stop - start) * i / (points - 1);
    }
    return g;
}

int cmd_verify(const CommonFlags& f, std::ostream& out, std::ostream& err) {
    const LoadResult loaded = load_network(f.input);
    const std::vector<int> ids = select_nodes(loaded.model, f.node);
    const VerifyOptions opt = make_options(f);
    const fs::path out_dir = prepare_out_dir(f.out_dir);
    const json echo = echo_common("verify", f);

    std::vector<AdmissibleReport> reports(ids.size());
    std::vector<std::string> failures(ids.size());
    parallel_over(f.jobs, ids.size(), [&](std::size_t i) {
        try {
            reports[i] = verify_node(loaded.model, ids[i], f.lambda_p, f.lambda_q,
                                     loaded.safety, opt);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    bool any_empty = false;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!failures[i].empty()) throw std::runtime_error(failures[i]);
        const AdmissibleReport& rep = reports[i];
        const fs::path file = out_dir / ("report_node" + std::to_string(rep.node) + ".json");
        std::ofstream os(file);
        if (!os) throw std::runtime_error("cannot write " + file.string());
        os << report_to_json(rep, echo).dump(2) << "\n";
        for (const std::string& w : rep.warnings) err << "warning: " << w << "\n";
        out << "node " << rep.node << ": u_omega=[" << rep.u_omega.lower << ", "
            << rep.u_omega.upper << "] " << (rep.u_omega.nonempty ? "nonempty" : "EMPTY")
            << ", u_v=[" << rep.u_v.lower << ", " << rep.u_v.upper << "] "
            << (rep.u_v.nonempty ? "nonempty" : "EMPTY")
            << ", lambda_p*=" << rep.lambda_p_star.to_string()
            << ", lambda_q*=" << rep.lambda_q_star.to_string() << " -> " << file.string() << "\n";
        any_empty = any_empty || !rep.u_omega.nonempty || !rep.u_v.nonempty;
    }
    return any_empty ? 2 : 0;
}

struct SweepFlags {
    std::string axis = "lambda-q";
    double grid_start = 0.0;
    double grid_stop = 0.0;
    int grid_points = 0;
};

int cmd_sweep(const CommonFlags& f, const SweepFlags& sw, std::ostream& out, std::ostream&) {
    if (sw.grid_points < 1) throw CLI::ValidationError("--grid-points", "grid must be nonempty");
    const LoadResult loaded = load_network(f.input);
    const int node = single_node(loaded.model, f.node);
    const VerifyOptions opt = make_options(f);
    const fs::path out_dir = prepare_out_dir(f.out_dir);
    json echo = echo_common("sweep", f);
    echo["axis"] = sw.axis;
    echo["grid_start"] = sw.grid_start;
    echo["grid_stop"] = sw.grid_stop;
    echo["grid_points"] = sw.grid_points;
    const std::string echo_line = echo.dump();

    const std::vector<double> grid = linspace(sw.grid_start, sw.grid_stop, sw.grid_points);
    const fs::path file =
        out_dir / ("sweep_" + sw.axis + "_node" + std::to_string(node) + ".csv");
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());

    if (sw.axis == "lambda-p" || sw.axis == "lambda-q") {
        for (double l : grid) {
            if (!(l > 0.0)) throw CLI::ValidationError("--grid-start", "droop grid must be positive");
        }
        const Channel ch = sw.axis == "lambda-p" ? Channel::frequency : Channel::voltage;
        const DroopSweepTable table = droop_sweep(loaded.model, node, loaded.safety, grid, ch, opt);
        write_droop_sweep_csv(os, table, echo_line);
        out << "wrote " << table.rows.size() << " rows (lambda_star="
            << table.lambda_star.to_string() << ") -> " << file.string() << "\n";
        return 0;
    }

    SweepAxis axis;
    std::string column;
    if (sw.axis == "delta-v") { axis = SweepAxis::delta_v; column = "delta_v"; }
    else if (sw.axis == "s-theta") { axis = SweepAxis::s_theta_halfwidth; column = "s_theta_halfwidth"; }
    else if (sw.axis == "s-v-width") { axis = SweepAxis::s_v_width; column = "s_v_width"; }
    else throw CLI::ValidationError("--axis", "unknown sweep axis " + sw.axis);

    const std::vector<SensitivityRow> rows =
        sensitivity_sweep(loaded.model, node, loaded.safety, axis, grid, opt);
    write_sensitivity_csv(os, rows, column, echo_line);
    out << "wrote " << rows.size() << " rows -> " << file.string() << "\n";
    return 0;
}

struct SimulateFlags {
    double duration = 20.0;
    double step = 1e-3;
    std::string control_policy = "stochastic";
    double control_period = 1.0;
    double u_p = 0.0;
    double u_q = 0.0;
    bool u_p_set = false;
    bool u_q_set = false;
    std::string neighbor_policy = "stochastic";
    double neighbor_period = 1e-2;
    double pinned_theta = -kPi / 6.0;
    std::string worst_side = "lower";
    double threshold = 0.1;
};

int cmd_simulate(const CommonFlags& f, const SimulateFlags& sf, std::ostream& out,
                 std::ostream& err) {
    const LoadResult loaded = load_network(f.input);
    const int focal = single_node(loaded.model, f.node);
    const VerifyOptions opt = make_options(f);
    const fs::path out_dir = prepare_out_dir(f.out_dir);

    // The droop values under test drive both the certificates and the
    // dynamics of the focal node.
    const NetworkModel model = loaded.model.with_droop(focal, f.lambda_p, f.lambda_q);
    const AdmissibleReport rep = verify_node(model, focal, f.lambda_p, f.lambda_q,
                                             loaded.safety, opt);
    for (const std::string& w : rep.warnings) err << "warning: " << w << "\n";

    Scenario sc;
    sc.duration_s = sf.duration;
    sc.step_s = sf.step;
    sc.control_resample_s = sf.control_period;
    sc.neighbor_resample_s = sf.neighbor_period;
    sc.pinned_theta = sf.pinned_theta;
    sc.switching_threshold = sf.threshold;
    sc.seed = f.seed;
    sc.u_p_range = rep.u_omega;
    sc.u_q_range = rep.u_v;
    if (sf.control_policy == "constant") {
        sc.control_policy = Scenario::ControlPolicy::constant;
        sc.u_p_const = sf.u_p_set ? sf.u_p : (rep.u_omega.nonempty ? 0.5 * (rep.u_omega.lower + rep.u_omega.upper) : 0.0);
        sc.u_q_const = sf.u_q_set ? sf.u_q : (rep.u_v.nonempty ? 0.5 * (rep.u_v.lower + rep.u_v.upper) : 0.0);
    } else if (sf.control_policy == "switching") {
        sc.control_policy = Scenario::ControlPolicy::switching;
    } else {
        sc.control_policy = Scenario::ControlPolicy::stochastic;
    }
    sc.neighbor_policy = sf.neighbor_policy == "worst-case-hold"
                             ? Scenario::NeighborPolicy::worst_case_hold
                             : Scenario::NeighborPolicy::stochastic;
    sc.worst_case_v_side = sf.worst_side == "upper" ? Scenario::WorstCaseSide::upper
                                                    : Scenario::WorstCaseSide::lower;

    const SimTrace trace = simulate(model, focal, loaded.safety, sc);

    const double u_p_mag = std::max(std::fabs(sc.u_p_const),
                                    std::max(std::fabs(rep.u_omega.lower), std::fabs(rep.u_omega.upper)));
    const double u_q_mag = std::max(std::fabs(sc.u_q_const),
                                    std::max(std::fabs(rep.u_v.lower), std::fabs(rep.u_v.upper)));
    const DerivativeBounds db = derivative_bounds(model, focal, loaded.safety, u_p_mag, u_q_mag);
    const double allowance = sc.step_s * std::max(db.omega_dot, db.v_dot);
    const ViolationReport vr = safety_monitor(trace, loaded.safety, f.tol, allowance);

    json echo = echo_common("simulate", f);
    echo["duration"] = sf.duration;
    echo["step"] = sf.step;
    echo["control_policy"] = sf.control_policy;
    echo["control_period"] = sf.control_period;
    echo["neighbor_policy"] = sf.neighbor_policy;
    echo["neighbor_period"] = sf.neighbor_period;
    echo["allowance"] = allowance;

    const fs::path file = out_dir / ("trace_node" + std::to_string(focal) + ".csv");
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    write_trace_csv(os, trace, echo.dump());

    out << vr.true_violations.size() << " violations ("
        << vr.discretization_violations.size() << " discretization-level), worst margin "
        << vr.worst_margin << " at t=" << vr.worst_time << "s -> " << file.string() << "\n";
    return vr.true_violations.empty() ? 0 : 3;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"certified safe-operating envelopes for droop-controlled inverters"};
    app.require_subcommand(1);

    CommonFlags vf, wf, mf;
    SweepFlags sw;
    SimulateFlags sf;

    CLI::App* verify = app.add_subcommand("verify", "per-node admissible intervals and maximal droops");
    add_common(verify, vf, false);

    CLI::App* sweep = app.add_subcommand(
        "sweep",
        "droop and sensitivity sweep tables as CSV. Droop axes emit "
        "lambda,u_lower,u_upper,nonempty,crossing; sensitivity axes emit "
        "<axis>,lambda_q_star. The first line echoes the full configuration.");
    add_common(sweep, wf, true);
    sweep->add_option("--axis", sw.axis, "lambda-p | lambda-q | delta-v | s-theta | s-v-width")
        ->check(CLI::IsMember({"lambda-p", "lambda-q", "delta-v", "s-theta", "s-v-width"}))
        ->capture_default_str();
    sweep->add_option("--grid-start", sw.grid_start, "first grid value")->required();
    sweep->add_option("--grid-stop", sw.grid_stop, "last grid value")->required();
    sweep->add_option("--grid-points", sw.grid_points, "number of grid points")->required();

    CLI::App* simulate = app.add_subcommand(
        "simulate",
        "integrate the nonlinear dynamics of one node. Emits a trace CSV with "
        "columns time_s,theta_i,omega_i_hz,v_i_dev,u_p,u_q, then "
        "theta_<k>,v_<k>_dev per neighbor, then margin_omega_hz,margin_v.");
    add_common(simulate, mf, true);
    simulate->add_option("--duration", sf.duration, "seconds")->capture_default_str();
    simulate->add_option("--step", sf.step, "integrator step, seconds")->capture_default_str();
    simulate->add_option("--control-policy", sf.control_policy, "stochastic | constant | switching")
        ->check(CLI::IsMember({"stochastic", "constant", "switching"}))->capture_default_str();
    simulate->add_option("--control-period", sf.control_period, "control resample period, s")
        ->capture_default_str();
    auto* up_opt = simulate->add_option("--u-p", sf.u_p, "constant active set-point control, p.u.");
    auto* uq_opt = simulate->add_option("--u-q", sf.u_q, "constant reactive set-point control, p.u.");
    simulate->add_option("--neighbor-policy", sf.neighbor_policy, "stochastic | worst-case-hold")
        ->check(CLI::IsMember({"stochastic", "worst-case-hold"}))->capture_default_str();
    simulate->add_option("--neighbor-period", sf.neighbor_period, "neighbor resample period, s")
        ->capture_default_str();
    simulate->add_option("--pinned-theta", sf.pinned_theta, "worst-case-hold angle, rad")
        ->capture_default_str();
    simulate->add_option("--worst-side", sf.worst_side, "worst-case-hold voltage rule side")
        ->check(CLI::IsMember({"lower", "upper"}))->capture_default_str();
    simulate->add_option("--threshold", sf.threshold, "switching threshold fraction")
        ->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (verify->parsed()) return cmd_verify(vf, out, err);
        if (sweep->parsed()) return cmd_sweep(wf, sw, out, err);
        sf.u_p_set = up_opt->count() > 0;
        sf.u_q_set = uq_opt->count() > 0;
        return cmd_simulate(mf, sf, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace gridsafe
