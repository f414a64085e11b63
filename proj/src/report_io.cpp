#include "gridsafe/report_io.hpp"

#include <iomanip>

namespace gridsafe {

namespace {

using nlohmann::json;

json bound_to_json(const CertifiedBound& b) {
    json j;
    j["lo"] = b.lo;
    j["hi"] = b.hi;
    j["witness"] = b.witness;
    j["witness_value"] = b.witness_value;
    j["engine"] = b.engine == CertifiedBound::Engine::analytic ? "analytic" : "branch-and-bound";
    j["boxes_explored"] = b.boxes_explored;
    j["converged"] = b.converged;
    return j;
}

json interval_to_json(const AdmissibleInterval& iv) {
    return json{{"lower", iv.lower}, {"upper", iv.upper}, {"nonempty", iv.nonempty}};
}

json droop_star_to_json(const DroopStar& d) {
    if (d.is_infinite()) return json("inf");
    return json(d.value());
}

void set_precision(std::ostream& out) {
    out << std::setprecision(17);
}

}  // namespace

json report_to_json(const AdmissibleReport& report, const json& config_echo) {
    json j;
    j["config"] = config_echo;
    j["node"] = report.node;
    j["envelope"] = {{"p_max", bound_to_json(report.envelope.p_max)},
                     {"p_min", bound_to_json(report.envelope.p_min)},
                     {"q_max", bound_to_json(report.envelope.q_max)},
                     {"q_min", bound_to_json(report.envelope.q_min)}};
    j["u_omega"] = interval_to_json(report.u_omega);
    j["u_v"] = interval_to_json(report.u_v);
    j["lambda_p_star"] = droop_star_to_json(report.lambda_p_star);
    j["lambda_q_star"] = droop_star_to_json(report.lambda_q_star);
    j["warnings"] = report.warnings;
    j["units"] = {{"u_omega", "p.u. active power"},
                  {"u_v", "p.u. reactive power"},
                  {"lambda_p_star", "rad/s per p.u."},
                  {"lambda_q_star", "p.u. per p.u."}};
    return j;
}

void write_droop_sweep_csv(std::ostream& out, const DroopSweepTable& table,
                           const std::string& config_echo) {
    set_precision(out);
    out << "# " << config_echo << " lambda_star=" << table.lambda_star.to_string()
        << " channel=" << (table.channel == Channel::frequency ? "frequency" : "voltage") << "\n";
    out << "lambda,u_lower,u_upper,nonempty,crossing\n";
    for (const DroopSweepRow& r : table.rows) {
        out << r.lambda << "," << r.u_lower << "," << r.u_upper << "," << (r.nonempty ? 1 : 0)
            << "," << (r.crossing ? 1 : 0) << "\n";
    }
}

void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows,
                           const std::string& axis_name, const std::string& config_echo) {
    set_precision(out);
    out << "# " << config_echo << "\n";
    out << axis_name << ",lambda_q_star\n";
    for (const SensitivityRow& r : rows) {
        out << r.axis_value << "," << r.lambda_q_star.to_string() << "\n";
    }
}

void write_trace_csv(std::ostream& out, const SimTrace& trace, const std::string& config_echo) {
    set_precision(out);
    out << "# " << config_echo << "\n";
    out << "time_s,theta_i,omega_i_hz,v_i_dev,u_p,u_q";
    for (int k : trace.neighbor_ids) out << ",theta_" << k << ",v_" << k << "_dev";
    out << ",margin_omega_hz,margin_v\n";
    for (std::size_t n = 0; n < trace.steps(); ++n) {
        out << trace.t[n] << "," << trace.theta[n] << "," << trace.omega[n] / kTwoPi << ","
            << trace.v[n] << "," << trace.u_p[n] << "," << trace.u_q[n];
        for (std::size_t j = 0; j < trace.neighbor_ids.size(); ++j) {
            out << "," << trace.nbr_theta[j][n] << "," << trace.nbr_v[j][n];
        }
        out << "," << trace.margin_omega[n] / kTwoPi << "," << trace.margin_v[n] << "\n";
    }
}

}  // namespace gridsafe
