#pragma once

#include "gridsafe/simulator.hpp"

#include <json.hpp>

#include <ostream>
#include <string>

namespace gridsafe {

/// JSON form of a per-node report; `config_echo` is copied in verbatim so
/// every artifact records the run that produced it.
nlohmann::json report_to_json(const AdmissibleReport& report, const nlohmann::json& config_echo);

/// Droop sweep CSV: a `#` config-echo line, then
/// lambda,u_lower,u_upper,nonempty,crossing. The lambda-star value is carried
/// in the header comment.
void write_droop_sweep_csv(std::ostream& out, const DroopSweepTable& table,
                           const std::string& config_echo);

/// Sensitivity sweep CSV: axis_value,lambda_q_star ("inf" when infinite).
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows,
                           const std::string& axis_name, const std::string& config_echo);

/// Trace CSV columns: time_s, theta_i, omega_i_hz, v_i_dev, u_p, u_q, then
/// theta_<k>, v_<k>_dev per neighbor, then margin_omega_hz, margin_v.
void write_trace_csv(std::ostream& out, const SimTrace& trace, const std::string& config_echo);

}  // namespace gridsafe
