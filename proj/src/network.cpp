#include "gridsafe/network.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace gridsafe {

namespace {

using nlohmann::json;

std::string node_str(int id) { return "node " + std::to_string(id); }

std::string line_str(const Line& l) {
    return "line (" + std::to_string(l.from) + ", " + std::to_string(l.to) + ")";
}

void require_finite(double x, const std::string& what) {
    if (!std::isfinite(x)) throw ValidationError(what + " must be finite");
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) { known = true; break; }
        }
        if (!known) {
            throw ParseError("unknown field '" + item.key() + "' in " + where);
        }
    }
}

double get_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    const json& v = obj.at(key);
    if (!v.is_number()) throw ParseError("field '" + std::string(key) + "' in " + where + " must be a number");
    return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ParseError("field '" + std::string(key) + "' in " + where + " must be an integer");
    return v.get<int>();
}

Interval get_interval(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ParseError("field '" + std::string(key) + "' in " + where + " must be [lo, hi]");
    }
    const double lo = v[0].get<double>();
    const double hi = v[1].get<double>();
    if (lo > hi) throw ValidationError("interval '" + std::string(key) + "' is empty (lo > hi)");
    return Interval(lo, hi);
}

// Coupling radii are the one place where null (= infinity) is allowed.
double get_radius(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    const json& v = obj.at(key);
    if (v.is_null()) return kInf;
    if (!v.is_number()) throw ParseError("field '" + std::string(key) + "' in " + where + " must be a number or null");
    const double x = v.get<double>();
    if (x < 0.0) throw ValidationError("coupling radius '" + std::string(key) + "' must be >= 0");
    return x;
}

}  // namespace

NetworkModel::NetworkModel(std::vector<Node> nodes, std::vector<Line> lines)
    : nodes_(std::move(nodes)), lines_(std::move(lines)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (index_.count(n.id)) throw ValidationError("duplicate node id " + std::to_string(n.id));
        if (!(n.params.tau > 0.0)) throw ValidationError(node_str(n.id) + ": tau must be positive");
        if (!(n.params.lambda_p > 0.0)) throw ValidationError(node_str(n.id) + ": droop must be positive (lambda_p)");
        if (!(n.params.lambda_q > 0.0)) throw ValidationError(node_str(n.id) + ": droop must be positive (lambda_q)");
        if (!(n.params.v_nom > 0.0)) throw ValidationError(node_str(n.id) + ": v_nom must be positive");
        index_[n.id] = i;
        neighbor_map_[n.id] = {n.id};  // i is always in N_i
    }
    std::set<std::pair<int, int>> seen;
    for (const Line& l : lines_) {
        if (!index_.count(l.from)) throw ValidationError(line_str(l) + " references undeclared node " + std::to_string(l.from));
        if (!index_.count(l.to)) throw ValidationError(line_str(l) + " references undeclared node " + std::to_string(l.to));
        require_finite(l.g, line_str(l) + ": g");
        require_finite(l.b, line_str(l) + ": b");
        auto key = std::minmax(l.from, l.to);
        if (!seen.insert(key).second) {
            throw ValidationError("duplicate admittance entry for pair (" + std::to_string(key.first) +
                                  ", " + std::to_string(key.second) + ")");
        }
        if (l.from != l.to) {
            neighbor_map_[l.from].insert(l.to);
            neighbor_map_[l.to].insert(l.from);
        }
    }
}

const InverterParams& NetworkModel::params(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown node id " + std::to_string(id));
    return nodes_[it->second].params;
}

const std::set<int>& NetworkModel::neighbors(int id) const {
    auto it = neighbor_map_.find(id);
    if (it == neighbor_map_.end()) throw std::out_of_range("unknown node id " + std::to_string(id));
    return it->second;
}

std::pair<double, double> NetworkModel::admittance(int i, int k) const {
    for (const Line& l : lines_) {
        if ((l.from == i && l.to == k) || (l.from == k && l.to == i)) return {l.g, l.b};
    }
    return {0.0, 0.0};
}

NetworkModel NetworkModel::with_droop(int id, double lambda_p, double lambda_q) const {
    std::vector<Node> nodes = nodes_;
    bool found = false;
    for (Node& n : nodes) {
        if (n.id == id) {
            n.params.lambda_p = lambda_p;
            n.params.lambda_q = lambda_q;
            found = true;
        }
    }
    if (!found) throw std::out_of_range("unknown node id " + std::to_string(id));
    return NetworkModel(std::move(nodes), lines_);
}

std::set<int> neighbors(const NetworkModel& model, int id) { return model.neighbors(id); }

LoadResult parse_network(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed network file: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("network file must be a JSON object");
    reject_unknown_keys(doc, {"format_version", "nodes", "lines", "safety"}, "top level");

    if (get_int(doc, "format_version", "top level") != 1) {
        throw ParseError("unsupported format_version (expected 1)");
    }
    if (!doc.contains("nodes") || !doc.at("nodes").is_array()) throw ParseError("'nodes' must be an array");
    if (!doc.contains("lines") || !doc.at("lines").is_array()) throw ParseError("'lines' must be an array");
    if (!doc.contains("safety") || !doc.at("safety").is_object()) throw ParseError("'safety' must be an object");

    std::vector<NetworkModel::Node> nodes;
    for (const json& jn : doc.at("nodes")) {
        if (!jn.is_object()) throw ParseError("node entries must be objects");
        reject_unknown_keys(jn, {"id", "tau", "lambda_p", "lambda_q", "v_nom", "p_nom", "q_nom"}, "node entry");
        NetworkModel::Node n;
        n.id = get_int(jn, "id", "node entry");
        const std::string where = node_str(n.id);
        n.params.tau = get_number(jn, "tau", where);
        n.params.lambda_p = get_number(jn, "lambda_p", where);
        n.params.lambda_q = get_number(jn, "lambda_q", where);
        n.params.v_nom = get_number(jn, "v_nom", where);
        n.params.p_nom = get_number(jn, "p_nom", where);
        n.params.q_nom = get_number(jn, "q_nom", where);
        nodes.push_back(n);
    }

    std::vector<Line> lines;
    for (const json& jl : doc.at("lines")) {
        if (!jl.is_object()) throw ParseError("line entries must be objects");
        reject_unknown_keys(jl, {"from", "to", "g", "b"}, "line entry");
        Line l;
        l.from = get_int(jl, "from", "line entry");
        l.to = get_int(jl, "to", "line entry");
        l.g = get_number(jl, "g", line_str(l));
        l.b = get_number(jl, "b", line_str(l));
        lines.push_back(l);
    }

    const json& js = doc.at("safety");
    reject_unknown_keys(js, {"s_v", "s_omega_hz", "s_theta", "delta_v", "delta_omega_hz"}, "safety");
    SafetySpec spec;
    spec.s_v = get_interval(js, "s_v", "safety");
    spec.set_omega_hz(get_interval(js, "s_omega_hz", "safety"));
    spec.s_theta = get_interval(js, "s_theta", "safety");
    const double half_pi = std::acos(-1.0) / 2.0;
    if (!(spec.s_theta.lo > -half_pi && spec.s_theta.hi < half_pi)) {
        throw ValidationError("s_theta must lie strictly inside (-pi/2, pi/2)");
    }
    spec.delta_v = get_radius(js, "delta_v", "safety");
    spec.set_delta_omega_hz(get_radius(js, "delta_omega_hz", "safety"));

    return LoadResult{NetworkModel(std::move(nodes), std::move(lines)), spec};
}

LoadResult load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_network(buf.str());
}

std::string serialize_network(const NetworkModel& model, const SafetySpec& safety) {
    json doc;
    doc["format_version"] = 1;
    doc["nodes"] = json::array();
    for (const auto& n : model.nodes()) {
        doc["nodes"].push_back({{"id", n.id},
                                {"tau", n.params.tau},
                                {"lambda_p", n.params.lambda_p},
                                {"lambda_q", n.params.lambda_q},
                                {"v_nom", n.params.v_nom},
                                {"p_nom", n.params.p_nom},
                                {"q_nom", n.params.q_nom}});
    }
    doc["lines"] = json::array();
    for (const Line& l : model.lines()) {
        doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"g", l.g}, {"b", l.b}});
    }
    json js;
    js["s_v"] = {safety.s_v.lo, safety.s_v.hi};
    js["s_omega_hz"] = {safety.s_omega_hz.lo, safety.s_omega_hz.hi};
    js["s_theta"] = {safety.s_theta.lo, safety.s_theta.hi};
    if (std::isfinite(safety.delta_v)) js["delta_v"] = safety.delta_v; else js["delta_v"] = nullptr;
    if (std::isfinite(safety.delta_omega_hz)) js["delta_omega_hz"] = safety.delta_omega_hz;
    else js["delta_omega_hz"] = nullptr;
    doc["safety"] = js;
    return doc.dump(2) + "\n";
}

void save_network(const std::string& path, const NetworkModel& model, const SafetySpec& safety) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write network file: " + path);
    out << serialize_network(model, safety);
}

}  // namespace gridsafe
