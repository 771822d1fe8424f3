#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dpt/cli_runner.hpp"

namespace dpt {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"scenario", {"name", "model", "asymptotic", "seed"}},
        {"model", {"n_atoms", "omega", "delta0", "delta1", "g", "gamma", "lambda", "n_max", "include_dephasing"}},
        {"initial", {"state", "m", "phi", "theta", "m_values", "weights"}},
        {"time", {"t_max", "n_out"}},
        {"solver", {"method", "rel_tol", "abs_tol", "check_positivity"}},
        {"outputs",
         {"echo", "conditioned", "fock_rates", "fock_n_atoms", "landscape_time", "cut_times", "cusp_mu"}},
        {"asymptotic", {"t_max", "n_out", "fan_radii", "fan_angles", "p_min", "p_max", "tie_tol"}},
        {"landscape", {"n_phi", "n_theta", "fan_radii", "fan_angles", "refine_depth", "max_edge"}},
        {"cut", {"n_alpha", "fan_points", "refine_depth", "max_step"}},
    };
    return s;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
}

double to_double(const std::string& where, std::string v) {
    boost::trim(v);
    if (v.empty()) fail(where, "empty value");
    if (v.find_first_of("xXpP") != std::string::npos) fail(where, "not a decimal number: '" + v + "'");
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(d))
        fail(where, "not a finite decimal number: '" + v + "'");
    return d;
}

long to_long(const std::string& where, const std::string& v) {
    const double d = to_double(where, v);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) fail(where, "not an integer: '" + v + "'");
    return static_cast<long>(d);
}

bool to_bool(const std::string& where, std::string v) {
    boost::trim(v);
    boost::to_lower(v);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    fail(where, "not a boolean: '" + v + "'");
}

std::vector<double> to_list(const std::string& where, const std::string& v) {
    std::vector<std::string> parts;
    boost::split(parts, v, boost::is_any_of(","));
    std::vector<double> out;
    for (auto& p : parts) {
        boost::trim(p);
        if (p.empty()) continue;
        out.push_back(to_double(where, p));
    }
    return out;
}

std::string lower_trim(std::string v) {
    boost::trim(v);
    boost::to_lower(v);
    return v;
}

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    ScenarioConfig c;
    const auto& sch = schema();
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) fail(section, "key outside any section");
        auto it = sch.find(section);
        if (it == sch.end()) fail("[" + section + "]", "unknown section");
        for (const auto& [key, node] : body) {
            const std::string where = "[" + section + "] " + key;
            if (!it->second.count(key)) fail(where, "unknown key");
            const std::string v = node.get_value<std::string>();
            if (section == "scenario") {
                if (key == "name") c.name = boost::trim_copy(v);
                else if (key == "model") {
                    const auto m = lower_trim(v);
                    if (m == "full") c.model = ModelKind::Full;
                    else if (m == "reduced") c.model = ModelKind::Reduced;
                    else if (m == "asymptotic") c.model = ModelKind::Asymptotic;
                    else fail(where, "expected full, reduced or asymptotic");
                } else if (key == "asymptotic") c.asymptotic = to_bool(where, v);
                else if (key == "seed") {
                    const long s = to_long(where, v);
                    if (s < 0) fail(where, "must be >= 0");
                    c.seed = static_cast<std::uint64_t>(s);
                }
            } else if (section == "model") {
                if (key == "n_atoms") {
                    c.n_atoms_list.clear();
                    for (double d : to_list(where, v)) {
                        if (d != std::floor(d)) fail(where, "atom numbers must be integers");
                        c.n_atoms_list.push_back(static_cast<int>(d));
                    }
                } else if (key == "omega") c.params.omega = to_double(where, v);
                else if (key == "delta0") c.params.delta0 = to_double(where, v);
                else if (key == "delta1") c.params.delta1 = to_double(where, v);
                else if (key == "g") c.params.g = to_double(where, v);
                else if (key == "gamma") c.params.gamma = to_double(where, v);
                else if (key == "lambda") c.params.lambda = to_double(where, v);
                else if (key == "n_max") c.params.n_max = static_cast<int>(to_long(where, v));
                else if (key == "include_dephasing") c.params.include_dephasing = to_bool(where, v);
            } else if (section == "initial") {
                if (key == "state") {
                    const auto s = lower_trim(v);
                    if (s == "dark") c.initial.kind = InitialKind::Dark;
                    else if (s == "dicke") c.initial.kind = InitialKind::Dicke;
                    else if (s == "coherent") c.initial.kind = InitialKind::Coherent;
                    else if (s == "mixed") c.initial.kind = InitialKind::Mixed;
                    else fail(where, "expected dark, dicke, coherent or mixed");
                } else if (key == "m") c.initial.m = to_double(where, v);
                else if (key == "phi") c.initial.phi = to_double(where, v);
                else if (key == "theta") c.initial.theta = to_double(where, v);
                else if (key == "m_values") c.initial.m_values = to_list(where, v);
                else if (key == "weights") c.initial.weights = to_list(where, v);
            } else if (section == "time") {
                if (key == "t_max") c.t_max = to_double(where, v);
                else if (key == "n_out") c.n_out = static_cast<int>(to_long(where, v));
            } else if (section == "solver") {
                if (key == "method") {
                    const auto m = lower_trim(v);
                    if (m == "auto") c.method = Method::Auto;
                    else if (m == "dp45") c.method = Method::Dp45;
                    else if (m == "extended") c.method = Method::Extended;
                    else fail(where, "expected auto, dp45 or extended");
                } else if (key == "rel_tol") c.rel_tol = to_double(where, v);
                else if (key == "abs_tol") c.abs_tol = to_double(where, v);
                else if (key == "check_positivity") c.check_positivity = to_bool(where, v);
            } else if (section == "outputs") {
                if (key == "echo") c.echo = to_bool(where, v);
                else if (key == "conditioned") c.conditioned = to_bool(where, v);
                else if (key == "fock_rates") c.fock_rates = to_bool(where, v);
                else if (key == "fock_n_atoms") c.fock_n_atoms = static_cast<int>(to_long(where, v));
                else if (key == "landscape_time") c.landscape_time = to_double(where, v);
                else if (key == "cut_times") c.cut_times = to_list(where, v);
                else if (key == "cusp_mu") c.cusp_mu = to_list(where, v);
            } else if (section == "asymptotic") {
                if (key == "t_max") c.asym_t_max = to_double(where, v);
                else if (key == "n_out") c.asym_n_out = static_cast<int>(to_long(where, v));
                else if (key == "fan_radii") c.rate.fan_radii = static_cast<int>(to_long(where, v));
                else if (key == "fan_angles") c.rate.fan_angles = static_cast<int>(to_long(where, v));
                else if (key == "p_min") c.rate.p_min = to_double(where, v);
                else if (key == "p_max") c.rate.p_max = to_double(where, v);
                else if (key == "tie_tol") c.rate.tie_tol = to_double(where, v);
            } else if (section == "landscape") {
                if (key == "n_phi") c.grid.n_phi = static_cast<int>(to_long(where, v));
                else if (key == "n_theta") c.grid.n_theta = static_cast<int>(to_long(where, v));
                else if (key == "fan_radii") c.grid.fan_radii = static_cast<int>(to_long(where, v));
                else if (key == "fan_angles") c.grid.fan_angles = static_cast<int>(to_long(where, v));
                else if (key == "refine_depth") c.grid.refine_depth = static_cast<int>(to_long(where, v));
                else if (key == "max_edge") c.grid.max_edge = to_double(where, v);
            } else if (section == "cut") {
                if (key == "n_alpha") c.cut.n_alpha = static_cast<int>(to_long(where, v));
                else if (key == "fan_points") c.cut.fan_points = static_cast<int>(to_long(where, v));
                else if (key == "refine_depth") c.cut.refine_depth = static_cast<int>(to_long(where, v));
                else if (key == "max_step") c.cut.max_step = to_double(where, v);
            }
        }
    }
    validate_config(c);
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

bool valid_m(double m, int n) {
    const double k = m + 0.5 * n;
    return k == std::floor(k) && k >= 0 && k <= n;
}

}  // namespace

void validate_config(const ScenarioConfig& c) {
    if (c.name.empty()) fail("[scenario] name", "must not be empty");
    for (char ch : c.name)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
            fail("[scenario] name", "only letters, digits, '_' and '-' are allowed");
    if (!(c.t_max > 0.0)) fail("[time] t_max", "must be > 0");
    if (c.n_out < 2) fail("[time] n_out", "must be >= 2");
    if (!(c.rel_tol > 0.0) || !(c.abs_tol > 0.0)) fail("[solver]", "tolerances must be > 0");

    const bool finite_n = c.model != ModelKind::Asymptotic;
    if (finite_n && c.n_atoms_list.empty()) fail("[model] n_atoms", "required for full and reduced models");
    for (int n : c.n_atoms_list) {
        if (n < 1) fail("[model] n_atoms", "must be >= 1");
        ModelParams p = c.params;
        p.n_atoms = n;
        try {
            p = p.resolved();
            if (c.model == ModelKind::Full) p.validate_full();
            else p.validate_reduced();
        } catch (const std::exception& e) {
            fail("[model]", e.what());
        }
        switch (c.initial.kind) {
            case InitialKind::Dicke:
                if (!valid_m(c.initial.m, n)) fail("[initial] m", "not a valid m for N=" + std::to_string(n));
                break;
            case InitialKind::Mixed:
                for (double m : c.initial.m_values)
                    if (!valid_m(m, n)) fail("[initial] m_values", "not a valid m for N=" + std::to_string(n));
                break;
            default:
                break;
        }
    }
    if (c.initial.kind == InitialKind::Mixed) {
        if (c.initial.m_values.empty() || c.initial.m_values.size() != c.initial.weights.size())
            fail("[initial]", "mixed state needs matching m_values and weights");
        double s = 0.0;
        for (double w : c.initial.weights) {
            if (w < 0.0) fail("[initial] weights", "must be >= 0");
            s += w;
        }
        if (!(s > 0.0)) fail("[initial] weights", "must not all vanish");
    }
    if (c.initial.kind == InitialKind::Coherent &&
        (!(c.initial.theta >= 0.0) || !(c.initial.theta <= std::numbers::pi)))
        fail("[initial] theta", "must lie in [0, pi]");

    const bool wants_asym = c.asymptotic || c.model == ModelKind::Asymptotic || c.landscape_time ||
                            !c.cut_times.empty() || !c.cusp_mu.empty();
    if (wants_asym) {
        if (c.model == ModelKind::Full) fail("[scenario] model", "asymptotic outputs need the reduced model");
        if (c.initial.kind != InitialKind::Dark && c.initial.kind != InitialKind::Coherent)
            fail("[initial] state", "asymptotic outputs need a coherent (or dark) initial state");
        ModelParams p = c.params;
        p.n_atoms = 1;
        try {
            p = p.resolved();
        } catch (const std::exception& e) {
            fail("[model]", e.what());
        }
        if (!(p.lambda > 1.0)) fail("[model] lambda", "asymptotic theory is set up for lambda > 1");
        if (!p.include_dephasing)
            fail("[model] include_dephasing", "asymptotic theory needs the J_z line (diffusion is indefinite without it)");
        if (c.asym_n_out != 0 && c.asym_n_out < 2) fail("[asymptotic] n_out", "must be >= 2");
    }
    if (!c.cusp_mu.empty() && c.initial.kind != InitialKind::Dark)
        fail("[outputs] cusp_mu", "the cusp line is defined for the dark-state quench");
    for (double mu : c.cusp_mu)
        if (!(mu > 0.0 && mu <= 1.0)) fail("[outputs] cusp_mu", "values must lie in (0, 1]");
    if (c.landscape_time && !(*c.landscape_time > 0.0)) fail("[outputs] landscape_time", "must be > 0");
    if (!c.cut_times.empty() && c.initial.kind != InitialKind::Dark)
        fail("[outputs] cut_times", "the s_x = 0 cut starts from the dark state");
    for (double t : c.cut_times)
        if (!(t > 0.0)) fail("[outputs] cut_times", "must be > 0");
    if (c.conditioned && c.model != ModelKind::Full) fail("[outputs] conditioned", "needs the full model");
    if (c.fock_rates) {
        if (!finite_n) fail("[outputs] fock_rates", "needs a finite-N model");
        if (c.fock_n_atoms != 0 &&
            std::find(c.n_atoms_list.begin(), c.n_atoms_list.end(), c.fock_n_atoms) == c.n_atoms_list.end())
            fail("[outputs] fock_n_atoms", "must be one of n_atoms");
    }
    if (c.grid.n_phi < 4 || c.grid.n_theta < 4) fail("[landscape]", "grid must be at least 4 x 4");
    if (c.cut.n_alpha < 8) fail("[cut] n_alpha", "must be >= 8");
}

}  // namespace dpt
