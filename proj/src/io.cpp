#include "dcgrid/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dcgrid/laplacian.hpp"

namespace dcgrid::io {

using json = nlohmann::json;

namespace {

/// Strict object reader: every key must be consumed or `finish` reports it.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ParseError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& at(const std::string& key) {
        if (!node_.contains(key)) throw ParseError(path_ + ": missing required key '" + key + "'");
        used_.insert(key);
        return node_.at(key);
    }

    double number(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number()) throw ParseError(field(key) + ": expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_number_unsigned()) throw ParseError(field(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_string()) throw ParseError(field(key) + ": expected a string");
        return v.get<std::string>();
    }

    const json& array(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_array()) throw ParseError(field(key) + ": expected an array");
        return v;
    }

    std::string field(const std::string& key) const { return path_ + "." + key; }
    const std::string& path() const { return path_; }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!used_.count(it.key())) throw ParseError(path_ + ": unknown key '" + it.key() + "'");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

ConverterParams read_converter(Reader& r, ConverterParams base) {
    base.inductance = r.number("inductance", base.inductance);
    base.resistance = r.number("resistance", base.resistance);
    base.capacitance = r.number("capacitance", base.capacitance);
    base.v_in = r.number("v_in", base.v_in);
    base.i_max = r.number("i_max", base.i_max);
    base.k_p = r.number("k_p", base.k_p);
    base.k_i = r.number("k_i", base.k_i);
    base.v_lower = r.number("v_lower", base.v_lower);
    base.v_upper = r.number("v_upper", base.v_upper);
    r.finish();
    return base;
}

ZipLoad read_load(const json& node, const std::string& path) {
    Reader r(node, path);
    ZipLoad d;
    d.conductance = r.number("conductance", 0.0);
    d.current = r.number("current", 0.0);
    d.power = r.number("power", 0.0);
    r.finish();
    return d;
}

void read_controller(Reader& r, mpc::OcpSpec& s) {
    s.steps = static_cast<int>(r.unsigned_integer("steps", static_cast<std::uint64_t>(s.steps)));
    s.sample = r.number("sample", s.sample);
    s.substeps = static_cast<int>(r.unsigned_integer("substeps", static_cast<std::uint64_t>(s.substeps)));
    s.voltage_weight = r.number("voltage_weight", s.voltage_weight);
    s.input_weight = r.number("input_weight", s.input_weight);
    s.contraction = r.number("contraction", s.contraction);
    s.voltage_halfwidth = r.number("voltage_halfwidth", s.voltage_halfwidth);
    s.current_fraction = r.number("current_fraction", s.current_fraction);
    s.sigma_halfwidth = r.number("sigma_halfwidth", s.sigma_halfwidth);
    s.terminal_weight = r.number("terminal_weight", s.terminal_weight);
    s.calibration_margin = r.number("calibration_margin", s.calibration_margin);
    s.max_iterations =
        static_cast<int>(r.unsigned_integer("max_iterations", static_cast<std::uint64_t>(s.max_iterations)));
    s.tolerance = r.number("tolerance", s.tolerance);
    s.feasibility_tolerance = r.number("feasibility_tolerance", s.feasibility_tolerance);
    r.finish();
}

std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

json load_json(const ZipLoad& d) { return {{"conductance", d.conductance}, {"current", d.current}, {"power", d.power}}; }

const char* lines_name(sim::LineDynamics l) { return l == sim::LineDynamics::Dynamic ? "dynamic" : "algebraic"; }

json number(double x) { return std::isfinite(x) ? json(x) : json(x > 0 ? "inf" : (x < 0 ? "-inf" : "nan")); }

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void open(std::ofstream& out, const std::filesystem::path& path) {
    out.open(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
}

}  // namespace

sim::Scenario parse_scenario(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + line_column(text, e.byte) + ": malformed JSON (" + e.what() + ")");
    }
    sim::Scenario s;
    Reader root(doc, origin);
    s.name = root.string("name", "");
    (void)root.string("description", "");
    s.v_ref = root.number("v_ref");
    s.t_end = root.number("t_end");
    s.seed = root.unsigned_integer("seed", s.seed);
    s.step = root.number("integrator_step", 0.0);
    s.initial_spread = root.number("initial_spread", s.initial_spread);
    s.uncertainty = root.number("uncertainty", s.uncertainty);
    s.decimation = root.unsigned_integer("decimation", s.decimation);
    s.workers = static_cast<unsigned>(root.unsigned_integer("workers", s.workers));
    const auto lines = root.string("line_dynamics", "algebraic");
    if (lines == "algebraic") {
        s.lines = sim::LineDynamics::Algebraic;
    } else if (lines == "dynamic") {
        s.lines = sim::LineDynamics::Dynamic;
    } else {
        throw ParseError(root.field("line_dynamics") + ": expected 'algebraic' or 'dynamic'");
    }

    ConverterParams defaults;
    double default_cutoff = 0.0;
    bool has_default_cutoff = false;
    if (root.has("converter_defaults")) {
        Reader r(root.at("converter_defaults"), root.field("converter_defaults"));
        defaults = read_converter(r, defaults);
    }
    if (root.has("load_cutoff")) {
        default_cutoff = root.number("load_cutoff");
        has_default_cutoff = true;
    }

    const auto& nodes = root.array("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Reader r(nodes[i], root.field("nodes") + "[" + std::to_string(i) + "]");
        ConverterParams p = defaults;
        if (r.has("converter")) {
            Reader c(r.at("converter"), r.field("converter"));
            p = read_converter(c, defaults);
        }
        LoadModel load;
        if (r.has("load")) load.nominal = read_load(r.at("load"), r.field("load"));
        load.actual = load.nominal;
        if (r.has("load_cutoff")) {
            load.v_cutoff = r.number("load_cutoff");
        } else {
            load.v_cutoff = has_default_cutoff ? default_cutoff : 0.05 * p.v_in;
        }
        r.finish();
        s.converters.push_back(p);
        s.loads.push_back(load);
    }

    std::vector<Edge> edges;
    const auto& edge_list = root.array("edges");
    for (std::size_t e = 0; e < edge_list.size(); ++e) {
        Reader r(edge_list[e], root.field("edges") + "[" + std::to_string(e) + "]");
        Edge edge;
        const double from = r.number("from");
        const double to = r.number("to");
        if (from < 0 || to < 0 || from != std::floor(from) || to != std::floor(to)) {
            throw ParseError(r.path() + ": node ids must be non-negative integers");
        }
        edge.source = static_cast<std::size_t>(from);
        edge.sink = static_cast<std::size_t>(to);
        edge.resistance = r.number("resistance");
        edge.inductance = r.number("inductance", 0.0);
        if (!(edge.resistance > 0.0)) {
            throw ParseError(r.path() + " (" + std::to_string(edge.source) + "-" + std::to_string(edge.sink) +
                             "): resistance must be positive, got " + fmt(edge.resistance));
        }
        if (edge.inductance < 0.0) {
            throw ParseError(r.path() + " (" + std::to_string(edge.source) + "-" + std::to_string(edge.sink) +
                             "): inductance must be non-negative");
        }
        r.finish();
        edges.push_back(edge);
    }
    s.topology = NetworkTopology(nodes.size(), std::move(edges));

    if (root.has("schedule")) {
        const auto& list = root.array("schedule");
        for (std::size_t k = 0; k < list.size(); ++k) {
            Reader r(list[k], root.field("schedule") + "[" + std::to_string(k) + "]");
            sim::LoadStep step;
            step.time = r.number("time");
            const double node = r.number("node");
            if (node < 0 || node != std::floor(node)) throw ParseError(r.field("node") + ": expected a node id");
            step.node = static_cast<std::size_t>(node);
            step.load = read_load(r.at("load"), r.field("load"));
            r.finish();
            s.schedule.push_back(step);
        }
    }
    if (root.has("controller")) {
        Reader r(root.at("controller"), root.field("controller"));
        read_controller(r, s.ocp);
    }
    if (root.has("monitors")) {
        Reader r(root.at("monitors"), root.field("monitors"));
        s.voltage_tolerance = r.number("voltage_tolerance", s.voltage_tolerance);
        s.power_tolerance = r.number("power_tolerance", s.power_tolerance);
        s.decrease_fraction = r.number("decrease_fraction", s.decrease_fraction);
        s.timescale_threshold = r.number("timescale_threshold", s.timescale_threshold);
        if (r.has("enabled")) {
            for (const auto& name : r.array("enabled")) {
                if (!name.is_string()) throw ParseError(r.field("enabled") + ": expected monitor names");
                s.monitors.push_back(name.get<std::string>());
            }
        }
        r.finish();
    }
    root.finish();
    s.validate();
    return s;
}

sim::Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open scenario file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

std::string canonical_json(const sim::Scenario& s) {
    json doc;
    doc["name"] = s.name;
    doc["v_ref"] = s.v_ref;
    doc["t_end"] = s.t_end;
    doc["integrator_step"] = s.step;
    doc["initial_spread"] = s.initial_spread;
    doc["uncertainty"] = s.uncertainty;
    doc["decimation"] = s.decimation;
    doc["line_dynamics"] = lines_name(s.lines);
    json nodes = json::array();
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        const auto& p = s.converters[i];
        nodes.push_back({{"converter",
                          {{"inductance", p.inductance},
                           {"resistance", p.resistance},
                           {"capacitance", p.capacitance},
                           {"v_in", p.v_in},
                           {"i_max", p.i_max},
                           {"k_p", p.k_p},
                           {"k_i", p.k_i},
                           {"v_lower", p.v_lower},
                           {"v_upper", p.v_upper}}},
                         {"load", load_json(s.loads[i].nominal)},
                         {"load_cutoff", s.loads[i].v_cutoff}});
    }
    doc["nodes"] = nodes;
    json edges = json::array();
    for (const auto& e : s.topology.edges()) {
        edges.push_back({{"from", e.source}, {"to", e.sink}, {"resistance", e.resistance}, {"inductance", e.inductance}});
    }
    doc["edges"] = edges;
    json schedule = json::array();
    for (const auto& st : s.schedule) schedule.push_back({{"time", st.time}, {"node", st.node}, {"load", load_json(st.load)}});
    doc["schedule"] = schedule;
    const auto& c = s.ocp;
    doc["controller"] = {{"steps", c.steps},
                         {"sample", c.sample},
                         {"substeps", c.substeps},
                         {"voltage_weight", c.voltage_weight},
                         {"input_weight", c.input_weight},
                         {"contraction", c.contraction},
                         {"voltage_halfwidth", c.voltage_halfwidth},
                         {"current_fraction", c.current_fraction},
                         {"sigma_halfwidth", c.sigma_halfwidth},
                         {"terminal_weight", c.terminal_weight},
                         {"calibration_margin", c.calibration_margin},
                         {"max_iterations", c.max_iterations},
                         {"tolerance", c.tolerance},
                         {"feasibility_tolerance", c.feasibility_tolerance}};
    doc["monitors"] = {{"voltage_tolerance", s.voltage_tolerance},
                       {"power_tolerance", s.power_tolerance},
                       {"decrease_fraction", s.decrease_fraction},
                       {"timescale_threshold", s.timescale_threshold},
                       {"enabled", s.monitors}};
    return doc.dump();
}

std::uint64_t scenario_hash(const sim::Scenario& scenario) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : canonical_json(scenario)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string run_directory_name(const sim::Scenario& scenario) {
    return "run-" + hex64(scenario_hash(scenario)) + "-seed" + std::to_string(scenario.seed);
}

std::string report_json(const sim::RunResult& r, const sim::Scenario& s) {
    json doc;
    doc["scenario_hash"] = hex64(scenario_hash(s));
    doc["scenario_name"] = s.name;
    doc["seed"] = s.seed;
    doc["line_dynamics"] = lines_name(s.lines);
    doc["completed"] = r.completed;
    doc["all_passed"] = r.all_passed();
    if (r.error_kind) {
        doc["error"] = {{"kind", to_string(*r.error_kind)}, {"message", r.error}};
    }
    json monitors = json::array();
    for (const auto& m : r.monitors) {
        monitors.push_back(
            {{"name", m.name}, {"pass", m.pass}, {"metric", number(m.metric)}, {"threshold", number(m.threshold)}, {"detail", m.detail}});
    }
    doc["monitors"] = monitors;
    const auto& st = r.stats;
    doc["statistics"] = {{"max_current_ratio", st.max_current_ratio},
                         {"min_current_A", st.min_current},
                         {"max_voltage_error_V", st.max_voltage_error},
                         {"max_kernel_distance_V", st.max_kernel_distance},
                         {"min_value_decrease_margin", number(st.min_decrease_margin)},
                         {"value_decrease_share", st.decrease_share},
                         {"warm_start_share", st.warm_start_share},
                         {"modulation_violations", st.modulation_violations},
                         {"infeasible_solves", st.infeasible_solves},
                         {"max_abs_dw_A", st.max_dw},
                         {"plant_step_s", st.plant_step},
                         {"timescale_ratio", number(st.timescale_ratio)}};
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"time_s", e.time}, {"max_voltage_error_V", e.max_voltage_error}, {"power_mismatch", e.power_mismatch}});
    }
    doc["steady_epochs"] = epochs;
    doc["terminal_weights"] = r.terminal_weights;
    doc["controller"] = {{"steps", s.ocp.steps}, {"sample_s", s.ocp.sample}, {"horizon_s", s.ocp.horizon()}};
    doc["wall_time_s"] = r.wall_time;
    return doc.dump(2);
}

void write_outputs(const sim::RunResult& r, const sim::Scenario& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& tr = r.trace;
    const std::size_t n = s.node_count();
    const std::size_t rows = tr.time.size();

    auto write_table = [&](const std::string& file, const std::vector<std::string>& header,
                           const std::function<void(std::size_t, std::vector<double>&)>& row) {
        std::ofstream out;
        open(out, dir / file);
        for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
        out << '\n';
        std::vector<double> values;
        for (std::size_t k = 0; k < rows; ++k) {
            values.clear();
            row(k, values);
            for (std::size_t c = 0; c < values.size(); ++c) out << (c ? "," : "") << fmt(values[c]);
            out << '\n';
        }
    };
    auto per_node = [&](const std::string& stem, const std::string& unit) {
        std::vector<std::string> cols;
        for (std::size_t i = 0; i < n; ++i) cols.push_back(stem + std::to_string(i + 1) + "_" + unit);
        return cols;
    };
    auto cat = [](std::vector<std::string> a, const std::vector<std::string>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    auto push = [&](std::vector<double>& out, const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    };

    std::vector<std::string> header{"time_s"};
    header = cat(header, per_node("v", "V"));
    header = cat(header, per_node("itilde", "A"));
    header = cat(header, per_node("sigma", "rad"));
    header = cat(header, per_node("iref", "A"));
    header = cat(header, per_node("pload", "W"));
    header = cat(header, per_node("pconv", "W"));
    header = cat(header, per_node("value", "1"));
    header = cat(header, per_node("idev", "A"));
    header = cat(header, {"kernel_distance_V", "veq_gap_V", "veq_offset_V"});
    write_table("trace.csv", header, [&](std::size_t k, std::vector<double>& o) {
        o.push_back(tr.time[k]);
        push(o, tr.v[k]);
        push(o, tr.i_tilde[k]);
        push(o, tr.sigma[k]);
        push(o, tr.i_ref[k]);
        push(o, tr.load_power[k]);
        push(o, tr.provided_power[k]);
        push(o, tr.value[k]);
        push(o, tr.current_deviation[k]);
        o.push_back(tr.kernel_distance[k]);
        o.push_back(tr.equilibrium_gap[k]);
        o.push_back(tr.equilibrium_offset[k]);
    });
    write_table("fig4_voltages.csv", cat(cat({"time_s"}, per_node("v", "V")), {"vref_V"}),
                [&](std::size_t k, std::vector<double>& o) {
                    o.push_back(tr.time[k]);
                    push(o, tr.v[k]);
                    o.push_back(s.v_ref);
                });
    write_table("fig5_currents.csv", cat(cat(cat({"time_s"}, per_node("i", "A")), per_node("imax", "A")), per_node("iref", "A")),
                [&](std::size_t k, std::vector<double>& o) {
                    o.push_back(tr.time[k]);
                    for (std::size_t i = 0; i < n; ++i) {
                        o.push_back(tr.i_tilde[k](static_cast<Eigen::Index>(i)) + s.converters[i].i_shift());
                    }
                    for (std::size_t i = 0; i < n; ++i) o.push_back(s.converters[i].i_max);
                    push(o, tr.i_ref[k]);
                });
    write_table("fig6_power.csv", cat(cat({"time_s"}, per_node("pload", "W")), per_node("pconv", "W")),
                [&](std::size_t k, std::vector<double>& o) {
                    o.push_back(tr.time[k]);
                    push(o, tr.load_power[k]);
                    push(o, tr.provided_power[k]);
                });
    write_table("fig7_current_deviation.csv", cat({"time_s"}, per_node("idev", "A")),
                [&](std::size_t k, std::vector<double>& o) {
                    o.push_back(tr.time[k]);
                    push(o, tr.current_deviation[k]);
                });
    write_table("fig8_voltage_equilibrium.csv", {"time_s", "veq_gap_V", "veq_offset_V"},
                [&](std::size_t k, std::vector<double>& o) {
                    o.push_back(tr.time[k]);
                    o.push_back(tr.equilibrium_gap[k]);
                    o.push_back(tr.equilibrium_offset[k]);
                });
    write_table("fig9_kernel.csv", {"time_s", "kernel_distance_V"}, [&](std::size_t k, std::vector<double>& o) {
        o.push_back(tr.time[k]);
        o.push_back(tr.kernel_distance[k]);
    });

    {
        // Two-node ramp: admittance 10 S, C = 1 mF per node, d = (4, 10), u = (10, 5).
        Matrix lap(2, 2);
        lap << 10, -10, -10, 10;
        const Vector cap = Vector::Constant(2, 1e-3);
        const Vector d = (Vector(2) << 4, 10).finished();
        const Vector u = (Vector(2) << 10, 5).finished();
        const auto ramp = analysis::ramp_experiment(cap, lap, d, u, Vector::Zero(2), 0.05, 1e-5);
        const auto spectrum = analysis::pencil_eigs(cap, lap);
        const double b_u = (u - d).norm();
        std::ofstream out;
        open(out, dir / "fig3_ramp.csv");
        out << "time_s,v1_V,v2_V,mean_V,kernel_distance_V,transient_bound_V\n";
        for (std::size_t k = 0; k < ramp.time.size(); k += 10) {
            out << fmt(ramp.time[k]) << ',' << fmt(ramp.v[k](0)) << ',' << fmt(ramp.v[k](1)) << ','
                << fmt(ramp.mean[k]) << ',' << fmt(ramp.kernel_distance[k]) << ','
                << fmt(analysis::transient_bound(spectrum, b_u, ramp.time[k])) << '\n';
        }
    }

    {
        std::ofstream out;
        open(out, dir / "mpc_log.csv");
        out << "node,sample,w_A,dw_A,u0_A,value,status,iterations,feasible,warm_start_feasible,"
               "paired_warm_start_feasible,terminal_feasible,decrease_margin,terminal_weight\n";
        for (const auto& rec : r.log) {
            out << rec.node << ',' << rec.sample << ',' << fmt(rec.w) << ',' << fmt(rec.dw) << ',' << fmt(rec.u0) << ','
                << fmt(rec.value) << ',' << mpc::to_string(rec.status) << ',' << rec.iterations << ','
                << rec.feasible << ',' << rec.warm_start_feasible << ',' << rec.paired_warm_start_feasible << ','
                << rec.terminal_feasible << ',' << fmt(rec.decrease_margin) << ',' << fmt(rec.terminal_weight)
                << '\n';
        }
    }
    std::ofstream out;
    open(out, dir / "report.json");
    out << report_json(r, s) << '\n';
}

std::string analyze_json(const sim::Scenario& s, double input_bound) {
    json doc;
    doc["scenario_hash"] = hex64(scenario_hash(s));
    const Matrix lap = laplacian(s.topology);
    Vector cap(static_cast<Eigen::Index>(s.node_count()));
    for (std::size_t i = 0; i < s.node_count(); ++i) cap(static_cast<Eigen::Index>(i)) = s.converters[i].capacitance;
    const auto spectrum = analysis::pencil_eigs(cap, lap);
    doc["pencil_eigenvalues"] = std::vector<double>(spectrum.eigenvalues.data(),
                                                    spectrum.eigenvalues.data() + spectrum.eigenvalues.size());
    doc["laplacian_eigenvalues_unit_capacitance"] = [&] {
        const auto unit = analysis::pencil_eigs(Vector::Ones(cap.size()), lap);
        return std::vector<double>(unit.eigenvalues.data(), unit.eigenvalues.data() + unit.eigenvalues.size());
    }();
    if (!(input_bound > 0.0)) {
        for (const auto& c : s.converters) input_bound = std::max(input_bound, c.input_bound());
    }
    doc["input_bound_A"] = input_bound;
    doc["eta_V"] = analysis::eta_bound(spectrum, input_bound);
    doc["deviation_gain"] = analysis::deviation_gain(spectrum);
    const auto ts = validate_timescale(s.converters, s.topology, s.loads, s.timescale_threshold);
    doc["timescale"] = {{"node_min_s", ts.node_min},
                        {"edge_max_s", ts.edge_max},
                        {"ratio", number(ts.ratio)},
                        {"threshold", ts.threshold},
                        {"limiting_node", ts.limiting_node},
                        {"pass", ts.pass}};
    std::vector<ZipLoad> loads;
    Vector inj(cap.size());
    analysis::EquilibriumOptions opt;
    opt.v_ref = s.v_ref;
    opt.v_lower = -std::numeric_limits<double>::infinity();
    opt.v_upper = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.node_count(); ++i) {
        loads.push_back(s.loads[i].nominal);
        opt.v_lower = std::max(opt.v_lower, s.converters[i].v_lower);
        opt.v_upper = std::min(opt.v_upper, s.converters[i].v_upper);
        opt.v_cutoff = std::max(opt.v_cutoff, s.loads[i].v_cutoff);
        inj(static_cast<Eigen::Index>(i)) = zip_current(s.loads[i].nominal, s.v_ref, s.loads[i].v_cutoff);
    }
    const auto eq = analysis::network_equilibrium(s.topology, loads, inj, opt);
    json roots = json::array();
    for (const auto& root : eq.roots) {
        roots.push_back({{"v_V", std::vector<double>(root.v.data(), root.v.data() + root.v.size())},
                         {"residual", root.residual},
                         {"iterations", root.iterations},
                         {"in_band", root.in_band}});
    }
    doc["equilibrium"] = {{"injections_A", std::vector<double>(inj.data(), inj.data() + inj.size())},
                          {"v_V", std::vector<double>(eq.v.data(), eq.v.data() + eq.v.size())},
                          {"line_currents_A",
                           std::vector<double>(eq.line_currents.data(), eq.line_currents.data() + eq.line_currents.size())},
                          {"in_band", eq.in_band},
                          {"multiple_roots", eq.multiple},
                          {"kernel_direction", eq.kernel_direction},
                          {"roots", roots}};
    return doc.dump(2);
}

}  // namespace dcgrid::io
