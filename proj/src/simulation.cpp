#include "dcgrid/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "dcgrid/integrator.hpp"
#include "dcgrid/laplacian.hpp"
#include "dcgrid/primary.hpp"

namespace dcgrid::sim {

const std::vector<std::string>& monitor_names() {
    static const std::vector<std::string> names = {"current_limit",  "voltage_regulation",     "power_balance",
                                                   "value_decrease", "warm_start_feasibility", "timescale"};
    return names;
}

void Scenario::validate() const {
    const auto n = node_count();
    if (n == 0) fail(ErrorKind::Config, "scenario has no nodes");
    topology.require_connected();
    if (converters.size() != n) fail(ErrorKind::Config, "converter count does not match node count");
    if (loads.size() != n) fail(ErrorKind::Config, "load count does not match node count");
    (void)line_conductances(topology);
    for (std::size_t i = 0; i < n; ++i) {
        converters[i].validate(i);
        loads[i].validate(i);
        if (!(v_ref > converters[i].v_lower && v_ref < converters[i].v_upper)) {
            fail(ErrorKind::Parameter, "node " + std::to_string(i) + ": v_ref must lie inside the voltage band");
        }
    }
    ocp.validate();
    if (!(t_end > 0.0)) fail(ErrorKind::Parameter, "t_end must be positive");
    if (step < 0.0) fail(ErrorKind::Parameter, "integrator step must be non-negative");
    if (step > ocp.sample / 10.0 * (1.0 + 1e-12)) {
        fail(ErrorKind::Parameter, "integrator step must not exceed sample / 10");
    }
    for (const auto& s : schedule) {
        if (s.node >= n) fail(ErrorKind::Config, "load step refers to unknown node " + std::to_string(s.node));
        if (s.time < 0.0 || s.time > t_end) fail(ErrorKind::Config, "load step time outside [0, t_end]");
        if (s.load.conductance < 0.0 || s.load.current < 0.0 || s.load.power < 0.0) {
            fail(ErrorKind::Parameter, "load step at node " + std::to_string(s.node) + " has a negative coefficient");
        }
    }
    if (lines == LineDynamics::Dynamic) {
        for (const auto& e : topology.edges()) {
            if (!(e.inductance > 0.0)) {
                fail(ErrorKind::Config, "dynamic lines need a positive inductance on edge (" +
                                            std::to_string(e.source) + ", " + std::to_string(e.sink) + ")");
            }
        }
    }
    if (!(initial_spread >= 0.0)) fail(ErrorKind::Parameter, "initial_spread must be non-negative");
    if (!(uncertainty >= 0.0 && uncertainty < 1.0)) fail(ErrorKind::Parameter, "uncertainty must lie in [0, 1)");
    if (!(voltage_tolerance >= 0.0)) fail(ErrorKind::Parameter, "voltage_tolerance must be non-negative");
    if (!(power_tolerance > 0.0)) fail(ErrorKind::Parameter, "power_tolerance must be positive");
    if (!(decrease_fraction >= 0.0 && decrease_fraction <= 1.0)) {
        fail(ErrorKind::Parameter, "decrease_fraction must lie in [0, 1]");
    }
    if (decimation == 0) fail(ErrorKind::Parameter, "decimation must be >= 1");
    if (workers == 0) fail(ErrorKind::Parameter, "workers must be >= 1");
    for (const auto& name : monitors) {
        const auto& all = monitor_names();
        if (std::find(all.begin(), all.end(), name) == all.end()) fail(ErrorKind::Config, "unknown monitor " + name);
    }
}

double Scenario::plant_step() const {
    double h = step > 0.0 ? step : ocp.sample / 50.0;
    if (lines == LineDynamics::Dynamic) {
        for (const auto& e : topology.edges()) h = std::min(h, 0.5 * e.inductance / e.resistance);
    }
    const double count = std::ceil(ocp.sample / h - 1e-9);
    return ocp.sample / count;
}

namespace {

/// Cached matrices for repeated right-hand-side evaluations.
struct Plant {
    const Scenario& scenario;
    std::size_t n;
    std::size_t m;
    bool dynamic;
    Matrix lap;
    Matrix incidence;
    Vector conductance;
    Vector resistance;
    Vector inductance;

    explicit Plant(const Scenario& s)
        : scenario(s),
          n(s.node_count()),
          m(s.topology.edge_count()),
          dynamic(s.lines == LineDynamics::Dynamic),
          lap(laplacian(s.topology)),
          incidence(build_incidence(s.topology)),
          conductance(line_conductances(s.topology)),
          resistance(static_cast<Eigen::Index>(m)),
          inductance(static_cast<Eigen::Index>(m)) {
        for (std::size_t e = 0; e < m; ++e) {
            resistance(static_cast<Eigen::Index>(e)) = s.topology.edges()[e].resistance;
            inductance(static_cast<Eigen::Index>(e)) = s.topology.edges()[e].inductance;
        }
    }

    std::size_t size() const { return 3 * n + (dynamic ? m : 0); }

    Vector rhs(const Vector& x, const Vector& u, const std::vector<ZipLoad>& loads) const {
        const auto nn = static_cast<Eigen::Index>(n);
        const auto v = x.head(nn);
        Vector net = dynamic ? Vector(incidence.transpose() * x.tail(static_cast<Eigen::Index>(m))) : Vector(lap * v);
        Vector dx(x.size());
        for (Eigen::Index i = 0; i < nn; ++i) {
            const auto& p = scenario.converters[static_cast<std::size_t>(i)];
            const double cutoff = scenario.loads[static_cast<std::size_t>(i)].v_cutoff;
            const double drawn = zip_current(loads[static_cast<std::size_t>(i)], v(i), cutoff);
            dx(i) = (x(nn + i) + p.i_shift() - drawn - net(i)) / p.capacitance;
            const auto d = primary::rhs({x(nn + i), x(2 * nn + i)}, u(i), p);
            dx(nn + i) = d.di_tilde;
            dx(2 * nn + i) = d.dsigma;
        }
        if (dynamic) {
            const auto ie = x.tail(static_cast<Eigen::Index>(m));
            dx.tail(static_cast<Eigen::Index>(m)) =
                (incidence * v - resistance.cwiseProduct(ie)).cwiseQuotient(inductance);
        }
        return dx;
    }

    double losses(const Vector& x) const {
        const auto v = x.head(static_cast<Eigen::Index>(n));
        if (dynamic) {
            const auto ie = x.tail(static_cast<Eigen::Index>(m));
            return resistance.dot(ie.cwiseProduct(ie));
        }
        return v.dot(lap * v);
    }
};

ZipLoad perturb(const ZipLoad& nominal, double radius, std::mt19937_64& rng) {
    if (radius == 0.0) return nominal;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::Vector3d xi;
    do {
        xi = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    } while (xi.squaredNorm() > 1.0);
    return {nominal.conductance * (1.0 + radius * xi(0)), nominal.current * (1.0 + radius * xi(1)),
            nominal.power * (1.0 + radius * xi(2))};
}

struct NodeController {
    std::vector<double> previous;
    double weight = 1.0;
    bool calibrate = true;
    double w_prev = std::numeric_limits<double>::quiet_NaN();
};

struct NodeOutcome {
    MpcRecord record;
    double u_eq = 0.0;
    bool decrease_ok = false;
    bool calibration_failed = false;
};

}  // namespace

Vector pack(const NetworkState& state) {
    const auto n = state.v.size();
    Vector x(3 * n + state.line_currents.size());
    x << state.v, state.i_tilde, state.sigma, state.line_currents;
    return x;
}

NetworkState unpack(const Scenario& scenario, const Vector& packed) {
    const auto n = static_cast<Eigen::Index>(scenario.node_count());
    NetworkState s;
    s.v = packed.segment(0, n);
    s.i_tilde = packed.segment(n, n);
    s.sigma = packed.segment(2 * n, n);
    s.line_currents = packed.tail(packed.size() - 3 * n);
    return s;
}

Vector closed_loop_rhs(const Scenario& scenario, const Vector& state, const Vector& refs,
                       const std::vector<ZipLoad>& loads) {
    const Plant plant(scenario);
    if (static_cast<std::size_t>(state.size()) != plant.size()) fail(ErrorKind::Config, "state has the wrong size");
    Vector u = refs;
    for (std::size_t i = 0; i < plant.n; ++i) u(static_cast<Eigen::Index>(i)) -= scenario.converters[i].i_shift();
    return plant.rhs(state, u, loads);
}

bool RunResult::all_passed() const {
    return completed && std::all_of(monitors.begin(), monitors.end(), [](const auto& m) { return m.pass; });
}

RunResult run(const Scenario& scenario) {
    scenario.validate();
    const auto started = std::chrono::steady_clock::now();
    const Plant plant(scenario);
    const std::size_t n = plant.n;
    const auto nn = static_cast<Eigen::Index>(n);
    const auto& spec = scenario.ocp;
    const double delta = spec.sample;
    const double h = scenario.plant_step();
    const auto substeps = static_cast<long long>(std::llround(delta / h));
    const auto samples = static_cast<std::size_t>(std::ceil(scenario.t_end / delta - 1e-9));

    RunResult result;
    result.stats.plant_step = h;
    result.stats.min_current = std::numeric_limits<double>::infinity();
    result.stats.min_decrease_margin = std::numeric_limits<double>::infinity();
    const auto timescale = validate_timescale(scenario.converters, scenario.topology, scenario.loads,
                                              scenario.timescale_threshold);
    result.stats.timescale_ratio = timescale.ratio;

    // Load steps snapped to sample boundaries, stable within a boundary.
    std::vector<std::pair<std::size_t, LoadStep>> steps;
    for (const auto& s : scenario.schedule) {
        steps.emplace_back(static_cast<std::size_t>(std::llround(s.time / delta)), s);
    }
    std::stable_sort(steps.begin(), steps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::mt19937_64 rng(scenario.seed);
    std::uniform_real_distribution<double> spread(-scenario.initial_spread, scenario.initial_spread);
    NetworkState initial;
    initial.v.resize(nn);
    for (Eigen::Index i = 0; i < nn; ++i) initial.v(i) = scenario.v_ref + spread(rng);
    initial.i_tilde = Vector::Zero(nn);
    initial.sigma = Vector::Zero(nn);
    if (plant.dynamic) initial.line_currents = plant.conductance.cwiseProduct(plant.incidence * initial.v);
    Vector x = pack(initial);

    std::vector<ZipLoad> nominal(n), actual(n);
    for (std::size_t i = 0; i < n; ++i) nominal[i] = scenario.loads[i].nominal;
    std::vector<NodeController> controllers(n);
    const double v_tol =
        scenario.voltage_tolerance > 0.0 ? scenario.voltage_tolerance : (scenario.uncertainty > 0.0 ? 15.0 : 10.0);

    std::size_t current_violations = 0;
    std::string current_detail;
    std::size_t decrease_ok = 0, decrease_total = 0, warm_ok = 0;
    std::size_t calibration_failures = 0;
    long long global_step = 0;

    // Power bookkeeping averaged over the trailing samples so that per-sample load redraws
    // and the capacitor storage term do not masquerade as imbalance.
    constexpr std::size_t kBalanceWindow = 10;
    std::deque<std::pair<double, double>> balance;  // (provided - drawn - losses, drawn) per sample
    double balance_residual = 0.0, balance_drawn = 0.0;
    auto accumulate_balance = [&]() {
        const auto v = x.head(nn);
        double provided = 0.0, drawn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            provided += v(ii) * (x(nn + ii) + scenario.converters[i].i_shift());
            drawn += v(ii) * zip_current(actual[i], v(ii), scenario.loads[i].v_cutoff);
        }
        balance_residual += provided - drawn - plant.losses(x);
        balance_drawn += drawn;
    };
    auto epoch_check = [&](double t) {
        EpochCheck c;
        c.time = t;
        const auto v = x.head(nn);
        for (Eigen::Index i = 0; i < nn; ++i) {
            c.max_voltage_error = std::max(c.max_voltage_error, std::abs(v(i) - scenario.v_ref));
        }
        double residual = 0.0, drawn = 0.0;
        for (const auto& [r, d] : balance) {
            residual += r;
            drawn += d;
        }
        c.power_mismatch = std::abs(residual) / std::max(drawn, 1e-12);
        result.epochs.push_back(c);
    };

    auto solve_node = [&](std::size_t i, std::size_t k, double w) {
        NodeOutcome out;
        auto& ctl = controllers[i];
        const auto ii = static_cast<Eigen::Index>(i);
        mpc::NodeModel model{scenario.converters[i], plant.lap(ii, ii), nominal[i], scenario.loads[i].v_cutoff,
                             scenario.v_ref};
        auto problem = mpc::make_problem(model, w, spec, ctl.weight);
        if (ctl.calibrate && spec.terminal_weight == 0.0) {
            const auto cal = mpc::calibrate_terminal_weight(problem);
            ctl.weight = cal.weight;
            problem.terminal_weight = cal.weight;
            out.calibration_failed = !cal.satisfied;
        }
        ctl.calibrate = false;
        const mpc::State xi(x(ii), x(nn + ii), x(2 * nn + ii));
        std::vector<double> warm;
        if (!ctl.previous.empty()) warm = mpc::shifted_warm_start(problem, xi, ctl.previous);
        const auto sol = mpc::solve_ocp(problem, xi, warm);

        auto& rec = out.record;
        rec.node = i;
        rec.sample = k;
        rec.w = w;
        rec.dw = std::isnan(ctl.w_prev) ? 0.0 : w - ctl.w_prev;
        rec.u0 = sol.inputs.front();
        rec.value = sol.value;
        rec.status = sol.status;
        rec.iterations = sol.iterations;
        rec.feasible = sol.feasible();
        rec.warm_start_feasible = !warm.empty() && sol.warm_start_feasible;
        rec.terminal_feasible = mpc::gauge(xi, problem.equilibrium.x, problem.terminal) <= 1.0;
        rec.terminal_weight = problem.terminal_weight;
        out.u_eq = problem.equilibrium.u;

        // Paired solve at the predicted successor with w and the nominal load frozen.
        if (sol.feasible()) {
            const mpc::State next = sol.states[1];
            const auto shifted = mpc::shifted_warm_start(problem, next, sol.inputs);
            const auto again = mpc::solve_ocp(problem, next, shifted);
            rec.paired_warm_start_feasible = again.warm_start_feasible;
            const double bound = -spec.sample * mpc::stage_cost(problem, xi, rec.u0) + 1e-6;
            rec.decrease_margin = again.feasible() ? bound - (again.value - sol.value)
                                                   : -std::numeric_limits<double>::infinity();
            out.decrease_ok = rec.decrease_margin >= 0.0;
        } else {
            rec.decrease_margin = -std::numeric_limits<double>::infinity();
        }
        ctl.previous = sol.inputs;
        ctl.w_prev = w;
        return out;
    };

    analysis::EquilibriumOptions eq_opt;
    eq_opt.v_ref = scenario.v_ref;
    eq_opt.v_lower = std::numeric_limits<double>::infinity();
    eq_opt.v_upper = -std::numeric_limits<double>::infinity();
    eq_opt.v_cutoff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        eq_opt.v_lower = std::min(eq_opt.v_lower, scenario.converters[i].v_lower);
        eq_opt.v_upper = std::max(eq_opt.v_upper, scenario.converters[i].v_upper);
        eq_opt.v_cutoff = std::max(eq_opt.v_cutoff, scenario.loads[i].v_cutoff);
    }
    const Matrix lap_diag = plant.lap.diagonal().asDiagonal();

    std::vector<NodeOutcome> outcomes(n);
    Vector u(nn), i_ref(nn), values(nn), u_eq(nn);
    std::size_t next_step = 0;

    try {
        for (std::size_t k = 0; k < samples; ++k) {
            const double t = static_cast<double>(k) * delta;
            if (next_step < steps.size() && steps[next_step].first == k) {
                if (k > 0) epoch_check(t);
                while (next_step < steps.size() && steps[next_step].first == k) {
                    const auto& s = steps[next_step].second;
                    nominal[s.node] = s.load;
                    controllers[s.node].calibrate = true;
                    ++next_step;
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double radius = scenario.uncertainty;
                actual[i] = perturb(nominal[i], radius, rng);
            }

            // Snapshot exchange: every w_i comes from the same measured voltages.
            const Vector v = x.head(nn);
            Vector w = plant.lap * v - plant.lap.diagonal().cwiseProduct(v);

            const unsigned workers = std::min<unsigned>(scenario.workers, static_cast<unsigned>(n));
            if (workers <= 1) {
                for (std::size_t i = 0; i < n; ++i) outcomes[i] = solve_node(i, k, w(static_cast<Eigen::Index>(i)));
            } else {
                std::vector<std::exception_ptr> errors(workers);
                std::vector<std::thread> pool;
                for (unsigned wk = 0; wk < workers; ++wk) {
                    pool.emplace_back([&, wk] {
                        try {
                            for (std::size_t i = wk; i < n; i += workers) {
                                outcomes[i] = solve_node(i, k, w(static_cast<Eigen::Index>(i)));
                            }
                        } catch (...) {
                            errors[wk] = std::current_exception();
                        }
                    });
                }
                for (auto& th : pool) th.join();
                for (auto& e : errors) {
                    if (e) std::rethrow_exception(e);
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const auto& o = outcomes[i];
                u(ii) = o.record.u0;
                i_ref(ii) = o.record.u0 + scenario.converters[i].i_shift();
                values(ii) = o.record.value;
                u_eq(ii) = o.u_eq;
                result.log.push_back(o.record);
                ++decrease_total;
                if (o.decrease_ok) ++decrease_ok;
                if (o.record.paired_warm_start_feasible) ++warm_ok;
                if (!o.record.feasible) ++result.stats.infeasible_solves;
                if (o.calibration_failed) ++calibration_failures;
                result.stats.min_decrease_margin = std::min(result.stats.min_decrease_margin, o.record.decrease_margin);
                result.stats.max_dw = std::max(result.stats.max_dw, std::abs(o.record.dw));
                const auto cv = primary::control_voltage(v(ii), {x(nn + ii), x(2 * nn + ii)}, scenario.converters[i]);
                if (cv.out_of_range) ++result.stats.modulation_violations;
            }

            // Equilibrium the loop settles to when every node applies its steady-state input.
            double offset = std::numeric_limits<double>::quiet_NaN();
            Vector v_eq;
            try {
                Vector inj(nn);
                for (std::size_t i = 0; i < n; ++i) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    inj(ii) = plant.lap(ii, ii) * scenario.v_ref +
                              zip_current(nominal[i], scenario.v_ref, scenario.loads[i].v_cutoff);
                }
                v_eq = analysis::network_equilibrium(lap_diag, actual, inj, eq_opt).v;
                offset = (v_eq.array() - scenario.v_ref).matrix().norm();
            } catch (const Error&) {
            }

            auto record = [&](double time) {
                auto& tr = result.trace;
                const Vector vv = x.head(nn);
                const Vector it = x.segment(nn, nn);
                Vector load_power(nn), provided(nn), deviation(nn);
                for (std::size_t i = 0; i < n; ++i) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    load_power(ii) = vv(ii) * zip_current(actual[i], vv(ii), scenario.loads[i].v_cutoff);
                    provided(ii) = vv(ii) * (it(ii) + scenario.converters[i].i_shift());
                    deviation(ii) = std::abs(it(ii) - u_eq(ii));
                }
                tr.time.push_back(time);
                tr.v.push_back(vv);
                tr.i_tilde.push_back(it);
                tr.sigma.push_back(x.segment(2 * nn, nn));
                tr.i_ref.push_back(i_ref);
                tr.load_power.push_back(load_power);
                tr.provided_power.push_back(provided);
                tr.value.push_back(values);
                tr.current_deviation.push_back(deviation);
                tr.kernel_distance.push_back(analysis::kernel_distance(vv));
                tr.equilibrium_gap.push_back(v_eq.size() ? (v_eq - vv).norm()
                                                         : std::numeric_limits<double>::quiet_NaN());
                tr.equilibrium_offset.push_back(offset);
            };
            if (k == 0) record(0.0);

            auto f = [&](double, const Vector& s) { return plant.rhs(s, u, actual); };
            balance_residual = balance_drawn = 0.0;
            for (long long s = 0; s < substeps; ++s) {
                const double t0 = t + static_cast<double>(s) * h;
                Vector next = rk4_step(f, t0, x, h);
                if (!next.allFinite()) throw DivergenceError(t0, x);
                x = std::move(next);
                ++global_step;
                for (std::size_t i = 0; i < n; ++i) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    const auto& p = scenario.converters[i];
                    const double slack = 1e-9 * p.i_max;
                    const double it = x(nn + ii);
                    const double current = it + p.i_shift();
                    result.stats.max_current_ratio = std::max(result.stats.max_current_ratio, std::abs(it) / p.i_max);
                    result.stats.min_current = std::min(result.stats.min_current, current);
                    if (std::abs(it) > p.i_shift() + slack || current < -slack || current > p.i_max + slack) {
                        if (current_violations++ == 0) {
                            std::ostringstream msg;
                            msg << "node " << i << " at t = " << t0 + h << " s: i~ = " << it;
                            current_detail = msg.str();
                        }
                    }
                    result.stats.max_voltage_error =
                        std::max(result.stats.max_voltage_error, std::abs(x(ii) - scenario.v_ref));
                }
                accumulate_balance();
                result.stats.max_kernel_distance =
                    std::max(result.stats.max_kernel_distance, analysis::kernel_distance(x.head(nn)));
                if (global_step % static_cast<long long>(scenario.decimation) == 0) {
                    record(k + 1 == samples && s + 1 == substeps ? scenario.t_end : t0 + h);
                }
            }
            balance.emplace_back(balance_residual / static_cast<double>(substeps),
                                 balance_drawn / static_cast<double>(substeps));
            if (balance.size() > kBalanceWindow) balance.pop_front();
        }
        epoch_check(static_cast<double>(samples) * delta);
        result.completed = true;
    } catch (const Error& e) {
        result.error_kind = e.kind();
        result.error = e.what();
    }

    for (std::size_t i = 0; i < n; ++i) result.terminal_weights.push_back(controllers[i].weight);
    result.stats.decrease_share =
        decrease_total ? static_cast<double>(decrease_ok) / static_cast<double>(decrease_total) : 0.0;
    result.stats.warm_start_share =
        decrease_total ? static_cast<double>(warm_ok) / static_cast<double>(decrease_total) : 0.0;
    if (!std::isfinite(result.stats.min_current)) result.stats.min_current = 0.0;
    if (!std::isfinite(result.stats.min_decrease_margin)) result.stats.min_decrease_margin = 0.0;

    const auto& wanted = scenario.monitors.empty() ? monitor_names() : scenario.monitors;
    for (const auto& name : monitor_names()) {
        if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
        MonitorResult m;
        m.name = name;
        std::ostringstream detail;
        if (name == "current_limit") {
            m.metric = result.stats.max_current_ratio;
            m.threshold = 0.5;
            m.pass = current_violations == 0;
            detail << current_violations << " violating steps";
            if (current_violations) detail << "; first " << current_detail;
        } else if (name == "voltage_regulation") {
            double worst = 0.0;
            for (const auto& e : result.epochs) worst = std::max(worst, e.max_voltage_error);
            m.metric = worst;
            m.threshold = v_tol;
            m.pass = !result.epochs.empty() && worst <= v_tol;
            detail << result.epochs.size() << " steady epochs checked";
        } else if (name == "power_balance") {
            double worst = 0.0;
            for (const auto& e : result.epochs) worst = std::max(worst, e.power_mismatch);
            m.metric = worst;
            m.threshold = scenario.power_tolerance;
            m.pass = !result.epochs.empty() && worst <= scenario.power_tolerance;
            detail << result.epochs.size() << " steady epochs checked";
        } else if (name == "value_decrease") {
            m.metric = result.stats.decrease_share;
            m.threshold = scenario.decrease_fraction;
            m.pass = decrease_total > 0 && m.metric >= scenario.decrease_fraction;
            detail << decrease_ok << "/" << decrease_total << " samples; min margin "
                   << result.stats.min_decrease_margin;
            if (calibration_failures) detail << "; " << calibration_failures << " calibrations capped";
        } else if (name == "warm_start_feasibility") {
            m.metric = result.stats.warm_start_share;
            m.threshold = 1.0;
            m.pass = decrease_total > 0 && warm_ok == decrease_total;
            detail << warm_ok << "/" << decrease_total << " shifted warm starts feasible";
        } else if (name == "timescale") {
            m.metric = timescale.ratio;
            m.threshold = timescale.threshold;
            m.pass = timescale.pass;
            detail << "node time constant " << timescale.node_min << " s, line " << timescale.edge_max << " s";
        }
        if (!result.completed) {
            m.pass = false;
            detail << "; run aborted: " << result.error;
        }
        m.detail = detail.str();
        result.monitors.push_back(std::move(m));
    }
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace dcgrid::sim
