#include "spotmatch/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "spotmatch/config.hpp"
#include "spotmatch/csv.hpp"
#include "spotmatch/matching.hpp"
#include "spotmatch/policy.hpp"
#include "spotmatch/sim.hpp"

#ifndef SPOTMATCH_CONFIG_DIR
#define SPOTMATCH_CONFIG_DIR "configs"
#endif

namespace spotmatch::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kUsage =
    "usage: spotmatch <command> [--config PATH] [--key value ...]\n"
    "commands: mu partials step rollout objective regime myopic m1-curve mmt approx search\n"
    "          switch-curve arrow-field sim-step sim-run converge sim-m1 repro <bundle>\n"
    "bundles:  fig3 fig5-left fig5-right fig4-field ratio\n"
    "common:   --out PATH --seed U64 --threads N (0 = auto; SPOTMATCH_THREADS as fallback)\n";

struct Context {
    Settings settings;
    std::ostream& out;
    unsigned threads = 0;
};

// Seven significant digits for the one-line summaries; CSV keeps full precision.
std::string show(double x) {
    std::ostringstream s;
    s << std::setprecision(7) << x;
    return s.str();
}

std::size_t horizon(const Settings& s) {
    const std::int64_t t = s.integer("T");
    if (t < 1) throw ConfigError("'T' must be at least 1");
    return static_cast<std::size_t>(t);
}

std::int64_t scale(const Settings& s) {
    const std::int64_t n = s.integer("n");
    if (n < 1) throw ConfigError("'n' must be at least 1");
    return n;
}

unsigned thread_count(const Settings& s) {
    if (s.has("threads")) {
        const std::int64_t t = s.integer("threads");
        if (t < 0) throw ConfigError("'threads' must be nonnegative");
        return static_cast<unsigned>(t);
    }
    if (const char* env = std::getenv("SPOTMATCH_THREADS")) {
        Settings tmp;
        tmp.set("threads", env);
        return thread_count(tmp);
    }
    return 0;
}

// Calls write(csv stream) when --out is present.
void emit(const Settings& s, const std::function<void(std::ostream&)>& write) {
    if (!s.has("out")) return;
    const std::string path = s.raw("out");
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open output file '" + path + "'");
    write(file);
    file.flush();
    if (!file) throw IoError("write to '" + path + "' failed");
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& write) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open output file '" + path.string() + "'");
    write(file);
    file.flush();
    if (!file) throw IoError("write to '" + path.string() + "' failed");
}

PolicyVector resolve_policy(const Context& ctx, const FluidState& s0, const ModelParams& p, std::size_t T) {
    const PolicySpec spec = ctx.settings.policy();
    if (spec.kind != PolicySpec::Kind::search) return spec.materialize(T);
    SearchOptions opts;
    opts.budget = ctx.settings.unsigned_or("budget", opts.budget);
    opts.threads = ctx.threads;
    return exhaustive_policy_search(s0, p, T, {0.0, 1.0}, opts).best_policy;
}

// --------------------------------------------------------------------- fluid

int cmd_mu(Context& ctx) {
    const auto& s = ctx.settings;
    const double a = s.real("a"), b = s.real("b"), c = s.real("c");
    const double value = mu(a, b, c);
    emit(s, [&](std::ostream& o) { CsvWriter(o, {"a", "b", "c", "mu"}).row({a, b, c, value}); });
    ctx.out << show(value) << '\n';
    return kOk;
}

int cmd_partials(Context& ctx) {
    const auto& s = ctx.settings;
    const double a = s.real("a"), b = s.real("b"), c = s.real("c");
    const MatchPartials g = mu_partials(a, b, c);
    emit(s, [&](std::ostream& o) { CsvWriter(o, {"a", "b", "c", "da", "db"}).row({a, b, c, g.da, g.db}); });
    ctx.out << show(g.da) << ' ' << show(g.db) << '\n';
    return kOk;
}

int cmd_step(Context& ctx) {
    const auto& s = ctx.settings;
    const ModelParams p = s.params();
    const FluidState s0 = s.fluid_state();
    const double z = s.real("z");
    const FluidState next = step(s0, z, p);
    emit(s, [&](std::ostream& o) {
        CsvWriter w(o, {"d", "k", "v", "m"});
        w.row({next.d, next.k, next.v, matches(next, p)});
    });
    ctx.out << show(next.d) << ' ' << show(next.k) << ' ' << show(next.v) << '\n';
    return kOk;
}

int cmd_rollout(Context& ctx, bool objective_only) {
    const auto& s = ctx.settings;
    const ModelParams p = s.params();
    const FluidState s0 = s.fluid_state();
    const std::size_t T = horizon(s);
    const PolicyVector policy = resolve_policy(ctx, s0, p, T);
    const Trajectory traj = rollout(s0, policy, p);
    const double value = objective(traj, p.delta);
    if (!objective_only) {
        emit(s, [&](std::ostream& o) {
            CsvWriter w(o, {"t", "z", "d", "k", "v", "m"});
            for (std::size_t t = 0; t < traj.states.size(); ++t) {
                const auto& st = traj.states[t];
                const double z = t < policy.size() ? policy[t] : 0.0;
                w.row({static_cast<std::int64_t>(t), z, st.d, st.k, st.v, traj.matches[t]});
            }
        });
    } else {
        emit(s, [&](std::ostream& o) { CsvWriter(o, {"objective"}).row({value}); });
    }
    ctx.out << show(value) << '\n';
    return kOk;
}

int cmd_regime(Context& ctx) {
    const ModelParams p = ctx.settings.params();
    ctx.out << to_string(classify_regime(p)) << ' ' << show(non_adoption_growth_benefit(p)) << '\n';
    return kOk;
}

int cmd_myopic(Context& ctx) {
    const auto& s = ctx.settings;
    ctx.out << myopic_decision(s.fluid_state(), s.params()) << '\n';
    return kOk;
}

void write_m1_curve(std::ostream& o, const std::vector<CurvePoint>& curve) {
    CsvWriter w(o, {"z", "m1"});
    for (const auto& pt : curve) w.row({pt.z, pt.m1});
}

double argmax_z(const std::vector<CurvePoint>& curve) {
    const CurvePoint* best = &curve.front();
    for (const auto& pt : curve)
        if (pt.m1 > best->m1) best = &pt;
    return best->z;
}

int cmd_m1_curve(Context& ctx) {
    const auto& s = ctx.settings;
    const auto curve = m1_curve(s.fluid_state(), s.params(), s.grid_or("z_grid", "0:1:0.01"));
    emit(s, [&](std::ostream& o) { write_m1_curve(o, curve); });
    ctx.out << "argmax_z=" << show(argmax_z(curve)) << '\n';
    return kOk;
}

void write_mmt(std::ostream& o, const MMTSolution& sol) {
    CsvWriter w(o, {"d_bar", "v_bar", "res7", "res8", "res9", "res10"});
    const auto& r = sol.constraint_slack;
    w.row({sol.d_bar, sol.v_bar, r[0], r[1], r[2], r[3]});
}

MMTSolution mmt_from(const Settings& s) {
    MMTOptions opts;
    opts.d_step = s.real_or("d_step", opts.d_step);
    opts.tol = s.real_or("tol", opts.tol);
    opts.d_ceiling = s.real_or("d_ceiling", opts.d_ceiling);
    return solve_mmt(s.params(), opts);
}

int cmd_mmt(Context& ctx) {
    const MMTSolution sol = mmt_from(ctx.settings);
    emit(ctx.settings, [&](std::ostream& o) { write_mmt(o, sol); });
    ctx.out << show(sol.d_bar) << ' ' << show(sol.v_bar) << '\n';
    return kOk;
}

int cmd_approx(Context& ctx) {
    const auto& s = ctx.settings;
    const double value = approx_factor(s.params(), s.real("d0"), s.real("v0"), horizon(s));
    emit(s, [&](std::ostream& o) { CsvWriter(o, {"approx_factor"}).row({value}); });
    ctx.out << show(value) << '\n';
    return kOk;
}

int cmd_search(Context& ctx) {
    const auto& s = ctx.settings;
    SearchOptions opts;
    opts.budget = s.unsigned_or("budget", opts.budget);
    opts.threads = ctx.threads;
    const auto result = exhaustive_policy_search(s.fluid_state(), s.params(), horizon(s),
                                                 s.grid_or("candidates", "0,1"), opts);
    emit(s, [&](std::ostream& o) {
        CsvWriter w(o, {"t", "z"});
        for (std::size_t t = 0; t < result.best_policy.size(); ++t)
            w.row({static_cast<std::int64_t>(t), result.best_policy[t]});
    });
    ctx.out << show(result.best_value) << " z=";
    for (std::size_t t = 0; t < result.best_policy.size(); ++t) ctx.out << (t ? "," : "") << result.best_policy[t];
    ctx.out << " all_or_nothing=" << (result.all_or_nothing ? 1 : 0) << " evaluations=" << result.evaluations
            << '\n';
    return kOk;
}

std::vector<SwitchPoint> switch_from(const Settings& s) {
    return myopic_switch_curve(s.params(), s.grid("v_grid"), s.real_or("d_lo", 1e-6), s.real_or("d_hi", 10.0),
                               s.real_or("tol", 1e-8));
}

void write_switch(std::ostream& o, const std::vector<SwitchPoint>& curve) {
    CsvWriter w(o, {"v", "d_star"});
    for (const auto& pt : curve) w.row({pt.v, pt.d_star});
}

int cmd_switch_curve(Context& ctx) {
    const auto curve = switch_from(ctx.settings);
    emit(ctx.settings, [&](std::ostream& o) { write_switch(o, curve); });
    ctx.out << "points=" << curve.size() << '\n';
    return kOk;
}

void write_field(std::ostream& o, const std::vector<ArrowPoint>& field) {
    CsvWriter w(o, {"d", "v", "z0_star", "dd", "dv", "myopic_z"});
    for (const auto& pt : field)
        w.row({pt.d, pt.v, std::int64_t{pt.z0_star}, pt.dd, pt.dv, std::int64_t{pt.myopic_z}});
}

std::vector<ArrowPoint> field_from(const Context& ctx) {
    const auto& s = ctx.settings;
    SearchOptions opts;
    opts.budget = s.unsigned_or("budget", opts.budget);
    opts.threads = ctx.threads;
    return arrow_field(s.params(), s.grid("d_grid"), s.grid("v_grid"), horizon(s), opts);
}

int cmd_arrow_field(Context& ctx) {
    const auto field = field_from(ctx);
    emit(ctx.settings, [&](std::ostream& o) { write_field(o, field); });
    std::size_t adopt = 0;
    for (const auto& pt : field) adopt += pt.z0_star;
    ctx.out << "points=" << field.size() << " adopt=" << adopt << '\n';
    return kOk;
}

// ----------------------------------------------------------------- stochastic

int cmd_sim_step(Context& ctx) {
    const auto& s = ctx.settings;
    const std::int64_t n = scale(s);
    const IntState start = IntState::scaled(s.fluid_state(), n);
    Philox4x64 rng(s.unsigned_or("seed", 0), 0);
    const auto r = sim_step(start, s.real("z"), s.params(), n, rng, s.match_mode());
    emit(s, [&](std::ostream& o) {
        CsvWriter w(o, {"D", "K", "V", "M", "Z"});
        w.row({r.next.D, r.next.K, r.next.V, r.matches, r.adopted});
    });
    ctx.out << r.next.D << ' ' << r.next.K << ' ' << r.next.V << " M=" << r.matches << '\n';
    return kOk;
}

int cmd_sim_run(Context& ctx) {
    const auto& s = ctx.settings;
    const std::int64_t n = scale(s);
    const ModelParams p = s.params();
    const FluidState s0 = s.fluid_state();
    const PolicyVector policy = resolve_policy(ctx, s0, p, horizon(s));
    Philox4x64 rng(s.unsigned_or("seed", 0), 0);
    const auto path = run_trajectory(IntState::scaled(s0, n), policy, p, n, rng, s.match_mode());
    const Trajectory fluid = rollout(s0, policy, p);
    double worst = 0.0;
    emit(s, [&](std::ostream& o) {
        CsvWriter w(o, {"t", "D", "K", "V", "M", "fluid_m"});
        for (std::size_t t = 0; t < path.size(); ++t)
            w.row({static_cast<std::int64_t>(t), path[t].state.D, path[t].state.K, path[t].state.V,
                   path[t].matches, fluid.matches[t]});
    });
    for (std::size_t t = 0; t < path.size(); ++t)
        worst = std::max(worst, std::abs(static_cast<double>(path[t].matches) / static_cast<double>(n) -
                                         fluid.matches[t]));
    ctx.out << "max_gap=" << show(worst) << '\n';
    return kOk;
}

std::vector<std::int64_t> n_values_from(const Settings& s) {
    std::vector<std::int64_t> ns;
    for (double x : s.grid("n_values")) {
        if (x < 1 || x != std::floor(x)) throw ConfigError("'n_values' entries must be positive integers");
        ns.push_back(static_cast<std::int64_t>(x));
    }
    return ns;
}

std::vector<GapRow> converge_from(const Context& ctx) {
    const auto& s = ctx.settings;
    const auto reps = s.unsigned_or("replications", 1000);
    if (reps < 1) throw ConfigError("'replications' must be at least 1");
    return convergence_report(n_values_from(s), s.real("c"), s.real_or("a", 1.0), s.real_or("b", 1.0), reps,
                              s.unsigned_or("seed", 0), ctx.threads, s.match_mode());
}

void write_gaps(std::ostream& o, const std::vector<GapRow>& rows) {
    CsvWriter w(o, {"n", "mean_gap", "stderr", "normalized_gap"});
    for (const auto& r : rows) w.row({r.n, r.mean_gap, r.std_error, r.normalized_gap});
}

int cmd_converge(Context& ctx) {
    const auto rows = converge_from(ctx);
    emit(ctx.settings, [&](std::ostream& o) { write_gaps(o, rows); });
    ctx.out << "rows=" << rows.size() << " normalized_gap_at_largest_n=" << show(rows.back().normalized_gap) << '\n';
    return kOk;
}

std::vector<SimCurvePoint> sim_m1_from(const Context& ctx) {
    const auto& s = ctx.settings;
    const std::int64_t n = scale(s);
    const std::string rounding = s.text_or("rounding", "randomized");
    if (rounding != "randomized" && rounding != "exact") throw ConfigError("'rounding' must be randomized or exact");
    const auto reps = s.unsigned_or("replications", 1000);
    if (reps < 1) throw ConfigError("'replications' must be at least 1");
    return simulated_m1_curve(IntState::scaled(s.fluid_state(), n), s.params(), n, s.grid_or("z_grid", "0:1:0.1"),
                              reps, s.unsigned_or("seed", 0), ctx.threads,
                              rounding == "exact" ? Rounding::exact : Rounding::randomized);
}

void write_sim_m1(std::ostream& o, const std::vector<SimCurvePoint>& curve) {
    CsvWriter w(o, {"z", "sim_mean", "sim_stderr", "fluid_m1"});
    for (const auto& pt : curve) w.row({pt.z, pt.sim_mean, pt.sim_stderr, pt.fluid_m1});
}

int cmd_sim_m1(Context& ctx) {
    const auto curve = sim_m1_from(ctx);
    emit(ctx.settings, [&](std::ostream& o) { write_sim_m1(o, curve); });
    const SimCurvePoint* best = &curve.front();
    for (const auto& pt : curve)
        if (pt.sim_mean > best->sim_mean) best = &pt;
    ctx.out << "argmax_z=" << show(best->z) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------- repro

Settings bundle_settings(const Context& ctx, const std::string& file) {
    const fs::path dir = ctx.settings.text_or("config_dir", default_config_dir());
    Settings s = Settings::load((dir / file).string());
    // Command-line seed/threads/replications still win over the bundle.
    for (const char* key : {"seed", "threads", "replications", "budget"})
        if (ctx.settings.has(key)) s.set(key, ctx.settings.raw(key));
    return s;
}

int cmd_repro(Context& ctx, const std::string& bundle) {
    const fs::path out_dir = ctx.settings.text_or("out", ".");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "'");

    if (bundle == "fig3") {
        for (const char* side : {"fig3_left", "fig3_right"}) {
            const Settings s = bundle_settings(ctx, std::string(side) + ".cfg");
            const auto curve = m1_curve(s.fluid_state(), s.params(), s.grid_or("z_grid", "0:1:0.01"));
            write_file(out_dir / (std::string(side) + ".csv"), [&](std::ostream& o) { write_m1_curve(o, curve); });
            ctx.out << side << ": argmax_z=" << show(argmax_z(curve))
                    << " myopic=" << myopic_decision(s.fluid_state(), s.params()) << '\n';
        }
        return kOk;
    }
    if (bundle == "fig5-left") {
        Context sub{bundle_settings(ctx, "fig5_left.cfg"), ctx.out, ctx.threads};
        const auto rows = converge_from(sub);
        write_file(out_dir / "fig5_left.csv", [&](std::ostream& o) { write_gaps(o, rows); });
        ctx.out << "fig5-left: rows=" << rows.size() << '\n';
        return kOk;
    }
    if (bundle == "fig5-right") {
        Context sub{bundle_settings(ctx, "fig5_right.cfg"), ctx.out, ctx.threads};
        const auto curve = sim_m1_from(sub);
        write_file(out_dir / "fig5_right.csv", [&](std::ostream& o) { write_sim_m1(o, curve); });
        ctx.out << "fig5-right: points=" << curve.size() << '\n';
        return kOk;
    }
    if (bundle == "fig4-field") {
        Context sub{bundle_settings(ctx, "fig4.cfg"), ctx.out, ctx.threads};
        const auto field = field_from(sub);
        const auto sol = mmt_from(sub.settings);
        const auto curve = switch_from(sub.settings);
        write_file(out_dir / "fig4_field.csv", [&](std::ostream& o) { write_field(o, field); });
        write_file(out_dir / "fig4_mmt.csv", [&](std::ostream& o) { write_mmt(o, sol); });
        write_file(out_dir / "fig4_switch.csv", [&](std::ostream& o) { write_switch(o, curve); });
        ctx.out << "fig4-field: points=" << field.size() << " d_bar=" << show(sol.d_bar)
                << " v_bar=" << show(sol.v_bar) << '\n';
        return kOk;
    }
    if (bundle == "ratio") {
        const Settings s = bundle_settings(ctx, "fig4.cfg");
        const ModelParams p = s.params();
        const FluidState s0 = s.fluid_state();
        const std::size_t T = horizon(s);
        const double factor = approx_factor(p, s0.d, s0.v, T);
        const double bound = match_min_upper_bound(s0, p, T);
        const double ratio = realized_ratio(s0, p, T);
        write_file(out_dir / "ratio.csv", [&](std::ostream& o) {
            CsvWriter(o, {"approx_factor", "realized_ratio", "upper_bound", "no_adoption_value"})
                .row({factor, ratio, bound, ratio * bound});
        });
        ctx.out << show(factor) << " realized=" << show(ratio) << '\n';
        return kOk;
    }
    throw ConfigError("unknown repro bundle '" + bundle + "'");
}

// ------------------------------------------------------------------- dispatch

std::string normalize_key(std::string key) {
    for (auto& ch : key)
        if (ch == '-') ch = '_';
    return key;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out) {
    if (args.empty()) throw ConfigError(std::string("no command given\n") + kUsage);
    const std::string& command = args[0];
    if (command == "--help" || command == "-h" || command == "help") {
        out << kUsage;
        return kOk;
    }

    std::size_t i = 1;
    std::string bundle;
    if (command == "repro") {
        if (args.size() < 2 || args[1].rfind("--", 0) == 0) throw ConfigError("repro needs a bundle name");
        bundle = args[1];
        i = 2;
    }

    Settings flags;
    std::string config_path;
    for (; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
        std::string key = arg.substr(2);
        std::string value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= args.size()) throw ConfigError("flag '" + arg + "' needs a value");
            value = args[++i];
        }
        key = normalize_key(key);
        if (key == "config")
            config_path = value;
        else
            flags.set(key, value);
    }

    Settings settings = config_path.empty() ? Settings{} : Settings::load(config_path);
    settings.merge(flags);
    Context ctx{settings, out, thread_count(settings)};

    static const std::map<std::string, std::function<int(Context&)>> table = {
        {"mu", cmd_mu},
        {"partials", cmd_partials},
        {"step", cmd_step},
        {"rollout", [](Context& c) { return cmd_rollout(c, false); }},
        {"objective", [](Context& c) { return cmd_rollout(c, true); }},
        {"regime", cmd_regime},
        {"myopic", cmd_myopic},
        {"m1-curve", cmd_m1_curve},
        {"mmt", cmd_mmt},
        {"approx", cmd_approx},
        {"search", cmd_search},
        {"switch-curve", cmd_switch_curve},
        {"arrow-field", cmd_arrow_field},
        {"sim-step", cmd_sim_step},
        {"sim-run", cmd_sim_run},
        {"converge", cmd_converge},
        {"sim-m1", cmd_sim_m1},
    };
    if (command == "repro") return cmd_repro(ctx, bundle);
    const auto it = table.find(command);
    if (it == table.end()) throw ConfigError("unknown command '" + command + "'\n" + kUsage);
    return it->second(ctx);
}

int report(std::ostream& err, int code, const char* what) {
    err << "ERROR:" << code << ':' << what << '\n';
    return code;
}

}  // namespace

std::string default_config_dir() { return SPOTMATCH_CONFIG_DIR; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(args, out);
    } catch (const IoError& e) {
        return report(err, kIoFailure, e.what());
    } catch (const DomainError& e) {
        return report(err, kInvalidConfig, e.what());
    } catch (const NumericalError& e) {
        return report(err, kNumericalFailure, e.what());
    } catch (const Error& e) {
        return report(err, kNumericalFailure, e.what());
    } catch (const std::exception& e) {
        return report(err, 1, e.what());
    }
}

}  // namespace spotmatch::cli
