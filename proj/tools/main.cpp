#include "stabman/network_io.hpp"
#include "stabman/parallel.hpp"
#include "stabman/powerflow.hpp"
#include "stabman/workflow.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace stabman;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string out_dir = ".";
    std::string command_line;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<Real> parse_reals(const std::string& s, std::size_t expected, const std::string& flag) {
    std::vector<Real> v;
    for (const auto& t : split(s, ',')) v.push_back(parse_real(t));
    if (v.size() != expected)
        throw ValidationError(flag + " expects " + std::to_string(expected) + " comma-separated numbers");
    return v;
}

std::pair<std::vector<std::string>, std::vector<Real>> parse_params(const std::string& s) {
    std::vector<std::string> names;
    std::vector<Real> values;
    for (const auto& kv : split(s, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--params entries must look like name=value, got '" + kv + "'");
        names.push_back(canonical_gain_name(kv.substr(0, eq)));
        values.push_back(parse_real(kv.substr(eq + 1)));
    }
    return {names, values};
}

ScenarioSet scenarios_for(const NetworkModel& net, const std::string& path) {
    if (path.empty()) return ScenarioSet{{Scenario{"base", {}, {}, {}}}};
    return read_scenario_file(net, path);
}

const Scenario& pick_scenario(const ScenarioSet& set, const std::string& name) {
    if (name.empty()) return set.scenarios.front();
    for (const auto& s : set.scenarios)
        if (s.name == name) return s;
    throw ValidationError("no scenario named '" + name + "'");
}

std::vector<std::string> focus_or_all_ibrs(const NetworkModel& net, const std::string& focus) {
    std::vector<std::string> ids = split(focus, ',');
    if (ids.empty())
        for (const auto& d : net.devices)
            if (d.kind == DeviceKind::IBR) ids.push_back(d.id);
    if (ids.empty()) throw ValidationError("the network has no IBR to vary");
    return ids;
}

fs::path out_path(const Globals& g, const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(g.out_dir) / p;
}

void write_manifest(const Globals& g, const fs::path& where, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs, const std::string& started) {
    write_json_file(where, to_json(make_manifest(g.command_line, inputs, {{"seed", g.seed}}, outputs, started)));
}

std::vector<fs::path> existing(std::initializer_list<std::string> paths) {
    std::vector<fs::path> v;
    for (const auto& p : paths)
        if (!p.empty()) v.emplace_back(p);
    return v;
}

// ---------------------------------------------------------------------------

struct PowerflowArgs {
    std::string net, scenarios, scenario, out;
};

int run_powerflow(const Globals& g, const PowerflowArgs& a) {
    const NetworkModel net = load_network(a.net);
    const ScenarioSet set = scenarios_for(net, a.scenarios);
    const auto pf = solve_power_flow(net, pick_scenario(set, a.scenario));
    CsvTable t{{"element", "id", "vm_pu", "va_rad", "p_pu", "q_pu"}, {}};
    for (std::size_t i = 0; i < pf.bus_ids.size(); ++i)
        t.rows.push_back({"bus", pf.bus_ids[i], format_real(pf.vm[static_cast<Eigen::Index>(i)]),
                          format_real(pf.va[static_cast<Eigen::Index>(i)]), "", ""});
    for (std::size_t i = 0; i < pf.device_ids.size(); ++i)
        t.rows.push_back({"device", pf.device_ids[i], "", "", format_real(pf.device_power[i].real()),
                          format_real(pf.device_power[i].imag())});
    if (a.out.empty()) {
        std::cout << to_csv(t);
    } else {
        const std::string started = utc_timestamp();
        const fs::path p = out_path(g, a.out);
        write_text_file(p, to_csv(t));
        write_manifest(g, p.string() + ".manifest.json", existing({a.net, a.scenarios}), {p}, started);
    }
    return 0;
}

struct EigsArgs {
    std::string net, scenarios, scenario, params, focus, out = "eigs";
};

int run_eigs(const Globals& g, const EigsArgs& a) {
    const std::string started = utc_timestamp();
    NetworkModel net = load_network(a.net);
    const ScenarioSet set = scenarios_for(net, a.scenarios);
    if (!a.params.empty()) {
        const auto [names, values] = parse_params(a.params);
        net = apply_parameters(StudyCase{"cli", net, focus_or_all_ibrs(net, a.focus)}, names, values);
    }
    StabilityOptions opts;
    const auto op = linearize_operating_point(net, pick_scenario(set, a.scenario), opts);
    const auto& labels = op.system.state_labels;

    CsvTable am{labels, {}};
    for (Eigen::Index i = 0; i < op.system.A.rows(); ++i) {
        std::vector<std::string> row;
        for (Eigen::Index j = 0; j < op.system.A.cols(); ++j) row.push_back(format_real(op.system.A(i, j)));
        am.rows.push_back(std::move(row));
    }
    CsvTable sp{{"re", "im", "dominant_state", "excluded"}, {}};
    for (std::size_t k = 0; k < op.spectrum.size(); ++k) {
        const auto idx = static_cast<Eigen::Index>(k);
        sp.rows.push_back({format_real(op.spectrum.values[idx].real()), format_real(op.spectrum.values[idx].imag()),
                           dominant_state(op.spectrum, idx, labels), op.spectrum.excluded[k] ? "1" : "0"});
    }
    const fs::path pa = out_path(g, a.out + "_A.csv"), ps = out_path(g, a.out + "_spectrum.csv");
    write_text_file(pa, to_csv(am));
    write_text_file(ps, to_csv(sp));
    write_manifest(g, out_path(g, a.out + "_manifest.json"), existing({a.net, a.scenarios}), {pa, ps}, started);
    std::cout << "states," << labels.size() << "\nabscissa," << format_real(op.spectrum.abscissa()) << "\n";
    return 0;
}

struct StabilityArgs {
    std::string net, scenarios, params, focus;
};

int run_stability(const Globals&, const StabilityArgs& a) {
    const NetworkModel net = load_network(a.net);
    const ScenarioSet set = scenarios_for(net, a.scenarios);
    std::vector<std::string> names;
    std::vector<Real> values;
    if (!a.params.empty()) std::tie(names, values) = parse_params(a.params);
    const StudyCase ctx{"cli", net, names.empty() ? split(a.focus, ',') : focus_or_all_ibrs(net, a.focus)};
    const auto v = is_ps_stable(names, values, set, ctx);
    std::cout << "verdict," << (v.label == 1 ? "stable" : "unstable") << "\n";
    CsvTable t{{"scenario", "abscissa", "worst_re", "worst_im", "note"}, {}};
    for (std::size_t i = 0; i < set.size(); ++i)
        t.rows.push_back({set.scenarios[i].name, format_real(v.abscissa[i]), format_real(v.worst[i].real()),
                          format_real(v.worst[i].imag()), v.reasons[i]});
    std::cout << to_csv(t);
    return 0;
}

struct AsmArgs {
    std::string net, scenarios, focus, pair = "kp_pll,ki_pll", domain, params, tuned, out = "asm";
    std::size_t n_init = 100, n_a = 250, n_r = 20000, resolution = 101;
    Real p_th = 0.8;
    bool svg = false;
};

ParameterDomain pair_domain(const std::string& pair, const std::string& domain) {
    ParameterDomain d;
    d.names = split(pair, ',');
    if (d.names.size() != 2) throw ValidationError("--pair expects two parameter names");
    for (auto& n : d.names) n = canonical_gain_name(n);
    const auto b = parse_reals(domain, 4, "--domain");
    d.lo = {b[0], b[2]};
    d.hi = {b[1], b[3]};
    d.validate();
    return d;
}

std::optional<TunerResult> load_tuned(const std::string& path) {
    if (path.empty()) return std::nullopt;
    if (!fs::exists(path))
        throw ValidationError("tuned gains file '" + path + "' does not exist; run the tune subcommand first");
    return tuner_result_from_json(read_json_file(path));
}

int run_asm_cmd(const Globals& g, const AsmArgs& a) {
    const std::string started = utc_timestamp();
    NetworkModel net = load_network(a.net);
    if (const auto tuned = load_tuned(a.tuned)) apply_tuned_gains(net, *tuned);
    const auto focus = focus_or_all_ibrs(net, a.focus);
    if (!a.params.empty()) {
        const auto [names, values] = parse_params(a.params);
        net = apply_parameters(StudyCase{"cli", net, focus}, names, values);
    }
    ManifoldStudy s;
    s.study = StudyCase{a.out, net, focus};
    s.scenarios = scenarios_for(net, a.scenarios);
    s.pair = pair_domain(a.pair, a.domain);
    s.asm_config.n_init = a.n_init;
    s.asm_config.n_a = a.n_a;
    s.asm_config.n_r = a.n_r;
    s.asm_config.p_th = a.p_th;
    s.asm_config.seed = g.seed;
    s.resolution = a.resolution;
    const auto art = run_manifold_study(s);
    const auto& ctrl = net.device(focus.front()).ibr.control;
    const Point2 here{gain_value(ctrl, s.pair.names[0]), gain_value(ctrl, s.pair.names[1])};
    const auto files = write_manifold_outputs(out_path(g, a.out).string(), art, here, a.svg);
    write_manifest(g, out_path(g, a.out + "_manifest.json"), existing({a.net, a.scenarios, a.tuned}), files, started);
    std::cout << "oracle_calls," << art.model.oracle_calls << "\ndegenerate," << (art.model.degenerate ? 1 : 0) << "\n";
    return 0;
}

struct TuneArgs {
    std::string net, scenarios, connections, focus, gains, out = "tuned.json";
    std::size_t budget = 500;
    Real eps = 1e-3;
};

ParameterDomain tuning_domain(DcVariant v, const std::string& only) {
    const ParameterDomain d = default_tuning_domain(v);
    if (only.empty()) return d;
    ParameterDomain sub;
    for (const auto& raw : split(only, ',')) {
        const std::string n = canonical_gain_name(raw);
        const auto k = static_cast<std::size_t>(std::find(d.names.begin(), d.names.end(), n) - d.names.begin());
        sub.names.push_back(n);
        sub.lo.push_back(d.lo[k]);
        sub.hi.push_back(d.hi[k]);
    }
    return sub;
}

int run_tune(const Globals& g, const TuneArgs& a) {
    const std::string started = utc_timestamp();
    const NetworkModel net = load_network(a.net);
    TunerProblem p;
    p.scenarios = scenarios_for(net, a.scenarios);
    if (a.connections.empty()) {
        p.cases.push_back(StudyCase{"base", net, focus_or_all_ibrs(net, a.focus)});
    } else {
        const CaseMatrix m = case_matrix_from_json(read_json_file(a.connections));
        for (const auto& c : m.cases) p.cases.push_back(StudyCase{c.name, build_case_network(net, c, m.unit), c.focus});
    }
    const auto& first = p.cases.front();
    const Device& dev = first.net.device(first.focus.front());
    p.domain = tuning_domain(dev.ibr.control.dc_variant, a.gains);
    p.base = dev.ibr.control;
    p.plant = loop_plant(first.net, dev.id, p.scenarios.scenarios.front());
    p.omega_nom = net.system_frequency;
    p.eps = a.eps;
    p.budget = a.budget;
    p.seed = g.seed;
    const TunerResult r = tune(p);
    const fs::path out = out_path(g, a.out);
    fs::path history = out;
    history.replace_filename(out.stem().string() + "_history.csv");
    write_json_file(out, to_json(r));
    write_text_file(history, to_csv(tune_history_csv(r)));
    write_manifest(g, out.string() + ".manifest.json", existing({a.net, a.scenarios, a.connections}), {out, history},
                   started);
    std::cout << "feasible," << (r.feasible ? 1 : 0) << "\nalpha_max," << format_real(r.alpha_max) << "\nevaluations,"
              << r.evaluations << "\n";
    if (!r.feasible) throw InfeasibleError("no gain set met every constraint within the evaluation budget");
    return 0;
}

struct ReportArgs {
    std::vector<std::string> models, grids;
    std::string tuned, out = "report";
};

int run_report(const Globals& g, const ReportArgs& a) {
    if (a.models.size() != a.grids.size()) throw ValidationError("--model and --grid must be given the same number of times");
    const auto tuned = load_tuned(a.tuned);
    std::vector<ReportEntry> entries;
    for (std::size_t i = 0; i < a.models.size(); ++i) entries.push_back(load_report_entry(a.models[i], a.grids[i], tuned));
    for (const auto& e : entries) write_text_file(out_path(g, a.out + "_" + e.name + ".svg"), render_report_svg(e));
    const std::string summary = to_csv(report_summary(entries));
    write_text_file(out_path(g, a.out + "_summary.csv"), summary);
    std::cout << summary;
    return 0;
}

struct CaseMatrixArgs {
    std::string net, scenarios, cases, tuned, pair = "kp_pll,ki_pll", domain;
    std::size_t n_init = 100, n_a = 250, n_r = 20000, resolution = 101;
    Real p_th = 0.8;
};

int run_case_matrix_cmd(const Globals& g, const CaseMatrixArgs& a) {
    if (a.tuned.empty()) throw ValidationError("--tuned is required; run the tune subcommand first");
    const auto tuned = load_tuned(a.tuned);
    const NetworkModel net = load_network(a.net);
    const ScenarioSet set = scenarios_for(net, a.scenarios);
    const CaseMatrix m = case_matrix_from_json(read_json_file(a.cases));
    CaseMatrixConfig cfg;
    cfg.pair = pair_domain(a.pair, a.domain);
    cfg.asm_config.n_init = a.n_init;
    cfg.asm_config.n_a = a.n_a;
    cfg.asm_config.n_r = a.n_r;
    cfg.asm_config.p_th = a.p_th;
    cfg.asm_config.seed = g.seed;
    cfg.resolution = a.resolution;
    cfg.out_dir = g.out_dir;
    cfg.command = g.command_line;
    cfg.inputs = existing({a.net, a.scenarios, a.cases, a.tuned});
    const auto out = run_case_matrix(net, set, m, tuned, cfg);
    CsvTable t{{"case", "oracle_calls", "degenerate"}, {}};
    for (const auto& o : out)
        t.rows.push_back({o.name, std::to_string(o.artifacts.model.oracle_calls), o.artifacts.model.degenerate ? "1" : "0"});
    write_text_file(fs::path(g.out_dir) / "case_matrix.csv", to_csv(t));
    std::cout << to_csv(t);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stability manifolds of inverter control gains in multi-machine grids"};
    app.require_subcommand(1);
    Globals g;
    for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Directory for output files")->capture_default_str();

    PowerflowArgs pfa;
    auto* pf = app.add_subcommand("powerflow", "Solve the load flow and print bus voltages and device injections");
    pf->add_option("--net", pfa.net)->required();
    pf->add_option("--scenarios", pfa.scenarios);
    pf->add_option("--scenario", pfa.scenario, "Scenario name (default: first)");
    pf->add_option("--out", pfa.out, "CSV file (default: stdout)");

    EigsArgs ea;
    auto* eg = app.add_subcommand("eigs", "Dump the linearized state matrix and its spectrum");
    eg->add_option("--net", ea.net)->required();
    eg->add_option("--scenarios", ea.scenarios);
    eg->add_option("--scenario", ea.scenario);
    eg->add_option("--params", ea.params, "name=value,...");
    eg->add_option("--focus", ea.focus, "dev1,dev2 (default: every IBR)");
    eg->add_option("--out", ea.out, "Output prefix")->capture_default_str();

    StabilityArgs sa;
    auto* st = app.add_subcommand("stability", "Scenario-wide small-signal verdict");
    st->add_option("--net", sa.net)->required();
    st->add_option("--scenarios", sa.scenarios);
    st->add_option("--params", sa.params, "name=value,...");
    st->add_option("--focus", sa.focus, "dev1,dev2 (default: every IBR)");

    AsmArgs aa;
    auto* as = app.add_subcommand("asm", "Adaptive sampling of a two-gain stability manifold");
    as->add_option("--net", aa.net)->required();
    as->add_option("--scenarios", aa.scenarios);
    as->add_option("--focus", aa.focus);
    as->add_option("--pair", aa.pair)->capture_default_str();
    as->add_option("--domain", aa.domain, "lo1,hi1,lo2,hi2")->required();
    as->add_option("--params", aa.params, "Fixed gains, name=value,...");
    as->add_option("--tuned", aa.tuned, "Tuned gains JSON applied before --params");
    as->add_option("--ninit", aa.n_init)->capture_default_str();
    as->add_option("--na", aa.n_a)->capture_default_str();
    as->add_option("--nr", aa.n_r)->capture_default_str();
    as->add_option("--pth", aa.p_th)->capture_default_str();
    as->add_option("--resolution", aa.resolution)->capture_default_str();
    as->add_flag("--svg", aa.svg, "Also write <prefix>_plot.svg");
    as->add_option("--out", aa.out, "Output prefix")->capture_default_str();

    TuneArgs ta;
    auto* tu = app.add_subcommand("tune", "Surrogate-based initial gain tuning");
    tu->add_option("--net", ta.net)->required();
    tu->add_option("--scenarios", ta.scenarios);
    tu->add_option("--connections", ta.connections, "Case-matrix JSON listing device replacements");
    tu->add_option("--focus", ta.focus, "Tuned devices when --connections is absent");
    tu->add_option("--gains", ta.gains, "Subset of gains to tune (default: all six)");
    tu->add_option("--budget", ta.budget)->capture_default_str();
    tu->add_option("--eps", ta.eps)->capture_default_str();
    tu->add_option("--out", ta.out)->capture_default_str();

    ReportArgs ra;
    auto* rp = app.add_subcommand("report", "Render manifold heat maps and a summary table");
    rp->add_option("--model", ra.models)->required();
    rp->add_option("--grid", ra.grids)->required();
    rp->add_option("--tuned", ra.tuned);
    rp->add_option("--out", ra.out, "Output prefix")->capture_default_str();

    CaseMatrixArgs ca;
    auto* cm = app.add_subcommand("case-matrix", "Run the manifold study for every case");
    cm->add_option("--net", ca.net)->required();
    cm->add_option("--scenarios", ca.scenarios);
    cm->add_option("--cases", ca.cases)->required();
    cm->add_option("--tuned", ca.tuned);
    cm->add_option("--pair", ca.pair)->capture_default_str();
    cm->add_option("--domain", ca.domain, "lo1,hi1,lo2,hi2")->required();
    cm->add_option("--ninit", ca.n_init)->capture_default_str();
    cm->add_option("--na", ca.n_a)->capture_default_str();
    cm->add_option("--nr", ca.n_r)->capture_default_str();
    cm->add_option("--pth", ca.p_th)->capture_default_str();
    cm->add_option("--resolution", ca.resolution)->capture_default_str();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        worker_threads() = g.threads;
        if (pf->parsed()) return run_powerflow(g, pfa);
        if (eg->parsed()) return run_eigs(g, ea);
        if (st->parsed()) return run_stability(g, sa);
        if (as->parsed()) return run_asm_cmd(g, aa);
        if (tu->parsed()) return run_tune(g, ta);
        if (rp->parsed()) return run_report(g, ra);
        if (cm->parsed()) return run_case_matrix_cmd(g, ca);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
