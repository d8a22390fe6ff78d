#include "stabman/workflow.hpp"
#include "stabman/network_io.hpp"
#include "stabman/parallel.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <set>

namespace stabman {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text_file(path)); }

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest make_manifest(const std::string& command, const std::vector<fs::path>& inputs,
                          const std::map<std::string, std::uint64_t>& seeds, const std::vector<fs::path>& outputs,
                          const std::string& started) {
    RunManifest m;
    m.command = command;
    for (const auto& p : inputs) m.inputs.push_back({p.string(), sha256_file(p)});
    m.seeds = seeds;
    m.started = started;
    m.finished = utc_timestamp();
    for (const auto& p : outputs) m.outputs.push_back({p.string(), sha256_file(p)});
    return m;
}

nlohmann::json to_json(const RunManifest& m) {
    auto files = [](const std::vector<FileDigest>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
        return a;
    };
    return {{"tool_version", m.tool_version}, {"command", m.command}, {"inputs", files(m.inputs)},
            {"seeds", m.seeds},               {"started", m.started}, {"finished", m.finished},
            {"outputs", files(m.outputs)}};
}

RunManifest manifest_from_json(const nlohmann::json& doc) {
    try {
        auto files = [](const nlohmann::json& a) {
            std::vector<FileDigest> v;
            for (const auto& f : a) v.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
            return v;
        };
        RunManifest m;
        m.tool_version = doc.at("tool_version").get<std::string>();
        m.command = doc.at("command").get<std::string>();
        m.inputs = files(doc.at("inputs"));
        m.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
        m.started = doc.at("started").get<std::string>();
        m.finished = doc.at("finished").get<std::string>();
        m.outputs = files(doc.at("outputs"));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed run manifest: ") + e.what());
    }
}

bool verify_manifest(const RunManifest& m) {
    for (const auto& f : m.inputs) {
        if (!fs::exists(f.path) || sha256_file(f.path) != f.sha256) return false;
    }
    return true;
}

CsvTable tune_history_csv(const TunerResult& r) {
    CsvTable t;
    t.header = {"evaluation"};
    t.header.insert(t.header.end(), r.names.begin(), r.names.end());
    for (const char* c : {"alpha_max", "g_alpha", "g_c1", "g_c2", "g_c3_current", "g_c3_pll", "g_c3_dc", "feasible"})
        t.header.emplace_back(c);
    for (std::size_t k = 0; k < r.history.size(); ++k) {
        const auto& e = r.history[k];
        std::vector<std::string> row{std::to_string(k)};
        for (Real v : e.x) row.push_back(format_real(v));
        row.push_back(format_real(e.objective));
        for (Real g : e.constraints) row.push_back(format_real(g));
        row.emplace_back(e.feasible() ? "1" : "0");
        if (row.size() != t.header.size()) throw Error("tuner history row has an unexpected width");
        t.rows.push_back(std::move(row));
    }
    return t;
}

ManifoldArtifacts run_manifold_study(const ManifoldStudy& s) {
    if (s.pair.dimension() != 2) throw ValidationError("manifold export needs exactly two parameters");
    if (s.study.focus.empty()) throw ValidationError("focus device set is empty");
    if (s.scenarios.size() == 0) throw ValidationError("scenario set is empty");
    s.pair.validate();
    for (const auto& n : s.pair.names) canonical_gain_name(n);

    auto oracle = [&](const std::vector<Real>& rho) {
        return is_ps_stable(s.pair.names, rho, s.scenarios, s.study, s.stability).label;
    };
    ManifoldArtifacts out;
    out.model = run_asm(oracle, s.pair, s.asm_config);

    RpiMask mask;
    std::optional<LoopPlant> plant;
    IbrControlParams fixed;
    if (s.mask_rpi) {
        const auto& id = s.study.focus.front();
        plant = loop_plant(s.study.net, id, s.scenarios.scenarios.front());
        fixed = s.study.net.device(id).ibr.control;
        const Real omega_nom = s.study.net.system_frequency;
        mask = [&, omega_nom](const std::vector<Real>& rho) { return in_rpi(s.pair, rho, fixed, *plant, omega_nom); };
    }
    out.grid = grid_from_manifold(s.pair.names, export_manifold(out.model, s.resolution, mask));
    return out;
}

std::vector<fs::path> write_manifold_outputs(const std::string& prefix, const ManifoldArtifacts& a,
                                             const std::optional<Point2>& tuned, bool svg) {
    std::vector<fs::path> files{prefix + "_samples.csv", prefix + "_grid.csv", prefix + "_model.json"};
    write_text_file(files[0], to_csv(samples_csv(a.model)));
    write_text_file(files[1], to_csv(grid_csv(a.grid)));
    write_text_file(files[2], to_json(a.model).dump(2) + "\n");
    if (svg) {
        files.emplace_back(prefix + "_plot.svg");
        HeatmapOptions o;
        o.title = fs::path(prefix).filename().string();
        o.p_th = a.model.config.p_th;
        o.tuned = tuned;
        write_text_file(files.back(), render_heatmap_svg(a.grid, o));
    }
    return files;
}

namespace {

bool safe_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

Point2 current_point(const NetworkModel& net, const CaseStudy& c, const ParameterDomain& pair) {
    const auto& ctrl = net.device(c.focus.front()).ibr.control;
    return {gain_value(ctrl, pair.names[0]), gain_value(ctrl, pair.names[1])};
}

}  // namespace

CaseMatrix case_matrix_from_json(const nlohmann::json& doc) {
    try {
        for (const auto& [k, v] : doc.items())
            if (k != "ibr_unit" && k != "cases") throw ValidationError("case matrix: unknown key '" + k + "'");
        CaseMatrix m;
        if (doc.contains("ibr_unit")) m.unit = ibr_from_json(doc.at("ibr_unit"), "ibr_unit");
        m.unit.n_units = 1;
        std::set<std::string> seen;
        for (const auto& c : doc.at("cases")) {
            for (const auto& [k, v] : c.items())
                if (k != "name" && k != "assignment" && k != "focus")
                    throw ValidationError("case matrix: unknown case key '" + k + "'");
            CaseStudy cs;
            cs.name = c.at("name").get<std::string>();
            if (!safe_name(cs.name)) throw ValidationError("case name '" + cs.name + "' must use letters, digits, '_' or '-'");
            if (!seen.insert(cs.name).second) throw ValidationError("duplicate case name '" + cs.name + "'");
            if (c.contains("assignment"))
                for (const auto& [bus, kind] : c.at("assignment").items()) {
                    const auto k = kind.get<std::string>();
                    if (k != "SG" && k != "IBR")
                        throw ValidationError("case '" + cs.name + "': assignment must be SG or IBR, got '" + k + "'");
                    cs.assignment[bus] = k == "SG" ? DeviceKind::SG : DeviceKind::IBR;
                }
            cs.focus = c.at("focus").get<std::vector<std::string>>();
            if (cs.focus.empty()) throw ValidationError("case '" + cs.name + "': focus set is empty");
            m.cases.push_back(std::move(cs));
        }
        if (m.cases.empty()) throw ValidationError("case matrix has no cases");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed case matrix: ") + e.what());
    }
}

NetworkModel build_case_network(const NetworkModel& base, const CaseStudy& c, const IbrData& unit) {
    NetworkModel net = base;
    for (const auto& [bus_id, kind] : c.assignment) {
        const auto bi = net.bus_index(bus_id);
        if (!bi) throw ValidationError("case '" + c.name + "': unknown bus '" + bus_id + "'");
        Device* gen = nullptr;
        for (auto& d : net.devices)
            if (d.bus == bus_id && (d.kind == DeviceKind::SG || d.kind == DeviceKind::IBR)) gen = &d;
        if (!gen) throw ValidationError("case '" + c.name + "': bus '" + bus_id + "' is not a generator bus");
        if (gen->kind == kind) continue;
        if (kind == DeviceKind::SG)
            throw ValidationError("case '" + c.name + "': device '" + gen->id + "' has no machine data to restore an SG");
        Bus& bus = net.buses[*bi];
        if (bus.role == BusRole::Slack)
            throw ValidationError("case '" + c.name + "': the slack machine at '" + bus_id + "' cannot be replaced");
        gen->kind = DeviceKind::IBR;
        gen->ibr = unit;
        gen->ibr.n_units = std::max(1, static_cast<int>(std::lround(gen->rating_mva / unit.physical.s_base)));
        gen->q_mvar = 0.0;
        bus.role = BusRole::PQ;
    }
    for (const auto& id : c.focus) {
        if (!net.device_index(id)) throw ValidationError("case '" + c.name + "': unknown focus device '" + id + "'");
        if (net.device(id).kind != DeviceKind::IBR)
            throw ValidationError("case '" + c.name + "': focus device '" + id + "' is not an IBR");
    }
    validate_network(net);
    return net;
}

void apply_tuned_gains(NetworkModel& net, const TunerResult& tuned) {
    for (auto& d : net.devices)
        if (d.kind == DeviceKind::IBR) d.ibr.control = with_gains(d.ibr.control, tuned.names, tuned.rho);
}

std::vector<CaseOutput> run_case_matrix(const NetworkModel& base, const ScenarioSet& scenarios, const CaseMatrix& matrix,
                                        const std::optional<TunerResult>& tuned, const CaseMatrixConfig& cfg) {
    if (!tuned) throw ValidationError("tuned gains are missing; run the tune subcommand first");
    if (matrix.cases.empty()) throw ValidationError("case matrix has no cases");
    const std::string started = utc_timestamp();

    // build every variant up front so configuration errors surface before any sampling
    std::vector<NetworkModel> nets;
    for (const auto& c : matrix.cases) {
        nets.push_back(build_case_network(base, c, matrix.unit));
        apply_tuned_gains(nets.back(), *tuned);
    }

    std::vector<CaseOutput> out(matrix.cases.size());
    parallel_for(matrix.cases.size(), [&](std::size_t k) {
        const auto& c = matrix.cases[k];
        ManifoldStudy s;
        s.study = StudyCase{c.name, nets[k], c.focus};
        s.scenarios = scenarios;
        s.pair = cfg.pair;
        s.asm_config = cfg.asm_config;
        s.resolution = cfg.resolution;
        s.stability = cfg.stability;
        CaseOutput& o = out[k];
        o.name = c.name;
        o.artifacts = run_manifold_study(s);
        const fs::path dir = cfg.out_dir / c.name;
        o.files = write_manifold_outputs((dir / "manifold").string(), o.artifacts, current_point(nets[k], c, cfg.pair), true);
        const RunManifest m = make_manifest(cfg.command, cfg.inputs, {{"asm", cfg.asm_config.seed}}, o.files, started);
        o.files.push_back(dir / "manifest.json");
        write_json_file(o.files.back(), to_json(m));
    });
    return out;
}

ReportEntry load_report_entry(const fs::path& model, const fs::path& grid, const std::optional<TunerResult>& tuned) {
    ReportEntry e;
    const ManifoldModel m = manifold_from_json(read_json_file(model));
    e.grid = grid_from_csv(read_csv(grid));
    e.name = model.stem().string();
    e.p_th = m.config.p_th;
    e.samples = m.samples.size();
    if (m.domain.names.size() != 2 || canonical_gain_name(m.domain.names[0]) != canonical_gain_name(e.grid.x_name) ||
        canonical_gain_name(m.domain.names[1]) != canonical_gain_name(e.grid.y_name))
        throw ValidationError("grid '" + grid.string() + "' does not match the parameters of model '" + model.string() + "'");
    if (tuned) {
        std::optional<Real> x, y;
        for (std::size_t i = 0; i < tuned->names.size(); ++i) {
            if (tuned->names[i] == canonical_gain_name(e.grid.x_name)) x = tuned->rho[i];
            if (tuned->names[i] == canonical_gain_name(e.grid.y_name)) y = tuned->rho[i];
        }
        if (x && y) e.tuned = Point2{*x, *y};
    }
    return e;
}

std::string render_report_svg(const ReportEntry& e) {
    HeatmapOptions o;
    o.title = e.name;
    o.p_th = e.p_th;
    o.tuned = e.tuned;
    return render_heatmap_svg(e.grid, o);
}

CsvTable report_summary(const std::vector<ReportEntry>& entries) {
    CsvTable t{{"name", "samples", "grid_points", "stable_share", "rpi_points", "rpi_stable_share"}, {}};
    for (const auto& e : entries) {
        std::size_t total = 0, stable = 0, rpi = 0, rpi_stable = 0;
        for (std::size_t i = 0; i < e.grid.xs.size(); ++i)
            for (std::size_t j = 0; j < e.grid.ys.size(); ++j) {
                const bool ok = e.grid.probability(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= e.p_th;
                ++total;
                stable += ok;
                if (e.grid.in_rpi[i][j]) {
                    ++rpi;
                    rpi_stable += ok;
                }
            }
        t.rows.push_back({e.name, std::to_string(e.samples), std::to_string(total),
                          format_real(static_cast<Real>(stable) / static_cast<Real>(total)), std::to_string(rpi),
                          rpi ? format_real(static_cast<Real>(rpi_stable) / static_cast<Real>(rpi)) : "nan"});
    }
    return t;
}

}  // namespace stabman
