#include "stabman/network_io.hpp"

#include <fstream>
#include <set>

namespace stabman {

using nlohmann::json;

namespace {

/// Reads the members of one JSON object and complains about leftovers.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ValidationError(where_ + ": expected a JSON object");
    }

    template <class T>
    void optional(const char* key, T& out) {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ValidationError(where_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    T required(const char* key) {
        if (!j_.contains(key)) throw ValidationError(where_ + ": missing required field '" + key + "'");
        T out{};
        optional(key, out);
        return out;
    }

    const json* child(const char* key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ValidationError(where_ + ": unknown field '" + k + "'");
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

BusRole parse_role(const std::string& s, const std::string& where) {
    if (s == "slack") return BusRole::Slack;
    if (s == "PV") return BusRole::PV;
    if (s == "PQ") return BusRole::PQ;
    throw ValidationError(where + ": unknown bus role '" + s + "'");
}

BranchKind parse_branch_kind(const std::string& s, const std::string& where) {
    if (s == "pi_line") return BranchKind::PiLine;
    if (s == "transformer") return BranchKind::Transformer;
    if (s == "rl_load") return BranchKind::RlLoad;
    if (s == "shunt_cap") return BranchKind::ShuntCap;
    throw ValidationError(where + ": unknown branch kind '" + s + "'");
}

DeviceKind parse_device_kind(const std::string& s, const std::string& where) {
    if (s == "SG") return DeviceKind::SG;
    if (s == "IBR") return DeviceKind::IBR;
    if (s == "thevenin_source") return DeviceKind::TheveninSource;
    throw ValidationError(where + ": unknown device kind '" + s + "'");
}

BranchParams parse_branch_params(const json& j, BranchKind kind, const std::string& where) {
    Fields f(j, where);
    BranchParams p;
    switch (kind) {
        case BranchKind::PiLine:
            p.r = f.required<Real>("r");
            p.x = f.required<Real>("x");
            f.optional("b_total", p.b_total);
            break;
        case BranchKind::Transformer:
            p.r1 = f.required<Real>("r1");
            p.x1 = f.required<Real>("x1");
            p.r2 = f.required<Real>("r2");
            p.x2 = f.required<Real>("x2");
            p.r_m = f.required<Real>("r_m");
            p.x_m = f.required<Real>("x_m");
            break;
        case BranchKind::RlLoad:
            p.r = f.required<Real>("r");
            p.x = f.required<Real>("x");
            break;
        case BranchKind::ShuntCap: p.b = f.required<Real>("b"); break;
    }
    f.finish();
    return p;
}

SgParams parse_sg(const json& j, const std::string& where) {
    Fields f(j, where);
    SgParams s;
    f.optional("h", s.h);
    f.optional("d", s.d);
    f.optional("xd", s.xd);
    f.optional("xd1", s.xd1);
    f.optional("xd2", s.xd2);
    f.optional("xq", s.xq);
    f.optional("xq1", s.xq1);
    f.optional("xq2", s.xq2);
    f.optional("xl", s.xl);
    f.optional("rs", s.rs);
    f.optional("td0_1", s.td0_1);
    f.optional("td0_2", s.td0_2);
    f.optional("tq0_1", s.tq0_1);
    f.optional("tq0_2", s.tq0_2);
    if (const json* g = f.child("governor")) {
        Fields gf(*g, where + ".governor");
        gf.optional("droop", s.governor.droop);
        gf.optional("t_g", s.governor.t_g);
        gf.optional("t_ch", s.governor.t_ch);
        gf.optional("t_rh", s.governor.t_rh);
        gf.optional("f_hp", s.governor.f_hp);
        gf.finish();
    }
    if (const json* a = f.child("avr")) {
        Fields af(*a, where + ".avr");
        af.optional("t_r", s.avr.t_r);
        af.optional("k_a", s.avr.k_a);
        af.optional("t_a", s.avr.t_a);
        af.optional("k_e", s.avr.k_e);
        af.optional("t_e", s.avr.t_e);
        af.optional("k_f", s.avr.k_f);
        af.optional("t_f", s.avr.t_f);
        af.finish();
    }
    f.finish();
    return s;
}

IbrData parse_ibr(const json& j, const std::string& where) {
    Fields f(j, where);
    IbrData d;
    f.optional("N", d.n_units);
    if (const json* p = f.child("physical")) {
        Fields pf(*p, where + ".physical");
        auto& ph = d.physical;
        pf.optional("R", ph.R);
        pf.optional("L", ph.L);
        pf.optional("C_f", ph.C_f);
        pf.optional("R_f", ph.R_f);
        pf.optional("C", ph.C);
        pf.optional("I_dc", ph.I_dc);
        pf.optional("s_base", ph.s_base);
        pf.optional("v_base_ac", ph.v_base_ac);
        pf.optional("v_base_dc", ph.v_base_dc);
        pf.finish();
    }
    if (const json* c = f.child("control")) {
        Fields cf(*c, where + ".control");
        auto& ct = d.control;
        cf.optional("k_p_pll", ct.kp_pll);
        cf.optional("k_i_pll", ct.ki_pll);
        cf.optional("k_p_i", ct.kp_i);
        cf.optional("k_i_i", ct.ki_i);
        std::string variant = "vdc";
        cf.optional("dc_variant", variant);
        ct.dc_variant = parse_dc_variant(variant);
        const bool v2 = ct.dc_variant == DcVariant::Vdc2;
        const char* kp = v2 ? "k_p_2dc" : "k_p_dc";
        const char* ki = v2 ? "k_i_2dc" : "k_i_dc";
        const char* other_kp = v2 ? "k_p_dc" : "k_p_2dc";
        const char* other_ki = v2 ? "k_i_dc" : "k_i_2dc";
        if (c->contains(other_kp) || c->contains(other_ki))
            throw ValidationError(where + ".control: dc gains do not match dc_variant '" + variant + "'");
        cf.optional(kp, ct.kp_dc);
        cf.optional(ki, ct.ki_dc);
        cf.optional("k_P", ct.k_P);
        cf.optional("k_Q", ct.k_Q);
        cf.finish();
    }
    f.finish();
    return d;
}

}  // namespace

IbrData ibr_from_json(const json& doc, const std::string& where) { return parse_ibr(doc, where); }

DcVariant parse_dc_variant(const std::string& s) {
    if (s == "vdc") return DcVariant::Vdc;
    if (s == "vdc2") return DcVariant::Vdc2;
    throw ValidationError("unknown dc_variant '" + s + "' (expected vdc or vdc2)");
}

std::string to_string(DcVariant v) { return v == DcVariant::Vdc ? "vdc" : "vdc2"; }

NetworkModel network_from_json(const json& doc) {
    Fields f(doc, "network");
    NetworkModel net;
    f.optional("name", net.name);
    net.system_frequency = 2.0 * kPi * f.required<Real>("frequency_hz");
    net.power_base_mva = f.required<Real>("power_base_mva");

    const json* buses = f.child("buses");
    if (!buses || !buses->is_array()) throw ValidationError("network: 'buses' must be an array");
    for (std::size_t i = 0; i < buses->size(); ++i) {
        Fields b((*buses)[i], "buses[" + std::to_string(i) + "]");
        Bus bus;
        bus.id = b.required<std::string>("id");
        bus.role = parse_role(b.required<std::string>("role"), b.where());
        b.optional("base_voltage", bus.base_voltage_kv);
        b.optional("v_ref", bus.v_ref);
        b.finish();
        net.buses.push_back(std::move(bus));
    }

    if (const json* branches = f.child("branches")) {
        if (!branches->is_array()) throw ValidationError("network: 'branches' must be an array");
        for (std::size_t i = 0; i < branches->size(); ++i) {
            const std::string where = "branches[" + std::to_string(i) + "]";
            Fields b((*branches)[i], where);
            Branch br;
            br.id = b.required<std::string>("id");
            br.kind = parse_branch_kind(b.required<std::string>("kind"), where);
            br.terminals = b.required<std::vector<std::string>>("terminals");
            const json* params = b.child("params");
            if (!params) throw ValidationError(where + ": missing required field 'params'");
            br.params = parse_branch_params(*params, br.kind, where + ".params");
            b.finish();
            net.branches.push_back(std::move(br));
        }
    }

    if (const json* devices = f.child("devices")) {
        if (!devices->is_array()) throw ValidationError("network: 'devices' must be an array");
        for (std::size_t i = 0; i < devices->size(); ++i) {
            const std::string where = "devices[" + std::to_string(i) + "]";
            Fields d((*devices)[i], where);
            Device dev;
            dev.id = d.required<std::string>("id");
            dev.bus = d.required<std::string>("bus");
            dev.kind = parse_device_kind(d.required<std::string>("kind"), where);
            d.optional("rating", dev.rating_mva);
            d.optional("p_mw", dev.p_mw);
            d.optional("q_mvar", dev.q_mvar);
            const json* sg = d.child("sg_params");
            const json* ibr = d.child("ibr");
            const json* th = d.child("thevenin");
            if (dev.kind == DeviceKind::SG && sg) dev.sg = parse_sg(*sg, where + ".sg_params");
            if (dev.kind == DeviceKind::IBR && ibr) dev.ibr = parse_ibr(*ibr, where + ".ibr");
            if (dev.kind == DeviceKind::TheveninSource && th) {
                Fields t(*th, where + ".thevenin");
                t.optional("r", dev.thevenin.r);
                t.optional("x", dev.thevenin.x);
                t.optional("v", dev.thevenin.v);
                t.finish();
            }
            if ((sg && dev.kind != DeviceKind::SG) || (ibr && dev.kind != DeviceKind::IBR) ||
                (th && dev.kind != DeviceKind::TheveninSource))
                throw ValidationError(where + ": parameter block does not match kind '" + to_string(dev.kind) + "'");
            d.finish();
            net.devices.push_back(std::move(dev));
        }
    }
    f.finish();
    return net;
}

json network_to_json(const NetworkModel& net) {
    json doc;
    doc["name"] = net.name;
    doc["frequency_hz"] = net.frequency_hz();
    doc["power_base_mva"] = net.power_base_mva;
    doc["buses"] = json::array();
    for (const auto& b : net.buses)
        doc["buses"].push_back(
            {{"id", b.id}, {"role", to_string(b.role)}, {"base_voltage", b.base_voltage_kv}, {"v_ref", b.v_ref}});
    doc["branches"] = json::array();
    for (const auto& br : net.branches) {
        const auto& p = br.params;
        json params;
        switch (br.kind) {
            case BranchKind::PiLine: params = {{"r", p.r}, {"x", p.x}, {"b_total", p.b_total}}; break;
            case BranchKind::Transformer:
                params = {{"r1", p.r1}, {"x1", p.x1}, {"r2", p.r2}, {"x2", p.x2}, {"r_m", p.r_m}, {"x_m", p.x_m}};
                break;
            case BranchKind::RlLoad: params = {{"r", p.r}, {"x", p.x}}; break;
            case BranchKind::ShuntCap: params = {{"b", p.b}}; break;
        }
        doc["branches"].push_back(
            {{"id", br.id}, {"kind", to_string(br.kind)}, {"terminals", br.terminals}, {"params", params}});
    }
    doc["devices"] = json::array();
    for (const auto& d : net.devices) {
        json j = {{"id", d.id}, {"bus", d.bus}, {"kind", to_string(d.kind)}, {"rating", d.rating_mva},
                  {"p_mw", d.p_mw}, {"q_mvar", d.q_mvar}};
        if (d.kind == DeviceKind::SG) {
            const auto& s = d.sg;
            j["sg_params"] = {{"h", s.h},         {"d", s.d},         {"xd", s.xd},       {"xd1", s.xd1},
                              {"xd2", s.xd2},     {"xq", s.xq},       {"xq1", s.xq1},     {"xq2", s.xq2},
                              {"xl", s.xl},       {"rs", s.rs},       {"td0_1", s.td0_1}, {"td0_2", s.td0_2},
                              {"tq0_1", s.tq0_1}, {"tq0_2", s.tq0_2}};
            j["sg_params"]["governor"] = {{"droop", s.governor.droop}, {"t_g", s.governor.t_g},
                                          {"t_ch", s.governor.t_ch},   {"t_rh", s.governor.t_rh},
                                          {"f_hp", s.governor.f_hp}};
            j["sg_params"]["avr"] = {{"t_r", s.avr.t_r}, {"k_a", s.avr.k_a}, {"t_a", s.avr.t_a}, {"k_e", s.avr.k_e},
                                     {"t_e", s.avr.t_e}, {"k_f", s.avr.k_f}, {"t_f", s.avr.t_f}};
        } else if (d.kind == DeviceKind::IBR) {
            const auto& ph = d.ibr.physical;
            const auto& c = d.ibr.control;
            const bool v2 = c.dc_variant == DcVariant::Vdc2;
            j["ibr"] = {{"N", d.ibr.n_units},
                        {"physical",
                         {{"R", ph.R},
                          {"L", ph.L},
                          {"C_f", ph.C_f},
                          {"R_f", ph.R_f},
                          {"C", ph.C},
                          {"I_dc", ph.I_dc},
                          {"s_base", ph.s_base},
                          {"v_base_ac", ph.v_base_ac},
                          {"v_base_dc", ph.v_base_dc}}},
                        {"control",
                         {{"k_p_pll", c.kp_pll},
                          {"k_i_pll", c.ki_pll},
                          {"k_p_i", c.kp_i},
                          {"k_i_i", c.ki_i},
                          {"dc_variant", to_string(c.dc_variant)},
                          {v2 ? "k_p_2dc" : "k_p_dc", c.kp_dc},
                          {v2 ? "k_i_2dc" : "k_i_dc", c.ki_dc},
                          {"k_P", c.k_P},
                          {"k_Q", c.k_Q}}}};
        } else {
            j["thevenin"] = {{"r", d.thevenin.r}, {"x", d.thevenin.x}, {"v", d.thevenin.v}};
        }
        doc["devices"].push_back(std::move(j));
    }
    return doc;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path.string() + "': parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

NetworkModel load_network(const std::filesystem::path& path) { return network_from_json(read_json_file(path)); }

ScenarioSet scenarios_from_json(const json& doc) {
    Fields f(doc, "scenario file");
    const json* list = f.child("scenarios");
    if (!list || !list->is_array()) throw ValidationError("scenario file: 'scenarios' must be an array");
    f.finish();
    ScenarioSet set;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const std::string where = "scenarios[" + std::to_string(i) + "]";
        Fields s((*list)[i], where);
        Scenario sc;
        sc.name = "s" + std::to_string(i);
        s.optional("name", sc.name);
        s.optional("load_multipliers", sc.load_multipliers);
        s.optional("shunt_multipliers", sc.shunt_multipliers);
        if (const json* disp = s.child("dispatch")) {
            if (!disp->is_object()) throw ValidationError(where + ".dispatch must be an object");
            for (const auto& [dev, val] : disp->items()) {
                Fields d(val, where + ".dispatch." + dev);
                DeviceDispatch dd;
                Real p = 0.0, v = 0.0;
                if (val.contains("p_mw")) {
                    d.optional("p_mw", p);
                    dd.p_mw = p;
                }
                if (val.contains("v_ref")) {
                    d.optional("v_ref", v);
                    dd.v_ref = v;
                }
                d.optional("available", dd.available);
                d.optional("rating_scale", dd.rating_scale);
                d.finish();
                sc.dispatch[dev] = dd;
            }
        }
        s.finish();
        set.scenarios.push_back(std::move(sc));
    }
    return set;
}

json scenarios_to_json(const ScenarioSet& set) {
    json list = json::array();
    for (const auto& sc : set.scenarios) {
        json j = {{"name", sc.name}, {"load_multipliers", sc.load_multipliers}, {"shunt_multipliers", sc.shunt_multipliers}};
        json disp = json::object();
        for (const auto& [dev, d] : sc.dispatch) {
            json e = {{"available", d.available}, {"rating_scale", d.rating_scale}};
            if (d.p_mw) e["p_mw"] = *d.p_mw;
            if (d.v_ref) e["v_ref"] = *d.v_ref;
            disp[dev] = e;
        }
        j["dispatch"] = disp;
        list.push_back(std::move(j));
    }
    return {{"scenarios", list}};
}

ScenarioSet load_scenarios(const std::filesystem::path& path) { return scenarios_from_json(read_json_file(path)); }

ScenarioSpec scenario_spec_from_json(const json& doc) {
    Fields f(doc, "scenario spec");
    ScenarioSpec spec;
    spec.daily_curve = f.required<std::vector<Real>>("daily_curve");
    f.optional("time_shift", spec.time_shift);
    f.optional("noise_amplitude", spec.noise_amplitude);
    f.optional("seed", spec.seed);
    f.optional("include_peak", spec.include_peak);
    f.optional("rating_variants", spec.rating_variants);
    if (spec.rating_variants.empty()) spec.rating_variants.emplace_back();
    f.finish();
    return spec;
}

ScenarioSet read_scenario_file(const NetworkModel& net, const std::filesystem::path& path) {
    const auto doc = read_json_file(path);
    ScenarioSet set;
    if (doc.is_object() && doc.contains("spec")) {
        if (doc.size() != 1) throw ValidationError("'" + path.string() + "': a spec file holds only the 'spec' object");
        set = synthesize_scenarios(net, scenario_spec_from_json(doc.at("spec")));
    } else {
        set = scenarios_from_json(doc);
    }
    validate_scenarios(net, set);
    return set;
}

}  // namespace stabman
