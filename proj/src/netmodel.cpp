#include "stabman/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace stabman {

std::optional<std::size_t> NetworkModel::bus_index(const std::string& id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return i;
    return std::nullopt;
}

std::optional<std::size_t> NetworkModel::device_index(const std::string& id) const {
    for (std::size_t i = 0; i < devices.size(); ++i)
        if (devices[i].id == id) return i;
    return std::nullopt;
}

const Device& NetworkModel::device(const std::string& id) const {
    auto idx = device_index(id);
    if (!idx) throw ValidationError("unknown device '" + id + "'");
    return devices[*idx];
}

Device& NetworkModel::device(const std::string& id) {
    auto idx = device_index(id);
    if (!idx) throw ValidationError("unknown device '" + id + "'");
    return devices[*idx];
}

std::size_t NetworkModel::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].role == BusRole::Slack) return i;
    throw ValidationError("network has no slack bus");
}

std::string to_string(BusRole r) {
    switch (r) {
        case BusRole::Slack: return "slack";
        case BusRole::PV: return "PV";
        case BusRole::PQ: return "PQ";
    }
    return "?";
}

std::string to_string(BranchKind k) {
    switch (k) {
        case BranchKind::PiLine: return "pi_line";
        case BranchKind::Transformer: return "transformer";
        case BranchKind::RlLoad: return "rl_load";
        case BranchKind::ShuntCap: return "shunt_cap";
    }
    return "?";
}

std::string to_string(DeviceKind k) {
    switch (k) {
        case DeviceKind::SG: return "SG";
        case DeviceKind::IBR: return "IBR";
        case DeviceKind::TheveninSource: return "thevenin_source";
    }
    return "?";
}

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

bool finite_all(std::initializer_list<Real> values) {
    return std::all_of(values.begin(), values.end(), [](Real v) { return std::isfinite(v); });
}

void check_branch(const NetworkModel& net, const Branch& br) {
    const std::string who = "branch '" + br.id + "'";
    const auto& p = br.params;
    const std::size_t want = (br.kind == BranchKind::PiLine || br.kind == BranchKind::Transformer) ? 2 : 1;
    require(br.terminals.size() == want,
            who + ": " + to_string(br.kind) + " needs " + std::to_string(want) + " terminal(s)");
    for (const auto& t : br.terminals)
        require(net.bus_index(t).has_value(), who + " references missing bus '" + t + "'");
    if (want == 2) require(br.terminals[0] != br.terminals[1], who + " connects a bus to itself");
    require(finite_all({p.r, p.x, p.b_total, p.r1, p.x1, p.r2, p.x2, p.r_m, p.x_m, p.b}),
            who + " has non-finite parameters");
    switch (br.kind) {
        case BranchKind::PiLine:
            require(p.r >= 0.0, who + ": negative series resistance");
            require(p.x != 0.0, who + ": zero series reactance");
            require(p.b_total >= 0.0, who + ": negative shunt susceptance");
            break;
        case BranchKind::Transformer:
            require(p.r1 >= 0.0 && p.r2 >= 0.0, who + ": negative winding resistance");
            require(p.x1 != 0.0 && p.x2 != 0.0, who + ": zero leakage reactance");
            require(p.r_m > 0.0 && p.x_m != 0.0, who + ": magnetizing branch needs r_m > 0 and x_m != 0");
            break;
        case BranchKind::RlLoad:
            require(p.r >= 0.0, who + ": negative resistance");
            require(p.x != 0.0, who + ": zero reactance");
            break;
        case BranchKind::ShuntCap:
            require(p.b > 0.0, who + ": shunt susceptance must be positive");
            break;
    }
}

void check_device(const NetworkModel& net, const Device& dev) {
    const std::string who = "device '" + dev.id + "'";
    require(net.bus_index(dev.bus).has_value(), who + " references missing bus '" + dev.bus + "'");
    require(std::isfinite(dev.rating_mva) && dev.rating_mva > 0.0, who + ": rating must be positive");
    require(finite_all({dev.p_mw, dev.q_mvar}), who + ": non-finite dispatch");
    switch (dev.kind) {
        case DeviceKind::SG: {
            const auto& s = dev.sg;
            require(finite_all({s.h, s.d, s.xd, s.xd1, s.xd2, s.xq, s.xq1, s.xq2, s.xl, s.rs, s.td0_1, s.td0_2,
                                s.tq0_1, s.tq0_2}),
                    who + ": non-finite machine constants");
            require(s.h > 0.0 && s.d >= 0.0 && s.rs >= 0.0, who + ": H > 0, D >= 0, Rs >= 0 required");
            require(s.xd1 > s.xl && s.xq1 > s.xl && s.xd2 > 0.0 && s.xq2 > 0.0,
                    who + ": reactances must satisfy X' > Xls, X'' > 0");
            require(s.xd >= s.xd1 && s.xd1 >= s.xd2 && s.xq >= s.xq1 && s.xq1 >= s.xq2,
                    who + ": reactances must be ordered X >= X' >= X''");
            require(s.td0_1 > 0 && s.td0_2 > 0 && s.tq0_1 > 0 && s.tq0_2 > 0, who + ": time constants must be positive");
            const auto& g = s.governor;
            require(g.droop > 0 && g.t_g > 0 && g.t_ch > 0 && g.t_rh > 0 && g.f_hp >= 0 && g.f_hp <= 1,
                    who + ": invalid governor parameters");
            const auto& a = s.avr;
            require(a.t_r > 0 && a.t_a > 0 && a.t_e > 0 && a.t_f > 0 && a.k_a >= 0 && a.k_f >= 0,
                    who + ": invalid AVR parameters");
            break;
        }
        case DeviceKind::IBR: {
            const auto& ph = dev.ibr.physical;
            const auto& c = dev.ibr.control;
            require(dev.ibr.n_units >= 1, who + ": unit count N must be >= 1");
            require(finite_all({ph.R, ph.L, ph.C_f, ph.R_f, ph.C, ph.I_dc, ph.s_base, ph.v_base_ac, ph.v_base_dc}),
                    who + ": non-finite physical parameters");
            require(ph.R > 0 && ph.L > 0 && ph.C_f > 0 && ph.R_f > 0 && ph.C > 0 && ph.I_dc >= 0 && ph.s_base > 0 &&
                        ph.v_base_ac > 0 && ph.v_base_dc > 0,
                    who + ": physical parameters must be positive");
            require(finite_all({c.kp_pll, c.ki_pll, c.kp_i, c.ki_i, c.kp_dc, c.ki_dc, c.k_P, c.k_Q}),
                    who + ": non-finite control gains");
            require(c.kp_pll >= 0 && c.ki_pll >= 0 && c.kp_i >= 0 && c.ki_i >= 0 && c.kp_dc >= 0 && c.ki_dc >= 0 &&
                        c.k_P >= 0 && c.k_Q >= 0,
                    who + ": control gains must be >= 0");
            break;
        }
        case DeviceKind::TheveninSource: {
            const auto& t = dev.thevenin;
            require(finite_all({t.r, t.x, t.v}), who + ": non-finite thevenin parameters");
            require(t.r >= 0.0 && t.v > 0.0, who + ": thevenin source needs r >= 0 and v > 0");
            require((t.r == 0.0 && t.x == 0.0) || t.x != 0.0, who + ": a resistive-only source impedance is unsupported");
            break;
        }
    }
}

}  // namespace

const NetworkModel& validate_network(const NetworkModel& net) {
    require(std::isfinite(net.system_frequency) && net.system_frequency > 0, "system frequency must be positive");
    require(std::isfinite(net.power_base_mva) && net.power_base_mva > 0, "power base must be positive");
    require(!net.buses.empty(), "network has no buses");

    std::set<std::string> ids;
    std::size_t slacks = 0;
    for (const auto& b : net.buses) {
        require(!b.id.empty(), "bus with empty id");
        require(ids.insert(b.id).second, "duplicate bus id '" + b.id + "'");
        require(std::isfinite(b.v_ref) && std::isfinite(b.base_voltage_kv) && b.base_voltage_kv > 0,
                "bus '" + b.id + "': invalid base voltage or v_ref");
        if (b.role == BusRole::Slack) ++slacks;
        if (b.role != BusRole::PQ) require(b.v_ref > 0.0, "bus '" + b.id + "': v_ref must be positive");
    }
    require(slacks > 0, "network has no slack bus");
    require(slacks == 1, "multiple slack buses");

    ids.clear();
    for (const auto& br : net.branches) {
        require(ids.insert(br.id).second, "duplicate branch id '" + br.id + "'");
        check_branch(net, br);
    }
    ids.clear();
    for (const auto& d : net.devices) {
        require(ids.insert(d.id).second, "duplicate device id '" + d.id + "'");
        check_device(net, d);
    }

    // A thevenin source with internal impedance is a series element behind an
    // EMF, so it may share its bus with one other device.
    auto sourced = [](const Device& d) {
        return d.kind == DeviceKind::TheveninSource && (d.thevenin.r != 0.0 || d.thevenin.x != 0.0);
    };
    for (const auto& b : net.buses) {
        const Device* dev = nullptr;
        const Device* source = nullptr;
        for (const auto& d : net.devices) {
            if (d.bus != b.id) continue;
            const Device*& slot = (sourced(d) && !source) ? source : dev;
            require(!slot, "bus '" + b.id + "' hosts more than one device");
            slot = &d;
        }
        if (source) {
            require(b.role == BusRole::Slack, "thevenin_source '" + source->id + "' must sit on the slack bus");
            continue;
        }
        if (b.role == BusRole::Slack)
            require(dev && (dev->kind == DeviceKind::SG || dev->kind == DeviceKind::TheveninSource),
                    "slack bus '" + b.id + "' must host an SG or a thevenin_source");
        if (b.role == BusRole::PV)
            require(dev && dev->kind == DeviceKind::SG, "PV bus '" + b.id + "' must host an SG");
        if (dev && dev->kind == DeviceKind::TheveninSource)
            require(b.role == BusRole::Slack, "thevenin_source '" + dev->id + "' must sit on the slack bus");
    }

    // connectivity through two-terminal branches
    const std::size_t n = net.buses.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (const auto& br : net.branches) {
        if (br.terminals.size() != 2) continue;
        parent[find(*net.bus_index(br.terminals[0]))] = find(*net.bus_index(br.terminals[1]));
    }
    const std::size_t root = find(net.slack_index());
    std::vector<std::string> island;
    for (std::size_t i = 0; i < n; ++i)
        if (find(i) != root) island.push_back(net.buses[i].id);
    if (!island.empty()) {
        std::ostringstream os;
        os << "network is disconnected; island without slack: {";
        for (std::size_t i = 0; i < island.size(); ++i) os << (i ? ", " : "") << island[i];
        os << "}";
        throw ValidationError(os.str());
    }
    return net;
}

void validate_scenarios(const NetworkModel& net, const ScenarioSet& set) {
    require(set.size() >= 1, "scenario set is empty");
    for (const auto& sc : set.scenarios) {
        const std::string who = "scenario '" + sc.name + "'";
        for (const auto& [bus, m] : sc.load_multipliers) {
            require(net.bus_index(bus).has_value(), who + " references missing bus '" + bus + "'");
            require(std::isfinite(m) && m >= 0.0, who + ": load multiplier must be >= 0");
        }
        for (const auto& [bus, m] : sc.shunt_multipliers) {
            require(net.bus_index(bus).has_value(), who + " references missing bus '" + bus + "'");
            require(std::isfinite(m) && m >= 0.0, who + ": shunt multiplier must be >= 0");
        }
        for (const auto& [dev, d] : sc.dispatch) {
            require(net.device_index(dev).has_value(), who + " dispatches missing device '" + dev + "'");
            require(d.rating_scale > 0.0, who + ": rating scale must be positive");
            if (d.v_ref) require(*d.v_ref > 0.0, who + ": v_ref must be positive");
        }
    }
}

AggregatedIbr aggregate_ibr(const IbrPhysicalParams& physical, const IbrControlParams& control, int n) {
    if (n < 1) throw ValidationError("aggregation count N must be >= 1");
    const Real N = static_cast<Real>(n);
    AggregatedIbr out{physical, control, N};
    out.physical.I_dc *= N;
    out.physical.C *= N;
    out.physical.C_f *= N;
    out.physical.R /= N;
    out.physical.L /= N;
    out.physical.R_f /= N;
    // The current PI maps a current error to a voltage; with N times the
    // current and 1/N the impedance, 1/N keeps the loop identical to one unit.
    out.control.kp_i /= N;
    out.control.ki_i /= N;
    out.control.kp_dc *= N;
    out.control.ki_dc *= N;
    out.control.k_P *= N;
    out.control.k_Q *= N;
    return out;
}

NetworkModel apply_scenario(const NetworkModel& net, const Scenario& scenario) {
    NetworkModel out = net;
    auto mult = [](const std::map<std::string, Real>& m, const std::string& bus) {
        auto it = m.find(bus);
        return it == m.end() ? 1.0 : it->second;
    };
    std::vector<Branch> branches;
    branches.reserve(net.branches.size());
    for (auto br : net.branches) {
        if (br.kind == BranchKind::RlLoad) {
            const Real m = mult(scenario.load_multipliers, br.terminals[0]);
            if (m == 0.0) continue;
            br.params.r /= m;
            br.params.x /= m;
        } else if (br.kind == BranchKind::ShuntCap) {
            const Real m = mult(scenario.shunt_multipliers, br.terminals[0]);
            if (m == 0.0) continue;
            br.params.b *= m;
        }
        branches.push_back(std::move(br));
    }
    out.branches = std::move(branches);

    std::vector<Device> devices;
    for (auto dev : net.devices) {
        auto it = scenario.dispatch.find(dev.id);
        if (it != scenario.dispatch.end()) {
            const auto& d = it->second;
            auto& bus = out.buses[*out.bus_index(dev.bus)];
            if (!d.available) {
                if (bus.role == BusRole::Slack)
                    throw ValidationError("scenario '" + scenario.name + "' removes slack device '" + dev.id + "'");
                bus.role = BusRole::PQ;
                continue;
            }
            if (d.p_mw) dev.p_mw = *d.p_mw;
            if (d.v_ref) bus.v_ref = *d.v_ref;
            if (d.rating_scale != 1.0) {
                dev.rating_mva *= d.rating_scale;
                if (dev.kind == DeviceKind::IBR)
                    dev.ibr.n_units = std::max(1, static_cast<int>(std::lround(dev.ibr.n_units * d.rating_scale)));
            }
        }
        devices.push_back(std::move(dev));
    }
    out.devices = std::move(devices);
    return out;
}

}  // namespace stabman
