#pragma once

#include "stabman/assembler.hpp"
#include "stabman/components.hpp"
#include "stabman/netmodel.hpp"
#include "stabman/powerflow.hpp"
#include "stabman/stability.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#ifndef STABMAN_DATA_DIR
#define STABMAN_DATA_DIR "data"
#endif

namespace fixtures {

using namespace stabman;

inline std::filesystem::path data_file(const std::string& name) { return std::filesystem::path(STABMAN_DATA_DIR) / name; }

inline Branch line(const std::string& id, const std::string& a, const std::string& b, Real r, Real x, Real b_total = 0.0) {
    Branch br{id, BranchKind::PiLine, {a, b}, {}};
    br.params.r = r;
    br.params.x = x;
    br.params.b_total = b_total;
    return br;
}

inline Branch rl_load(const std::string& id, const std::string& bus, Real r, Real x) {
    Branch br{id, BranchKind::RlLoad, {bus}, {}};
    br.params.r = r;
    br.params.x = x;
    return br;
}

/// rl_load drawing S at 1 pu under the constant-power reading S = 1/conj(z).
inline Branch pq_load(const std::string& id, const std::string& bus, Complex s) {
    const Complex z = 1.0 / std::conj(s);
    return rl_load(id, bus, z.real(), z.imag());
}

inline Device ideal_source(const std::string& id, const std::string& bus) {
    Device d;
    d.id = id;
    d.bus = bus;
    d.kind = DeviceKind::TheveninSource;
    d.rating_mva = 1000.0;
    return d;
}

inline NetworkModel empty_net(const std::string& name = "fixture") {
    NetworkModel n;
    n.name = name;
    n.system_frequency = 2.0 * kPi * 50.0;
    n.power_base_mva = 100.0;
    return n;
}

/// Ideal source behind a line feeding one IBR: the tuning toy problem.
inline NetworkModel ibr_vs_source(DcVariant dc = DcVariant::Vdc, int n_units = 1) {
    auto n = empty_net("ibr_vs_source");
    n.buses = {{"GRID", BusRole::Slack, 20.0, 1.0}, {"PCC", BusRole::PQ, 20.0, 1.0}};
    n.devices.push_back(ideal_source("SRC", "GRID"));
    n.branches.push_back(line("L1", "GRID", "PCC", 0.01, 0.1));
    Device g;
    g.id = "IBR1";
    g.bus = "PCC";
    g.kind = DeviceKind::IBR;
    g.rating_mva = 5.0 * n_units;
    g.p_mw = 4.0 * n_units;
    g.ibr.n_units = n_units;
    g.ibr.physical.R_f = 0.4;
    g.ibr.control.kp_i = 0.1;
    g.ibr.control.ki_i = 10.0;
    g.ibr.control.dc_variant = dc;
    if (dc == DcVariant::Vdc2) g.ibr.control.kp_dc = 0.75;
    n.devices.push_back(g);
    return n;
}

/// Ideal source, line and a PV synchronous machine.
inline NetworkModel sg_vs_source() {
    auto n = empty_net("sg_vs_source");
    n.buses = {{"GRID", BusRole::Slack, 20.0, 1.0}, {"G", BusRole::PV, 20.0, 1.02}};
    n.devices.push_back(ideal_source("SRC", "GRID"));
    n.branches.push_back(line("L1", "GRID", "G", 0.01, 0.1));
    Device g;
    g.id = "G1";
    g.bus = "G";
    g.kind = DeviceKind::SG;
    g.rating_mva = 200.0;
    g.p_mw = 100.0;
    n.devices.push_back(g);
    return n;
}

/// Source - line - bus - line - load chain with line charging.
inline NetworkModel three_bus_chain() {
    auto n = empty_net("chain");
    n.buses = {{"A", BusRole::Slack, 20.0, 1.0}, {"B", BusRole::PQ, 20.0, 1.0}, {"C", BusRole::PQ, 20.0, 1.0}};
    n.devices.push_back(ideal_source("SRC", "A"));
    n.branches.push_back(line("L1", "A", "B", 0.02, 0.2, 0.04));
    n.branches.push_back(line("L2", "B", "C", 0.03, 0.15, 0.02));
    n.branches.push_back(rl_load("LD", "C", 1.6, 0.8));
    return n;
}

/// Greedy nearest matching of two spectra; returns the largest relative gap.
inline Real spectrum_distance(const CVector& a, const CVector& b, Real floor = 1.0) {
    if (a.size() != b.size()) return std::numeric_limits<Real>::infinity();
    std::vector<bool> used(static_cast<std::size_t>(b.size()), false);
    Real worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        Eigen::Index best = -1;
        Real gap = std::numeric_limits<Real>::infinity();
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const Real g = std::abs(a[i] - b[j]);
            if (g < gap) {
                gap = g;
                best = j;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        worst = std::max(worst, gap / std::max(std::abs(b[best]), floor));
    }
    return worst;
}

/// Central differences of f around z with step h, column per coordinate.
inline Matrix central_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& z, Real h = 1e-6) {
    const Vector f0 = f(z);
    Matrix J(f0.size(), z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        Vector zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        J.col(k) = (f(zp) - f(zm)) / (2.0 * h);
    }
    return J;
}

/// max |a - b| / max(|a|, 1) over entries.
inline Real max_relative_error(const Matrix& analytic, const Matrix& numeric) {
    Real e = 0.0;
    for (Eigen::Index i = 0; i < analytic.rows(); ++i)
        for (Eigen::Index j = 0; j < analytic.cols(); ++j)
            e = std::max(e, std::abs(analytic(i, j) - numeric(i, j)) / std::max(std::abs(analytic(i, j)), 1.0));
    return e;
}

}  // namespace fixtures
