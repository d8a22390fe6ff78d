#include "stabman/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace stabman {

std::string format_real(Real v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Real parse_real(const std::string& s) {
    if (s == "nan") return std::numeric_limits<Real>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<Real>::infinity();
    if (s == "-inf") return -std::numeric_limits<Real>::infinity();
    char* end = nullptr;
    const Real v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ValidationError("not a number: '" + s + "'");
    return v;
}

std::string to_csv(const CsvTable& t) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            const std::string& c = cells[i];
            if (c.find_first_of(",\"\r\n") == std::string::npos) {
                out += c;
                continue;
            }
            out += '"';
            for (char ch : c) {
                if (ch == '"') out += '"';
                out += ch;
            }
            out += '"';
        }
        out += '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out;
}

CsvTable parse_csv(const std::string& text) {
    // RFC 4180 records: quoted cells may hold commas, doubled quotes and line breaks
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false, any = false;
    auto end_record = [&] {
        if (any || !cell.empty() || !cells.empty()) {
            cells.push_back(std::move(cell));
            records.push_back(std::move(cells));
        }
        cells.clear();
        cell.clear();
        any = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch != '"') cell += ch;
            else if (i + 1 < text.size() && text[i + 1] == '"') cell += text[++i];
            else quoted = false;
        } else if (ch == '"') {
            quoted = any = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (ch == '\n') {
            end_record();
        } else if (ch != '\r') {
            cell += ch;
        }
    }
    if (quoted) throw ValidationError("CSV text ends inside a quoted cell");
    end_record();

    if (records.empty()) throw ValidationError("CSV file is empty");
    CsvTable t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size())
            throw ValidationError("CSV row has " + std::to_string(records[r].size()) + " cells, header has " +
                                  std::to_string(t.header.size()));
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

Grid2D grid_from_manifold(const std::vector<std::string>& names, const std::vector<ManifoldGridPoint>& pts) {
    if (names.size() != 2) throw ValidationError("a two-parameter grid needs exactly two names");
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<Real>(pts.size()))));
    if (n < 2 || n * n != pts.size()) throw ValidationError("manifold export is not a square two-parameter grid");
    Grid2D g;
    g.x_name = names[0];
    g.y_name = names[1];
    g.probability.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    g.in_rpi.assign(n, std::vector<bool>(n));
    for (std::size_t i = 0; i < n; ++i) g.xs.push_back(pts[i * n].rho[0]);
    for (std::size_t j = 0; j < n; ++j) g.ys.push_back(pts[j].rho[1]);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        g.probability(static_cast<Eigen::Index>(k / n), static_cast<Eigen::Index>(k % n)) = pts[k].probability;
        g.in_rpi[k / n][k % n] = pts[k].in_rpi;
    }
    return g;
}

CsvTable grid_csv(const Grid2D& g) {
    CsvTable t{{g.x_name, g.y_name, "probability", "in_rpi"}, {}};
    for (std::size_t i = 0; i < g.xs.size(); ++i)
        for (std::size_t j = 0; j < g.ys.size(); ++j)
            t.rows.push_back({format_real(g.xs[i]), format_real(g.ys[j]),
                              format_real(g.probability(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))),
                              g.in_rpi[i][j] ? "1" : "0"});
    return t;
}

Grid2D grid_from_csv(const CsvTable& t) {
    if (t.header.size() != 4 || t.header[2] != "probability" || t.header[3] != "in_rpi")
        throw ValidationError("grid CSV needs columns <x>,<y>,probability,in_rpi");
    std::vector<ManifoldGridPoint> pts;
    for (const auto& r : t.rows) {
        if (r[3] != "0" && r[3] != "1") throw ValidationError("grid CSV in_rpi must be 0 or 1");
        pts.push_back({{parse_real(r[0]), parse_real(r[1])}, parse_real(r[2]), r[3] == "1"});
    }
    return grid_from_manifold({t.header[0], t.header[1]}, pts);
}

CsvTable samples_csv(const ManifoldModel& m) {
    CsvTable t{m.domain.names, {}};
    t.header.push_back("label");
    for (const auto& s : m.samples) {
        std::vector<std::string> row;
        for (Real v : s.rho) row.push_back(format_real(v));
        row.push_back(std::to_string(s.label));
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::vector<Polyline> contour_lines(const std::vector<Real>& xs, const std::vector<Real>& ys, const Matrix& v,
                                    Real level) {
    const auto nx = xs.size(), ny = ys.size();
    if (nx < 2 || ny < 2 || static_cast<std::size_t>(v.rows()) != nx || static_cast<std::size_t>(v.cols()) != ny)
        throw ValidationError("contour grid has inconsistent dimensions");

    // edge keys: horizontal edge (i,j)-(i+1,j) -> 2*(i*ny+j), vertical (i,j)-(i,j+1) -> 2*(i*ny+j)+1
    auto above = [&](std::size_t i, std::size_t j) { return v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= level; };
    auto crossing = [&](std::size_t key) -> Point2 {
        const std::size_t cell = key / 2, i = cell / ny, j = cell % ny;
        const std::size_t i2 = key % 2 == 0 ? i + 1 : i, j2 = key % 2 == 0 ? j : j + 1;
        const Real a = v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        const Real b = v(static_cast<Eigen::Index>(i2), static_cast<Eigen::Index>(j2));
        const Real t = a == b ? 0.5 : std::clamp((level - a) / (b - a), 0.0, 1.0);
        return {xs[i] + t * (xs[i2] - xs[i]), ys[j] + t * (ys[j2] - ys[j])};
    };

    std::vector<std::array<std::size_t, 2>> segs;
    for (std::size_t i = 0; i + 1 < nx; ++i)
        for (std::size_t j = 0; j + 1 < ny; ++j) {
            const std::size_t bottom = 2 * (i * ny + j), top = 2 * (i * ny + j + 1);
            const std::size_t left = 2 * (i * ny + j) + 1, right = 2 * ((i + 1) * ny + j) + 1;
            const int c = (above(i, j) ? 1 : 0) | (above(i + 1, j) ? 2 : 0) | (above(i + 1, j + 1) ? 4 : 0) |
                          (above(i, j + 1) ? 8 : 0);
            const Real center = 0.25 * (v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                                        v(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(j)) +
                                        v(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(j + 1)) +
                                        v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)));
            switch (c) {
                case 0: case 15: break;
                case 1: case 14: segs.push_back({left, bottom}); break;
                case 2: case 13: segs.push_back({bottom, right}); break;
                case 3: case 12: segs.push_back({left, right}); break;
                case 4: case 11: segs.push_back({right, top}); break;
                case 6: case 9: segs.push_back({bottom, top}); break;
                case 7: case 8: segs.push_back({left, top}); break;
                case 5:
                    if (center >= level) { segs.push_back({left, top}); segs.push_back({bottom, right}); }
                    else { segs.push_back({left, bottom}); segs.push_back({right, top}); }
                    break;
                case 10:
                    if (center >= level) { segs.push_back({left, bottom}); segs.push_back({right, top}); }
                    else { segs.push_back({left, top}); segs.push_back({bottom, right}); }
                    break;
            }
        }

    std::multimap<std::size_t, std::size_t> at;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        at.emplace(segs[s][0], s);
        at.emplace(segs[s][1], s);
    }
    std::vector<bool> used(segs.size(), false);
    auto next_from = [&](std::size_t key) -> std::optional<std::size_t> {
        auto [b, e] = at.equal_range(key);
        for (auto it = b; it != e; ++it)
            if (!used[it->second]) return it->second;
        return std::nullopt;
    };
    auto other = [&](std::size_t s, std::size_t key) { return segs[s][0] == key ? segs[s][1] : segs[s][0]; };

    std::vector<Polyline> lines;
    for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
        if (used[s0]) continue;
        used[s0] = true;
        std::vector<std::size_t> keys{segs[s0][0], segs[s0][1]};
        while (auto s = next_from(keys.back())) {
            used[*s] = true;
            keys.push_back(other(*s, keys.back()));
        }
        while (auto s = next_from(keys.front())) {
            used[*s] = true;
            keys.insert(keys.begin(), other(*s, keys.front()));
        }
        Polyline pl;
        for (auto k : keys) pl.push_back(crossing(k));
        lines.push_back(std::move(pl));
    }
    return lines;
}

Real hausdorff_distance(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    if (a.empty() || b.empty()) return std::numeric_limits<Real>::infinity();
    auto directed = [](const std::vector<Point2>& p, const std::vector<Point2>& q) {
        Real worst = 0.0;
        for (const auto& x : p) {
            Real best = std::numeric_limits<Real>::infinity();
            for (const auto& y : q) best = std::min(best, std::hypot(x[0] - y[0], x[1] - y[1]));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

}  // namespace stabman
