#pragma once

#include "stabman/asm.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stabman {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Shortest-safe decimal form with 17 significant digits; parses back exactly.
std::string format_real(Real v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
Real parse_real(const std::string& s);

// ---------------------------------------------------------------------------
// Two-parameter grids
// ---------------------------------------------------------------------------

/// Values on a tensor grid: value(i, j) sits at (xs[i], ys[j]).
struct Grid2D {
    std::string x_name, y_name;
    std::vector<Real> xs, ys;
    Matrix probability;
    std::vector<std::vector<bool>> in_rpi;  ///< [i][j]
};

/// Rebuilds the grid from export_manifold output of a 2-D model.
Grid2D grid_from_manifold(const std::vector<std::string>& names, const std::vector<ManifoldGridPoint>& pts);
CsvTable grid_csv(const Grid2D& g);
Grid2D grid_from_csv(const CsvTable& t);
CsvTable samples_csv(const ManifoldModel& m);

using Point2 = std::array<Real, 2>;
using Polyline = std::vector<Point2>;

/// Marching-squares iso-lines of `values` at `level`; segments are chained
/// into polylines (closed ones repeat their first point).
std::vector<Polyline> contour_lines(const std::vector<Real>& xs, const std::vector<Real>& ys, const Matrix& values,
                                    Real level);

/// Symmetric Hausdorff distance between two point sets.
Real hausdorff_distance(const std::vector<Point2>& a, const std::vector<Point2>& b);

struct HeatmapOptions {
    std::string title;
    Real p_th = 0.8;
    std::optional<Point2> tuned;
    int width = 480;
    int height = 420;
};

/// Probability heat map (red unstable, green stable) with the P_th contour,
/// dashed RPI boundary and a star at the tuned point.
std::string render_heatmap_svg(const Grid2D& grid, const HeatmapOptions& opts);

}  // namespace stabman
