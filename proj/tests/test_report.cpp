#include <catch_amalgamated.hpp>

#include "stabman/random.hpp"
#include "stabman/report.hpp"
#include "stabman/workflow.hpp"

#include <cmath>
#include <filesystem>
#include <unistd.h>

using namespace stabman;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

TEST_CASE("reals survive the text round trip", "[report]") {
    const CounterRng rng(17, 0);
    for (std::uint64_t k = 0; k < 2000; ++k) {
        const Real v = (rng.uniform(2 * k) - 0.5) * std::pow(10.0, rng.uniform(2 * k + 1, -12.0, 12.0));
        CHECK(parse_real(format_real(v)) == v);
    }
    CHECK(parse_real(format_real(0.1)) == 0.1);
    CHECK(format_real(0.5) == "0.5");
    CHECK_THROWS_AS(parse_real("1.2.3"), ValidationError);
    CHECK_THROWS_AS(parse_real(""), ValidationError);
}

TEST_CASE("CSV quoting round trip", "[report]") {
    CsvTable t{{"name", "value"}, {{"plain", "1"}, {"with,comma", "2"}, {"say \"hi\"", "3"}}};
    const std::string text = to_csv(t);
    CHECK_THAT(text, ContainsSubstring("\"with,comma\""));
    CHECK_THAT(text, ContainsSubstring("\"say \"\"hi\"\"\""));
    const auto back = parse_csv(text);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), ValidationError);
}

TEST_CASE("contour of a linear field is exact", "[report]") {
    std::vector<Real> xs, ys;
    for (int k = 0; k <= 10; ++k) {
        xs.push_back(k / 10.0);
        ys.push_back(k / 10.0);
    }
    Matrix v(11, 11);
    for (int i = 0; i <= 10; ++i)
        for (int j = 0; j <= 10; ++j) v(i, j) = xs[i] + 2.0 * ys[j];
    const auto lines = contour_lines(xs, ys, v, 1.05);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].size() > 5);
    for (const auto& p : lines[0]) CHECK_THAT(p[0] + 2.0 * p[1], WithinAbs(1.05, 1e-12));
}

TEST_CASE("contour of a bowl is one closed line", "[report]") {
    std::vector<Real> xs;
    for (int k = 0; k <= 60; ++k) xs.push_back(-1.5 + 3.0 * k / 60.0);
    Matrix v(61, 61);
    for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= 60; ++j) v(i, j) = xs[i] * xs[i] + xs[j] * xs[j];
    const auto lines = contour_lines(xs, xs, v, 1.0);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].front() == lines[0].back());
    for (const auto& p : lines[0]) CHECK_THAT(std::hypot(p[0], p[1]), WithinAbs(1.0, 0.01));
    CHECK(contour_lines(xs, xs, v, 100.0).empty());
}

TEST_CASE("Hausdorff distance", "[report]") {
    const std::vector<Point2> a{{0.0, 0.0}, {1.0, 0.0}};
    const std::vector<Point2> b{{0.0, 0.5}, {1.0, 0.0}, {3.0, 0.0}};
    CHECK(hausdorff_distance(a, b) == 2.0);
    CHECK(hausdorff_distance(b, a) == 2.0);
    CHECK(hausdorff_distance(a, a) == 0.0);
}

TEST_CASE("grids survive CSV and render as SVG", "[report]") {
    ManifoldModel m;
    m.domain = ParameterDomain{{"kp_pll", "ki_pll"}, {0.0, 0.0}, {0.35, 17.0}};
    m.degenerate = true;
    m.constant_probability = 0.9;
    const auto pts = export_manifold(m, 5, [](const std::vector<Real>& r) { return r[0] < 0.2; });
    const Grid2D g = grid_from_manifold(m.domain.names, pts);
    CHECK(g.xs.size() == 5);
    CHECK(g.probability.rows() == 5);
    CHECK_FALSE(g.in_rpi[4][0]);

    const Grid2D back = grid_from_csv(parse_csv(to_csv(grid_csv(g))));
    CHECK(back.xs == g.xs);
    CHECK(back.ys == g.ys);
    CHECK(back.probability == g.probability);
    CHECK(back.in_rpi == g.in_rpi);
    CHECK(back.x_name == "kp_pll");

    HeatmapOptions o;
    o.title = "a < b & c";
    o.tuned = Point2{0.1, 5.0};
    const std::string svg = render_heatmap_svg(g, o);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK_THAT(svg, ContainsSubstring("</svg>"));
    CHECK_THAT(svg, ContainsSubstring("a &lt; b &amp; c"));
}

TEST_CASE("sha-256 digests", "[report]") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("run manifests record and verify their inputs", "[report]") {
    const fs::path dir = fs::temp_directory_path() / ("stabman_manifest_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const fs::path in = dir / "in.txt", out = dir / "out.txt";
    write_text_file(in, "input");
    write_text_file(out, "output");
    const auto m = make_manifest("stabman x", {in}, {{"seed", 4}}, {out}, utc_timestamp());
    CHECK(m.inputs.at(0).sha256 == sha256_hex("input"));
    CHECK(m.outputs.at(0).sha256 == sha256_hex("output"));
    const auto back = manifest_from_json(to_json(m));
    CHECK(back.seeds.at("seed") == 4);
    CHECK(back.command == "stabman x");
    CHECK(verify_manifest(back));
    write_text_file(in, "changed");
    CHECK_FALSE(verify_manifest(back));
    fs::remove_all(dir);
}
