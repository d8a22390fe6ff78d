// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "acceptance_checks.hpp"

#include <chrono>
#include <cstdio>
#include <exception>

int main(int argc, char** argv) {
    const auto& checks = acceptance::all_checks();
    int failed = 0;
    for (std::size_t k = 0; k < checks.size(); ++k) {
        // optional filter: run only the listed criterion numbers
        if (argc > 1) {
            bool wanted = false;
            for (int a = 1; a < argc; ++a) wanted |= std::atoi(argv[a]) == static_cast<int>(k + 1);
            if (!wanted) continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        acceptance::Outcome out;
        try {
            out = checks[k].run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (out.pass && checks[k].time_limit > 0.0 && secs >= checks[k].time_limit) {
            out.pass = false;
            out.detail += "; over the time limit";
        }
        std::printf("%s %2zu %s: %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", k + 1, checks[k].name.c_str(),
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !out.pass;
    }
    return failed == 0 ? 0 : 1;
}
