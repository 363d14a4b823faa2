// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Optional arguments restrict the run to the named criteria.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "puzzletune/acceptance.hpp"

int main(int argc, char** argv) {
    namespace acc = puzzletune::acceptance;
    spdlog::set_level(spdlog::level::warn);
    std::vector<std::string> ids(argv + 1, argv + argc);
    if (ids.empty()) {
        ids = acc::criterion_ids();
    }
    acc::Options options;
    int failures = 0;
    for (const auto& id : ids) {
        acc::Result result;
        try {
            result = acc::run(id, options);
        } catch (const std::exception& e) {
            result = {id, false, std::string("exception: ") + e.what(), 0.0};
        }
        failures += result.passed ? 0 : 1;
        std::printf("%-4s %s  %s (%.1fs)\n", result.id.c_str(), result.passed ? "PASS" : "FAIL",
                    result.detail.c_str(), result.seconds);
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", ids.size(), failures);
    return failures == 0 ? 0 : 1;
}
