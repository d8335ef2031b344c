// Acceptance suite driver: runs the statistical verification criteria and
// prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.

#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "specklegi/selftest.hpp"

int main(int argc, char** argv) {
    std::vector<int> ids{1, 2, 3, 4, 5, 6, 7, 8, 9};
    specklegi::selftest::Options opt;
    const unsigned hw = std::thread::hardware_concurrency();
    opt.threads = static_cast<int>(hw == 0 ? 1 : std::min(hw, 8u));

    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criteria" && i + 1 < argc) {
            ids.clear();
            std::istringstream is(argv[++i]);
            std::string tok;
            while (std::getline(is, tok, ',')) ids.push_back(std::stoi(tok));
        } else if (arg == "--threads" && i + 1 < argc) {
            opt.threads = std::stoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--criteria 1,2,...] [--threads N]\n", argv[0]);
            return 2;
        }
    }

    bool all_pass = true;
    for (int id : ids) {
        specklegi::selftest::CriterionResult r;
        try {
            r = specklegi::selftest::run_criterion(id, opt);
        } catch (const std::exception& e) {
            r.id = id;
            r.name = "exception";
            r.pass = false;
            r.detail = e.what();
        }
        std::printf("%s\n", specklegi::selftest::format_result(r).c_str());
        std::fflush(stdout);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}
