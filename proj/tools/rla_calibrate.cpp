// Monte-Carlo check of the batch-comparison audit plans. Writes a markdown table.
//
//   rla_calibrate [--trials N] [--seed S] [--out FILE]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sfv/audit.hpp"
#include "sfv/random.hpp"

namespace {

struct Row {
    double margin;
    std::size_t batches;
    double alpha;
};

double empirical_miss(const sfv::audit::RlaPlan& plan, std::size_t trials, std::uint64_t seed) {
    sfv::random::Stream stream(seed);
    std::size_t missed = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        // Corrupted batches are the first b indices after a random relabelling; the sample
        // misses them iff none of its indices fall below b.
        auto sample = stream.sample_without_replacement(plan.batches, plan.sample_size);
        bool hit = false;
        for (auto i : sample) hit = hit || i < plan.corrupted_batches;
        missed += hit ? 0 : 1;
    }
    return static_cast<double>(missed) / static_cast<double>(trials);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RLA sample-size calibration"};
    std::size_t trials = 20000;
    std::uint64_t seed = 20240601;
    std::string out_path;
    app.add_option("--trials", trials, "Monte-Carlo trials per row")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_path, "output file (stdout when omitted)");
    CLI11_PARSE(app, argc, argv);

    std::vector<Row> rows;
    for (double alpha : {0.05, 0.01})
        for (std::size_t batches : {100, 400, 1000})
            for (double margin : {0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}) rows.push_back({margin, batches, alpha});

    std::ostringstream os;
    os << "# RLA calibration\n\n"
       << "Generated by `rla_calibrate --trials " << trials << " --seed " << seed << "`.\n\n"
       << "`corrupted` is the fewest batches an outcome-changing error must touch (ceil(margin * batches)).\n"
       << "`sample` is the smallest n with C(B-b, n)/C(B, n) <= alpha. `empirical` is the observed fraction\n"
       << "of random samples that miss every corrupted batch.\n\n"
       << "| alpha | batches | margin | corrupted | sample | analytic miss | empirical miss |\n"
       << "|---|---|---|---|---|---|---|\n";
    std::uint64_t row_seed = seed;
    for (const auto& r : rows) {
        auto plan = sfv::audit::plan_rla(r.margin, r.batches, r.alpha);
        const double analytic = sfv::audit::miss_probability(plan.batches, plan.corrupted_batches, plan.sample_size);
        const double empirical = empirical_miss(plan, trials, ++row_seed);
        char line[160];
        std::snprintf(line, sizeof line, "| %.2f | %zu | %.3f | %zu | %zu | %.5f | %.5f |\n", r.alpha, r.batches,
                      r.margin, plan.corrupted_batches, plan.sample_size, analytic, empirical);
        os << line;
    }

    if (out_path.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream f(out_path);
        if (!f) {
            std::cerr << "cannot write " << out_path << "\n";
            return 2;
        }
        f << os.str();
    }
    return 0;
}
