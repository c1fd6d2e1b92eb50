#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdvol/runner.hpp"

namespace {

std::vector<std::string> split_names(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& r : raw) {
        std::stringstream ss(r);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sdvol: supply/demand price SDEs and limiting-volatility extrema"};
    app.require_subcommand(1);

    sdvol::RunOptions opt;
    std::string config;
    std::vector<std::string> verify_raw;
    std::size_t paths = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "analytic + Monte Carlo pipeline with verifications");
    run->add_option("config", config, "scenario config file")->required();
    run->add_option("--out", opt.out_dir, "output directory (default $SDVOL_OUT_DIR or ./sdvol_out)");
    auto* paths_opt = run->add_option("--paths", paths, "override n_paths");
    auto* dt_opt = run->add_option("--dt", dt, "override grid dt");
    auto* seed_opt = run->add_option("--seed", seed, "override seed");
    run->add_option("--verify", verify_raw, "comma-separated verifications")->delimiter(',');
    run->add_option("--workers", opt.workers, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    std::vector<std::string> grids;
    std::string sweep_out;
    auto* sweep = app.add_subcommand("sweep", "analytic extrema over a parameter grid");
    sweep->add_option("config", config, "base scenario config file")->required();
    sweep->add_option("--grid", grids, "key=a,b,c[;key2=d,e,f]; repeat for a cartesian product")
        ->take_all()
        ->allow_extra_args(false);
    sweep->add_option("--out", sweep_out, "output directory (default $SDVOL_OUT_DIR or ./sdvol_out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : sdvol::kExitParse;
    }

    try {
        if (run->parsed()) {
            if (*paths_opt) opt.paths = paths;
            if (*dt_opt) opt.dt = dt;
            if (*seed_opt) opt.seed = seed;
            opt.verify = split_names(verify_raw);
            const auto res = sdvol::run(config, opt);
            for (const auto& v : res.verifications)
                std::cout << v.name << ": " << (v.passed ? "PASS" : "FAIL") << " " << v.detail << "\n";
            std::cout << "artifacts written to " << res.manifest.out_dir << "\n";
            return res.exit_code;
        }
        const auto res = sdvol::sweep(config, grids);
        const std::string dir = sdvol::resolve_out_dir(sweep_out);
        std::filesystem::create_directories(dir);
        const std::string csv = sdvol::format_sweep_csv(res);
        sdvol::write_file((std::filesystem::path(dir) / "sweep.csv").string(), csv);
        std::ostringstream summary;
        summary << "rows = " << res.rows.size() << "\npassing = " << res.passing
                << "\npass_rate = " << sdvol::format_real(res.pass_rate()) << "\n";
        sdvol::write_file((std::filesystem::path(dir) / "sweep_summary.txt").string(), summary.str());
        std::cout << csv << summary.str();
        return sdvol::kExitOk;
    } catch (const std::exception&) {
        try {
            return sdvol::exit_code_for_current_exception(std::cerr);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return sdvol::kExitValidation;
        }
    }
}
