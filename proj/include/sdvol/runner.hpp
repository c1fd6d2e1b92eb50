#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sdvol/analytic.hpp"
#include "sdvol/config.hpp"
#include "sdvol/csv.hpp"
#include "sdvol/errors.hpp"
#include "sdvol/extrema.hpp"
#include "sdvol/sde_engine.hpp"
#include "sdvol/supply_demand.hpp"
#include "sdvol/validation.hpp"

namespace sdvol {

enum ExitCode : int {
    kExitOk = 0,
    kExitVerifyFailed = 1,
    kExitParse = 2,
    kExitValidation = 3,
    kExitGuard = 4,
};

inline const std::vector<std::string>& verification_names() {
    static const std::vector<std::string> names = {"ordering", "signlemmas", "flatvol",   "jensen",
                                                   "scaling",  "densitymatch", "mcmatch"};
    return names;
}

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "SDVOL_OUT_DIR";

struct RunOptions {
    std::string out_dir;  ///< empty: $SDVOL_OUT_DIR, else ./sdvol_out
    std::optional<std::size_t> paths;
    std::optional<double> dt;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> verify;
    unsigned workers = 1;
};

struct Artifact {
    std::string name;
    std::string hash;
};

struct RunManifest {
    std::string scenario_path;
    Scenario scenario;
    std::string out_dir;
    std::vector<Artifact> artifacts;
    std::vector<std::pair<std::string, double>> stage_seconds;
};

struct VerificationResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunResult {
    RunManifest manifest;
    std::vector<VerificationResult> verifications;
    int exit_code = kExitOk;
};

inline std::string resolve_out_dir(const std::string& requested) {
    if (!requested.empty()) return requested;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return "sdvol_out";
}

/// Applies --paths/--dt/--seed to a parsed scenario.
inline Scenario apply_overrides(Scenario s, const RunOptions& o) {
    if (o.paths) s.n_paths = *o.paths;
    if (o.dt) s.grid = TimeGrid::make(s.grid.t0, s.grid.t_end, *o.dt);
    if (o.seed) s.seed = *o.seed;
    return s;
}

namespace runner_detail {

struct Context {
    const Scenario& s;
    const AnalyticCurves& curves;
    const std::optional<ExtremaReport>& extrema;
    const EnsembleSummary& summary;
    const RunOptions& opt;
    std::string out_dir;
    std::vector<std::pair<std::string, std::string>>& extra_files;
};

inline std::string yes_no(bool b) { return b ? "true" : "false"; }

inline VerificationResult verify_ordering(const Context& c) {
    if (!c.extrema) return {"ordering", false, "applies to the valuation model only"};
    const ExtremaReport& r = *c.extrema;
    const bool ok = r.conditions.all_ok() && r.ordering_ok && r.min_margin() > 2.0;
    std::ostringstream d;
    d << "t1=" << format_optional(r.t1) << " tv=" << format_optional(r.tv) << " tm=" << format_optional(r.tm)
      << " tstar=" << format_optional(r.tstar) << " conditions=" << yes_no(r.conditions.all_ok())
      << " min_margin_steps=" << format_real(r.min_margin());
    return {"ordering", ok, d.str()};
}

inline VerificationResult verify_signlemmas(const Context& c) {
    if (c.extrema) {
        const SignLemmaFlags f = verify_sign_lemmas(c.s, c.curves, *c.extrema);
        std::ostringstream d;
        d << "Q(t1)=" << format_real(f.Q_t1) << " Q(tstar)=" << format_real(f.Q_tstar);
        return {"signlemmas", f.Q_at_t1_positive && f.Q_at_tstar_negative, d.str()};
    }
    if (uses_supply_demand_ratio(c.s.model)) {
        const PeakLag p = deterministic_peak_lag(c.s.drift, c.s.y0, c.s.grid);
        std::ostringstream d;
        d << "tm=" << format_optional(p.tm) << " tb=" << format_optional(p.tb)
          << " argmax_logP=" << format_real(p.argmax_time);
        return {"signlemmas", p.ok, d.str()};
    }
    return {"signlemmas", false, "applies to valuation and supply/demand models only"};
}

inline VerificationResult verify_flatvol(const Context& c) {
    if (!c.s.sigma_is_constant()) return {"flatvol", false, "needs a constant sigma"};
    const double s2 = c.s.sigma_constant() * c.s.sigma_constant();
    const bool analytic_flat =
        std::all_of(c.curves.vol.begin(), c.curves.vol.end(), [&](double v) { return v == s2; });
    double worst = 0.0;
    std::size_t bad = 0;
    for (std::size_t k = 0; k + 1 < c.summary.volhat.size(); ++k) {
        const double dev = std::abs(c.summary.volhat[k] - s2);
        worst = std::max(worst, dev / c.summary.se_volhat[k]);
        if (!(dev < 4.0 * c.summary.se_volhat[k])) ++bad;
    }
    std::ostringstream d;
    d << "analytic_flat=" << yes_no(analytic_flat) << " max_dev_in_se=" << format_real(worst)
      << " points_outside_4se=" << bad;
    return {"flatvol", analytic_flat && bad == 0, d.str()};
}

inline VerificationResult verify_jensen(const Context& c) {
    const JensenResult j = jensen_check(c.summary);
    std::ostringstream d;
    d << "anchor=" << format_real(c.s.grid.time(j.anchor)) << " flagged=" << j.flagged_times.size();
    return {"jensen", j.ok(), d.str()};
}

/// Monte Carlo Var X against the closed form at 25/50/75/100% of the horizon,
/// and Vhat against the analytic volatility on at least 95% of grid points.
inline VerificationResult verify_mcmatch(const Context& c) {
    const TimeGrid& g = c.s.grid;
    std::ostringstream d;
    bool ok = true;
    for (double frac : {0.25, 0.5, 0.75, 1.0}) {
        const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(g.n_steps)));
        const double z = (c.summary.var_x[k] - c.curves.var_x[k]) / c.summary.se_var_x[k];
        const bool hit = std::abs(z) < 4.0;
        ok = ok && hit;
        d << "var@" << format_real(g.time(k)) << " z=" << format_real(z) << (hit ? "" : "!") << " ";
    }
    std::size_t inside = 0, total = 0;
    for (std::size_t k = 0; k + 1 < c.summary.volhat.size(); ++k, ++total)
        if (std::abs(c.summary.volhat[k] - c.curves.vol[k]) < 4.0 * c.summary.se_volhat[k]) ++inside;
    const double frac_in = static_cast<double>(inside) / static_cast<double>(total);
    ok = ok && frac_in >= 0.95;
    d << "vol_within_4se=" << format_real(frac_in);
    return {"mcmatch", ok, d.str()};
}

inline const std::vector<double>& scaling_dts() {
    static const std::vector<double> dts = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    return dts;
}

inline VerificationResult verify_scaling(const Context& c) {
    if (c.s.model != ModelKind::StochasticF && c.s.model != ModelKind::Valuation)
        return {"scaling", false, "needs a stochastic_f or valuation scenario"};
    ScalingOptions so;
    so.workers = c.opt.workers;
    const ScalingReport r = variance_term_scaling(c.s, scaling_dts(), so);
    Curve dt, v1, v2, v3, s1, s2, s3;
    for (const auto& p : r.points) {
        dt.push_back(p.dt);
        v1.push_back(p.v1);
        v2.push_back(p.v2);
        v3.push_back(p.v3);
        s1.push_back(p.se_v1);
        s2.push_back(p.se_v2);
        s3.push_back(p.se_v3);
    }
    c.extra_files.emplace_back(
        "scaling.csv",
        format_csv({"dt", "v1", "v2", "v3", "se_v1", "se_v2", "se_v3"}, {&dt, &v1, &v2, &v3, &s1, &s2, &s3}));
    const bool ok = r.v3.conclusive && r.v2.conclusive && r.v3.slope >= 0.8 && r.v3.slope <= 1.2 &&
                    r.v2.slope >= 1.3;
    std::ostringstream d;
    d << "slope_v1=" << (r.v1.conclusive ? format_real(r.v1.slope) : "inconclusive")
      << " slope_v2=" << (r.v2.conclusive ? format_real(r.v2.slope) : "inconclusive")
      << " slope_v3=" << (r.v3.conclusive ? format_real(r.v3.slope) : "inconclusive");
    return {"scaling", ok, d.str()};
}

/// Density checks for the pair implied by the scenario at t0:
/// mu_S = 1, mu_D = 1 + f(t0), sigma1 = sigma(t0) / 2.
inline VerificationResult verify_densitymatch(const Context& c) {
    const double t0 = c.s.grid.t0;
    const double mu_d = 1.0 + c.s.drift(t0);
    const double sigma1 = 0.5 * c.s.sigma(t0);
    if (!(mu_d > 0.0) || !(sigma1 > 0.0)) return {"densitymatch", false, "needs 1+f(t0) > 0 and sigma(t0) > 0"};
    const BivariatePair pair(mu_d, 1.0, sigma1, -1.0);
    std::ostringstream d;
    bool ok = true;

    const auto w = density_window(pair);
    const double mass = exact_density_mass(pair);
    if (sigma1 <= 0.1) {
        ok = ok && std::abs(mass - 1.0) < 1e-3;
        d << "mass=" << format_real(mass) << " ";
    } else {
        d << "mass=" << format_real(mass) << "(not asserted: sigma1/mu_S > 0.1) ";
    }

    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (double s1 : {0.2, 0.1, 0.05, 0.025}) {
        const BivariatePair p(mu_d, 1.0, s1, -1.0);
        const double tv = exact_vs_approx_tv(p);
        monotone = monotone && tv < prev;
        prev = tv;
    }
    ok = ok && monotone;
    d << "tv_monotone=" << yes_no(monotone) << " ";

    const auto draws = sample_supply_demand(pair, c.s.n_paths, c.s.seed);
    const ChiSquareResult chi = ratio_histogram_chi_square(pair, draws);
    ok = ok && chi.p_value > 0.001;
    d << "chi2_p=" << format_real(chi.p_value);

    Curve xs, dens;
    for (std::size_t i = 0; i <= 400; ++i) {
        const double x = w.lo + (w.hi - w.lo) * static_cast<double>(i) / 400.0;
        xs.push_back(x);
        dens.push_back(ratio_density_exact_or_limit(x, pair));
    }
    c.extra_files.emplace_back("density.csv", format_csv({"x", "density"}, {&xs, &dens}));
    return {"densitymatch", ok, d.str()};
}

inline std::string peak_report(const Scenario& s, const AnalyticCurves& curves) {
    std::ostringstream out;
    const PeakLag p = deterministic_peak_lag(s.drift, s.y0, s.grid);
    out << "model = " << model_name(s.model) << "\n";
    out << "tm = " << format_optional(p.tm) << "\n";
    out << "tb = " << format_optional(p.tb) << "\n";
    out << "argmax_vol = " << format_real(s.grid.time(argmax(curves.vol))) << "\n";
    out << "argmax_y = " << format_real(s.grid.time(argmax(curves.y))) << "\n";
    out << "peak_lag_ok = " << yes_no(p.ok) << "\n";
    return out.str();
}

}  // namespace runner_detail

/// Runs analytic -> simulate -> estimate -> extrema -> verify and writes the
/// artifacts. Throws ParseError, ValidationError or GuardViolation.
inline RunResult run(const std::string& config_path, const RunOptions& opt) {
    using namespace runner_detail;
    using clock = std::chrono::steady_clock;
    for (const auto& v : opt.verify)
        if (std::find(verification_names().begin(), verification_names().end(), v) == verification_names().end())
            throw ParseError("unknown verification '" + v + "'");

    RunResult res;
    RunManifest& man = res.manifest;
    man.scenario_path = config_path;
    const Scenario s = apply_overrides(load_scenario(config_path), opt);
    man.scenario = s;
    require_valid(s);
    man.out_dir = resolve_out_dir(opt.out_dir);
    std::filesystem::create_directories(man.out_dir);

    auto stage = [&](const std::string& name, auto&& fn) {
        const auto start = clock::now();
        fn();
        man.stage_seconds.emplace_back(name, std::chrono::duration<double>(clock::now() - start).count());
    };

    AnalyticCurves curves;
    stage("analytic", [&] { curves = solve_analytic(s); });

    const bool want_jensen = std::find(opt.verify.begin(), opt.verify.end(), "jensen") != opt.verify.end();
    EnsembleSummary summary;
    stage("simulate", [&] {
        SummaryOptions so;
        so.workers = opt.workers;
        if (want_jensen) so.jensen_index = argmax(curves.y);
        summary = summarize(s, so);
    });

    std::optional<ExtremaReport> extrema;
    std::string extrema_text;
    stage("extrema", [&] {
        if (s.model == ModelKind::Valuation) {
            extrema = locate_extrema(s, curves);
            extrema_text = format_extrema_report(*extrema);
        } else {
            extrema_text = peak_report(s, curves);
        }
    });

    std::vector<std::pair<std::string, std::string>> extra;
    stage("verify", [&] {
        const Context ctx{s, curves, extrema, summary, opt, man.out_dir, extra};
        for (const auto& name : opt.verify) {
            if (name == "ordering") res.verifications.push_back(verify_ordering(ctx));
            else if (name == "signlemmas") res.verifications.push_back(verify_signlemmas(ctx));
            else if (name == "flatvol") res.verifications.push_back(verify_flatvol(ctx));
            else if (name == "jensen") res.verifications.push_back(verify_jensen(ctx));
            else if (name == "scaling") res.verifications.push_back(verify_scaling(ctx));
            else if (name == "densitymatch") res.verifications.push_back(verify_densitymatch(ctx));
            else if (name == "mcmatch") res.verifications.push_back(verify_mcmatch(ctx));
        }
    });

    std::ostringstream verify_text;
    if (res.verifications.empty()) verify_text << "none requested\n";
    for (const auto& v : res.verifications)
        verify_text << v.name << ": " << (v.passed ? "PASS" : "FAIL") << " " << v.detail << "\n";

    const TimeGrid& g = s.grid;
    const Curve t = g.times();
    std::vector<std::pair<std::string, std::string>> files = {
        {"curves.csv", format_csv({"t", "y", "z", "z1", "var_x", "w", "vol", "q"},
                                  {&t, &curves.y, &curves.z, &curves.z1, &curves.var_x, &curves.w, &curves.vol,
                                   &curves.q})},
        {"ensemble_summary.csv",
         format_csv({"t", "mean_X", "var_X", "volhat", "se_volhat"},
                    {&t, &summary.mean_x, &summary.var_x, &summary.volhat, &summary.se_volhat})},
        {"extrema_report.txt", extrema_text},
        {"verify.txt", verify_text.str()},
        {"scenario.cfg", emit_scenario(s)},
    };
    files.insert(files.end(), extra.begin(), extra.end());
    for (const auto& [name, content] : files) {
        write_file((std::filesystem::path(man.out_dir) / name).string(), content);
        man.artifacts.push_back({name, content_hash(content)});
    }

    std::ostringstream mf;
    mf << "scenario_path = " << man.scenario_path << "\n";
    mf << "out_dir = " << man.out_dir << "\n";
    mf << "seed = " << s.seed << "\n";
    for (const auto& a : man.artifacts) mf << "artifact " << a.name << " fnv1a64=" << a.hash << "\n";
    for (const auto& [name, secs] : man.stage_seconds) mf << "stage " << name << " seconds=" << secs << "\n";
    write_file((std::filesystem::path(man.out_dir) / "manifest.txt").string(), mf.str());

    res.exit_code = std::all_of(res.verifications.begin(), res.verifications.end(),
                                [](const VerificationResult& v) { return v.passed; })
                        ? kExitOk
                        : kExitVerifyFailed;
    return res;
}

/// Maps the error classes of run()/sweep() to exit codes and prints the message.
inline int exit_code_for_current_exception(std::ostream& err) {
    try {
        throw;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const GuardViolation& e) {
        err << "guard violation: " << e.what() << "\n";
        return kExitGuard;
    }
}

// --- sweeps ------------------------------------------------------------------

inline std::string read_file_or_parse_error(const std::string& path) {
    try {
        return read_file(path);
    } catch (const std::runtime_error&) {
        throw ParseError("cannot open config file '" + path + "'");
    }
}

/// One `--grid` argument: keys separated by ';' vary together (zipped).
struct GridAxis {
    std::vector<std::string> keys;
    std::vector<std::vector<std::string>> values;  ///< values[key][i]
    std::size_t size() const { return values.empty() ? 0 : values.front().size(); }
};

/// Parses `key=a,b,c[;key2=d,e,f]`. Keys are `[section.]name[index]`.
inline GridAxis parse_grid_axis(const std::string& spec) {
    GridAxis axis;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto semi = spec.find(';', start);
        const std::string part = spec.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ValidationError("grid entry '" + part + "' lacks '='");
        const std::string key = config_detail::trim(part.substr(0, eq));
        std::vector<std::string> vals;
        std::stringstream ss(part.substr(eq + 1));
        std::string v;
        while (std::getline(ss, v, ',')) {
            v = config_detail::trim(v);
            if (!v.empty()) vals.push_back(v);
        }
        if (key.empty() || vals.empty()) throw ValidationError("grid entry '" + part + "' is empty");
        axis.keys.push_back(key);
        axis.values.push_back(std::move(vals));
        if (semi == std::string::npos) break;
        start = semi + 1;
    }
    for (const auto& v : axis.values)
        if (v.size() != axis.size()) throw ValidationError("zipped grid keys in '" + spec + "' differ in length");
    return axis;
}

/// Sets `key` (optionally `key[i]` inside a comma list) on a config document.
inline void set_grid_value(ConfigDocument& doc, const std::string& key, const std::string& value) {
    const auto br = key.find('[');
    if (br == std::string::npos) {
        doc.set(key, value);
        return;
    }
    if (key.back() != ']') throw ValidationError("bad grid key '" + key + "'");
    const std::string base = key.substr(0, br);
    const std::uint64_t idx = parse_unsigned(key, key.substr(br + 1, key.size() - br - 2));
    auto list = parse_real_list(base, doc.require(base));
    if (idx >= list.size()) throw ValidationError("grid key '" + key + "' index out of range");
    list[idx] = parse_real(key, value);
    std::string joined;
    for (std::size_t i = 0; i < list.size(); ++i) joined += (i ? ", " : "") + format_real(list[i]);
    doc.set(base, joined);
}

struct SweepRow {
    std::vector<std::string> params;
    std::optional<ExtremaReport> report;
    std::string error;
};

struct SweepResult {
    std::vector<std::string> keys;
    std::vector<SweepRow> rows;
    std::size_t passing = 0;  ///< rows with all conditions and the ordering holding
    double pass_rate() const { return rows.empty() ? 0.0 : static_cast<double>(passing) / rows.size(); }
};

/// Evaluates the analytic pipeline over the cartesian product of the axes.
/// A hard error in one row is recorded and the sweep continues.
inline SweepResult sweep(const std::string& config_path, const std::vector<std::string>& grid_specs) {
    const std::string text = read_file_or_parse_error(config_path);
    const ConfigDocument base = ConfigDocument::parse(text);
    if (grid_specs.empty()) throw ValidationError("empty sweep grid");
    std::vector<GridAxis> axes;
    for (const auto& g : grid_specs) axes.push_back(parse_grid_axis(g));

    SweepResult out;
    for (const auto& a : axes) out.keys.insert(out.keys.end(), a.keys.begin(), a.keys.end());
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        SweepRow row;
        try {
            ConfigDocument doc = base;
            for (std::size_t a = 0; a < axes.size(); ++a)
                for (std::size_t k = 0; k < axes[a].keys.size(); ++k) {
                    row.params.push_back(axes[a].values[k][idx[a]]);
                    set_grid_value(doc, axes[a].keys[k], axes[a].values[k][idx[a]]);
                }
            const Scenario s = scenario_from_document(doc);
            if (s.model != ModelKind::Valuation) throw ValidationError("sweep needs a valuation scenario");
            require_valid(s);
            const AnalyticCurves curves = solve_analytic(s);
            row.report = locate_extrema(s, curves);
            if (row.report->conditions.all_ok() && row.report->ordering_ok) ++out.passing;
        } catch (const std::exception& e) {
            row.error = e.what();
            // Fill any params not yet recorded so every row has the same width.
            row.params.resize(out.keys.size());
        }
        out.rows.push_back(std::move(row));
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < axes[a].size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
        if (axes.empty()) return out;
    }
}

inline std::string format_sweep_csv(const SweepResult& r) {
    using runner_detail::yes_no;
    std::string out;
    for (const auto& k : r.keys) out += k + ",";
    out += "sigma_ok,C1_ok,C2_ok,C3_ok,E_ok,t1,tv,tm,tstar,ordering_ok,error\n";
    auto num = [](const std::optional<double>& v) { return v ? csv_number(*v) : std::string("not_found"); };
    for (const auto& row : r.rows) {
        for (const auto& p : row.params) out += p + ",";
        if (row.report) {
            const auto& c = row.report->conditions;
            out += yes_no(c.sigma_ok) + "," + yes_no(c.C1_ok) + "," + yes_no(c.C2_ok) + "," + yes_no(c.C3_ok) +
                   "," + (c.E_ok ? yes_no(*c.E_ok) : std::string("not_evaluated")) + ",";
            out += num(row.report->t1) + "," + num(row.report->tv) + "," + num(row.report->tm) + "," +
                   num(row.report->tstar) + "," + yes_no(row.report->ordering_ok) + ",";
        } else {
            out += ",,,,,,,,,,";
        }
        std::string err = row.error;
        std::replace(err.begin(), err.end(), ',', ';');
        out += err + "\n";
    }
    return out;
}

}  // namespace sdvol
