// Command-line front end: power queries, table/figure reproduction,
// Monte Carlo validation and the HTTP service.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "panelpower/error.hpp"
#include "panelpower/power.hpp"
#include "panelpower/presets.hpp"
#include "panelpower/reproduction.hpp"
#include "panelpower/serialize.hpp"
#include "panelpower/service.hpp"
#include "panelpower/simulation.hpp"

using namespace panelpower;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitBreach = 3;
constexpr int kExitEnvironment = 4;

struct EnvironmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("PANELPOWER_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw EnvironmentError("PANELPOWER_SEED is not an unsigned integer");
        }
    }
    return 2026;
}

json manifest(const std::string& command, json parameters, std::optional<std::uint64_t> seed = std::nullopt) {
    json m{{"command", command},
           {"parameters", std::move(parameters)},
           {"version", PANELPOWER_VERSION},
           {"timestamp", utc_timestamp()}};
    m["seed"] = seed ? json(*seed) : json(nullptr);
    return m;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EnvironmentError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw PanelPowerError(ErrorCode::InvalidInput, path + ": " + e.what(), "design-file");
    }
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw EnvironmentError("cannot write " + path);
    return file;
}

/// Flags shared by the single-query commands.
struct ScenarioFlags {
    std::string preset;
    std::string design_file;
    std::string family;
    std::string estimand;
    int periods = 0;
    std::vector<double> times;
    std::vector<int> starts;
    std::vector<double> treated;
    std::vector<double> comparison;
    double individuals = 0;
    double icc = 0;
    double rho = 0;
    double psi = 0;
    std::string structure;
    std::string kind;
    double alpha = 0;
    double power = 0;
    double r2yx = 0;
    double r2tx = 0;
    int covariate_count = 0;
    double total_clusters = 0;
    double mde_target = 0;
    bool json_output = false;

    std::map<std::string, CLI::Option*> opts;

    void attach(CLI::App* app, bool with_total, bool with_target) {
        opts["preset"] = app->add_option("--preset", preset, "Start from a bundled preset (see /v1/presets)");
        opts["design-file"] = app->add_option("--design-file", design_file, "Start from a scenario JSON file");
        opts["family"] = app->add_option("--family", family, "did, cits-full, cits-discrete, cits-cs, its-full, ...");
        opts["estimand"] = app->add_option("--estimand", estimand, "pooled, exposure:L or calendar:Q");
        opts["P"] = app->add_option("--P", periods, "Number of periods");
        opts["times"] = app->add_option("--times", times, "Measurement times")->delimiter(',');
        opts["S"] = app->add_option("--S", starts, "Start period per timing group")->delimiter(',');
        opts["MT"] = app->add_option("--MT", treated, "Treatment clusters per timing group")->delimiter(',');
        opts["MC"] = app->add_option("--MC", comparison, "Comparison clusters per timing group")->delimiter(',');
        opts["N"] = app->add_option("--N", individuals, "Individuals per cluster-period cell");
        opts["icc"] = app->add_option("--icc", icc, "ICC of the cluster-time errors");
        opts["rho"] = app->add_option("--rho", rho, "Cluster-level autocorrelation");
        opts["psi"] = app->add_option("--psi", psi, "Individual-level autocorrelation (longitudinal)");
        opts["structure"] = app->add_option("--structure", structure, "ar1 or constant");
        opts["design-kind"] = app->add_option("--design-kind", kind, "cross-sectional or longitudinal");
        opts["alpha"] = app->add_option("--alpha", alpha, "Two-tailed significance level");
        opts["lambda"] = app->add_option("--lambda,--power", power, "Power");
        opts["r2yx"] = app->add_option("--r2yx", r2yx, "R2 of covariates for the outcome");
        opts["r2tx"] = app->add_option("--r2tx", r2tx, "R2 of covariates for treatment status");
        opts["v"] = app->add_option("--v", covariate_count, "Number of covariates");
        if (with_total) opts["M"] = app->add_option("--M", total_clusters, "Total clusters (treatment clusters for ITS)");
        if (with_target) opts["mde"] = app->add_option("--mde", mde_target, "Target MDE in effect-size units");
        app->add_flag("--json", json_output, "Emit JSON");
    }

    [[nodiscard]] bool given(const std::string& name) const {
        const auto it = opts.find(name);
        return it != opts.end() && it->second->count() > 0;
    }

    [[nodiscard]] Scenario resolve() const {
        Scenario s;
        if (given("preset")) s = find_preset(preset).scenario;
        if (given("design-file")) {
            const json j = read_json_file(design_file);
            s = (j.contains("scenario") ? j.at("scenario") : j).get<Scenario>();
        }
        if (given("family")) s.estimator.family = parse_family(family);
        if (given("estimand")) s.estimator.estimand = parse_estimand(estimand);
        if (given("P")) s.design.periods = periods;
        if (given("times")) s.design.times = times;
        if (given("S")) s.design.start_periods = starts;
        if (given("MT")) s.design.treated_clusters = treated;
        if (given("MC")) s.design.comparison_clusters = comparison;
        if (given("N")) s.design.individuals = individuals;
        if (given("icc")) s.error.icc = icc;
        if (given("rho")) s.error.rho = rho;
        if (given("psi")) s.error.psi = psi;
        if (given("structure")) s.error.structure = parse_corr_structure(structure);
        if (given("design-kind")) s.error.kind = parse_design_kind(kind);
        if (given("alpha")) s.query.alpha = alpha;
        if (given("lambda")) s.query.power = power;
        if (given("r2yx") || given("r2tx") || given("v")) {
            Covariates c = s.estimator.covariates.value_or(Covariates{});
            if (given("r2yx")) c.r2_yx = r2yx;
            if (given("r2tx")) c.r2_tx = r2tx;
            if (given("v")) c.count = covariate_count;
            s.estimator.covariates = c;
        }
        if (given("mde")) s.mde_target = mde_target;
        if (s.design.comparison_clusters.empty()) s.design.comparison_clusters.assign(s.design.start_periods.size(), 0.0);
        // Presets describe two-arm designs; ITS keeps only the treatment arm.
        if (is_its(s.estimator.family) && !given("MC")) s.design = design_for_family(s.design, s.estimator.family);
        if (given("M")) {
            const double current = s.design.total_clusters();
            if (!(total_clusters > 0.0) || !(current > 0.0))
                throw PanelPowerError(ErrorCode::InvalidInput, "M must be positive", "M");
            for (double& m : s.design.treated_clusters) m *= total_clusters / current;
            for (double& m : s.design.comparison_clusters) m *= total_clusters / current;
        }
        return s;
    }
};

void print_power(const PowerResult& r, const Scenario& s, bool solved) {
    std::cout << std::fixed;
    std::cout << "estimator   " << estimator_label(s.estimator) << '\n';
    if (solved) {
        std::cout << (is_its(s.estimator.family) ? "M (treated) " : "M           ") << *r.clusters << '\n';
        std::cout << "M continuous" << std::setprecision(3) << ' ' << r.clusters_continuous << '\n';
        std::cout << "allocation  treated";
        for (int m : r.treated_allocation) std::cout << ' ' << m;
        std::cout << " / comparison";
        for (int m : r.comparison_allocation) std::cout << ' ' << m;
        std::cout << '\n';
    }
    std::cout << "MDE         " << std::setprecision(5) << *r.mde << '\n';
    std::cout << "df          " << std::setprecision(2) << r.df << '\n';
    std::cout << "factor      " << std::setprecision(5) << r.factor << '\n';
    std::cout << "variance    " << std::setprecision(8) << r.variance.total << '\n';
    for (const auto& w : r.warnings) std::cout << "warning     " << w << '\n';
}

int cmd_power(const ScenarioFlags& flags, bool solve) {
    const Scenario s = flags.resolve();
    const ValidatedDesign d = validate_design(s.design, s.estimator);
    const PowerResult r = solve ? required_clusters(d, s.error, s.query, s.mde_target) : mde(d, s.error, s.query);
    if (flags.json_output) {
        json out{{"manifest", manifest(solve ? "clusters" : "mde", s)}, {"result", r}};
        std::cout << out.dump(2) << '\n';
    } else {
        print_power(r, s, solve);
    }
    return kExitOk;
}

std::string cell_text(const std::optional<int>& v) { return v ? std::to_string(*v) : "NA"; }

int cmd_table3(const std::string& format, bool json_output, const std::string& out_path) {
    const auto cells = reproduce_table3();
    const auto& rows = table3_rows();
    std::ofstream file;
    std::ostream& out = open_output(out_path, file);
    const json params{{"tolerance", 1}, {"base", table3_scenario(8, {4, 6}, CorrStructure::AR1,
                                                                    DesignKind::CrossSectional, Family::DID,
                                                                    Estimand::pooled())}};
    std::size_t passed = 0;
    for (const auto& c : cells) passed += c.pass ? 1 : 0;

    if (json_output) {
        json jc = json::array();
        for (const auto& c : cells) {
            const Table3Row& r = rows[c.row];
            jc.push_back({{"panel", r.panel},
                          {"P", r.periods},
                          {"S", r.starts},
                          {"family", family_name(c.family)},
                          {"published", c.published ? json(*c.published) : json(nullptr)},
                          {"computed", c.computed ? json(*c.computed) : json(nullptr)},
                          {"M_continuous", c.continuous},
                          {"error", c.error_code.empty() ? json(nullptr) : json(c.error_code)},
                          {"pass", c.pass}});
        }
        out << json{{"manifest", manifest("table3", params)},
                    {"cells", jc},
                    {"passed", passed},
                    {"total", cells.size()}}
                   .dump(2)
            << '\n';
    } else if (format == "markdown") {
        out << "<!-- manifest " << manifest("table3", params).dump() << " -->\n";
        out << "| panel | P | S | DID | CITS | ITS | CITS-CS | ITS-CS |\n|---|---|---|---|---|---|---|---|\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out << "| " << rows[i].panel << " | " << rows[i].periods << " | " << rows[i].starts[0] << ','
                << rows[i].starts[1];
            for (std::size_t f = 0; f < kTable3Families.size(); ++f) {
                const auto& c = cells[i * kTable3Families.size() + f];
                out << " | " << (c.computed ? std::to_string(*c.computed) : c.published ? "ERR" : "NA") << " ("
                    << cell_text(c.published) << (c.pass ? " PASS" : " FAIL") << ')';
            }
            out << " |\n";
        }
    } else {
        out << "# manifest " << manifest("table3", params).dump() << '\n';
        out << "panel,P,S1,S2,family,published,computed,M_continuous,error,status\n";
        for (const auto& c : cells) {
            const Table3Row& r = rows[c.row];
            out << '"' << r.panel << "\"," << r.periods << ',' << r.starts[0] << ',' << r.starts[1] << ','
                << family_name(c.family) << ',' << cell_text(c.published) << ',' << cell_text(c.computed) << ','
                << std::setprecision(6) << c.continuous << ',' << c.error_code << ',' << (c.pass ? "PASS" : "FAIL")
                << '\n';
        }
    }
    std::cerr << passed << '/' << cells.size() << " cells within +-1 cluster\n";
    return passed == cells.size() ? kExitOk : kExitBreach;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const auto comma = item.find(',');
        if (comma == std::string::npos)
            throw PanelPowerError(ErrorCode::InvalidInput, "pairs look like 2,4;4,6", "pairs");
        try {
            out.emplace_back(std::stoi(item.substr(0, comma)), std::stoi(item.substr(comma + 1)));
        } catch (const std::exception&) {
            throw PanelPowerError(ErrorCode::InvalidInput, "pairs look like 2,4;4,6", "pairs");
        }
    }
    return out;
}

int cmd_figure1(std::vector<double> rhos, const std::string& pairs_text, int periods, double reference_rho,
                const std::string& mode, bool json_output, const std::string& out_path) {
    if (rhos.empty()) rhos = default_rho_grid();
    const auto pairs = pairs_text.empty() ? default_start_pairs() : parse_pairs(pairs_text);
    if (mode != "staggered" && mode != "ar1-only")
        throw PanelPowerError(ErrorCode::InvalidInput, "mode is staggered or ar1-only", "mode");
    const DesignEffectGrid grid = design_effect_grid(rhos, pairs, periods, reference_rho, mode == "staggered");
    json pairs_json = json::array();
    for (const auto& [a, b] : pairs) pairs_json.push_back({a, b});
    const json params{{"rho", rhos}, {"pairs", pairs_json}, {"P", periods}, {"reference_rho", reference_rho},
                      {"mode", mode}};
    std::ofstream file;
    std::ostream& out = open_output(out_path, file);
    if (json_output) {
        json pts = json::array();
        for (const auto& p : grid.points)
            pts.push_back({{"rho", p.rho}, {"S", p.starts}, {"reference_S", p.reference_start},
                           {"design_effect", p.design_effect}});
        out << json{{"manifest", manifest("figure1", params)},
                    {"points", pts},
                    {"summary", {{"min", grid.min}, {"max", grid.max}, {"mean", grid.mean}}}}
                   .dump(2)
            << '\n';
    } else {
        out << "# manifest " << manifest("figure1", params).dump() << '\n';
        out << "rho,S1,S2,reference_S,design_effect\n";
        for (const auto& p : grid.points) {
            out << std::setprecision(10) << p.rho << ',' << p.starts.front() << ',' << p.starts.back() << ','
                << p.reference_start << ',' << p.design_effect << '\n';
        }
    }
    std::cerr << std::setprecision(4) << "design effects: min " << grid.min << ", max " << grid.max << ", mean "
              << grid.mean << '\n';
    return kExitOk;
}

struct ValidateFlags {
    int replications = 10000;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double relative_tolerance = 0.05;
    double max_z = 4.0;
    unsigned threads = 0;
    bool aggregate = false;
    std::vector<std::string> estimators;
    std::vector<std::string> kinds;
    std::string csv_dump;
    bool json_output = false;
};

int cmd_validate(const ValidateFlags& f) {
    const std::uint64_t seed = f.seed_given ? f.seed : default_seed();
    std::vector<EstimatorSpec> estimators;
    if (f.estimators.empty()) {
        estimators = {{Family::DID, Estimand::pooled(), std::nullopt},
                      {Family::DID, Estimand::exposure(1), std::nullopt},
                      {Family::CitsFull, Estimand::pooled(), std::nullopt},
                      {Family::CitsFull, Estimand::exposure(1), std::nullopt},
                      {Family::CitsCommonSlopes, Estimand::pooled(), std::nullopt},
                      {Family::ItsFull, Estimand::pooled(), std::nullopt}};
    }
    for (const std::string& e : f.estimators) {
        const auto slash = e.find('/');
        EstimatorSpec spec;
        spec.family = parse_family(e.substr(0, slash));
        spec.estimand = slash == std::string::npos ? Estimand::pooled() : parse_estimand(e.substr(slash + 1));
        estimators.push_back(spec);
    }
    std::vector<DesignKind> kinds;
    for (const std::string& k : f.kinds.empty() ? std::vector<std::string>{"cross-sectional", "longitudinal"} : f.kinds)
        kinds.push_back(parse_design_kind(k));

    json reports = json::array();
    bool breach = false;
    for (DesignKind kind : kinds) {
        SimConfig cfg;
        cfg.design = {8, {}, {4, 6}, {10, 10}, {10, 10}, 100.0};
        cfg.error = {0.05, CorrStructure::AR1, 0.4, kind, 0.4};
        cfg.replications = f.replications;
        cfg.seed = seed;
        cfg.aggregate_to_cluster = f.aggregate || kind == DesignKind::CrossSectional;
        const OracleRun run = oracle_compare(cfg, estimators, f.threads);
        if (!f.csv_dump.empty()) {
            const std::string path = f.csv_dump + (kind == DesignKind::CrossSectional ? ".cross.csv" : ".long.csv");
            std::ofstream csv(path);
            if (!csv) throw EnvironmentError("cannot write " + path);
            csv << "# manifest " << manifest("validate", {{"design", cfg.design}, {"error", cfg.error}}, seed).dump()
                << '\n';
            write_estimates_csv(csv, estimators, run);
        }
        for (const OracleReport& r : run.reports) {
            const bool ok = r.within(f.relative_tolerance, f.max_z);
            breach = breach || !ok;
            json jr = r;
            jr["design_kind"] = kind == DesignKind::CrossSectional ? "CROSS_SECTIONAL" : "LONGITUDINAL";
            jr["pass"] = ok;
            reports.push_back(jr);
            if (!f.json_output) {
                std::cout << std::left << std::setw(16) << jr["design_kind"].get<std::string>() << std::setw(28)
                          << estimator_label(r.estimator) << std::right << std::scientific << std::setprecision(4)
                          << " empirical " << r.empirical_variance << " closed " << r.closed_form << std::fixed
                          << " rel " << std::setprecision(4) << r.relative_error << " z " << std::setprecision(2)
                          << r.z_score << (ok ? "  PASS" : "  FAIL") << '\n';
            }
        }
    }
    if (f.json_output) {
        const json params{{"replications", f.replications},
                          {"relative_tolerance", f.relative_tolerance},
                          {"max_z", f.max_z}};
        std::cout << json{{"manifest", manifest("validate", params, seed)}, {"reports", reports}}.dump(2) << '\n';
    }
    return breach ? kExitBreach : kExitOk;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

int cmd_serve(const ServiceOptions& options) {
    Service service(options);
    const int port = service.bind();
    if (port < 0) {
        std::cerr << "cannot bind " << options.host << ':' << options.port << '\n';
        return kExitEnvironment;
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving on http://" << options.host << ':' << port << '\n';
    std::thread watcher([&] {
        while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        service.stop();
    });
    service.listen();
    g_interrupted = true;
    watcher.join();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Statistical power for DID, CITS and ITS panel designs"};
    app.set_version_flag("--version", PANELPOWER_VERSION);
    app.require_subcommand(1);

    ScenarioFlags mde_flags;
    CLI::App* mde_cmd = app.add_subcommand("mde", "Minimum detectable effect at fixed cluster counts");
    mde_flags.attach(mde_cmd, true, false);

    ScenarioFlags cluster_flags;
    CLI::App* clusters_cmd = app.add_subcommand("clusters", "Clusters required for a target MDE");
    cluster_flags.attach(clusters_cmd, false, true);

    std::string table_format = "csv";
    std::string table_out;
    bool table_json = false;
    CLI::App* table_cmd = app.add_subcommand("table3", "Reproduce the published sample-size table");
    table_cmd->add_option("--format", table_format, "csv or markdown")->check(CLI::IsMember({"csv", "markdown"}));
    table_cmd->add_option("--out", table_out, "Output file (default stdout)");
    table_cmd->add_flag("--json", table_json, "Emit JSON");

    std::vector<double> fig_rhos;
    std::string fig_pairs;
    int fig_periods = 8;
    double fig_reference_rho = 0.0;
    std::string fig_mode = "staggered";
    std::string fig_out;
    bool fig_json = false;
    CLI::App* fig_cmd = app.add_subcommand("figure1", "Design effects of staggered AR(1) designs (plot data)");
    fig_cmd->add_option("--rho", fig_rhos, "Autocorrelations (default 0,0.1,...,0.9)")->delimiter(',');
    fig_cmd->add_option("--pairs", fig_pairs, "Start pairs, e.g. \"2,4;4,6\"");
    fig_cmd->add_option("--P", fig_periods, "Number of periods");
    fig_cmd->add_option("--reference-rho", fig_reference_rho, "Autocorrelation of the reference design");
    fig_cmd->add_option("--mode", fig_mode, "staggered or ar1-only");
    fig_cmd->add_option("--out", fig_out, "Output file (default stdout)");
    fig_cmd->add_flag("--json", fig_json, "Emit JSON");

    ValidateFlags vflags;
    CLI::App* validate_cmd = app.add_subcommand("validate", "Compare closed forms with Monte Carlo estimates");
    validate_cmd->add_option("--reps", vflags.replications, "Replications per configuration");
    auto* seed_opt = validate_cmd->add_option("--seed", vflags.seed, "Seed (default $PANELPOWER_SEED or 2026)");
    validate_cmd->add_option("--rel-tol", vflags.relative_tolerance, "Relative error tolerance");
    validate_cmd->add_option("--max-z", vflags.max_z, "Largest allowed |z| of the variance estimate");
    validate_cmd->add_option("--threads", vflags.threads, "Worker threads (0 = all cores)");
    validate_cmd->add_flag("--aggregate", vflags.aggregate, "Draw cell means directly for longitudinal runs too");
    validate_cmd->add_option("--estimator", vflags.estimators, "FAMILY[/ESTIMAND], repeatable");
    validate_cmd->add_option("--design-kind", vflags.kinds, "cross-sectional and/or longitudinal")->delimiter(',');
    validate_cmd->add_option("--csv-dump", vflags.csv_dump, "Write per-replication estimates to PREFIX.*.csv");
    validate_cmd->add_flag("--json", vflags.json_output, "Emit JSON");

    ServiceOptions serve_opts;
    std::string cors_origin;
    CLI::App* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--host", serve_opts.host, "Bind address");
    serve_cmd->add_option("--port", serve_opts.port, "Port (0 picks a free one)");
    serve_cmd->add_option("--static-dir", serve_opts.static_dir, "Serve this directory at /");
    auto* cors_opt = serve_cmd->add_option("--cors-origin", cors_origin, "Only allow this origin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*mde_cmd) return cmd_power(mde_flags, false);
        if (*clusters_cmd) return cmd_power(cluster_flags, true);
        if (*table_cmd) return cmd_table3(table_format, table_json, table_out);
        if (*fig_cmd)
            return cmd_figure1(fig_rhos, fig_pairs, fig_periods, fig_reference_rho, fig_mode, fig_json, fig_out);
        if (*validate_cmd) {
            vflags.seed_given = seed_opt->count() > 0;
            return cmd_validate(vflags);
        }
        if (*serve_cmd) {
            serve_opts.restrict_cors = cors_opt->count() > 0;
            serve_opts.allowed_origin = cors_origin;
            return cmd_serve(serve_opts);
        }
    } catch (const PanelPowerError& e) {
        std::cerr << e.what() << '\n';
        return kExitValidation;
    } catch (const EnvironmentError& e) {
        std::cerr << "ENVIRONMENT: " << e.what() << '\n';
        return kExitEnvironment;
    }
    return kExitOk;
}
