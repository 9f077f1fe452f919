// Command-line frontend for the waterfall optimization toolkit.
//
// Subcommands mirror the offline workflow: ingest sale events, estimate the
// valuation matrix, calibrate it against an observed day, then simulate,
// score, and optimize waterfall configurations. Every command is
// deterministic under --seed and writes a manifest next to its outputs.
//
// Option precedence: command-line flag, then --config file entry (key equals
// the long flag name without dashes), then the WATERFALL_SEED environment
// variable (seed only), then built-in defaults.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "waterfall/waterfall.hpp"

namespace wf = waterfall;
namespace fs = std::filesystem;

namespace {

// ---- option resolution ----------------------------------------------------

struct CommandContext {
    CLI::App* cmd = nullptr;
    std::map<std::string, std::string> config;
    std::vector<std::string> inputs; // files hashed into the manifest
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::string started_at;
};

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Overlay a config-file value onto an option the user did not pass.
template <typename T>
void overlay(CommandContext& ctx, const std::string& flag, T& var) {
    if (ctx.cmd->count("--" + flag) > 0) return;
    auto it = ctx.config.find(flag);
    if (it == ctx.config.end()) return;
    const std::string& s = it->second;
    if constexpr (std::is_same_v<T, std::string>) {
        var = s;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "1" || s == "yes")
            var = true;
        else if (s == "false" || s == "0" || s == "no")
            var = false;
        else
            throw wf::FormatError("config key '" + flag + "' must be a boolean, got '" + s + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
        try {
            var = std::stod(s);
        } catch (...) {
            throw wf::FormatError("config key '" + flag + "' must be a number, got '" + s + "'");
        }
    } else {
        try {
            var = static_cast<T>(std::stoll(s));
        } catch (...) {
            throw wf::FormatError("config key '" + flag + "' must be an integer, got '" + s + "'");
        }
    }
}

void resolve_seed(CommandContext& ctx, std::uint64_t& seed) {
    if (ctx.cmd->count("--seed") > 0) return;
    if (auto it = ctx.config.find("seed"); it != ctx.config.end()) {
        try {
            seed = std::stoull(it->second);
            return;
        } catch (...) {
            throw wf::FormatError("config key 'seed' must be an integer");
        }
    }
    if (const char* env = std::getenv("WATERFALL_SEED")) {
        try {
            seed = std::stoull(env);
        } catch (...) {
            throw wf::FormatError("WATERFALL_SEED must be an integer");
        }
    }
}

void load_command_config(CommandContext& ctx, const std::string& config_path) {
    if (config_path.empty()) return;
    ctx.config = wf::load_config(config_path);
}

std::string input(CommandContext& ctx, const std::string& path) {
    ctx.inputs.push_back(path);
    return path;
}

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw wf::IoError(std::string(what) + " '" + path + "' does not exist");
}

void finish(CommandContext& ctx, const std::string& manifest_path, const std::string& command,
            const std::vector<std::string>& outputs, std::uint64_t seed,
            std::map<std::string, std::string> settings) {
    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - ctx.t0)
                         .count();
    wf::write_manifest(manifest_path, command, ctx.inputs, outputs, seed, settings,
                       ctx.started_at, wall_ms);
}

// ---- shared option groups ----------------------------------------------------

struct GridOptions {
    double grid_min = 0.0;
    double grid_max = 0.0;
    double grid_step = 1.0;
    std::string grid_values; // comma-separated, overrides min/max/step

    void attach(CLI::App* cmd) {
        cmd->add_option("--grid-min", grid_min, "lowest grid price");
        cmd->add_option("--grid-max", grid_max, "highest grid price");
        cmd->add_option("--grid-step", grid_step, "grid spacing (default 1)");
        cmd->add_option("--grid-values", grid_values,
                        "comma-separated explicit grid, overrides min/max/step");
    }

    void overlay_config(CommandContext& ctx) {
        overlay(ctx, "grid-min", grid_min);
        overlay(ctx, "grid-max", grid_max);
        overlay(ctx, "grid-step", grid_step);
        overlay(ctx, "grid-values", grid_values);
    }

    wf::PriceGrid build() const {
        if (!grid_values.empty()) {
            std::vector<double> vals;
            std::size_t start = 0;
            while (start <= grid_values.size()) {
                auto comma = grid_values.find(',', start);
                auto piece = grid_values.substr(
                    start, comma == std::string::npos ? std::string::npos : comma - start);
                if (!piece.empty()) {
                    try {
                        vals.push_back(std::stod(piece));
                    } catch (...) {
                        throw wf::FormatError("bad grid value '" + piece + "'");
                    }
                }
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            std::sort(vals.begin(), vals.end());
            return wf::PriceGrid::from_values(std::move(vals));
        }
        if (!(grid_min > 0.0) || !(grid_max > 0.0))
            throw wf::PreconditionError(
                "a price grid is required: pass --grid-min/--grid-max/--grid-step "
                "or --grid-values");
        return wf::PriceGrid::from_range(grid_min, grid_max, grid_step);
    }
};

wf::DateFormat parse_date_format(const std::string& s) {
    if (s == "iso" || s == "ymd") return wf::DateFormat::iso;
    if (s == "dmy") return wf::DateFormat::day_month_year;
    if (s == "mdy") return wf::DateFormat::month_day_year;
    throw wf::FormatError("date format must be iso, dmy, or mdy");
}

std::map<std::string, std::string> grid_settings(const GridOptions& g) {
    std::map<std::string, std::string> s;
    if (!g.grid_values.empty()) {
        s["grid-values"] = g.grid_values;
    } else {
        s["grid-min"] = wf::format_double(g.grid_min);
        s["grid-max"] = wf::format_double(g.grid_max);
        s["grid-step"] = wf::format_double(g.grid_step);
    }
    return s;
}

// ---- subcommand bodies ----------------------------------------------------------

int cmd_ingest(const std::string& sales_path, const std::string& out_path,
               const std::string& date_format, std::size_t max_diagnostics,
               CommandContext& ctx) {
    require_file(sales_path, "sales CSV");
    wf::ParseOptions popt;
    popt.date_format = parse_date_format(date_format);
    popt.max_diagnostics = max_diagnostics;
    wf::ParseReport report;
    auto in = std::ifstream(sales_path);
    auto ds = wf::parse_records(in, popt, &report);
    auto vectors = wf::vectorize(ds);
    wf::save_vector_store(out_path, vectors);

    std::cout << "rows_ok " << report.rows_ok << "\n"
              << "rows_rejected " << report.rows_rejected << "\n"
              << "users " << vectors.user_count() << "\n"
              << "networks " << vectors.networks().size() << "\n"
              << "samples " << vectors.total_samples() << "\n";
    for (const auto& d : report.diagnostics) std::cerr << "note: " << d << "\n";

    input(ctx, sales_path);
    finish(ctx, out_path + ".manifest.json", "ingest", {out_path}, 0,
           {{"date-format", date_format}});
    return 0;
}

int cmd_estimate(const std::string& store_path, const std::string& out_path,
                 const wf::EstimationConfig& cfg, std::uint64_t seed, CommandContext& ctx) {
    require_file(store_path, "sale-vector store");
    auto vectors = wf::load_vector_store(store_path);
    auto matrix = wf::estimate_matrix(vectors, cfg);
    wf::save_matrix(out_path, matrix, seed);

    std::map<std::string, std::uint64_t> prov;
    for (const auto& e : matrix.entries()) ++prov[wf::to_string(e.provenance)];
    std::cout << "users " << matrix.user_count() << "\n"
              << "networks " << matrix.network_count() << "\n"
              << "price_scale " << wf::format_double(matrix.price_scale()) << "\n";
    for (const auto& [k, v] : prov) std::cout << "provenance_" << k << " " << v << "\n";

    input(ctx, store_path);
    finish(ctx, out_path + ".manifest.json", "estimate", {out_path, out_path + ".meta.json"}, seed,
           {{"pool-min", std::to_string(cfg.pool_min)},
            {"variance-floor", wf::format_double(cfg.variance_floor)},
            {"support-clamp", wf::format_double(cfg.support_clamp)},
            {"price-scale", wf::format_double(cfg.price_scale)},
            {"price-unit", wf::format_double(cfg.price_unit)}});
    return 0;
}

wf::CalibrationCoefficients load_zeta_or_ones(const std::string& path, CommandContext& ctx) {
    if (path.empty()) return wf::CalibrationCoefficients::ones();
    require_file(path, "calibration file");
    input(ctx, path);
    return wf::zeta_from_json(wf::parse_json_file(path));
}

int cmd_simulate(const std::string& matrix_path, const std::string& waterfall_path,
                 const std::string& zeta_path, const std::string& out_path, std::uint64_t seed,
                 int threads, double divisor, CommandContext& ctx) {
    require_file(matrix_path, "matrix store");
    require_file(waterfall_path, "waterfall CSV");
    auto matrix = wf::load_matrix(matrix_path);
    auto w = wf::load_waterfall_csv(waterfall_path);
    auto zeta = load_zeta_or_ones(zeta_path, ctx);

    wf::SimulationConfig sim_cfg;
    sim_cfg.seed = seed;
    sim_cfg.threads = threads;
    sim_cfg.per_mille_divisor = divisor;
    auto result = wf::run_waterfall(matrix, w, zeta, sim_cfg);
    wf::save_json(out_path, wf::to_json(result));

    std::cout << "revenue " << wf::format_double(result.revenue) << "\n"
              << "requests " << result.requests << "\n"
              << "unsold_users " << result.unsold_users << "\n";

    input(ctx, matrix_path);
    input(ctx, waterfall_path);
    finish(ctx, out_path + ".manifest.json", "simulate", {out_path}, seed,
           {{"threads", std::to_string(threads)}, {"divisor", wf::format_double(divisor)}});
    return 0;
}

int cmd_score(const std::string& waterfall_path, const std::string& simulated_path,
              const std::string& observed_path, const std::string& out_path,
              CommandContext& ctx) {
    require_file(waterfall_path, "waterfall CSV");
    require_file(simulated_path, "simulated vector");
    require_file(observed_path, "observed vector");
    auto w = wf::load_waterfall_csv(waterfall_path);
    auto q_sim = wf::impressions_from_json(wf::parse_json_file(simulated_path));
    auto q_obs = wf::impressions_from_json(wf::parse_json_file(observed_path));

    auto weights = wf::score_weights(w, q_obs);
    wf::ScoreDiagnostics diag;
    double score = wf::fidelity_score(q_sim, q_obs, weights, &diag);
    std::cout << "score " << wf::format_double(score) << "\n";
    for (auto i : diag.zero_observed_positions)
        std::cerr << "note: instance " << i << " has zero observed impressions\n";

    if (!out_path.empty()) {
        wf::json j;
        j["score"] = score;
        j["weights"] = weights.values;
        j["zero_observed_positions"] = diag.zero_observed_positions;
        wf::save_json(out_path, j);
        input(ctx, waterfall_path);
        input(ctx, simulated_path);
        input(ctx, observed_path);
        finish(ctx, out_path + ".manifest.json", "score", {out_path}, 0, {});
    }
    return 0;
}

int cmd_calibrate(const std::string& matrix_path, const std::string& waterfall_path,
                  const std::string& observed_path, const std::string& sales_path,
                  const std::string& anchor_day, int window, const std::string& date_format,
                  const wf::CalibrationConfig& cal, const std::string& out_path,
                  const std::string& report_path, std::uint64_t seed, int threads, double divisor,
                  CommandContext& ctx) {
    require_file(matrix_path, "matrix store");
    require_file(waterfall_path, "waterfall CSV");
    auto matrix = wf::load_matrix(matrix_path);
    auto w = wf::load_waterfall_csv(waterfall_path);

    wf::ImpressionVector q_obs;
    if (!observed_path.empty()) {
        require_file(observed_path, "observed vector");
        q_obs = wf::impressions_from_json(wf::parse_json_file(observed_path));
        input(ctx, observed_path);
    } else if (!sales_path.empty()) {
        require_file(sales_path, "sales CSV");
        if (anchor_day.empty())
            throw wf::PreconditionError("--anchor-day is required with --sales");
        std::int32_t anchor;
        if (!wf::detail::parse_date(anchor_day, parse_date_format(date_format), anchor))
            throw wf::FormatError("bad --anchor-day '" + anchor_day + "'");
        wf::ParseOptions popt;
        popt.date_format = parse_date_format(date_format);
        auto in = std::ifstream(sales_path);
        auto ds = wf::parse_records(in, popt);
        auto split = wf::split_train_validation(ds, anchor, window);
        for (const auto& d : split.diagnostics) std::cerr << "note: " << d << "\n";
        auto bin = wf::bin_observed_impressions(split.validation, w, {divisor, 1e-6});
        for (const auto& d : bin.diagnostics) std::cerr << "note: " << d << "\n";
        if (bin.unmatched_rows)
            std::cerr << "note: " << bin.unmatched_rows << " observed rows ("
                      << bin.unmatched_impressions << " impressions) did not match any instance\n";
        q_obs = bin.q;
        input(ctx, sales_path);
    } else {
        throw wf::PreconditionError("calibrate needs --observed or --sales with --anchor-day");
    }

    wf::SimulationConfig sim_cfg;
    sim_cfg.seed = seed;
    sim_cfg.threads = threads;
    sim_cfg.per_mille_divisor = divisor;

    wf::CalibrationReport report;
    auto zeta = wf::calibrate_zeta(matrix, w, q_obs, cal, sim_cfg, &report);

    auto j = wf::to_json(zeta);
    j["seed"] = seed;
    wf::save_json(out_path, j);
    std::vector<std::string> outputs = {out_path};
    if (!report_path.empty()) {
        wf::save_json(report_path, wf::to_json(report));
        outputs.push_back(report_path);
    }

    std::cout << "initial_score " << wf::format_double(report.initial_score) << "\n"
              << "final_score " << wf::format_double(report.final_score) << "\n"
              << "evaluations " << report.evaluations << "\n";
    for (const auto& [net, z] : zeta.zeta)
        std::cout << "zeta_" << net << " " << wf::format_double(z) << "\n";

    input(ctx, matrix_path);
    input(ctx, waterfall_path);
    finish(ctx, out_path + ".manifest.json", "calibrate", outputs, seed,
           {{"zeta-lo", wf::format_double(cal.grid_lo)},
            {"zeta-hi", wf::format_double(cal.grid_hi)},
            {"zeta-step", wf::format_double(cal.grid_step)},
            {"sweep-tolerance", wf::format_double(cal.sweep_tolerance)},
            {"max-rounds", std::to_string(cal.max_rounds)},
            {"window", std::to_string(window)}});
    return 0;
}

int cmd_optimize(const std::string& matrix_path, const std::string& algo,
                 const std::string& init, const std::string& zeta_path, const GridOptions& grid,
                 int max_iter, double epsilon, std::size_t max_length,
                 std::size_t max_per_network, bool free_order, const std::string& out_dir,
                 std::uint64_t seed, int threads, double divisor, CommandContext& ctx) {
    require_file(matrix_path, "matrix store");
    auto matrix = wf::load_matrix(matrix_path);
    auto zeta = load_zeta_or_ones(zeta_path, ctx);

    wf::Waterfall w0;
    if (init != "empty") {
        require_file(init, "initial waterfall");
        w0 = wf::load_waterfall_csv(init);
        input(ctx, init);
    }

    wf::SearchConfig cfg;
    cfg.max_iter = max_iter;
    cfg.epsilon = epsilon;
    cfg.grid = grid.build();
    cfg.networks = matrix.networks();
    cfg.constraints.max_length = max_length;
    cfg.constraints.max_instances_per_network = max_per_network;
    cfg.constraints.canonical_descending = !free_order;

    wf::SimulationConfig sim_cfg;
    sim_cfg.seed = seed;
    sim_cfg.threads = threads;
    sim_cfg.per_mille_divisor = divisor;

    wf::SearchOutcome outcome;
    if (algo == "sns")
        outcome = wf::hill_climb(w0, matrix, zeta, cfg, sim_cfg);
    else if (algo == "mcts")
        outcome = wf::mcts_search(w0, matrix, zeta, cfg, sim_cfg);
    else
        throw wf::PreconditionError("--algo must be sns or mcts");

    fs::create_directories(out_dir);
    auto final_path = out_dir + "/final_waterfall.csv";
    auto best_path = out_dir + "/best_waterfall.csv";
    auto trace_json = out_dir + "/trace.json";
    auto trace_csv = out_dir + "/trace.csv";
    auto summary_path = out_dir + "/summary.json";
    wf::save_waterfall_csv(final_path, outcome.final_waterfall);
    wf::save_waterfall_csv(best_path, outcome.best_waterfall);
    wf::save_trace(trace_json, trace_csv, outcome.trace);
    wf::json summary;
    summary["algorithm"] = algo;
    summary["final_revenue"] = outcome.final_revenue;
    summary["best_revenue"] = outcome.best_revenue;
    summary["iterations"] = outcome.trace.entries.size() - 1;
    summary["total_candidates"] = outcome.trace.total_candidates;
    summary["converged"] = outcome.trace.converged;
    summary["seed"] = seed;
    wf::save_json(summary_path, summary);

    std::cout << "final_revenue " << wf::format_double(outcome.final_revenue) << "\n"
              << "best_revenue " << wf::format_double(outcome.best_revenue) << "\n"
              << "iterations " << outcome.trace.entries.size() - 1 << "\n"
              << "candidates " << outcome.trace.total_candidates << "\n"
              << "converged " << (outcome.trace.converged ? "true" : "false") << "\n";

    input(ctx, matrix_path);
    auto settings = grid_settings(grid);
    settings["algo"] = algo;
    settings["init"] = init;
    settings["max-iter"] = std::to_string(max_iter);
    settings["epsilon"] = wf::format_double(epsilon);
    settings["max-length"] = std::to_string(max_length);
    settings["max-per-network"] = std::to_string(max_per_network);
    settings["threads"] = std::to_string(threads);
    finish(ctx, out_dir + "/manifest.json", "optimize",
           {final_path, best_path, trace_json, trace_csv, summary_path}, seed, settings);
    return 0;
}

int cmd_oracle(const std::string& matrix_path, const std::string& networks_csv,
               const std::string& zeta_path, const GridOptions& grid, std::uint64_t candidate_cap,
               const std::string& out_dir, std::uint64_t seed, int threads, double divisor,
               CommandContext& ctx) {
    require_file(matrix_path, "matrix store");
    auto matrix = wf::load_matrix(matrix_path);
    auto zeta = load_zeta_or_ones(zeta_path, ctx);

    std::vector<wf::AdNetworkId> shape;
    if (networks_csv.empty()) {
        shape = matrix.networks();
    } else {
        std::size_t start = 0;
        while (start <= networks_csv.size()) {
            auto comma = networks_csv.find(',', start);
            auto piece = networks_csv.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!piece.empty()) shape.emplace_back(piece);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }

    wf::SearchConfig cfg;
    cfg.grid = grid.build();
    cfg.candidate_cap = candidate_cap;

    wf::SimulationConfig sim_cfg;
    sim_cfg.seed = seed;
    sim_cfg.threads = threads;
    sim_cfg.per_mille_divisor = divisor;

    auto result = wf::exhaustive_optimum(shape, matrix, zeta, cfg, sim_cfg);

    fs::create_directories(out_dir);
    auto optimum_path = out_dir + "/optimum_waterfall.csv";
    auto summary_path = out_dir + "/summary.json";
    wf::save_waterfall_csv(optimum_path, result.waterfall);
    wf::json summary;
    summary["revenue"] = result.revenue;
    summary["candidates_enumerated"] = result.candidates_enumerated;
    summary["candidates_evaluated"] = result.candidates_evaluated;
    summary["seed"] = seed;
    wf::save_json(summary_path, summary);

    std::cout << "revenue " << wf::format_double(result.revenue) << "\n"
              << "candidates_enumerated " << result.candidates_enumerated << "\n"
              << "candidates_evaluated " << result.candidates_evaluated << "\n";

    input(ctx, matrix_path);
    auto settings = grid_settings(grid);
    settings["candidate-cap"] = std::to_string(candidate_cap);
    finish(ctx, out_dir + "/manifest.json", "oracle", {optimum_path, summary_path}, seed,
           settings);
    return 0;
}

int cmd_synth(std::int64_t scale, const std::string& mode, const GridOptions& grid_opt,
              bool default_grid, const wf::PipelineOptions& pipe, const std::string& out_dir,
              std::uint64_t seed, CommandContext& ctx) {
    auto scenario = wf::paper_benchmark(scale, seed);
    if (!default_grid) {
        // rebuild with the explicit grid so the generated inits stay on-grid
        std::vector<std::pair<wf::AdNetworkId, wf::BetaParams>> nets = scenario.networks;
        scenario = wf::build_scenario(std::move(nets), scale, seed, grid_opt.build());
    }

    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/inits");

    wf::json sj;
    sj["user_count"] = scenario.user_count;
    sj["seed"] = scenario.seed;
    sj["price_scale"] = scenario.price_scale;
    sj["grid"] = scenario.grid.values();
    sj["networks"] = wf::json::object();
    for (const auto& [id, p] : scenario.networks)
        sj["networks"][id.value] = {{"alpha", p.alpha}, {"beta", p.beta}};
    sj["inits"] = wf::json::array();
    std::vector<std::string> outputs;

    for (const auto& [name, w] : scenario.init_set) {
        auto path = out_dir + "/inits/" + name + ".csv";
        wf::save_waterfall_csv(path, w);
        outputs.push_back(path);
        sj["inits"].push_back(name);
    }

    if (mode == "oracle") {
        auto matrix = wf::oracle_matrix(scenario);
        auto path = out_dir + "/matrix.wfbm";
        wf::save_matrix(path, matrix, seed);
        outputs.push_back(path);
        std::cout << "matrix " << path << "\n";
    } else if (mode == "pipeline") {
        auto sales = wf::synthetic_sales(scenario, pipe);
        auto sales_path = out_dir + "/sales.csv";
        wf::save_sales_csv(sales_path, sales);
        outputs.push_back(sales_path);
        // the expert waterfall that "produced" the observed day
        const auto& current = scenario.init_set.front().second;
        auto current_path = out_dir + "/current_waterfall.csv";
        wf::save_waterfall_csv(current_path, current);
        outputs.push_back(current_path);

        // observed day: simulate the expert waterfall over the truth matrix
        // and append one aggregated record per instance on the day after the
        // training window
        auto truth = wf::oracle_matrix(scenario);
        wf::SimulationConfig sim_cfg;
        sim_cfg.seed = wf::derive_seed(seed, "observed-day");
        auto observed = wf::run_waterfall(truth, current, wf::CalibrationCoefficients::ones(),
                                          sim_cfg);
        wf::SaleEventDataset obs_ds;
        std::int32_t anchor = static_cast<std::int32_t>(pipe.first_day + pipe.days);
        for (std::size_t i = 0; i < current.instances.size(); ++i) {
            if (observed.q_prime[i] == 0) continue;
            wf::SaleRecord r;
            r.day = anchor;
            r.hour = 12;
            r.network = current.instances[i].network;
            r.user = "panel";
            r.impressions = observed.q_prime[i];
            r.revenue = static_cast<double>(observed.q_prime[i]) * current.instances[i].price /
                        1000.0;
            obs_ds.records.push_back(std::move(r));
        }
        {
            std::ofstream out(sales_path, std::ios::app);
            for (const auto& r : obs_ds.records)
                out << wf::detail::day_to_string(r.day) << ',' << r.hour << ','
                    << r.network.value << ',' << r.user << ',' << r.impressions << ','
                    << wf::format_double(r.revenue) << '\n';
        }
        std::cout << "sales " << sales_path << "\n"
                  << "current_waterfall " << current_path << "\n"
                  << "anchor_day " << wf::detail::day_to_string(anchor) << "\n";
    } else {
        throw wf::PreconditionError("--mode must be oracle or pipeline");
    }

    auto scenario_path = out_dir + "/scenario.json";
    wf::save_json(scenario_path, sj);
    outputs.push_back(scenario_path);

    finish(ctx, out_dir + "/manifest.json", "synth", outputs, seed,
           {{"scale", std::to_string(scale)}, {"mode", mode}});
    return 0;
}

int cmd_report(const std::string& trace_path, const std::string& out_path, CommandContext& ctx) {
    require_file(trace_path, "trace JSON");
    auto trace = wf::trace_from_json(wf::parse_json_file(trace_path));
    {
        auto out = wf::detail::open_output(out_path);
        wf::write_trace_csv(out, trace);
    }
    std::cout << "entries " << trace.entries.size() << "\n";
    input(ctx, trace_path);
    finish(ctx, out_path + ".manifest.json", "report", {out_path}, 0, {});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline waterfall auction optimization toolkit"};
    app.require_subcommand(1);

    // shared state filled by whichever subcommand runs
    std::string config_path;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse sale events into a sale-vector store");
    std::string in_sales, in_out, in_datefmt = "iso";
    std::size_t in_maxdiag = 20;
    ingest->add_option("--sales", in_sales, "input sales CSV")->required();
    ingest->add_option("--out", in_out, "output sale-vector store")->required();
    ingest->add_option("--date-format", in_datefmt, "iso, dmy, or mdy");
    ingest->add_option("--max-diagnostics", in_maxdiag, "cap on reported bad rows");
    ingest->add_option("--config", config_path, "flat key=value config file");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Fit the valuation matrix from a store");
    std::string es_store, es_out;
    wf::EstimationConfig es_cfg;
    std::uint64_t es_seed = 1;
    estimate->add_option("--store", es_store, "sale-vector store")->required();
    estimate->add_option("--out", es_out, "output matrix store")->required();
    estimate->add_option("--pool-min", es_cfg.pool_min, "other-network count needed to pool");
    estimate->add_option("--variance-floor", es_cfg.variance_floor, "minimum sample variance");
    estimate->add_option("--support-clamp", es_cfg.support_clamp, "distance from 0/1 clamp");
    estimate->add_option("--price-scale", es_cfg.price_scale, "eCPM scale (0 = auto)");
    estimate->add_option("--price-unit", es_cfg.price_unit, "per-impression to eCPM multiplier");
    estimate->add_option("--threads", es_cfg.threads, "worker threads");
    estimate->add_option("--seed", es_seed, "seed recorded in the sidecar");
    estimate->add_option("--config", config_path, "flat key=value config file");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a waterfall over the population");
    std::string si_matrix, si_waterfall, si_zeta, si_out;
    std::uint64_t si_seed = 1;
    int si_threads = 1;
    double si_divisor = 1000.0;
    simulate->add_option("--matrix", si_matrix, "matrix store")->required();
    simulate->add_option("--waterfall", si_waterfall, "waterfall CSV")->required();
    simulate->add_option("--zeta", si_zeta, "calibration JSON");
    simulate->add_option("--out", si_out, "output result JSON")->required();
    simulate->add_option("--seed", si_seed, "simulation seed");
    simulate->add_option("--threads", si_threads, "worker threads");
    simulate->add_option("--divisor", si_divisor, "per-mille revenue divisor");
    simulate->add_option("--config", config_path, "flat key=value config file");

    // score
    auto* score = app.add_subcommand("score", "Fidelity score of simulated vs observed");
    std::string sc_waterfall, sc_sim, sc_obs, sc_out;
    score->add_option("--waterfall", sc_waterfall, "waterfall CSV")->required();
    score->add_option("--simulated", sc_sim, "simulated vector JSON")->required();
    score->add_option("--observed", sc_obs, "observed vector JSON")->required();
    score->add_option("--out", sc_out, "optional score JSON");
    score->add_option("--config", config_path, "flat key=value config file");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Fit per-network coefficients");
    std::string ca_matrix, ca_waterfall, ca_obs, ca_sales, ca_anchor, ca_datefmt = "iso";
    std::string ca_out, ca_report;
    int ca_window = 30;
    wf::CalibrationConfig ca_cfg;
    std::uint64_t ca_seed = 1;
    int ca_threads = 1;
    double ca_divisor = 1000.0;
    calibrate->add_option("--matrix", ca_matrix, "matrix store")->required();
    calibrate->add_option("--waterfall", ca_waterfall, "live waterfall CSV")->required();
    calibrate->add_option("--observed", ca_obs, "observed impression vector JSON");
    calibrate->add_option("--sales", ca_sales, "sales CSV to bin at --anchor-day");
    calibrate->add_option("--anchor-day", ca_anchor, "observation day (with --sales)");
    calibrate->add_option("--window", ca_window, "training window in days");
    calibrate->add_option("--date-format", ca_datefmt, "iso, dmy, or mdy");
    calibrate->add_option("--out", ca_out, "output calibration JSON")->required();
    calibrate->add_option("--report", ca_report, "optional calibration report JSON");
    calibrate->add_option("--zeta-lo", ca_cfg.grid_lo, "lowest coefficient");
    calibrate->add_option("--zeta-hi", ca_cfg.grid_hi, "highest coefficient");
    calibrate->add_option("--zeta-step", ca_cfg.grid_step, "coefficient grid spacing");
    calibrate->add_option("--sweep-tolerance", ca_cfg.sweep_tolerance,
                          "minimum round improvement");
    calibrate->add_option("--max-rounds", ca_cfg.max_rounds, "coordinate descent rounds");
    calibrate->add_option("--seed", ca_seed, "simulation seed");
    calibrate->add_option("--threads", ca_threads, "worker threads");
    calibrate->add_option("--divisor", ca_divisor, "per-mille revenue divisor");
    calibrate->add_option("--config", config_path, "flat key=value config file");

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Search for a better waterfall");
    std::string op_matrix, op_algo = "sns", op_init = "empty", op_zeta, op_outdir;
    GridOptions op_grid;
    int op_maxiter = 50;
    double op_eps = 0.0;
    std::size_t op_maxlen = 12, op_maxper = 3;
    bool op_freeorder = false;
    std::uint64_t op_seed = 1;
    int op_threads = 1;
    double op_divisor = 1000.0;
    optimize->add_option("--matrix", op_matrix, "matrix store")->required();
    optimize->add_option("--algo", op_algo, "sns (hill climb) or mcts (lookahead)");
    optimize->add_option("--init", op_init, "initial waterfall CSV, or 'empty'");
    optimize->add_option("--zeta", op_zeta, "calibration JSON");
    op_grid.attach(optimize);
    optimize->add_option("--max-iter", op_maxiter, "iteration budget");
    optimize->add_option("--epsilon", op_eps, "minimum improvement to adopt");
    optimize->add_option("--max-length", op_maxlen, "maximum waterfall length");
    optimize->add_option("--max-per-network", op_maxper, "instances per network cap");
    optimize->add_flag("--free-order", op_freeorder, "do not canonicalize to descending prices");
    optimize->add_option("--out-dir", op_outdir, "output directory")->required();
    optimize->add_option("--seed", op_seed, "simulation seed");
    optimize->add_option("--threads", op_threads, "worker threads");
    optimize->add_option("--divisor", op_divisor, "per-mille revenue divisor");
    optimize->add_option("--config", config_path, "flat key=value config file");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Brute-force the optimal waterfall");
    std::string or_matrix, or_networks, or_zeta, or_outdir;
    GridOptions or_grid;
    std::uint64_t or_cap = 500000;
    std::uint64_t or_seed = 1;
    int or_threads = 1;
    double or_divisor = 1000.0;
    oracle->add_option("--matrix", or_matrix, "matrix store")->required();
    oracle->add_option("--networks", or_networks,
                       "comma-separated shape (default: every network once)");
    oracle->add_option("--zeta", or_zeta, "calibration JSON");
    or_grid.attach(oracle);
    oracle->add_option("--candidate-cap", or_cap, "enumeration budget");
    oracle->add_option("--out-dir", or_outdir, "output directory")->required();
    oracle->add_option("--seed", or_seed, "simulation seed");
    oracle->add_option("--threads", or_threads, "worker threads");
    oracle->add_option("--divisor", or_divisor, "per-mille revenue divisor");
    oracle->add_option("--config", config_path, "flat key=value config file");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark scenario");
    std::int64_t sy_scale = 1000;
    std::string sy_mode = "oracle", sy_outdir;
    GridOptions sy_grid;
    wf::PipelineOptions sy_pipe;
    std::uint64_t sy_seed = 1;
    synth->add_option("--scale", sy_scale, "user count");
    synth->add_option("--mode", sy_mode, "oracle or pipeline");
    sy_grid.attach(synth);
    synth->add_option("--days", sy_pipe.days, "training days (pipeline mode)");
    synth->add_option("--batches-per-day", sy_pipe.batches_per_day,
                      "sale batches per network per day");
    synth->add_option("--networks-per-user", sy_pipe.networks_per_user,
                      "networks with history per user (0 = all)");
    synth->add_option("--max-batch-impressions", sy_pipe.max_batch_impressions,
                      "largest impression batch");
    synth->add_option("--out-dir", sy_outdir, "output directory")->required();
    synth->add_option("--seed", sy_seed, "scenario seed");
    synth->add_option("--config", config_path, "flat key=value config file");

    // report
    auto* report = app.add_subcommand("report", "Convert a trace JSON to a learning-curve CSV");
    std::string re_trace, re_out;
    report->add_option("--trace", re_trace, "trace JSON")->required();
    report->add_option("--out", re_out, "output CSV")->required();
    report->add_option("--config", config_path, "flat key=value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CommandContext ctx;
        ctx.started_at = utc_now();

        if (*ingest) {
            ctx.cmd = ingest;
            load_command_config(ctx, config_path);
            overlay(ctx, "date-format", in_datefmt);
            overlay(ctx, "max-diagnostics", in_maxdiag);
            return cmd_ingest(in_sales, in_out, in_datefmt, in_maxdiag, ctx);
        }
        if (*estimate) {
            ctx.cmd = estimate;
            load_command_config(ctx, config_path);
            overlay(ctx, "pool-min", es_cfg.pool_min);
            overlay(ctx, "variance-floor", es_cfg.variance_floor);
            overlay(ctx, "support-clamp", es_cfg.support_clamp);
            overlay(ctx, "price-scale", es_cfg.price_scale);
            overlay(ctx, "price-unit", es_cfg.price_unit);
            overlay(ctx, "threads", es_cfg.threads);
            resolve_seed(ctx, es_seed);
            return cmd_estimate(es_store, es_out, es_cfg, es_seed, ctx);
        }
        if (*simulate) {
            ctx.cmd = simulate;
            load_command_config(ctx, config_path);
            overlay(ctx, "threads", si_threads);
            overlay(ctx, "divisor", si_divisor);
            resolve_seed(ctx, si_seed);
            return cmd_simulate(si_matrix, si_waterfall, si_zeta, si_out, si_seed, si_threads,
                                si_divisor, ctx);
        }
        if (*score) {
            ctx.cmd = score;
            load_command_config(ctx, config_path);
            return cmd_score(sc_waterfall, sc_sim, sc_obs, sc_out, ctx);
        }
        if (*calibrate) {
            ctx.cmd = calibrate;
            load_command_config(ctx, config_path);
            overlay(ctx, "window", ca_window);
            overlay(ctx, "date-format", ca_datefmt);
            overlay(ctx, "zeta-lo", ca_cfg.grid_lo);
            overlay(ctx, "zeta-hi", ca_cfg.grid_hi);
            overlay(ctx, "zeta-step", ca_cfg.grid_step);
            overlay(ctx, "sweep-tolerance", ca_cfg.sweep_tolerance);
            overlay(ctx, "max-rounds", ca_cfg.max_rounds);
            overlay(ctx, "threads", ca_threads);
            overlay(ctx, "divisor", ca_divisor);
            resolve_seed(ctx, ca_seed);
            return cmd_calibrate(ca_matrix, ca_waterfall, ca_obs, ca_sales, ca_anchor, ca_window,
                                 ca_datefmt, ca_cfg, ca_out, ca_report, ca_seed, ca_threads,
                                 ca_divisor, ctx);
        }
        if (*optimize) {
            ctx.cmd = optimize;
            load_command_config(ctx, config_path);
            overlay(ctx, "algo", op_algo);
            overlay(ctx, "init", op_init);
            op_grid.overlay_config(ctx);
            overlay(ctx, "max-iter", op_maxiter);
            overlay(ctx, "epsilon", op_eps);
            overlay(ctx, "max-length", op_maxlen);
            overlay(ctx, "max-per-network", op_maxper);
            overlay(ctx, "free-order", op_freeorder);
            overlay(ctx, "threads", op_threads);
            overlay(ctx, "divisor", op_divisor);
            resolve_seed(ctx, op_seed);
            return cmd_optimize(op_matrix, op_algo, op_init, op_zeta, op_grid, op_maxiter, op_eps,
                                op_maxlen, op_maxper, op_freeorder, op_outdir, op_seed, op_threads,
                                op_divisor, ctx);
        }
        if (*oracle) {
            ctx.cmd = oracle;
            load_command_config(ctx, config_path);
            or_grid.overlay_config(ctx);
            overlay(ctx, "candidate-cap", or_cap);
            overlay(ctx, "threads", or_threads);
            overlay(ctx, "divisor", or_divisor);
            resolve_seed(ctx, or_seed);
            return cmd_oracle(or_matrix, or_networks, or_zeta, or_grid, or_cap, or_outdir,
                              or_seed, or_threads, or_divisor, ctx);
        }
        if (*synth) {
            ctx.cmd = synth;
            load_command_config(ctx, config_path);
            overlay(ctx, "scale", sy_scale);
            overlay(ctx, "mode", sy_mode);
            sy_grid.overlay_config(ctx);
            overlay(ctx, "days", sy_pipe.days);
            overlay(ctx, "batches-per-day", sy_pipe.batches_per_day);
            overlay(ctx, "networks-per-user", sy_pipe.networks_per_user);
            overlay(ctx, "max-batch-impressions", sy_pipe.max_batch_impressions);
            resolve_seed(ctx, sy_seed);
            bool default_grid = synth->count("--grid-min") == 0 &&
                                synth->count("--grid-values") == 0 &&
                                !ctx.config.count("grid-min") && !ctx.config.count("grid-values");
            return cmd_synth(sy_scale, sy_mode, sy_grid, default_grid, sy_pipe, sy_outdir,
                             sy_seed, ctx);
        }
        if (*report) {
            ctx.cmd = report;
            load_command_config(ctx, config_path);
            return cmd_report(re_trace, re_out, ctx);
        }
    } catch (const wf::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const wf::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const wf::CapacityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const wf::LookupError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const wf::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const wf::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const wf::PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const wf::EstimationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const wf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
