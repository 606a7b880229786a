// greenexp: validate inputs, run the pipeline, export maps and print a report.
//
// Exit codes: 0 ok, 1 fatal validation (including unreadable config), 2 stage failure.

#include <greenexp/pipeline/choropleth.hpp>
#include <greenexp/pipeline/config.hpp>
#include <greenexp/pipeline/run.hpp>
#include <greenexp/pipeline/validate.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace gp = greenexp::pipeline;
namespace io = greenexp::io;

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
};

gp::PipelineConfig load(const Common& o) {
    gp::PipelineConfig c = gp::load_config(o.config);
    if (!o.out.empty()) c.out_dir = o.out;
    if (o.seed) c.params.seed = *o.seed;
    if (o.jobs) c.params.jobs = *o.jobs;
    gp::check_parameters(c.params);
    return c;
}

void add_common(CLI::App* app, Common& o, bool run_flags) {
    app->add_option("--config", o.config, "pipeline config (INI)")->required()->check(CLI::ExistingFile);
    app->add_option("--out", o.out, "output directory (overrides [output] dir)");
    if (run_flags) {
        app->add_option("--seed", o.seed, "bootstrap seed (overrides the config)");
        app->add_option("--jobs", o.jobs, "worker threads")->check(CLI::Range(1u, 1024u));
    }
}

int cmd_validate(const Common& o) {
    const gp::PipelineConfig c = load(o);
    const gp::ValidationReport rep = gp::validate(c);
    const std::string text = rep.to_json().dump(1) + "\n";
    gp::write_atomic(c.out_dir / "validation.json", text);
    std::cout << text;
    std::cerr << fmt::format("{} fatal, {} warnings\n", rep.errors.size(), rep.warnings.size());
    return rep.ok() ? 0 : 1;
}

int cmd_run(const Common& o, const std::string& stages_arg) {
    const gp::PipelineConfig c = load(o);
    std::vector<gp::Stage> stages;
    if (stages_arg.empty()) {
        stages.assign(gp::kStages.begin(), gp::kStages.end());
    } else {
        std::stringstream ss(stages_arg);
        for (std::string s; std::getline(ss, s, ',');)
            if (!s.empty()) stages.push_back(gp::parse_stage(s));
    }
    const gp::RunResult r = gp::run(c, stages);
    if (r.code == gp::ExitCode::validation_failed) {
        std::cout << r.validation.to_json().dump(1) << "\n";
        std::cerr << fmt::format("validation failed with {} fatal errors\n", r.validation.errors.size());
        return 1;
    }
    for (const auto& s : r.stages) {
        std::cout << fmt::format("{:<14} {:<9} {:8.3f}s {}\n", gp::stage_name(s.stage), s.status, s.seconds,
                                 s.error.empty() ? s.key.substr(0, 12) : s.error);
    }
    std::cerr << fmt::format("{} warnings (see manifest.json)\n", r.warnings.size());
    return static_cast<int>(r.code);
}

int cmd_export(const Common& o, std::vector<std::string> metrics) {
    const gp::PipelineConfig c = load(o);
    const auto areas = io::read_areas(c.input("areas"));
    std::map<std::string, io::CsvTable> tables;
    for (const char* f : {"metrics.csv", "targets.csv"}) {
        const auto p = c.out_dir / f;
        if (!std::filesystem::is_regular_file(p)) {
            std::cerr << p.string() << " not found; run the metrics and targets stages first\n";
            return 2;
        }
        tables.emplace(f, io::read_csv(p));
    }
    if (metrics.empty()) {
        metrics = gp::kMetricColumns;
        metrics.insert(metrics.end(), gp::kTargetColumns.begin(), gp::kTargetColumns.end());
    }
    for (const auto& m : metrics) {
        const io::CsvTable* t = nullptr;
        for (const auto& [name, table] : tables)
            if (table.has_column(m)) t = &table;
        if (!t) {
            std::cerr << "unknown metric '" << m << "'\n";
            return 2;
        }
        const auto col = gp::detail::area_column(*t, m);
        std::vector<std::optional<double>> values;
        for (const auto& a : areas) {
            auto it = col.find(a.id);
            values.push_back(it == col.end() ? std::nullopt : it->second);
        }
        const gp::Choropleth map = gp::export_choropleth(values, areas, m);
        gp::write_atomic(c.out_dir / "maps" / (m + ".geojson"), map.geojson);
        gp::write_atomic(c.out_dir / "maps" / (m + ".svg"), map.svg);
        std::cout << (c.out_dir / "maps" / (m + ".svg")).string() << "\n";
    }
    return 0;
}

int cmd_report(const Common& o) {
    const gp::PipelineConfig c = load(o);
    const auto manifest_path = c.out_dir / "manifest.json";
    if (!std::filesystem::is_regular_file(manifest_path)) {
        std::cerr << "no manifest in " << c.out_dir.string() << "; run the pipeline first\n";
        return 2;
    }
    const io::json m = io::read_json(manifest_path);
    std::string text = fmt::format("greenexp {} run of {}\nconfig hash {}\nseed {}\n\nstages\n",
                                   m["software"]["version"].get<std::string>(), m["config"].get<std::string>(),
                                   m["config_hash"].get<std::string>(), m["seed"].get<std::uint64_t>());
    for (const auto& s : m["stages"])
        text += fmt::format("  {:<14} {:<9} {:.3f}s\n", s["name"].get<std::string>(), s["status"].get<std::string>(),
                            s["seconds"].get<double>());
    const auto ate_path = c.out_dir / "ate.csv";
    if (std::filesystem::is_regular_file(ate_path)) {
        const io::CsvTable t = io::read_csv(ate_path);
        text += "\nsignificant effects (99% bootstrap interval excludes 0)\n";
        std::size_t n = 0;
        for (const auto& r : t.rows) {
            if (r[t.column("significant")] != "true") continue;
            text += fmt::format("  {:<14} {:<13} ate {:>10} se {:>10} ci [{}, {}]\n", r[t.column("treatment")],
                                r[t.column("condition")], r[t.column("ate")].substr(0, 10), r[t.column("se")].substr(0, 10),
                                r[t.column("ci_lo")].substr(0, 10), r[t.column("ci_hi")].substr(0, 10));
            ++n;
        }
        if (!n) text += "  none\n";
        text += fmt::format("  ({} treatment x condition pairs estimated)\n", t.rows.size());
    }
    text += fmt::format("\n{} warnings\n", m["warnings"].size());
    for (const auto& w : m["warnings"]) text += "  " + w.get<std::string>() + "\n";
    gp::write_atomic(c.out_dir / "report.txt", text);
    std::cout << text;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greenery exposure and prescription analysis pipeline"};
    app.set_version_flag("--version", std::string(gp::kVersion));
    app.require_subcommand(1);

    Common validate_opts, run_opts, export_opts, report_opts;
    std::string stages;
    std::vector<std::string> metrics;
    auto* validate = app.add_subcommand("validate", "check every input and print a machine-readable report");
    add_common(validate, validate_opts, false);
    auto* run = app.add_subcommand("run", "run pipeline stages (cached)");
    add_common(run, run_opts, true);
    run->add_option("--stages", stages, "comma-separated subset of metrics,targets,prescriptions,stats");
    auto* exp = app.add_subcommand("export", "write choropleth GeoJSON and SVG maps of area metrics");
    add_common(exp, export_opts, false);
    exp->add_option("--metric", metrics, "metric column(s) to map (default: all)");
    auto* report = app.add_subcommand("report", "summarize the last run");
    add_common(report, report_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage errors (including a missing config file) count as configuration failures.
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        if (*validate) return cmd_validate(validate_opts);
        if (*run) return cmd_run(run_opts, stages);
        if (*exp) return cmd_export(export_opts, metrics);
        if (*report) return cmd_report(report_opts);
    } catch (const greenexp::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
