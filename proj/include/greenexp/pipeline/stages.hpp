#pragma once

// The four pipeline stages. Each returns its output files as (name, bytes) so
// the runner can cache and publish them.

#include <greenexp/access/targets.hpp>
#include <greenexp/geo/buffer.hpp>
#include <greenexp/greenery/metrics.hpp>
#include <greenexp/io/csv.hpp>
#include <greenexp/io/geojson.hpp>
#include <greenexp/io/raster_io.hpp>
#include <greenexp/io/tables.hpp>
#include <greenexp/pipeline/config.hpp>
#include <greenexp/rx/ingest.hpp>
#include <greenexp/stats/gwr.hpp>
#include <greenexp/stats/psm.hpp>
#include <greenexp/street/choice.hpp>
#include <greenexp/street/graph.hpp>

#include <fmt/format.h>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace greenexp::pipeline {

enum class Stage { metrics, targets, prescriptions, stats };

inline constexpr std::array<Stage, 4> kStages{Stage::metrics, Stage::targets, Stage::prescriptions, Stage::stats};

inline std::string stage_name(Stage s) {
    switch (s) {
    case Stage::metrics: return "metrics";
    case Stage::targets: return "targets";
    case Stage::prescriptions: return "prescriptions";
    case Stage::stats: return "stats";
    }
    return "?";
}

inline Stage parse_stage(const std::string& s) {
    for (Stage st : kStages)
        if (stage_name(st) == s) return st;
    throw ConfigError("unknown stage '" + s + "' (expected metrics, targets, prescriptions or stats)");
}

inline std::vector<Stage> stage_dependencies(Stage s) {
    if (s == Stage::stats) return {Stage::metrics, Stage::targets, Stage::prescriptions};
    return {};
}

using Files = std::map<std::string, std::string>;

struct StageResult {
    Files files;
    std::vector<std::string> warnings;
};

// Greenery measures in the order they appear as treatments.
inline const std::vector<std::string> kMetricColumns{"g_total_ndvi", "g_onroad_ndvi", "g_onroad_gsv", "g_offroad"};
inline const std::vector<std::string> kTargetColumns{"who_share", "esa_who_share", "ne_share"};

namespace detail {

inline std::string join(const std::vector<std::string>& v, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

inline std::string dump(const io::json& j) { return j.dump(1) + "\n"; }

} // namespace detail

inline StageResult run_metrics(const PipelineConfig& c) {
    const Parameters& p = c.params;
    StageResult out;
    const auto areas = io::read_areas(c.input("areas"));
    const GreenRaster raster = io::read_raster(c.input("green_raster"));
    const auto parks = io::read_green_spaces(c.input("parks"));
    const auto images = io::read_images(c.input("images"));
    const StreetGraph graph = build_graph(io::read_segments(c.input("segments")));

    const auto scores = normalize_scores(choice(graph, ChoiceOptions{p.choice_radius, p.choice_mode, p.jobs}));
    io::CsvWriter choice_csv({"segment_id", "c_raw", "w", "normalized_0_100"});
    for (std::size_t s = 0; s < graph.size(); ++s)
        choice_csv.row({graph.segment(s).id, io::format_number(scores.raw[s]), io::format_number(scores.weight[s]),
                        io::format_number(scores.normalized[s])});

    const GreenRaster public_green = public_greenery(raster, parks);
    const auto owner = assign_segments(areas, graph);
    std::vector<AreaStreets> streets(areas.size());
    io::json seg_features = io::json::array();
    std::size_t unassigned = 0;
    for (std::size_t s = 0; s < graph.size(); ++s) {
        const auto& seg = graph.segment(s);
        io::json props{{"id", seg.id}, {"c_raw", scores.raw[s]}, {"w", scores.weight[s]}, {"normalized_0_100", scores.normalized[s]}};
        if (owner[s]) {
            props["area_id"] = areas[*owner[s]].id;
            streets[*owner[s]].buffers.push_back(buffer_polyline(seg.geometry, p.buffer_half_width, seg.id));
            streets[*owner[s]].weights.push_back(scores.weight[s]);
        } else {
            props["area_id"] = nullptr;
            ++unassigned;
        }
        seg_features.push_back(io::feature(io::to_json(seg.geometry), std::move(props)));
    }
    if (unassigned) out.warnings.push_back(fmt::format("{} segments have midpoints outside every area", unassigned));

    const ImageIndex index = index_images(images);
    io::CsvWriter csv({"area_id", "g_total_ndvi", "g_onroad_ndvi", "g_onroad_gsv", "g_offroad", "warnings"});
    io::json area_features = io::json::array();
    for (std::size_t a = 0; a < areas.size(); ++a) {
        const AreaUnit& area = areas[a];
        GreeneryVector g;
        g.area_id = area.id;
        g.g_total_ndvi = total_ndvi(area, raster);
        const OnroadResult on = onroad_ndvi(area, public_green, streets[a], p.onroad_denominator);
        g.g_onroad_ndvi = on.value;
        if (on.no_segments) g.warnings.push_back("no street segments; on-road scores set to 0");
        g.g_onroad_gsv = onroad_gsv(images, index, streets[a], p.image_aggregation).value;
        if (!on.no_segments && !g.g_onroad_gsv) g.warnings.push_back("no street images on any segment");
        if (on.no_segments) g.g_onroad_gsv = 0.0;
        g.g_offroad = offroad(area, public_green, streets[a].buffers);
        csv.row({g.area_id, io::format_number(g.g_total_ndvi), io::format_number(g.g_onroad_ndvi),
                 io::format_number(g.g_onroad_gsv), io::format_number(g.g_offroad), detail::join(g.warnings, "; ")});
        io::json props{{"id", area.id},
                       {"g_total_ndvi", g.g_total_ndvi},
                       {"g_onroad_ndvi", g.g_onroad_ndvi},
                       {"g_onroad_gsv", g.g_onroad_gsv ? io::json(*g.g_onroad_gsv) : io::json(nullptr)},
                       {"g_offroad", g.g_offroad}};
        area_features.push_back(io::feature(io::to_json(area.boundary), std::move(props)));
        for (const auto& w : g.warnings) out.warnings.push_back("area " + area.id + ": " + w);
    }
    out.files["metrics.csv"] = csv.str();
    out.files["choice.csv"] = choice_csv.str();
    out.files["segments.geojson"] = detail::dump(io::feature_collection(std::move(seg_features)));
    out.files["metrics.geojson"] = detail::dump(io::feature_collection(std::move(area_features)));
    return out;
}

inline StageResult run_targets(const PipelineConfig& c) {
    const Parameters& p = c.params;
    StageResult out;
    const auto areas = io::read_areas(c.input("areas"));
    const GreenRaster raster = io::read_raster(c.input("green_raster"));
    const auto parks = io::read_green_spaces(c.input("parks"));
    const StreetGraph graph = build_graph(io::read_segments(c.input("segments")));
    const auto cells = io::read_population(c.input("population"), p.population_cell_size);

    WalkOptions wo;
    wo.budget_minutes = p.walk_budget_minutes;
    wo.speed_kmh = p.walk_speed_kmh;
    wo.max_snap_distance = p.max_snap_distance;
    wo.jobs = p.jobs;
    const ReachResult reach = walking_reach(cells, graph, parks, wo);
    out.warnings = reach.warnings;
    const auto green = cell_green_area(cells, raster);
    const auto flags = target_flags(reach.reach, parks, green);
    const auto results = aggregate_targets(cells, flags, areas);

    io::CsvWriter csv({"area_id", "who_share", "esa_who_share", "ne_share", "population"});
    for (const auto& r : results) {
        csv.row({r.area_id, io::format_number(r.who_share), io::format_number(r.esa_who_share), io::format_number(r.ne_share),
                 io::format_number(r.population)});
        if (!r.who_share) out.warnings.push_back("area " + r.area_id + ": no population; target shares missing");
    }
    io::CsvWriter cell_csv({"cell_id", "population", "who", "esa_who", "ne", "reached_cells", "reached_parks", "off_network"});
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& r = reach.reach[i];
        cell_csv.row({cells[i].id, io::format_number(cells[i].population), flags[i].who ? "1" : "0",
                      flags[i].esa_who ? "1" : "0", flags[i].ne ? "1" : "0", std::to_string(r.cells.size()),
                      std::to_string(r.parks.size()), r.off_network ? "1" : "0"});
    }
    out.files["targets.csv"] = csv.str();
    out.files["cell_targets.csv"] = cell_csv.str();
    return out;
}

inline std::vector<ConditionList> read_condition_lists(const PipelineConfig& c) {
    std::vector<ConditionList> lists;
    for (Condition cond : kConditions) {
        auto it = c.conditions.find(cond);
        if (it != c.conditions.end()) lists.push_back(io::read_condition_list(it->second, cond));
    }
    lists.push_back(ConditionList::total());
    return lists;
}

inline StageResult run_prescriptions(const PipelineConfig& c) {
    StageResult out;
    const auto areas = io::read_areas(c.input("areas"));
    std::vector<std::string> ids;
    for (const auto& a : areas) ids.push_back(a.id);
    const std::set<std::string> id_set(ids.begin(), ids.end());
    auto practices = io::read_practices(c.input("gps"), c.input("patients"), id_set, &out.warnings);
    PrescriptionPanel panel(std::move(practices), read_condition_lists(c));
    io::json quarantined = io::json::object(); // file -> first offending lines
    for (const auto& [month, path] : c.prescriptions) {
        const std::size_t before = panel.report().quarantined_lines.size();
        io::ingest_prescriptions(panel, path, month);
        const auto& lines = panel.report().quarantined_lines;
        if (lines.size() > before)
            quarantined[path.filename().string()] = std::vector<std::size_t>(lines.begin() + static_cast<std::ptrdiff_t>(before), lines.end());
    }
    const IngestReport rep = panel.report();
    out.warnings.insert(out.warnings.end(), rep.warnings.begin(), rep.warnings.end());
    if (rep.rows_quarantined)
        out.warnings.push_back(fmt::format("{} prescription rows name unknown or excluded practices and were quarantined",
                                           rep.rows_quarantined));
    if (!rep.months_missing.empty()) {
        std::vector<std::string> m;
        for (int x : rep.months_missing) m.push_back(std::to_string(x));
        out.warnings.push_back("months without prescription data: " + detail::join(m, ", "));
    }

    io::CsvWriter csv({"area_id", "condition", "quantity_pc", "cost_pc", "quantity_total", "cost_total", "patients"});
    for (const auto& r : panel.rates(ids)) {
        csv.row({r.area_id, std::string(condition_name(r.condition)), io::format_number(r.quantity_per_capita),
                 io::format_number(r.cost_per_capita), io::format_number(r.quantity_total), io::format_number(r.cost_total),
                 io::format_number(r.patients)});
    }
    io::json report{{"rows_read", rep.rows_read},
                    {"rows_quarantined", rep.rows_quarantined},
                    {"quarantined_lines", quarantined},
                    {"excluded_practices", rep.excluded_practices},
                    {"months_present", rep.months_present},
                    {"months_missing", rep.months_missing},
                    {"warnings", rep.warnings}};
    out.files["prescriptions.csv"] = csv.str();
    out.files["ingest_report.json"] = detail::dump(report);
    return out;
}

namespace detail {

// Column of an upstream CSV keyed by area id; empty fields are missing.
inline std::map<std::string, std::optional<double>> area_column(const io::CsvTable& t, const std::string& column) {
    std::map<std::string, std::optional<double>> out;
    const std::size_t id = t.column("area_id"), col = t.column(column);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string& f = t.rows[i][col];
        out[t.rows[i][id]] = f.empty() ? std::nullopt : std::optional<double>(io::parse_number(f, t, i, column));
    }
    return out;
}

} // namespace detail

// Uses the published upstream tables, so its cache key covers their bytes.
inline StageResult run_stats(const PipelineConfig& c, const Files& upstream) {
    const Parameters& p = c.params;
    StageResult out;
    const auto areas = io::read_areas(c.input("areas"));
    const io::CovariateTable cov = io::read_covariates(c.input("covariates"));
    auto table = [&](const std::string& name) {
        auto it = upstream.find(name);
        if (it == upstream.end()) throw Error("stats stage needs " + name + " from an earlier stage");
        return io::parse_csv(it->second, name);
    };
    const io::CsvTable metrics = table("metrics.csv");
    const io::CsvTable targets = table("targets.csv");
    const io::CsvTable rx = table("prescriptions.csv");

    std::vector<std::string> ids;
    std::vector<std::pair<double, double>> coords;
    for (const auto& a : areas) {
        ids.push_back(a.id);
        Point ctr;
        bg::centroid(a.boundary, ctr);
        coords.emplace_back(ctr.x(), ctr.y());
        if (!cov.by_area.count(a.id)) out.warnings.push_back("area " + a.id + ": no covariates; excluded from statistics");
    }

    std::vector<std::pair<std::string, std::map<std::string, std::optional<double>>>> treatments;
    for (const auto& m : kMetricColumns) treatments.emplace_back(m, detail::area_column(metrics, m));
    for (const auto& m : kTargetColumns) treatments.emplace_back(m, detail::area_column(targets, m));

    // Outcomes and totals per condition, in condition order.
    struct Outcome {
        std::map<std::string, std::optional<double>> per_capita;
        std::map<std::string, AreaPrescriptionRate> rate;
    };
    std::map<Condition, Outcome> outcomes;
    {
        const std::size_t ia = rx.column("area_id"), ic = rx.column("condition");
        for (std::size_t i = 0; i < rx.rows.size(); ++i) {
            const Condition cond = parse_condition(rx.rows[i][ic]);
            const std::string& area = rx.rows[i][ia];
            const std::string& q = rx.rows[i][rx.column("quantity_pc")];
            Outcome& o = outcomes[cond];
            o.per_capita[area] = q.empty() ? std::nullopt : std::optional<double>(io::parse_number(q, rx, i, "quantity_pc"));
            AreaPrescriptionRate r;
            r.area_id = area;
            r.condition = cond;
            r.quantity_total = io::number_at(rx, i, "quantity_total");
            r.cost_total = io::number_at(rx, i, "cost_total");
            r.patients = io::number_at(rx, i, "patients");
            o.rate[area] = r;
        }
    }

    io::CsvWriter ate_csv({"treatment", "condition", "ate", "se", "ci_lo", "ci_hi", "significant", "ate_full",
                           "ate_per_capita", "n_areas", "redraws", "status"});
    io::CsvWriter red_csv({"treatment", "condition", "ate_frac", "quantity_reduction", "cost_reduction", "control_areas"});
    io::CsvWriter gwr_csv({"treatment", "condition", "bandwidth", "aicc", "failed_locations", "status"});
    std::map<std::string, io::json> gwr_props;
    for (const auto& id : ids) gwr_props[id] = io::json{{"id", id}};

    for (const auto& [cond, outcome] : outcomes) {
        const std::string cname(condition_name(cond));
        for (const auto& [tname, tvalues] : treatments) {
            // Treatment split over every area with a value, then rows with any missing input are dropped.
            std::vector<std::optional<double>> metric;
            for (const auto& id : ids) {
                auto it = tvalues.find(id);
                metric.push_back(it == tvalues.end() ? std::nullopt : it->second);
            }
            const auto flags = binarize_treatment(metric);

            std::vector<std::optional<double>> y_raw;
            for (const auto& id : ids) {
                auto it = outcome.per_capita.find(id);
                y_raw.push_back(it == outcome.per_capita.end() ? std::nullopt : it->second);
            }
            std::vector<Column> cols;
            for (std::size_t k = 0; k < cov.names.size(); ++k) {
                Column col{cov.names[k], {}};
                for (const auto& id : ids) col.values.push_back(cov.get(id, k));
                cols.push_back(std::move(col));
            }
            Column tcol{tname, metric};
            Column fcol{"treated", {}};
            for (const auto& f : flags) fcol.values.push_back(f ? std::optional<double>(*f ? 1.0 : 0.0) : std::nullopt);
            std::vector<Column> all = cols;
            all.push_back(tcol);
            all.push_back(fcol);
            DesignMatrix d = make_design(ids, y_raw, all, coords);
            const std::string status_prefix = fmt::format("{} x {}: ", tname, cname);

            std::vector<double> yv(d.y.data(), d.y.data() + d.y.size());
            if (yv.size() < 4) {
                ate_csv.row({tname, cname, "", "", "", "", "", "", "", std::to_string(yv.size()), "0", "too few areas"});
                out.warnings.push_back(status_prefix + "too few complete areas for statistics");
                continue;
            }
            MinMax mm;
            const auto yn = normalize(yv, &mm);
            for (std::size_t i = 0; i < yn.size(); ++i) d.y(static_cast<Eigen::Index>(i)) = yn[i];
            const auto k = static_cast<Eigen::Index>(cov.names.size());
            std::vector<bool> treated;
            for (Eigen::Index i = 0; i < d.x.rows(); ++i) treated.push_back(d.x(i, k + 1) > 0.5);
            const auto n_treated = static_cast<std::size_t>(std::count(treated.begin(), treated.end(), true));
            if (n_treated == 0 || n_treated == treated.size()) {
                ate_csv.row({tname, cname, "", "", "", "", "", "", "", std::to_string(d.rows()), "0", "constant treatment"});
                out.warnings.push_back(status_prefix + "no area lies above the median, so there is no treated group");
                continue;
            }

            DesignMatrix psm_data = d;
            psm_data.x = d.x.leftCols(k);
            psm_data.predictor_names.resize(static_cast<std::size_t>(k));
            PsmOptions po;
            po.bootstrap = p.bootstrap;
            po.seed = p.seed;
            po.caliper_sd = p.caliper_sd;
            po.min_pairs = p.min_pairs;
            po.jobs = p.jobs;
            try {
                const AteResult r = psm_ate(psm_data, treated, po, tname);
                const double ate_pc = r.ate_mean * mm.span();
                ate_csv.row({tname, cname, io::format_number(r.ate_mean), io::format_number(r.se), io::format_number(r.ci_lo),
                             io::format_number(r.ci_hi), r.significant ? "true" : "false", io::format_number(r.ate_full),
                             io::format_number(ate_pc), std::to_string(d.rows()), std::to_string(r.redraws), "ok"});

                // Reduction over the control areas of this design.
                std::vector<AreaPrescriptionRate> rates;
                std::vector<bool> flag;
                double control_rate = 0.0;
                std::size_t controls = 0;
                for (std::size_t i = 0; i < d.rows(); ++i) {
                    rates.push_back(outcome.rate.at(d.area_ids[i]));
                    flag.push_back(treated[i]);
                    if (!treated[i]) {
                        control_rate += yv[i];
                        ++controls;
                    }
                }
                if (controls && control_rate > 0.0) {
                    const double ate_frac = ate_pc / (control_rate / static_cast<double>(controls));
                    const Reduction red = reduction_projection(rates, flag, ate_frac);
                    red_csv.row({tname, cname, io::format_number(ate_frac), io::format_number(red.quantity),
                                 io::format_number(red.cost), std::to_string(controls)});
                }
            } catch (const Error& e) {
                ate_csv.row({tname, cname, "", "", "", "", "", "", "", std::to_string(d.rows()), "",
                             std::string("failed: ") + e.what()});
                out.warnings.push_back(status_prefix + e.what());
            }

            if (!p.gwr) continue;
            DesignMatrix gd = d;
            gd.x = d.x.leftCols(k + 1);
            gd.predictor_names.resize(static_cast<std::size_t>(k + 1));
            try {
                const GwrResult g = gwr_fit(gd);
                gwr_csv.row({tname, cname, std::to_string(g.bandwidth), io::format_number(g.aicc),
                             std::to_string(g.failed.size()), "ok"});
                const std::string key = "beta:" + tname + ":" + cname;
                for (std::size_t i = 0; i < gd.rows(); ++i) {
                    const double b = g.beta(static_cast<Eigen::Index>(i), k + 1);
                    gwr_props[gd.area_ids[i]][key] = std::isfinite(b) ? io::json(b) : io::json(nullptr);
                }
                if (!g.failed.empty())
                    out.warnings.push_back(status_prefix + fmt::format("GWR local design singular at {} locations", g.failed.size()));
            } catch (const Error& e) {
                gwr_csv.row({tname, cname, "", "", "", std::string("failed: ") + e.what()});
                out.warnings.push_back(status_prefix + "GWR " + e.what());
            }
        }
    }
    out.files["ate.csv"] = ate_csv.str();
    out.files["reductions.csv"] = red_csv.str();
    if (p.gwr) {
        io::json features = io::json::array();
        for (const auto& a : areas) features.push_back(io::feature(io::to_json(a.boundary), gwr_props[a.id]));
        out.files["gwr.csv"] = gwr_csv.str();
        out.files["gwr_coefficients.geojson"] = detail::dump(io::feature_collection(std::move(features)));
    }
    return out;
}

} // namespace greenexp::pipeline
