#pragma once

// Stage orchestration with an on-disk cache.
//
// Layout under the output directory:
//   cache/<stage>/<key>/          one directory per computed stage, renamed into place when complete
//   cache/<stage>/<key>/files.json  list of output files in the entry
//   <file>                        published outputs (written to a temp name, then renamed)
//   manifest.json                 digests, timings and warnings of the last run
//
// The key of a stage hashes the software version, the stage's parameters and
// the digests of every file it reads (including upstream outputs), so a rerun
// with unchanged inputs reuses the entry.

#include <greenexp/pipeline/config.hpp>
#include <greenexp/pipeline/digest.hpp>
#include <greenexp/pipeline/stages.hpp>
#include <greenexp/pipeline/validate.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace greenexp::pipeline {

#ifndef GREENEXP_VERSION
#define GREENEXP_VERSION "0.0.0"
#endif

inline constexpr const char* kVersion = GREENEXP_VERSION;

enum class ExitCode { ok = 0, validation_failed = 1, stage_failed = 2 };

namespace detail {

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string temp_suffix() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    return ".tmp-" + std::to_string(rng());
}

} // namespace detail

// Writes through a temporary file in the same directory, then renames over the target.
inline void write_atomic(const fs::path& path, std::string_view bytes) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + detail::temp_suffix();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

class StageCache {
public:
    explicit StageCache(fs::path root) : root_(std::move(root)) {}

    fs::path entry(Stage s, const std::string& key) const { return root_ / stage_name(s) / key; }

    std::optional<Files> load(Stage s, const std::string& key) const {
        const fs::path dir = entry(s, key);
        if (!fs::is_directory(dir) || !fs::is_regular_file(dir / "files.json")) return std::nullopt;
        Files files;
        try {
            for (const auto& name : io::json::parse(detail::read_file(dir / "files.json")))
                files[name.get<std::string>()] = detail::read_file(dir / name.get<std::string>());
        } catch (const std::exception&) {
            return std::nullopt;
        }
        return files;
    }

    // Builds the entry in a temporary directory and renames it into place.
    void store(Stage s, const std::string& key, const Files& files) const {
        const fs::path dir = entry(s, key);
        const fs::path tmp = dir.string() + detail::temp_suffix();
        fs::create_directories(tmp);
        io::json names = io::json::array();
        for (const auto& [name, bytes] : files) {
            std::ofstream out(tmp / name, std::ios::binary);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            names.push_back(name);
        }
        {
            std::ofstream out(tmp / "files.json", std::ios::binary);
            out << names.dump() << '\n';
        }
        std::error_code ec;
        fs::rename(tmp, dir, ec);
        if (ec) {
            // Another run stored the same key first, or a stale entry is in the way.
            fs::remove_all(dir);
            fs::rename(tmp, dir, ec);
            if (ec) fs::remove_all(tmp);
        }
    }

private:
    fs::path root_;
};

// Digests of every configured input file, keyed by input name.
inline std::map<std::string, std::string> input_digests(const PipelineConfig& c) {
    std::map<std::string, std::string> d;
    for (const auto& [k, p] : c.inputs) d[k] = file_sha256(p);
    for (const auto& [m, p] : c.prescriptions) d[fmt::format("prescriptions.month_{:02}", m)] = file_sha256(p);
    for (const auto& [cond, p] : c.conditions) d["conditions." + std::string(condition_name(cond))] = file_sha256(p);
    return d;
}

inline std::string stage_key(Stage s, const PipelineConfig& c, const std::map<std::string, std::string>& digests,
                             const Files& upstream) {
    const Parameters& p = c.params;
    Sha256 h;
    h.field("greenexp").field(kVersion).field(stage_name(s));
    auto input = [&](const std::string& key) {
        auto it = digests.find(key);
        h.field(key).field(it == digests.end() ? "" : it->second);
    };
    switch (s) {
    case Stage::metrics:
        h.field(fmt::format("{} {} {} {} {}", p.buffer_half_width, p.choice_radius, detail::mode_name(p.choice_mode),
                            static_cast<int>(p.onroad_denominator), static_cast<int>(p.image_aggregation)));
        for (const char* k : {"areas", "green_raster", "parks", "segments", "images"}) input(k);
        break;
    case Stage::targets:
        h.field(fmt::format("{} {} {} {}", p.walk_budget_minutes, p.walk_speed_kmh, p.max_snap_distance, p.population_cell_size));
        for (const char* k : {"areas", "green_raster", "parks", "segments", "population"}) input(k);
        break;
    case Stage::prescriptions:
        for (const char* k : {"areas", "gps", "patients"}) input(k);
        for (const auto& [k, v] : digests)
            if (k.rfind("prescriptions.", 0) == 0 || k.rfind("conditions.", 0) == 0) input(k);
        break;
    case Stage::stats:
        h.field(fmt::format("{} {} {} {} {}", p.bootstrap, p.seed, p.caliper_sd, p.min_pairs, p.gwr));
        for (const char* k : {"areas", "covariates"}) input(k);
        for (const auto& [name, bytes] : upstream) h.field(name).field(sha256(bytes));
        break;
    }
    return h.hex();
}

struct StageRecord {
    Stage stage;
    std::string key;
    std::string status; // computed | cached | failed | skipped
    double seconds = 0.0;
    std::map<std::string, std::string> outputs; // file -> sha256
    std::string error;
};

struct RunResult {
    ExitCode code = ExitCode::ok;
    ValidationReport validation;
    std::vector<StageRecord> stages;
    std::vector<std::string> warnings;
    io::json manifest;
};

// Requested stages plus everything they depend on, in pipeline order.
inline std::vector<Stage> stage_closure(const std::vector<Stage>& requested) {
    std::set<Stage> want(requested.begin(), requested.end());
    for (Stage s : requested)
        for (Stage d : stage_dependencies(s)) want.insert(d);
    std::vector<Stage> out;
    for (Stage s : kStages)
        if (want.count(s)) out.push_back(s);
    return out;
}

inline RunResult run(const PipelineConfig& c, std::vector<Stage> requested = {kStages.begin(), kStages.end()}) {
    RunResult result;
    result.validation = validate(c);
    if (!result.validation.ok()) {
        result.code = ExitCode::validation_failed;
        write_atomic(c.out_dir / "validation.json", result.validation.to_json().dump(1) + "\n");
        return result;
    }

    const auto digests = input_digests(c);
    const StageCache cache(c.out_dir / "cache");
    std::map<Stage, Files> produced;
    std::set<Stage> failed;
    for (Stage s : stage_closure(requested)) {
        StageRecord rec{s, "", "", 0.0, {}, {}};
        bool blocked = false;
        Files upstream;
        for (Stage d : stage_dependencies(s)) {
            if (!produced.count(d)) blocked = true;
            else upstream.insert(produced[d].begin(), produced[d].end());
        }
        if (blocked) {
            rec.status = "skipped";
            rec.error = "an upstream stage failed";
            result.stages.push_back(std::move(rec));
            continue;
        }
        // Only the tables the stats stage reads feed its key.
        Files inputs;
        if (s == Stage::stats)
            for (const char* n : {"metrics.csv", "targets.csv", "prescriptions.csv"}) inputs[n] = upstream[n];
        rec.key = stage_key(s, c, digests, inputs);
        const auto start = std::chrono::steady_clock::now();
        Files files;
        if (auto hit = cache.load(s, rec.key)) {
            files = std::move(*hit);
            rec.status = "cached";
        } else {
            try {
                StageResult r;
                switch (s) {
                case Stage::metrics: r = run_metrics(c); break;
                case Stage::targets: r = run_targets(c); break;
                case Stage::prescriptions: r = run_prescriptions(c); break;
                case Stage::stats: r = run_stats(c, inputs); break;
                }
                std::string warn_text;
                for (const auto& w : r.warnings) warn_text += w + "\n";
                r.files["warnings_" + stage_name(s) + ".txt"] = warn_text;
                files = std::move(r.files);
                cache.store(s, rec.key, files);
                rec.status = "computed";
            } catch (const std::exception& e) {
                rec.status = "failed";
                rec.error = e.what();
                failed.insert(s);
                result.code = ExitCode::stage_failed;
            }
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (rec.status != "failed") {
            for (const auto& [name, bytes] : files) {
                rec.outputs[name] = sha256(bytes);
                const fs::path target = c.out_dir / name;
                if (!fs::is_regular_file(target) || file_sha256(target) != rec.outputs[name]) write_atomic(target, bytes);
                if (name.rfind("warnings_", 0) == 0) {
                    std::istringstream ws(bytes);
                    for (std::string line; std::getline(ws, line);)
                        if (!line.empty()) result.warnings.push_back(stage_name(s) + ": " + line);
                }
            }
            produced[s] = std::move(files);
        }
        result.stages.push_back(std::move(rec));
    }

    io::json inputs = io::json::object();
    for (const auto& [k, d] : digests) inputs[k] = d;
    io::json stages = io::json::array();
    for (const auto& r : result.stages) {
        io::json j{{"name", stage_name(r.stage)}, {"key", r.key}, {"status", r.status}, {"seconds", r.seconds}, {"outputs", r.outputs}};
        if (!r.error.empty()) j["error"] = r.error;
        stages.push_back(std::move(j));
    }
    Sha256 config_hash;
    config_hash.field(parameters_text(c.params));
    for (const auto& [k, d] : digests) config_hash.field(k).field(d);
    result.manifest = {{"software", {{"name", "greenexp"}, {"version", kVersion}}},
                       {"config", c.source.string()},
                       {"config_hash", config_hash.hex()},
                       {"seed", c.params.seed},
                       {"inputs", inputs},
                       {"stages", stages},
                       {"validation_warnings", result.validation.to_json()["warnings"]},
                       {"warnings", result.warnings}};
    write_atomic(c.out_dir / "manifest.json", result.manifest.dump(1) + "\n");
    return result;
}

} // namespace greenexp::pipeline
