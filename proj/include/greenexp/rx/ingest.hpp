#pragma once

// Readers for the four practice-level tables and the condition code lists.
//   prescriptions: gp_code, bnf_code, items, quantity, cost   (one file per month)
//   drugs:         bnf_code, name
//   practices:     gp_code, x, y, status
//   patients:      gp_code, area_id, count

#include <greenexp/io/csv.hpp>
#include <greenexp/rx/prescriptions.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace greenexp::io {

inline ConditionList read_condition_list(const std::filesystem::path& path, Condition c) {
    const CsvTable t = read_csv(path);
    const std::size_t col = t.column("bnf_code");
    std::vector<std::string> codes;
    for (const auto& r : t.rows) codes.push_back(r[col]);
    return ConditionList(c, std::move(codes));
}

inline std::map<std::string, std::string> read_drugs(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t code = t.column("bnf_code"), name = t.column("name");
    std::map<std::string, std::string> out;
    for (const auto& r : t.rows) out.emplace(r[code], r[name]);
    return out;
}

// Practices with their patient tables. Patient rows naming an unknown area
// raise an IngestError listing every offending line; rows naming an unknown
// practice are reported as warnings.
inline std::vector<GpPractice> read_practices(const std::filesystem::path& practices_csv,
                                              const std::filesystem::path& patients_csv,
                                              const std::set<std::string>& area_ids,
                                              std::vector<std::string>* warnings = nullptr) {
    const CsvTable gt = read_csv(practices_csv);
    const std::size_t gc = gt.column("gp_code"), gx = gt.column("x"), gy = gt.column("y"), gs = gt.column("status");
    std::vector<GpPractice> gps;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < gt.rows.size(); ++i) {
        GpPractice gp;
        gp.gp_code = gt.rows[i][gc];
        gp.location = Point{parse_number(gt.rows[i][gx], gt, i, "x"), parse_number(gt.rows[i][gy], gt, i, "y")};
        gp.status = gt.rows[i][gs];
        if (!index.emplace(gp.gp_code, gps.size()).second)
            throw IngestError(gt.source + ": duplicate practice '" + gp.gp_code + "'", {gt.lines[i]});
        gps.push_back(std::move(gp));
    }

    const CsvTable pt = read_csv(patients_csv);
    const std::size_t pc = pt.column("gp_code"), pa = pt.column("area_id"), pn = pt.column("count");
    std::vector<std::size_t> bad_area;
    for (std::size_t i = 0; i < pt.rows.size(); ++i) {
        const auto& r = pt.rows[i];
        if (!area_ids.count(r[pa])) {
            bad_area.push_back(pt.lines[i]);
            continue;
        }
        const double n = parse_number(r[pn], pt, i, "count");
        if (n < 0.0) throw IngestError(pt.source + ": negative patient count", {pt.lines[i]});
        auto it = index.find(r[pc]);
        if (it == index.end()) {
            if (warnings) warnings->push_back(pt.source + ": line " + std::to_string(pt.lines[i]) + ": unknown practice '" + r[pc] + "'");
            continue;
        }
        gps[it->second].patients_by_area[r[pa]] += n;
    }
    if (!bad_area.empty()) {
        std::string lines;
        for (std::size_t k = 0; k < bad_area.size() && k < 20; ++k) lines += (k ? ", " : "") + std::to_string(bad_area[k]);
        throw IngestError(pt.source + ": " + std::to_string(bad_area.size()) + " rows reference unknown areas (lines " + lines +
                              (bad_area.size() > 20 ? ", ..." : "") + ")",
                          bad_area);
    }
    return gps;
}

// Streams one monthly prescriptions file into the panel.
inline void ingest_prescriptions(PrescriptionPanel& panel, const std::filesystem::path& path, int month) {
    const CsvTable t = read_csv(path);
    const std::size_t gc = t.column("gp_code"), bc = t.column("bnf_code"), ic = t.column("items"),
                      qc = t.column("quantity"), cc = t.column("cost");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        PrescriptionRow row{r[gc], r[bc], parse_number(r[ic], t, i, "items"), parse_number(r[qc], t, i, "quantity"),
                            parse_number(r[cc], t, i, "cost")};
        if (row.items < 0.0 || row.quantity < 0.0 || row.cost < 0.0)
            throw IngestError(t.source + ": line " + std::to_string(t.lines[i]) + ": negative value", {t.lines[i]});
        panel.add(row, t.lines[i]);
    }
    panel.record_month(month);
}

} // namespace greenexp::io
