#pragma once

// Practice-level prescriptions apportioned to areas by where each practice's
// patients live, then divided by the area's patient count.

#include <greenexp/error.hpp>
#include <greenexp/geo/geometry.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace greenexp {

enum class Condition { diabetes, hypertension, asthma, depression, anxiety, opioids, total };

inline constexpr std::array<Condition, 7> kConditions{Condition::diabetes, Condition::hypertension, Condition::asthma,
                                                      Condition::depression, Condition::anxiety, Condition::opioids,
                                                      Condition::total};

inline std::string_view condition_name(Condition c) {
    switch (c) {
    case Condition::diabetes: return "diabetes";
    case Condition::hypertension: return "hypertension";
    case Condition::asthma: return "asthma";
    case Condition::depression: return "depression";
    case Condition::anxiety: return "anxiety";
    case Condition::opioids: return "opioids";
    case Condition::total: return "total";
    }
    return "?";
}

inline Condition parse_condition(std::string_view name) {
    for (Condition c : kConditions)
        if (condition_name(c) == name) return c;
    throw ConfigError("unknown condition '" + std::string(name) + "'");
}

// BNF code prefixes for one condition. `total` matches every code.
class ConditionList {
public:
    ConditionList(Condition c, std::vector<std::string> codes) : condition_(c), codes_(std::move(codes)) {
        if (c != Condition::total && codes_.empty())
            throw ConfigError("condition list '" + std::string(condition_name(c)) + "' has no BNF codes");
        for (auto& code : codes_) {
            if (code.empty() || !std::all_of(code.begin(), code.end(), [](unsigned char ch) { return std::isalnum(ch); }))
                throw ConfigError("invalid BNF code '" + code + "' in list '" + std::string(condition_name(c)) + "'");
        }
        std::sort(codes_.begin(), codes_.end());
        codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
    }

    static ConditionList total() { return ConditionList(Condition::total, {}); }

    Condition condition() const { return condition_; }
    const std::vector<std::string>& codes() const { return codes_; }

    bool matches(std::string_view bnf) const {
        if (condition_ == Condition::total) return true;
        if (bnf.empty()) return false;
        // Any listed prefix of `bnf` sorts at or before it; scan back while the first character still agrees.
        auto it = std::upper_bound(codes_.begin(), codes_.end(), bnf, [](std::string_view a, const std::string& b) { return a < b; });
        while (it != codes_.begin()) {
            --it;
            if (bnf.substr(0, it->size()) == *it) return true;
            if ((*it)[0] != bnf[0]) break;
        }
        return false;
    }

private:
    Condition condition_;
    std::vector<std::string> codes_;
};

struct GpPractice {
    std::string gp_code;
    Point location{0.0, 0.0};
    std::string status = "active";
    std::map<std::string, double> patients_by_area;

    double patients() const {
        double n = 0.0;
        for (const auto& [a, k] : patients_by_area) n += k;
        return n;
    }
};

struct PrescriptionRow {
    std::string gp_code;
    std::string bnf_code;
    double items = 0.0;
    double quantity = 0.0;
    double cost = 0.0;
};

struct AreaPrescriptionRate {
    std::string area_id;
    Condition condition = Condition::total;
    double quantity_total = 0.0;
    double cost_total = 0.0;
    double patients = 0.0;
    std::optional<double> quantity_per_capita;
    std::optional<double> cost_per_capita;
};

inline double patients_in_area(std::span<const GpPractice> gps, std::string_view area_id) {
    double n = 0.0;
    for (const auto& gp : gps) {
        auto it = gp.patients_by_area.find(std::string(area_id));
        if (it != gp.patients_by_area.end()) n += it->second;
    }
    return n;
}

inline double gp_fraction(const GpPractice& gp, std::string_view area_id) {
    const double total = gp.patients();
    if (!(total > 0.0)) throw DomainError("practice '" + gp.gp_code + "' has no patients");
    auto it = gp.patients_by_area.find(std::string(area_id));
    return it == gp.patients_by_area.end() ? 0.0 : it->second / total;
}

inline std::optional<double> per_capita(double area_total, double patients) {
    if (!(patients > 0.0)) return std::nullopt;
    return area_total / patients;
}

struct QuantityCost {
    double quantity = 0.0;
    double cost = 0.0;
};

// Practice totals are accumulated in fixed point (1e-6 units) so that the sums
// do not depend on row order.
class ConditionAccumulator {
public:
    static constexpr double kScale = 1e6;

    explicit ConditionAccumulator(ConditionList list) : list_(std::move(list)) {}

    const ConditionList& list() const { return list_; }

    bool add(const PrescriptionRow& row) {
        if (!list_.matches(row.bnf_code)) return false;
        auto& t = totals_[row.gp_code];
        t[0] += to_fixed(row.quantity);
        t[1] += to_fixed(row.cost);
        return true;
    }

    QuantityCost gp_total(const std::string& gp) const {
        auto it = totals_.find(gp);
        if (it == totals_.end()) return {};
        return {static_cast<double>(it->second[0]) / kScale, static_cast<double>(it->second[1]) / kScale};
    }

    const std::map<std::string, std::array<std::int64_t, 2>>& totals() const { return totals_; }

private:
    static std::int64_t to_fixed(double v) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("prescription quantities and costs must be finite and >= 0");
        return static_cast<std::int64_t>(std::llround(v * kScale));
    }

    ConditionList list_;
    std::map<std::string, std::array<std::int64_t, 2>> totals_;
};

// N_c(a): practice totals apportioned by patient fraction, summed over every
// practice with patients in the area.
inline QuantityCost condition_count(const ConditionAccumulator& acc, std::span<const GpPractice> gps,
                                    std::string_view area_id) {
    QuantityCost out;
    for (const auto& gp : gps) {
        auto it = gp.patients_by_area.find(std::string(area_id));
        if (it == gp.patients_by_area.end() || !(it->second > 0.0)) continue;
        const double f = gp_fraction(gp, area_id);
        const QuantityCost t = acc.gp_total(gp.gp_code);
        out.quantity += t.quantity * f;
        out.cost += t.cost * f;
    }
    return out;
}

inline QuantityCost condition_count(std::span<const PrescriptionRow> rows, const ConditionList& list,
                                    std::span<const GpPractice> gps, std::string_view area_id) {
    ConditionAccumulator acc(list);
    for (const auto& r : rows) acc.add(r);
    return condition_count(acc, gps, area_id);
}

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_quarantined = 0;              // unknown practice code
    std::vector<std::size_t> quarantined_lines;     // first few offending lines
    std::vector<std::string> excluded_practices;    // inactive or without patients
    std::vector<int> months_present;
    std::vector<int> months_missing;
    std::vector<std::string> warnings;
};

// Practices usable for apportionment: active and with at least one patient.
inline std::vector<GpPractice> usable_practices(std::vector<GpPractice> gps, IngestReport& report) {
    std::vector<GpPractice> out;
    for (auto& gp : gps) {
        if (gp.status != "active") {
            report.excluded_practices.push_back(gp.gp_code);
            report.warnings.push_back("practice '" + gp.gp_code + "' has status '" + gp.status + "' and is excluded");
            continue;
        }
        if (!(gp.patients() > 0.0)) {
            report.excluded_practices.push_back(gp.gp_code);
            report.warnings.push_back("practice '" + gp.gp_code + "' has no patients and is excluded");
            continue;
        }
        out.push_back(std::move(gp));
    }
    std::sort(out.begin(), out.end(), [](const GpPractice& a, const GpPractice& b) { return a.gp_code < b.gp_code; });
    return out;
}

// Streams prescription rows into one accumulator per condition.
class PrescriptionPanel {
public:
    PrescriptionPanel(std::vector<GpPractice> practices, std::vector<ConditionList> lists)
        : gps_(usable_practices(std::move(practices), report_)) {
        for (const auto& gp : gps_) known_.insert(gp.gp_code);
        bool has_total = false;
        for (auto& l : lists) {
            has_total |= l.condition() == Condition::total;
            acc_.emplace_back(std::move(l));
        }
        if (!has_total) acc_.emplace_back(ConditionList::total());
    }

    // Adds one row; `line` identifies it in the ingestion report.
    void add(const PrescriptionRow& row, std::size_t line = 0) {
        ++report_.rows_read;
        if (!known_.count(row.gp_code)) {
            ++report_.rows_quarantined;
            if (report_.quarantined_lines.size() < 100) report_.quarantined_lines.push_back(line);
            return;
        }
        for (auto& a : acc_) a.add(row);
    }

    void record_month(int month) { months_.insert(month); }

    const std::vector<GpPractice>& practices() const { return gps_; }
    const std::vector<ConditionAccumulator>& accumulators() const { return acc_; }

    IngestReport report() const {
        IngestReport r = report_;
        r.months_present.assign(months_.begin(), months_.end());
        for (int m = 1; m <= 12; ++m)
            if (!months_.count(m)) r.months_missing.push_back(m);
        return r;
    }

    // Per-area, per-condition totals and per-capita rates, in (area, condition list) order.
    std::vector<AreaPrescriptionRate> rates(std::span<const std::string> area_ids) const {
        std::vector<AreaPrescriptionRate> out;
        for (const auto& id : area_ids) {
            const double patients = patients_in_area(gps_, id);
            for (const auto& a : acc_) {
                const QuantityCost qc = condition_count(a, gps_, id);
                AreaPrescriptionRate r;
                r.area_id = id;
                r.condition = a.list().condition();
                r.quantity_total = qc.quantity;
                r.cost_total = qc.cost;
                r.patients = patients;
                r.quantity_per_capita = per_capita(qc.quantity, patients);
                r.cost_per_capita = per_capita(qc.cost, patients);
                out.push_back(std::move(r));
            }
        }
        return out;
    }

private:
    IngestReport report_;
    std::vector<GpPractice> gps_;
    std::set<std::string> known_;
    std::vector<ConditionAccumulator> acc_;
    std::set<int> months_;
};

struct Reduction {
    double quantity = 0.0;
    double cost = 0.0;
    std::vector<std::string> warnings;
};

// R = sum over control-group areas (treatment flag false) of the area total times the fractional ATE.
inline Reduction reduction_projection(std::span<const AreaPrescriptionRate> rates, const std::vector<bool>& treated,
                                      double ate) {
    if (rates.size() != treated.size()) throw DomainError("one treatment flag per area rate is required");
    Reduction r;
    std::size_t control = 0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (treated[i]) continue;
        ++control;
        r.quantity += rates[i].quantity_total * ate;
        r.cost += rates[i].cost_total * ate;
    }
    if (control == 0) {
        r.quantity = r.cost = 0.0;
        r.warnings.push_back("empty control group; reduction reported as 0");
    }
    return r;
}

} // namespace greenexp
