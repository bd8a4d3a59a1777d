#include "panelwatch/reports.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <tuple>

#include <fmt/format.h>

#include "csv.hpp"
#include "panelwatch/error.hpp"

namespace panelwatch {

namespace {

constexpr std::string_view kReportsHeader =
    "date,panel_id,flagged,daily_loss_ratio,persistence,model_inputs,class_label,confidence,system_wide,"
    "low_confidence,warning";
constexpr std::string_view kLossesHeader = "date,panel_id,slot,observed,predicted,residual,seasonal,anomaly_loss";

std::string cell(double v) { return is_missing(v) ? std::string() : fmt::format("{}", v); }

// warnings are free text; keep them to one cell
std::string clean(std::string_view text) {
    std::string out(text);
    std::replace(out.begin(), out.end(), ',', ';');
    std::replace(out.begin(), out.end(), '\n', ' ');
    return out;
}

bool parse_bool(std::string_view v, std::size_t line_no) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw Error(ErrorCode::MalformedRow, fmt::format("line {}: '{}' is not true/false", line_no, v));
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ";") + s;
    return out;
}

}  // namespace

void write_reports_csv(std::ostream& out, std::span<const FaultReport> reports) {
    std::vector<const FaultReport*> order;
    for (const auto& r : reports) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const FaultReport* a, const FaultReport* b) {
        return std::tie(a->date, a->panel_id) < std::tie(b->date, b->panel_id);
    });
    out << kReportsHeader << '\n';
    for (const FaultReport* r : order) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", format_date(r->date), r->panel_id, r->flagged,
                           cell(r->daily_loss_ratio), cell(r->persistence), join(r->model_inputs),
                           r->class_label ? to_string(*r->class_label) : "", cell(r->confidence), r->system_wide,
                           r->low_confidence, clean(r->warning));
    }
}

void write_reports_csv(const std::filesystem::path& path, std::span<const FaultReport> reports) {
    auto out = csv::open_out(path);
    write_reports_csv(out, reports);
}

std::vector<FaultReport> parse_reports_csv(const std::filesystem::path& path) {
    auto in = csv::open_in(path);
    std::string line;
    std::getline(in, line);
    if (csv::trim(line) != kReportsHeader) throw Error(ErrorCode::MalformedHeader, fmt::format("expected '{}'", kReportsHeader));
    std::vector<FaultReport> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto c = csv::split(line);
        if (c.size() != 11) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 11 cells", line_no));
        FaultReport r;
        r.date = parse_date(c[0]);
        r.panel_id = std::string(c[1]);
        r.flagged = parse_bool(c[2], line_no);
        r.daily_loss_ratio = csv::parse_number(c[3], line_no).value_or(kMissing);
        r.persistence = csv::parse_number(c[4], line_no).value_or(kMissing);
        if (!c[5].empty()) {
            for (auto id : csv::split(c[5], ';')) r.model_inputs.emplace_back(id);
        }
        if (!c[6].empty()) r.class_label = parse_fault_label(c[6]);
        r.confidence = csv::require_number(c[7], line_no);
        r.system_wide = parse_bool(c[8], line_no);
        r.low_confidence = parse_bool(c[9], line_no);
        r.warning = std::string(c[10]);
        out.push_back(std::move(r));
    }
    return out;
}

void write_losses_csv(std::ostream& out, std::span<const LossEstimate> losses) {
    std::vector<const LossEstimate*> order;
    for (const auto& l : losses) order.push_back(&l);
    std::stable_sort(order.begin(), order.end(), [](const LossEstimate* a, const LossEstimate* b) {
        return std::tie(a->date, a->panel_id) < std::tie(b->date, b->panel_id);
    });
    out << kLossesHeader << '\n';
    for (const LossEstimate* l : order) {
        const auto date = format_date(l->date);
        for (std::size_t i = 0; i < l->slots.size(); ++i) {
            out << fmt::format("{},{},{},{},{},{},{},{}\n", date, l->panel_id, l->slots[i], cell(l->observed[i]),
                               cell(l->predicted[i]), cell(l->residual[i]), cell(l->seasonal[i]),
                               cell(l->anomaly_loss[i]));
        }
    }
}

void write_losses_csv(const std::filesystem::path& path, std::span<const LossEstimate> losses) {
    auto out = csv::open_out(path);
    write_losses_csv(out, losses);
}

std::vector<LossEstimate> parse_losses_csv(const std::filesystem::path& path) {
    auto in = csv::open_in(path);
    std::string line;
    std::getline(in, line);
    if (csv::trim(line) != kLossesHeader) throw Error(ErrorCode::MalformedHeader, fmt::format("expected '{}'", kLossesHeader));
    std::map<std::pair<Date, std::string>, LossEstimate> by_key;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        const auto c = csv::split(line);
        if (c.size() != 8) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 8 cells", line_no));
        const Date date = parse_date(c[0]);
        auto& l = by_key[{date, std::string(c[1])}];
        l.date = date;
        l.panel_id = std::string(c[1]);
        const double slot = csv::require_number(c[2], line_no);
        if (slot < 0 || slot >= static_cast<double>(kSlotsPerDay) || slot != std::floor(slot)) {
            throw Error(ErrorCode::MalformedRow, fmt::format("line {}: bad slot", line_no));
        }
        l.slots.push_back(static_cast<std::size_t>(slot));
        l.observed.push_back(csv::parse_number(c[3], line_no).value_or(kMissing));
        l.predicted.push_back(csv::parse_number(c[4], line_no).value_or(kMissing));
        l.residual.push_back(csv::parse_number(c[5], line_no).value_or(kMissing));
        l.seasonal.push_back(csv::parse_number(c[6], line_no).value_or(kMissing));
        l.anomaly_loss.push_back(csv::parse_number(c[7], line_no).value_or(kMissing));
    }
    std::vector<LossEstimate> out;
    for (auto& [key, l] : by_key) out.push_back(std::move(l));
    return out;
}

std::string render_report(std::span<const FaultReport> reports) {
    std::map<Date, std::vector<const FaultReport*>> by_date;
    for (const auto& r : reports) by_date[r.date].push_back(&r);
    std::string out = "Fault roster\n";
    std::size_t flagged_total = 0;
    for (auto& [date, rows] : by_date) {
        std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->panel_id < b->panel_id; });
        const auto flagged = static_cast<std::size_t>(
            std::count_if(rows.begin(), rows.end(), [](auto* r) { return r->flagged; }));
        flagged_total += flagged;
        const bool system_wide = std::any_of(rows.begin(), rows.end(), [](auto* r) { return r->system_wide; });
        if (system_wide) {
            const auto* first = rows.front();
            out += fmt::format("{}  system-wide fault on all {} panels: {}\n", format_date(date), rows.size(),
                               first->class_label ? to_string(*first->class_label) : "unclassified");
            continue;
        }
        if (flagged == 0) {
            out += fmt::format("{}  no faults ({} panels)\n", format_date(date), rows.size());
            continue;
        }
        out += fmt::format("{}  {} of {} panels flagged\n", format_date(date), flagged, rows.size());
        for (const auto* r : rows) {
            if (!r->flagged) continue;
            out += fmt::format("  {:<8} {:<12} confidence {:.2f}  loss {:5.1f}%  persistence {:5.1f}%{}\n", r->panel_id,
                               r->class_label ? to_string(*r->class_label) : "unclassified", r->confidence,
                               100.0 * r->daily_loss_ratio, 100.0 * r->persistence,
                               r->low_confidence ? "  (low confidence)" : "");
        }
    }
    out += fmt::format("{} flagged panel-days over {} dates\n", flagged_total, by_date.size());
    return out;
}

}  // namespace panelwatch
