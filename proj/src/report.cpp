#include "iqaboost/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace iqaboost {

namespace {

std::string shortest_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_cell(double v, Criterion criterion) {
    if (!std::isfinite(v)) return "-";
    char buf[64];
    if (criterion == Criterion::kRmse) {
        // Three significant digits with trailing zeros kept.
        const double mag = std::abs(v);
        int decimals = 2;
        if (mag >= 1e-12) {
            decimals = std::max(0, 2 - static_cast<int>(std::floor(std::log10(mag))));
        }
        std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    } else {
        std::snprintf(buf, sizeof(buf), "%.3f", v);
    }
    return buf;
}

std::vector<bool> best_flags(const std::vector<double>& row, Criterion criterion) {
    std::vector<bool> flags(row.size(), false);
    double best = lower_is_better(criterion) ? std::numeric_limits<double>::infinity()
                                             : -std::numeric_limits<double>::infinity();
    std::size_t best_idx = row.size();
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (!std::isfinite(row[i])) continue;
        const bool better = lower_is_better(criterion) ? row[i] < best : row[i] > best;
        if (better) {
            best = row[i];
            best_idx = i;
        }
    }
    if (best_idx < row.size()) flags[best_idx] = true;
    return flags;
}

double parse_double_field(const std::string& token, const std::string& context) {
    if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw ParseError(context + ": malformed number '" + token + "'");
    }
    return v;
}

}  // namespace

TableDoc make_performance_table(const EvaluationReport& report, Criterion criterion,
                                const std::vector<std::string>& columns, const std::string& title) {
    if (report.databases.empty()) throw DegenerateInputError("report has no databases");

    TableDoc table;
    table.criterion = criterion;
    table.title = title.empty() ? display_name(criterion) : title;
    if (columns.empty()) {
        for (const auto& m : report.databases.front().methods) table.col_labels.push_back(m.label);
    } else {
        table.col_labels = columns;
    }
    if (table.col_labels.empty()) throw DegenerateInputError("no method columns to tabulate");

    for (const auto& db : report.databases) {
        table.row_labels.push_back(db.database_id);
        std::vector<double> row;
        for (const auto& label : table.col_labels) {
            const MethodReport* method = db.find(label);
            if (!method) {
                throw CompletenessError("report lacks method '" + label + "' for database '" +
                                        db.database_id + "'");
            }
            row.push_back(method->criteria.at(criterion).mean);
        }
        table.best.push_back(best_flags(row, criterion));
        table.values.push_back(std::move(row));
    }
    return table;
}

std::string table_to_text(const TableDoc& table) {
    // Render cells first so column widths account for the `*` markers.
    std::vector<std::vector<std::string>> cells(table.values.size());
    for (std::size_t r = 0; r < table.values.size(); ++r) {
        for (std::size_t c = 0; c < table.values[r].size(); ++c) {
            std::string text = format_cell(table.values[r][c], table.criterion);
            if (table.best[r][c]) text = "*" + text + "*";
            cells[r].push_back(std::move(text));
        }
    }
    std::vector<std::size_t> widths;
    widths.push_back(std::string("database").size());
    for (const auto& label : table.row_labels) widths[0] = std::max(widths[0], label.size());
    for (std::size_t c = 0; c < table.col_labels.size(); ++c) {
        std::size_t w = table.col_labels[c].size();
        for (std::size_t r = 0; r < cells.size(); ++r) w = std::max(w, cells[r][c].size());
        widths.push_back(w);
    }

    std::ostringstream out;
    out << table.title << "\n";
    auto pad = [&](const std::string& s, std::size_t w) {
        out << s;
        for (std::size_t i = s.size(); i < w; ++i) out << ' ';
    };
    pad("database", widths[0]);
    for (std::size_t c = 0; c < table.col_labels.size(); ++c) {
        out << "  ";
        pad(table.col_labels[c], widths[c + 1]);
    }
    out << "\n";
    for (std::size_t r = 0; r < cells.size(); ++r) {
        pad(table.row_labels[r], widths[0]);
        for (std::size_t c = 0; c < cells[r].size(); ++c) {
            out << "  ";
            pad(cells[r][c], widths[c + 1]);
        }
        out << "\n";
    }
    return out.str();
}

std::string table_to_json(const TableDoc& table) {
    nlohmann::ordered_json j;
    j["format"] = "iqaboost-table";
    j["version"] = 1;
    j["title"] = table.title;
    j["criterion"] = to_string(table.criterion);
    j["row_labels"] = table.row_labels;
    j["col_labels"] = table.col_labels;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < table.values.size(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < table.values[r].size(); ++c) {
            row.push_back({{"value", table.values[r][c]}, {"best", static_cast<bool>(table.best[r][c])}});
        }
        rows.push_back(std::move(row));
    }
    j["cells"] = rows;
    return j.dump(2) + "\n";
}

TableDoc table_from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("table JSON: ") + e.what());
    }
    if (j.value("format", "") != "iqaboost-table" || j.value("version", 0) != 1) {
        throw ParseError("not a version-1 iqaboost-table document");
    }
    TableDoc table;
    table.title = j.at("title").get<std::string>();
    table.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    table.row_labels = j.at("row_labels").get<std::vector<std::string>>();
    table.col_labels = j.at("col_labels").get<std::vector<std::string>>();
    for (const auto& row_json : j.at("cells")) {
        std::vector<double> values;
        std::vector<bool> best;
        for (const auto& cell : row_json) {
            values.push_back(cell.at("value").get<double>());
            best.push_back(cell.at("best").get<bool>());
        }
        table.values.push_back(std::move(values));
        table.best.push_back(std::move(best));
    }
    return table;
}

std::string fusion_curve_to_csv(const FusionCurve& curve) {
    std::string out = "size,learner,criterion,mean,std,sigline\n";
    for (const auto& point : curve.points) {
        for (const auto& [learner, criteria] : point.stats) {
            for (Criterion criterion : kAllCriteria) {
                const auto& stats = criteria.at(criterion);
                const double line = curve.significance_line.at(criterion);
                out += std::to_string(point.size);
                out.push_back(',');
                out += to_string(learner);
                out.push_back(',');
                out += to_string(criterion);
                out.push_back(',');
                out += std::isfinite(stats.mean) ? shortest_double(stats.mean) : "nan";
                out.push_back(',');
                out += std::isfinite(stats.std) ? shortest_double(stats.std) : "nan";
                out.push_back(',');
                out += std::isfinite(line) ? shortest_double(line) : "nan";
                out.push_back('\n');
            }
        }
    }
    return out;
}

std::vector<FusionCsvRow> parse_fusion_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "size,learner,criterion,mean,std,sigline") {
        throw ParseError("fusion CSV: bad header line");
    }
    std::vector<FusionCsvRow> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        fields.push_back(cur);
        if (fields.size() != 6) {
            throw ParseError("fusion CSV: row " + std::to_string(row_no) + ": expected 6 columns");
        }
        FusionCsvRow row;
        const std::string ctx = "fusion CSV row " + std::to_string(row_no);
        try {
            row.size = std::stoi(fields[0]);
        } catch (const std::exception&) {
            throw ParseError(ctx + ": malformed size '" + fields[0] + "'");
        }
        row.learner = learner_from_string(fields[1]);
        row.criterion = criterion_from_string(fields[2]);
        row.mean = parse_double_field(fields[3], ctx);
        row.std = parse_double_field(fields[4], ctx);
        row.sigline = parse_double_field(fields[5], ctx);
        rows.push_back(row);
        ++row_no;
    }
    return rows;
}

std::string bundle_to_text(const ReportBundle& bundle) {
    std::ostringstream out;
    out << "# settings_hash: " << bundle.provenance.settings_hash << "\n";
    out << "# settings: " << bundle.provenance.settings_json << "\n\n";
    for (const auto& table : bundle.tables) {
        out << table_to_text(table) << "\n";
    }
    for (const auto& curve : bundle.curves) {
        out << "fusion curve: " << curve.database_id << " (alpha " << curve.alpha << ", n "
            << curve.sig_n << ")\n";
        out << fusion_curve_to_csv(curve) << "\n";
    }
    return out.str();
}

}  // namespace iqaboost
