#pragma once

#include <string>
#include <vector>

#include "iqaboost/experiments.hpp"

namespace iqaboost {

// One criterion table: rows are databases, columns are method labels; the
// best cell per row is recomputed from values at emission time.
struct TableDoc {
    std::string title;
    Criterion criterion = Criterion::kRmse;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<double>> values;  // full precision
    std::vector<std::vector<bool>> best;

    bool operator==(const TableDoc&) const = default;
};

// Columns default to every method label of the first database, in report
// order; pass an explicit list to mirror a particular table layout.
TableDoc make_performance_table(const EvaluationReport& report, Criterion criterion,
                                const std::vector<std::string>& columns = {},
                                const std::string& title = "");

// Aligned text; best cells wrapped in asterisks. RMSE renders with three
// significant digits, correlations with three decimals.
std::string table_to_text(const TableDoc& table);

std::string table_to_json(const TableDoc& table);
TableDoc table_from_json(const std::string& text);

// Plot payload, one row per (size, learner, criterion):
//   size,learner,criterion,mean,std,sigline
// sigline repeats the criterion's significance line (nan for RMSE).
std::string fusion_curve_to_csv(const FusionCurve& curve);

struct FusionCsvRow {
    int size = 0;
    Learner learner = Learner::kNN;
    Criterion criterion = Criterion::kRmse;
    double mean = 0.0;
    double std = 0.0;
    double sigline = 0.0;
};

std::vector<FusionCsvRow> parse_fusion_csv(const std::string& text);

// Everything a rendering consumer needs for one study.
struct ReportBundle {
    Provenance provenance;
    std::vector<TableDoc> tables;
    std::vector<FusionCurve> curves;
};

std::string bundle_to_text(const ReportBundle& bundle);

}  // namespace iqaboost
