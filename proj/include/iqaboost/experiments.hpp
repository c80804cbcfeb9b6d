#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iqaboost/dataset.hpp"
#include "iqaboost/evaluation.hpp"
#include "iqaboost/metrics.hpp"

namespace iqaboost {

enum class Learner { kNN, kSvr };
std::string to_string(Learner learner);
Learner learner_from_string(const std::string& name);

enum class Criterion { kRmse, kPlcc, kSrcc };
inline constexpr std::array<Criterion, 3> kAllCriteria = {Criterion::kRmse, Criterion::kPlcc,
                                                          Criterion::kSrcc};
std::string to_string(Criterion criterion);
std::string display_name(Criterion criterion);
Criterion criterion_from_string(const std::string& name);
// RMSE improves downward, correlations upward.
bool lower_is_better(Criterion criterion);

struct ExperimentConfig {
    int k = 5;
    int runs = 100;
    std::uint64_t master_seed = 0;
    std::vector<Learner> learners = {Learner::kNN, Learner::kSvr};
    double alpha = 0.05;
    std::vector<std::string> databases;
    std::vector<std::string> registry;  // ordered metric ids; hidden width follows its size

    std::optional<int> hidden_dim_override;
    // One criterion value per run from the pooled test-fold predictions by
    // default; true switches to the mean of per-fold values instead.
    bool per_fold_criteria = false;
    std::optional<int> sig_test_n;  // n for significance lines; default ceil(n/k)
    double svr_c = 1.0;
    double svr_epsilon = 0.1;

    void validate() const;
    int hidden_dim() const;
    int significance_n(std::size_t database_size) const;
};

// Mean and population standard deviation over a non-empty run stream.
std::pair<double, double> aggregate_runs(const std::vector<double>& per_run_values);

struct CriterionStats {
    double mean = 0.0;
    double std = 0.0;
    long run_count = 0;
};

struct MethodReport {
    std::string label;  // "existing:PSNR", "nn:PSNR", "svr:boost", ...
    std::map<Criterion, CriterionStats> criteria;
    int excluded_runs = 0;
    bool valid = true;  // false once exclusions exceed 5% of runs
};

struct DatabaseReport {
    std::string database_id;
    std::size_t n_stimuli = 0;
    int sig_test_n = 0;
    std::vector<MethodReport> methods;

    const MethodReport* find(const std::string& label) const;
};

struct Provenance {
    std::string config_json;    // resolved config echo
    std::string settings_json;  // trainer/mapping defaults active for the run
    std::string settings_hash;  // hex hash64 of both payloads
};

struct EvaluationReport {
    Provenance provenance;
    std::vector<DatabaseReport> databases;

    const DatabaseReport* find(const std::string& database_id) const;
};

struct FusionPoint {
    int size = 0;  // number of fused methods
    std::map<Learner, std::map<Criterion, CriterionStats>> stats;
    std::map<Learner, int> excluded;
};

struct FusionCurve {
    std::string database_id;
    std::vector<std::string> ordering;  // worst-first
    std::vector<FusionPoint> points;    // points[s-1] holds fusion size s
    // Correlation criteria only; RMSE carries NaN (no Fisher-z line).
    std::map<Criterion, double> significance_line;
    double alpha = 0.05;
    int sig_n = 0;
};

// Part 1: existing methods mapped per fold, plus each learner regressed on
// each single estimator column. Existing rows pool both learners' notional
// run streams, so their run_count is runs x learners x registry slots.
EvaluationReport run_single_method_study(const Database& db, const ScoreTable& table,
                                         const ExperimentConfig& cfg);

// Existing-method rows only; enough input for rank_estimators when the
// regressed rows are not wanted.
EvaluationReport run_existing_method_study(const Database& db, const ScoreTable& table,
                                           const ExperimentConfig& cfg);

// The per-run criterion stream behind one report row, under the same seeds
// the aggregated studies use. Pass no learner for an existing-metric row
// (subset must then be a single metric id); entries are empty for runs that
// failed and were excluded.
std::vector<std::optional<CriterionResult>> evaluate_method_run_series(
    const Database& db, const ScoreTable& table, const ExperimentConfig& cfg,
    std::optional<Learner> learner, const std::vector<std::string>& subset);

// Worst-first ordering of the registry by the existing-method rows:
// descending RMSE, ascending correlations; ties keep registry order.
std::vector<std::string> rank_estimators(const EvaluationReport& report,
                                         const std::string& database_id, Criterion criterion,
                                         const std::vector<std::string>& registry);

// Part 2: prefixes of `ordering` fused with both learners; significance line
// is the threshold over the worst regressed (s = 1) baseline per criterion.
FusionCurve run_incremental_fusion_study(const Database& db, const ScoreTable& table,
                                         const ExperimentConfig& cfg,
                                         const std::vector<std::string>& ordering);

// Existing / regressed / boosted comparison: detail rows plus the summary
// rows existing:best, nn:best, svr:best, nn:boost, svr:boost per database.
EvaluationReport run_full_fusion_study(const std::vector<Database>& dbs,
                                       const std::vector<ScoreTable>& tables,
                                       const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// JSON round trips (loss-free; doubles in shortest round-trip decimal form)
// ---------------------------------------------------------------------------

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

std::string report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);

std::string fusion_curve_to_json(const FusionCurve& curve);
FusionCurve fusion_curve_from_json(const std::string& text);

// Worker cap honoring IQABOOST_THREADS (default: available parallelism).
int worker_count();

}  // namespace iqaboost
