#include "iqaboost/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "iqaboost/regressors.hpp"
#include "iqaboost/rng.hpp"
#include "json.hpp"

namespace iqaboost {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct MethodSpec {
    std::string label;
    bool regressed = false;
    Learner learner = Learner::kNN;
    std::vector<std::string> subset;  // canonical registry order
    std::string subset_key;
};

struct StudyContext {
    const Database* db = nullptr;
    const ExperimentConfig* cfg = nullptr;
    Eigen::MatrixXd x;  // n x |registry|, registry column order
    Eigen::VectorXd y;
    std::vector<double> y_vec;
    std::map<std::string, Eigen::Index> column;
};

StudyContext make_context(const Database& db, const ScoreTable& table,
                          const ExperimentConfig& cfg) {
    StudyContext ctx;
    ctx.db = &db;
    ctx.cfg = &cfg;
    auto [x, y] = build_feature_matrix(db, table, cfg.registry);
    ctx.x = std::move(x);
    ctx.y = std::move(y);
    ctx.y_vec.assign(ctx.y.data(), ctx.y.data() + ctx.y.size());
    for (std::size_t j = 0; j < cfg.registry.size(); ++j) {
        ctx.column[cfg.registry[j]] = static_cast<Eigen::Index>(j);
    }
    return ctx;
}

// Subsets are always carried in registry order so that fusing the same set of
// estimators trains on the same matrix no matter how the set was discovered.
std::vector<std::string> canonical_subset(const std::vector<std::string>& registry,
                                          const std::vector<std::string>& ids) {
    std::vector<std::string> out;
    for (const auto& reg_id : registry) {
        if (std::find(ids.begin(), ids.end(), reg_id) != ids.end()) out.push_back(reg_id);
    }
    if (out.size() != ids.size()) {
        for (const auto& id : ids) {
            if (std::find(registry.begin(), registry.end(), id) == registry.end()) {
                throw RegistryError("metric_id '" + id + "' not in the configured registry");
            }
        }
        throw DuplicateError("selected metric subset contains duplicates");
    }
    return out;
}

std::string subset_key_of(const std::vector<std::string>& subset) {
    std::string key;
    for (const auto& id : subset) {
        key += id;
        key.push_back('\x1f');
    }
    return key;
}

MethodSpec existing_spec(const std::string& metric_id) {
    MethodSpec spec;
    spec.label = "existing:" + metric_id;
    spec.regressed = false;
    spec.subset = {metric_id};
    spec.subset_key = subset_key_of(spec.subset);
    return spec;
}

MethodSpec regressed_spec(const std::string& label, Learner learner,
                          std::vector<std::string> subset) {
    MethodSpec spec;
    spec.label = label;
    spec.regressed = true;
    spec.learner = learner;
    spec.subset = std::move(subset);
    spec.subset_key = subset_key_of(spec.subset);
    return spec;
}

// Violations here are engine bugs, not data problems, so they raise
// std::logic_error and are never absorbed into excluded-run counters.
void check_fold_hygiene(const FoldPlan& plan, const std::vector<std::size_t>& train,
                        const std::vector<std::size_t>& test, int fold) {
    if (train.size() + test.size() != plan.assignment.size()) {
        throw std::logic_error("fold hygiene violation: fold " + std::to_string(fold) +
                               " does not partition the stimulus set");
    }
    for (std::size_t idx : test) {
        if (plan.assignment[idx] != fold) {
            throw std::logic_error("fold hygiene violation: test stimulus outside fold " +
                                   std::to_string(fold));
        }
    }
    for (std::size_t idx : train) {
        if (plan.assignment[idx] == fold) {
            throw std::logic_error("fold hygiene violation: training stimulus inside test fold " +
                                   std::to_string(fold));
        }
    }
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows,
                            const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                x(static_cast<Eigen::Index>(rows[i]), cols[j]);
        }
    }
    return out;
}

CriterionResult criteria_of(const std::vector<double>& mapped, const std::vector<double>& raw,
                             const std::vector<double>& subjective) {
    CriterionResult out;
    out.rmse = rmse(mapped, subjective);
    out.plcc = plcc(mapped, subjective);
    // Ranking is computed on unmapped outputs; the mapping is monotone for
    // fitted curves, so this only pins down the documented convention.
    out.srcc = srcc(raw, subjective);
    out.n = static_cast<int>(subjective.size());
    return out;
}

CriterionResult evaluate_method_run(const StudyContext& ctx, const MethodSpec& spec,
                                const FoldPlan& plan, std::uint64_t run_seed) {
    const ExperimentConfig& cfg = *ctx.cfg;
    const std::size_t n = ctx.y_vec.size();

    std::vector<Eigen::Index> cols;
    cols.reserve(spec.subset.size());
    for (const auto& id : spec.subset) cols.push_back(ctx.column.at(id));

    std::vector<double> pooled_raw(n, 0.0);
    std::vector<double> pooled_mapped(n, 0.0);
    CriterionResult fold_sum;

    for (int fold = 0; fold < plan.k; ++fold) {
        const auto test = plan.test_indices(fold);
        const auto train = plan.train_indices(fold);
        check_fold_hygiene(plan, train, test, fold);

        std::vector<double> y_train(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) y_train[i] = ctx.y_vec[train[i]];

        std::vector<double> obj_train(train.size());
        std::vector<double> obj_test(test.size());

        if (!spec.regressed) {
            const Eigen::Index col = cols[0];
            for (std::size_t i = 0; i < train.size(); ++i) {
                obj_train[i] = ctx.x(static_cast<Eigen::Index>(train[i]), col);
            }
            for (std::size_t i = 0; i < test.size(); ++i) {
                obj_test[i] = ctx.x(static_cast<Eigen::Index>(test[i]), col);
            }
        } else {
            const Eigen::MatrixXd x_train = gather_rows(ctx.x, train, cols);
            const Eigen::VectorXd y_train_vec =
                Eigen::Map<const Eigen::VectorXd>(y_train.data(), static_cast<Eigen::Index>(train.size()));
            const std::uint64_t seed = hash64(
                hash64(hash64(run_seed, to_string(spec.learner)), spec.subset_key),
                static_cast<std::uint64_t>(fold));

            if (spec.learner == Learner::kNN) {
                const NNModel model = train_nn(x_train, y_train_vec, cfg.hidden_dim(), seed);
                for (std::size_t i = 0; i < train.size(); ++i) {
                    obj_train[i] = predict_nn(model, x_train.row(static_cast<Eigen::Index>(i)).transpose());
                }
                for (std::size_t i = 0; i < test.size(); ++i) {
                    Eigen::VectorXd row(cols.size());
                    for (std::size_t j = 0; j < cols.size(); ++j) {
                        row(static_cast<Eigen::Index>(j)) =
                            ctx.x(static_cast<Eigen::Index>(test[i]), cols[j]);
                    }
                    obj_test[i] = predict_nn(model, row);
                }
            } else {
                const SVRModel model = train_svr(x_train, y_train_vec, cfg.svr_c, cfg.svr_epsilon);
                for (std::size_t i = 0; i < train.size(); ++i) {
                    obj_train[i] = predict_svr(model, x_train.row(static_cast<Eigen::Index>(i)).transpose());
                }
                for (std::size_t i = 0; i < test.size(); ++i) {
                    Eigen::VectorXd row(cols.size());
                    for (std::size_t j = 0; j < cols.size(); ++j) {
                        row(static_cast<Eigen::Index>(j)) =
                            ctx.x(static_cast<Eigen::Index>(test[i]), cols[j]);
                    }
                    obj_test[i] = predict_svr(model, row);
                }
            }
        }

        // The mapping is always fitted on training folds only and applied to
        // the held-out outputs, uniformly for existing and regressed methods.
        const LogisticFit fit = fit_logistic_map(obj_train, y_train);
        const std::vector<double> mapped_test = apply_logistic_map(fit, obj_test);

        if (cfg.per_fold_criteria) {
            std::vector<double> y_test(test.size());
            for (std::size_t i = 0; i < test.size(); ++i) y_test[i] = ctx.y_vec[test[i]];
            const CriterionResult c = criteria_of(mapped_test, obj_test, y_test);
            fold_sum.rmse += c.rmse;
            fold_sum.plcc += c.plcc;
            fold_sum.srcc += c.srcc;
        }
        for (std::size_t i = 0; i < test.size(); ++i) {
            pooled_raw[test[i]] = obj_test[i];
            pooled_mapped[test[i]] = mapped_test[i];
        }
    }

    if (cfg.per_fold_criteria) {
        const double k = static_cast<double>(plan.k);
        return CriterionResult{fold_sum.rmse / k, fold_sum.plcc / k, fold_sum.srcc / k,
                               static_cast<int>(n)};
    }
    return criteria_of(pooled_mapped, pooled_raw, ctx.y_vec);
}

using RunResults = std::vector<std::vector<std::optional<CriterionResult>>>;  // [run][method]

void parallel_for(int total, const std::function<void(int)>& fn) {
    const int workers = std::min(total, worker_count());
    if (workers <= 1) {
        for (int i = 0; i < total; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= total) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

RunResults execute_runs(const StudyContext& ctx, const std::vector<MethodSpec>& specs) {
    const ExperimentConfig& cfg = *ctx.cfg;
    RunResults results(static_cast<std::size_t>(cfg.runs),
                       std::vector<std::optional<CriterionResult>>(specs.size()));
    const std::uint64_t db_seed = hash64(cfg.master_seed, ctx.db->database_id);
    parallel_for(cfg.runs, [&](int r) {
        const FoldPlan plan = make_fold_plan(ctx.y_vec.size(), cfg.k, r, db_seed);
        for (std::size_t m = 0; m < specs.size(); ++m) {
            try {
                results[static_cast<std::size_t>(r)][m] =
                    evaluate_method_run(ctx, specs[m], plan, plan.seed);
            } catch (const Error&) {
                // Failed run: excluded from this method's aggregate, counted.
                results[static_cast<std::size_t>(r)][m] = std::nullopt;
            }
        }
    });
    return results;
}

MethodReport aggregate_method(const MethodSpec& spec, const RunResults& results, std::size_t index,
                              const ExperimentConfig& cfg) {
    std::vector<double> rmse_vals;
    std::vector<double> plcc_vals;
    std::vector<double> srcc_vals;
    for (const auto& run : results) {
        if (run[index]) {
            rmse_vals.push_back(run[index]->rmse);
            plcc_vals.push_back(run[index]->plcc);
            srcc_vals.push_back(run[index]->srcc);
        }
    }
    MethodReport report;
    report.label = spec.label;
    report.excluded_runs = cfg.runs - static_cast<int>(rmse_vals.size());
    report.valid = report.excluded_runs <= cfg.runs / 20;

    // Existing rows are learner-independent, so each of the notional
    // learner x registry-slot run streams repeats the same per-run value and
    // the pooled mean equals the per-learner mean.
    const long multiplier =
        spec.regressed ? 1
                       : static_cast<long>(cfg.learners.size()) * static_cast<long>(cfg.registry.size());

    auto stats_of = [&](const std::vector<double>& vals) {
        CriterionStats s;
        if (vals.empty()) {
            s.mean = kNan;
            s.std = kNan;
            s.run_count = 0;
            return s;
        }
        const auto [mean, sd] = aggregate_runs(vals);
        s.mean = mean;
        s.std = sd;
        s.run_count = static_cast<long>(vals.size()) * multiplier;
        return s;
    };
    report.criteria[Criterion::kRmse] = stats_of(rmse_vals);
    report.criteria[Criterion::kPlcc] = stats_of(plcc_vals);
    report.criteria[Criterion::kSrcc] = stats_of(srcc_vals);
    if (report.criteria[Criterion::kRmse].run_count == 0) report.valid = false;
    return report;
}

nlohmann::ordered_json settings_json(const ExperimentConfig& cfg) {
    const LMOptions lm;
    const SvrOptions svr;
    nlohmann::ordered_json j;
    j["lm"] = {{"lambda0", lm.lambda0},   {"lambda_up", lm.lambda_up},
               {"lambda_down", lm.lambda_down}, {"max_iters", lm.max_iters},
               {"grad_tol", lm.grad_tol}, {"step_tol", lm.step_tol}};
    j["svr"] = {{"C", cfg.svr_c},
                {"epsilon", cfg.svr_epsilon},
                {"kkt_tolerance", svr.kkt_tolerance},
                {"max_updates", "10n passes (10*n*n pair updates)"}};
    j["nn"] = {{"hidden_width", cfg.hidden_dim()},
               {"activation", "tanh"},
               {"init", "uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), counter-based stream"}};
    j["mapping"] = {{"form", "b1*(1/2 - 1/(1+exp(b2*(v0-b3)))) + b4*v0 + b5"},
                    {"fitted_on", "training folds only"},
                    {"applied_to", "existing, regressed, and boosted outputs uniformly"}};
    j["criteria"] = {{"granularity", cfg.per_fold_criteria ? "per-fold mean" : "pooled per run"},
                     {"srcc_inputs", "unmapped outputs"},
                     {"standardization", "training-fold statistics only"}};
    return j;
}

Provenance make_provenance(const ExperimentConfig& cfg) {
    Provenance prov;
    prov.config_json = config_to_json(cfg);
    prov.settings_json = settings_json(cfg).dump();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(
                      hash64(hash64(0xA11CEULL, prov.config_json), prov.settings_json)));
    prov.settings_hash = buf;
    return prov;
}

DatabaseReport study_database(const Database& db, const ScoreTable& table,
                              const ExperimentConfig& cfg, const std::vector<MethodSpec>& specs) {
    const StudyContext ctx = make_context(db, table, cfg);
    const RunResults results = execute_runs(ctx, specs);

    DatabaseReport report;
    report.database_id = db.database_id;
    report.n_stimuli = db.records.size();
    report.sig_test_n = cfg.significance_n(db.records.size());
    for (std::size_t m = 0; m < specs.size(); ++m) {
        report.methods.push_back(aggregate_method(specs[m], results, m, cfg));
    }
    return report;
}

std::vector<MethodSpec> part1_specs(const ExperimentConfig& cfg) {
    std::vector<MethodSpec> specs;
    for (const auto& id : cfg.registry) specs.push_back(existing_spec(id));
    for (Learner learner : cfg.learners) {
        for (const auto& id : cfg.registry) {
            specs.push_back(regressed_spec(to_string(learner) + ":" + id, learner, {id}));
        }
    }
    return specs;
}

double best_mean(const DatabaseReport& db_report, const std::string& prefix,
                 const std::string& exclude, Criterion criterion, const MethodReport** source) {
    double best = lower_is_better(criterion) ? std::numeric_limits<double>::infinity()
                                             : -std::numeric_limits<double>::infinity();
    *source = nullptr;
    for (const auto& method : db_report.methods) {
        if (method.label.rfind(prefix, 0) != 0 || method.label == exclude) continue;
        const double v = method.criteria.at(criterion).mean;
        if (!std::isfinite(v)) continue;
        const bool better = lower_is_better(criterion) ? v < best : v > best;
        if (better) {
            best = v;
            *source = &method;
        }
    }
    return best;
}

}  // namespace

std::string to_string(Learner learner) { return learner == Learner::kNN ? "nn" : "svr"; }

Learner learner_from_string(const std::string& name) {
    if (name == "nn") return Learner::kNN;
    if (name == "svr") return Learner::kSvr;
    throw ParseError("unknown learner '" + name + "'");
}

std::string to_string(Criterion criterion) {
    switch (criterion) {
        case Criterion::kRmse: return "rmse";
        case Criterion::kPlcc: return "plcc";
        case Criterion::kSrcc: return "srcc";
    }
    return "unknown";
}

std::string display_name(Criterion criterion) {
    switch (criterion) {
        case Criterion::kRmse: return "Root Mean Square Error";
        case Criterion::kPlcc: return "Pearson Correlation Coefficient";
        case Criterion::kSrcc: return "Spearman Correlation Coefficient";
    }
    return "unknown";
}

Criterion criterion_from_string(const std::string& name) {
    if (name == "rmse") return Criterion::kRmse;
    if (name == "plcc") return Criterion::kPlcc;
    if (name == "srcc") return Criterion::kSrcc;
    throw ParseError("unknown criterion '" + name + "'");
}

bool lower_is_better(Criterion criterion) { return criterion == Criterion::kRmse; }

void ExperimentConfig::validate() const {
    if (runs < 1) throw DegenerateInputError("runs must be >= 1");
    if (k < 2) throw DegenerateInputError("k must be >= 2");
    if (registry.empty()) throw DegenerateInputError("registry must not be empty");
    if (learners.empty()) throw DegenerateInputError("at least one learner required");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DegenerateInputError("alpha must be in (0, 1)");
    std::vector<std::string> seen;
    for (const auto& id : registry) {
        if (std::find(seen.begin(), seen.end(), id) != seen.end()) {
            throw DuplicateError("registry repeats metric_id '" + id + "'");
        }
        seen.push_back(id);
    }
}

int ExperimentConfig::hidden_dim() const {
    // The hidden width tracks the registry size even when fewer estimators
    // are fused; the override exists for sensitivity runs.
    return hidden_dim_override.value_or(static_cast<int>(registry.size()));
}

int ExperimentConfig::significance_n(std::size_t database_size) const {
    if (sig_test_n) return *sig_test_n;
    return static_cast<int>((database_size + static_cast<std::size_t>(k) - 1) /
                            static_cast<std::size_t>(k));
}

std::pair<double, double> aggregate_runs(const std::vector<double>& per_run_values) {
    if (per_run_values.empty()) {
        throw DegenerateInputError("cannot aggregate an empty run stream");
    }
    const double n = static_cast<double>(per_run_values.size());
    const double mean = std::accumulate(per_run_values.begin(), per_run_values.end(), 0.0) / n;
    double acc = 0.0;
    for (double v : per_run_values) acc += (v - mean) * (v - mean);
    return {mean, std::sqrt(acc / n)};
}

const MethodReport* DatabaseReport::find(const std::string& label) const {
    for (const auto& m : methods) {
        if (m.label == label) return &m;
    }
    return nullptr;
}

const DatabaseReport* EvaluationReport::find(const std::string& database_id) const {
    for (const auto& d : databases) {
        if (d.database_id == database_id) return &d;
    }
    return nullptr;
}

EvaluationReport run_single_method_study(const Database& db, const ScoreTable& table,
                                         const ExperimentConfig& cfg) {
    cfg.validate();
    EvaluationReport report;
    report.provenance = make_provenance(cfg);
    report.databases.push_back(study_database(db, table, cfg, part1_specs(cfg)));
    return report;
}

EvaluationReport run_existing_method_study(const Database& db, const ScoreTable& table,
                                           const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<MethodSpec> specs;
    for (const auto& id : cfg.registry) specs.push_back(existing_spec(id));
    EvaluationReport report;
    report.provenance = make_provenance(cfg);
    report.databases.push_back(study_database(db, table, cfg, specs));
    return report;
}

std::vector<std::optional<CriterionResult>> evaluate_method_run_series(
    const Database& db, const ScoreTable& table, const ExperimentConfig& cfg,
    std::optional<Learner> learner, const std::vector<std::string>& subset) {
    cfg.validate();
    MethodSpec spec;
    if (learner) {
        spec = regressed_spec(to_string(*learner) + ":series", *learner,
                              canonical_subset(cfg.registry, subset));
    } else {
        if (subset.size() != 1) {
            throw DegenerateInputError("existing-method series takes exactly one metric id");
        }
        canonical_subset(cfg.registry, subset);
        spec = existing_spec(subset.front());
    }
    const StudyContext ctx = make_context(db, table, cfg);
    const RunResults results = execute_runs(ctx, {spec});
    std::vector<std::optional<CriterionResult>> series;
    series.reserve(results.size());
    for (const auto& run : results) series.push_back(run.front());
    return series;
}

std::vector<std::string> rank_estimators(const EvaluationReport& report,
                                         const std::string& database_id, Criterion criterion,
                                         const std::vector<std::string>& registry) {
    const DatabaseReport* db_report = report.find(database_id);
    if (!db_report) throw CompletenessError("no report entries for database '" + database_id + "'");

    std::vector<double> values;
    for (const auto& id : registry) {
        const MethodReport* method = db_report->find("existing:" + id);
        if (!method) {
            throw CompletenessError("report lacks existing-method row for '" + id + "'");
        }
        const double mean = method->criteria.at(criterion).mean;
        if (!std::isfinite(mean)) {
            throw CompletenessError("existing-method row for '" + id +
                                    "' has no successful runs to rank by");
        }
        values.push_back(mean);
    }
    std::vector<std::size_t> order(registry.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Worst first: largest RMSE, smallest correlation. Stable sort keeps
    // registry order on ties.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return lower_is_better(criterion) ? values[a] > values[b] : values[a] < values[b];
    });
    std::vector<std::string> out;
    for (std::size_t idx : order) out.push_back(registry[idx]);
    return out;
}

FusionCurve run_incremental_fusion_study(const Database& db, const ScoreTable& table,
                                         const ExperimentConfig& cfg,
                                         const std::vector<std::string>& ordering) {
    cfg.validate();
    if (ordering.empty()) throw DegenerateInputError("fusion ordering must not be empty");
    canonical_subset(cfg.registry, ordering);  // membership + duplicate check

    std::vector<MethodSpec> specs;
    for (std::size_t s = 1; s <= ordering.size(); ++s) {
        const std::vector<std::string> prefix(ordering.begin(),
                                              ordering.begin() + static_cast<long>(s));
        for (Learner learner : cfg.learners) {
            specs.push_back(regressed_spec(to_string(learner) + ":fuse" + std::to_string(s), learner,
                                           canonical_subset(cfg.registry, prefix)));
        }
    }
    const DatabaseReport db_report = study_database(db, table, cfg, specs);

    FusionCurve curve;
    curve.database_id = db.database_id;
    curve.ordering = ordering;
    curve.alpha = cfg.alpha;
    curve.sig_n = db_report.sig_test_n;
    std::size_t spec_idx = 0;
    for (std::size_t s = 1; s <= ordering.size(); ++s) {
        FusionPoint point;
        point.size = static_cast<int>(s);
        for (Learner learner : cfg.learners) {
            const MethodReport& method = db_report.methods[spec_idx++];
            point.stats[learner] = method.criteria;
            point.excluded[learner] = method.excluded_runs;
        }
        curve.points.push_back(std::move(point));
    }

    // The line marks where a correlation first significantly exceeds the
    // worst regressed baseline (the lower of the two s = 1 bars).
    for (Criterion criterion : kAllCriteria) {
        if (lower_is_better(criterion)) {
            curve.significance_line[criterion] = kNan;
            continue;
        }
        double r_base = std::numeric_limits<double>::infinity();
        for (Learner learner : cfg.learners) {
            r_base = std::min(r_base, curve.points[0].stats.at(learner).at(criterion).mean);
        }
        if (!std::isfinite(r_base)) {
            curve.significance_line[criterion] = kNan;
            continue;
        }
        r_base = std::clamp(r_base, -1.0 + 1e-9, 1.0 - 1e-9);
        curve.significance_line[criterion] = significance_threshold(r_base, curve.sig_n, cfg.alpha);
    }
    return curve;
}

EvaluationReport run_full_fusion_study(const std::vector<Database>& dbs,
                                       const std::vector<ScoreTable>& tables,
                                       const ExperimentConfig& cfg) {
    cfg.validate();
    if (dbs.size() != tables.size()) throw ShapeError("databases and score tables count mismatch");

    EvaluationReport report;
    report.provenance = make_provenance(cfg);
    for (std::size_t d = 0; d < dbs.size(); ++d) {
        std::vector<MethodSpec> specs = part1_specs(cfg);
        for (Learner learner : cfg.learners) {
            specs.push_back(
                regressed_spec(to_string(learner) + ":boost", learner, cfg.registry));
        }
        DatabaseReport db_report = study_database(dbs[d], tables[d], cfg, specs);

        // Five-column summary: best existing, best regressed per learner,
        // then the boosted rows already present.
        auto add_best_row = [&](const std::string& label, const std::string& prefix,
                                const std::string& exclude) {
            MethodReport row;
            row.label = label;
            row.excluded_runs = 0;
            row.valid = true;
            for (Criterion criterion : kAllCriteria) {
                const MethodReport* source = nullptr;
                best_mean(db_report, prefix, exclude, criterion, &source);
                if (source) {
                    row.criteria[criterion] = source->criteria.at(criterion);
                    row.valid = row.valid && source->valid;
                } else {
                    row.criteria[criterion] = CriterionStats{kNan, kNan, 0};
                    row.valid = false;
                }
            }
            db_report.methods.push_back(std::move(row));
        };
        add_best_row("existing:best", "existing:", "");
        for (Learner learner : cfg.learners) {
            const std::string prefix = to_string(learner) + ":";
            add_best_row(prefix + "best", prefix, prefix + "boost");
        }
        report.databases.push_back(std::move(db_report));
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON round trips
// ---------------------------------------------------------------------------

std::string config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["k"] = cfg.k;
    j["runs"] = cfg.runs;
    j["master_seed"] = cfg.master_seed;
    nlohmann::ordered_json learners = nlohmann::ordered_json::array();
    for (Learner l : cfg.learners) learners.push_back(to_string(l));
    j["learners"] = learners;
    j["alpha"] = cfg.alpha;
    j["databases"] = cfg.databases;
    j["registry"] = cfg.registry;
    if (cfg.hidden_dim_override) j["hidden_dim"] = *cfg.hidden_dim_override;
    j["per_fold_criteria"] = cfg.per_fold_criteria;
    if (cfg.sig_test_n) j["sig_test_n"] = *cfg.sig_test_n;
    j["svr_c"] = cfg.svr_c;
    j["svr_epsilon"] = cfg.svr_epsilon;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.k = j.value("k", cfg.k);
    cfg.runs = j.value("runs", cfg.runs);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    if (j.contains("learners")) {
        cfg.learners.clear();
        for (const auto& name : j["learners"]) {
            cfg.learners.push_back(learner_from_string(name.get<std::string>()));
        }
    }
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("databases")) cfg.databases = j["databases"].get<std::vector<std::string>>();
    if (j.contains("registry")) {
        cfg.registry = j["registry"].get<std::vector<std::string>>();
    } else {
        for (const auto& m : default_registry()) cfg.registry.push_back(m.metric_id);
    }
    if (j.contains("hidden_dim") && !j["hidden_dim"].is_null()) {
        cfg.hidden_dim_override = j["hidden_dim"].get<int>();
    }
    cfg.per_fold_criteria = j.value("per_fold_criteria", cfg.per_fold_criteria);
    if (j.contains("sig_test_n") && !j["sig_test_n"].is_null()) {
        cfg.sig_test_n = j["sig_test_n"].get<int>();
    }
    cfg.svr_c = j.value("svr_c", cfg.svr_c);
    cfg.svr_epsilon = j.value("svr_epsilon", cfg.svr_epsilon);
    cfg.validate();
    return cfg;
}

namespace {

nlohmann::ordered_json stats_to_json(const std::map<Criterion, CriterionStats>& criteria) {
    nlohmann::ordered_json j;
    for (Criterion c : kAllCriteria) {
        const auto& s = criteria.at(c);
        j[to_string(c)] = {{"mean", s.mean}, {"std", s.std}, {"run_count", s.run_count}};
    }
    return j;
}

std::map<Criterion, CriterionStats> stats_from_json(const nlohmann::ordered_json& j) {
    std::map<Criterion, CriterionStats> out;
    for (Criterion c : kAllCriteria) {
        const auto& s = j.at(to_string(c));
        CriterionStats stats;
        stats.mean = s.at("mean").is_null() ? kNan : s.at("mean").get<double>();
        stats.std = s.at("std").is_null() ? kNan : s.at("std").get<double>();
        stats.run_count = s.at("run_count").get<long>();
        out[c] = stats;
    }
    return out;
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
    nlohmann::ordered_json j;
    j["format"] = "iqaboost-report";
    j["version"] = 1;
    j["provenance"] = {{"config", nlohmann::ordered_json::parse(report.provenance.config_json)},
                       {"settings", nlohmann::ordered_json::parse(report.provenance.settings_json)},
                       {"settings_hash", report.provenance.settings_hash}};
    nlohmann::ordered_json dbs = nlohmann::ordered_json::array();
    for (const auto& db : report.databases) {
        nlohmann::ordered_json methods = nlohmann::ordered_json::array();
        for (const auto& m : db.methods) {
            methods.push_back({{"label", m.label},
                               {"criteria", stats_to_json(m.criteria)},
                               {"excluded_runs", m.excluded_runs},
                               {"valid", m.valid}});
        }
        dbs.push_back({{"database_id", db.database_id},
                       {"n_stimuli", db.n_stimuli},
                       {"sig_test_n", db.sig_test_n},
                       {"methods", methods}});
    }
    j["databases"] = dbs;
    return j.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report JSON: ") + e.what());
    }
    if (j.value("format", "") != "iqaboost-report" || j.value("version", 0) != 1) {
        throw ParseError("not a version-1 iqaboost-report document");
    }
    EvaluationReport report;
    report.provenance.config_json = j.at("provenance").at("config").dump(2) + "\n";
    report.provenance.settings_json = j.at("provenance").at("settings").dump();
    report.provenance.settings_hash = j.at("provenance").at("settings_hash").get<std::string>();
    for (const auto& db_json : j.at("databases")) {
        DatabaseReport db;
        db.database_id = db_json.at("database_id").get<std::string>();
        db.n_stimuli = db_json.at("n_stimuli").get<std::size_t>();
        db.sig_test_n = db_json.at("sig_test_n").get<int>();
        for (const auto& m_json : db_json.at("methods")) {
            MethodReport m;
            m.label = m_json.at("label").get<std::string>();
            m.criteria = stats_from_json(m_json.at("criteria"));
            m.excluded_runs = m_json.at("excluded_runs").get<int>();
            m.valid = m_json.at("valid").get<bool>();
            db.methods.push_back(std::move(m));
        }
        report.databases.push_back(std::move(db));
    }
    return report;
}

std::string fusion_curve_to_json(const FusionCurve& curve) {
    nlohmann::ordered_json j;
    j["format"] = "iqaboost-fusion-curve";
    j["version"] = 1;
    j["database_id"] = curve.database_id;
    j["ordering"] = curve.ordering;
    j["alpha"] = curve.alpha;
    j["sig_n"] = curve.sig_n;
    nlohmann::ordered_json lines;
    for (Criterion c : kAllCriteria) {
        const double v = curve.significance_line.at(c);
        if (std::isfinite(v)) lines[to_string(c)] = v;
    }
    j["significance_line"] = lines;
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto& point : curve.points) {
        nlohmann::ordered_json learners;
        for (const auto& [learner, criteria] : point.stats) {
            learners[to_string(learner)] = {{"criteria", stats_to_json(criteria)},
                                            {"excluded_runs", point.excluded.at(learner)}};
        }
        points.push_back({{"size", point.size}, {"learners", learners}});
    }
    j["points"] = points;
    return j.dump(2) + "\n";
}

FusionCurve fusion_curve_from_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("fusion curve JSON: ") + e.what());
    }
    if (j.value("format", "") != "iqaboost-fusion-curve" || j.value("version", 0) != 1) {
        throw ParseError("not a version-1 iqaboost-fusion-curve document");
    }
    FusionCurve curve;
    curve.database_id = j.at("database_id").get<std::string>();
    curve.ordering = j.at("ordering").get<std::vector<std::string>>();
    curve.alpha = j.at("alpha").get<double>();
    curve.sig_n = j.at("sig_n").get<int>();
    for (Criterion c : kAllCriteria) {
        const auto& lines = j.at("significance_line");
        curve.significance_line[c] =
            lines.contains(to_string(c)) ? lines.at(to_string(c)).get<double>() : kNan;
    }
    for (const auto& point_json : j.at("points")) {
        FusionPoint point;
        point.size = point_json.at("size").get<int>();
        for (const auto& [name, body] : point_json.at("learners").items()) {
            const Learner learner = learner_from_string(name);
            point.stats[learner] = stats_from_json(body.at("criteria"));
            point.excluded[learner] = body.at("excluded_runs").get<int>();
        }
        curve.points.push_back(std::move(point));
    }
    return curve;
}

int worker_count() {
    if (const char* env = std::getenv("IQABOOST_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace iqaboost
