#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iqaboost/dataset.hpp"
#include "iqaboost/errors.hpp"
#include "iqaboost/image.hpp"

namespace iqaboost {

// ---------------------------------------------------------------------------
// Native metrics
// ---------------------------------------------------------------------------

// 10*log10(L^2 / MSE); identical images return the cap so regression inputs
// stay finite.
inline constexpr double kPsnrCapDb = 100.0;

double compute_psnr(const GrayImage& ref, const GrayImage& dist);

struct SsimParams {
    int window_size = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 255.0;
};

// Mean of the stabilized luminance*contrast*structure map over sliding
// Gaussian windows (valid positions only).
double compute_ssim(const GrayImage& ref, const GrayImage& dist, const SsimParams& params = {});

// Contrast/structure term only, same windowing; used by the multi-scale
// extension where luminance enters at the coarsest scale alone.
double compute_ssim_cs(const GrayImage& ref, const GrayImage& dist, const SsimParams& params = {});

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// Five dyadic scales, 2x2 mean-filter-then-decimate between scales.
double compute_ms_ssim(const GrayImage& ref, const GrayImage& dist, const SsimParams& params = {});

// ---------------------------------------------------------------------------
// Estimator registry and score tables
// ---------------------------------------------------------------------------

enum class MetricSource { kNative, kExternal };
enum class MetricPolarity { kHigherIsBetter, kLowerIsBetter };

struct MetricDescriptor {
    std::string metric_id;
    MetricSource source = MetricSource::kExternal;
    // Informational only: the mapping and the regressors absorb polarity.
    MetricPolarity polarity = MetricPolarity::kHigherIsBetter;
};

// The eleven estimators of the default experiment registry, in table order.
std::vector<MetricDescriptor> default_registry();

class MetricRegistry {
public:
    MetricRegistry() = default;
    explicit MetricRegistry(std::vector<MetricDescriptor> metrics);

    void add(MetricDescriptor descriptor);  // throws DuplicateError on reuse
    bool contains(const std::string& metric_id) const;
    const MetricDescriptor& at(const std::string& metric_id) const;
    const std::vector<MetricDescriptor>& metrics() const { return metrics_; }
    std::vector<std::string> metric_ids() const;

private:
    std::vector<MetricDescriptor> metrics_;
};

// Sparse (stimulus, metric) -> score map; missing pairs stay absent.
class ScoreFragment {
public:
    void set(const std::string& stimulus_id, const std::string& metric_id, double score);
    bool contains(const std::string& stimulus_id, const std::string& metric_id) const;
    double at(const std::string& stimulus_id, const std::string& metric_id) const;
    std::size_t size() const { return entries_.size(); }

    // Later entries overwrite earlier ones, matching map concatenation.
    void merge(const ScoreFragment& other);

    const std::map<std::pair<std::string, std::string>, double>& entries() const { return entries_; }

private:
    std::map<std::pair<std::string, std::string>, double> entries_;
};

// Score file format: header then `stimulus_id,metric_id,score` rows. Native
// exports use the same format so both kinds are interchangeable downstream.
inline constexpr const char* kScoreFileHeader = "stimulus_id,metric_id,score";

ScoreFragment ingest_external_scores(const std::string& path, const MetricRegistry& registry);
ScoreFragment parse_scores(const std::string& text, const MetricRegistry& registry,
                           const std::string& origin = "<memory>");
void write_scores(const ScoreFragment& fragment, const std::string& path);
std::string scores_to_string(const ScoreFragment& fragment);

// Dense stimuli x metrics matrix with a presence mask; present entries are
// finite. Immutable once assembled.
class ScoreTable {
public:
    ScoreTable(std::vector<std::string> stimulus_ids, std::vector<std::string> metric_ids);

    static ScoreTable assemble(const Database& db, const MetricRegistry& registry,
                               const ScoreFragment& fragment);

    void set(const std::string& stimulus_id, const std::string& metric_id, double score);
    bool has(std::size_t row, std::size_t col) const { return present_(row, col); }
    double at(std::size_t row, std::size_t col) const { return scores_(row, col); }

    const std::vector<std::string>& stimulus_ids() const { return stimulus_ids_; }
    const std::vector<std::string>& metric_ids() const { return metric_ids_; }

    std::size_t stimulus_index(const std::string& stimulus_id) const;
    std::size_t metric_index(const std::string& metric_id) const;

private:
    std::vector<std::string> stimulus_ids_;
    std::vector<std::string> metric_ids_;
    std::map<std::string, std::size_t> stimulus_index_;
    std::map<std::string, std::size_t> metric_index_;
    Eigen::MatrixXd scores_;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> present_;
};

// X: one row per db record (db order), one column per selected metric (given
// order); y: aligned subjective scores. Throws CompletenessError naming the
// first missing (stimulus, metric) pair.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_feature_matrix(
    const Database& db, const ScoreTable& table, const std::vector<std::string>& selected);

}  // namespace iqaboost
