#include "iqaboost/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace iqaboost {

namespace {

void require_same_shape(const GrayImage& ref, const GrayImage& dist) {
    if (ref.width() != dist.width() || ref.height() != dist.height()) {
        throw ShapeError("image dimensions differ: " + std::to_string(ref.width()) + "x" +
                         std::to_string(ref.height()) + " vs " + std::to_string(dist.width()) + "x" +
                         std::to_string(dist.height()));
    }
    if (ref.dynamic_range() != dist.dynamic_range()) {
        throw ShapeError("image dynamic ranges differ");
    }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double center = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - center;
        k[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable 'valid' correlation with a symmetric 1-D kernel. Input is
// height x width row-major; output is (height-size+1) x (width-size+1).
std::vector<double> filter_valid(const std::vector<double>& img, int height, int width,
                                 const std::vector<double>& kernel) {
    const int size = static_cast<int>(kernel.size());
    const int out_w = width - size + 1;
    const int out_h = height - size + 1;
    std::vector<double> horiz(static_cast<std::size_t>(height) * out_w);
    for (int r = 0; r < height; ++r) {
        const double* row = img.data() + static_cast<std::size_t>(r) * width;
        double* out_row = horiz.data() + static_cast<std::size_t>(r) * out_w;
        for (int c = 0; c < out_w; ++c) {
            double acc = 0.0;
            for (int t = 0; t < size; ++t) acc += kernel[static_cast<std::size_t>(t)] * row[c + t];
            out_row[c] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
    for (int r = 0; r < out_h; ++r) {
        double* out_row = out.data() + static_cast<std::size_t>(r) * out_w;
        for (int c = 0; c < out_w; ++c) {
            double acc = 0.0;
            for (int t = 0; t < size; ++t) {
                acc += kernel[static_cast<std::size_t>(t)] * horiz[static_cast<std::size_t>(r + t) * out_w + c];
            }
            out_row[c] = acc;
        }
    }
    return out;
}

struct SsimMeans {
    double full = 0.0;  // luminance * contrast-structure
    double cs = 0.0;    // contrast-structure only
};

SsimMeans ssim_map_means(const GrayImage& ref, const GrayImage& dist, const SsimParams& p) {
    require_same_shape(ref, dist);
    if (ref.width() < p.window_size || ref.height() < p.window_size) {
        throw ShapeError("image smaller than SSIM window (" + std::to_string(p.window_size) + "x" +
                         std::to_string(p.window_size) + ")");
    }
    const int w = ref.width();
    const int h = ref.height();
    const auto kernel = gaussian_kernel(p.window_size, p.sigma);

    const auto& x = ref.samples();
    const auto& y = dist.samples();
    const std::size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }

    const auto mu_x = filter_valid(x, h, w, kernel);
    const auto mu_y = filter_valid(y, h, w, kernel);
    const auto m_xx = filter_valid(xx, h, w, kernel);
    const auto m_yy = filter_valid(yy, h, w, kernel);
    const auto m_xy = filter_valid(xy, h, w, kernel);

    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    double sum_full = 0.0;
    double sum_cs = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i];
        const double my = mu_y[i];
        const double var_x = m_xx[i] - mx * mx;
        const double var_y = m_yy[i] - my * my;
        const double cov = m_xy[i] - mx * my;
        const double lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
        const double cs = (2.0 * cov + c2) / (var_x + var_y + c2);
        sum_full += lum * cs;
        sum_cs += cs;
    }
    SsimMeans means;
    means.full = sum_full / static_cast<double>(mu_x.size());
    means.cs = sum_cs / static_cast<double>(mu_x.size());
    return means;
}

// 2x2 mean filter then decimate by two; trailing odd row/column is dropped.
GrayImage downsample2(const GrayImage& img) {
    const int out_w = img.width() / 2;
    const int out_h = img.height() / 2;
    std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
    for (int r = 0; r < out_h; ++r) {
        for (int c = 0; c < out_w; ++c) {
            out[static_cast<std::size_t>(r) * out_w + c] =
                0.25 * (img.at(2 * r, 2 * c) + img.at(2 * r, 2 * c + 1) + img.at(2 * r + 1, 2 * c) +
                        img.at(2 * r + 1, 2 * c + 1));
        }
    }
    return GrayImage(out_w, out_h, std::move(out), img.dynamic_range());
}

}  // namespace

double compute_psnr(const GrayImage& ref, const GrayImage& dist) {
    require_same_shape(ref, dist);
    const auto& x = ref.samples();
    const auto& y = dist.samples();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(x.size());
    if (mse == 0.0) return kPsnrCapDb;
    const double l = ref.dynamic_range();
    return 10.0 * std::log10(l * l / mse);
}

double compute_ssim(const GrayImage& ref, const GrayImage& dist, const SsimParams& params) {
    return ssim_map_means(ref, dist, params).full;
}

double compute_ssim_cs(const GrayImage& ref, const GrayImage& dist, const SsimParams& params) {
    return ssim_map_means(ref, dist, params).cs;
}

double compute_ms_ssim(const GrayImage& ref, const GrayImage& dist, const SsimParams& params) {
    require_same_shape(ref, dist);
    const int scales = static_cast<int>(kMsSsimWeights.size());
    // Every scale, including the coarsest after 4 halvings, must fit a window.
    const int min_dim = params.window_size << (scales - 1);
    if (ref.width() < min_dim || ref.height() < min_dim) {
        throw ShapeError("image too small for multi-scale analysis: need at least " +
                         std::to_string(min_dim) + "x" + std::to_string(min_dim) + " for a " +
                         std::to_string(params.window_size) + "-pixel window over " +
                         std::to_string(scales) + " scales");
    }

    GrayImage cur_ref = ref;
    GrayImage cur_dist = dist;
    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        const SsimMeans means = ssim_map_means(cur_ref, cur_dist, params);
        const bool coarsest = (s == scales - 1);
        // Negative terms are floored at zero before the fractional exponent.
        const double term = std::max(coarsest ? means.full : means.cs, 0.0);
        result *= std::pow(term, kMsSsimWeights[static_cast<std::size_t>(s)]);
        if (!coarsest) {
            cur_ref = downsample2(cur_ref);
            cur_dist = downsample2(cur_dist);
        }
    }
    return result;
}

std::vector<MetricDescriptor> default_registry() {
    auto native = [](const char* id) {
        return MetricDescriptor{id, MetricSource::kNative, MetricPolarity::kHigherIsBetter};
    };
    auto external = [](const char* id) {
        return MetricDescriptor{id, MetricSource::kExternal, MetricPolarity::kHigherIsBetter};
    };
    return {
        native("PSNR"),      external("PSNR-HA"), external("PSNR-HMA"), native("SSIM"),
        native("MS-SSIM"),   external("CW-SSIM"), external("IW-SSIM"),  external("SR-SIM"),
        external("FSIMc"),   external("PerSIM"),  external("UNIQUE"),
    };
}

MetricRegistry::MetricRegistry(std::vector<MetricDescriptor> metrics) {
    for (auto& m : metrics) add(std::move(m));
}

void MetricRegistry::add(MetricDescriptor descriptor) {
    if (contains(descriptor.metric_id)) {
        throw DuplicateError("metric_id '" + descriptor.metric_id + "' already registered");
    }
    metrics_.push_back(std::move(descriptor));
}

bool MetricRegistry::contains(const std::string& metric_id) const {
    return std::any_of(metrics_.begin(), metrics_.end(),
                       [&](const MetricDescriptor& m) { return m.metric_id == metric_id; });
}

const MetricDescriptor& MetricRegistry::at(const std::string& metric_id) const {
    for (const auto& m : metrics_) {
        if (m.metric_id == metric_id) return m;
    }
    throw RegistryError("metric_id '" + metric_id + "' not in registry");
}

std::vector<std::string> MetricRegistry::metric_ids() const {
    std::vector<std::string> ids;
    ids.reserve(metrics_.size());
    for (const auto& m : metrics_) ids.push_back(m.metric_id);
    return ids;
}

void ScoreFragment::set(const std::string& stimulus_id, const std::string& metric_id, double score) {
    if (!std::isfinite(score)) {
        throw NumericError("score for (" + stimulus_id + ", " + metric_id + ") not finite");
    }
    entries_[{stimulus_id, metric_id}] = score;
}

bool ScoreFragment::contains(const std::string& stimulus_id, const std::string& metric_id) const {
    return entries_.count({stimulus_id, metric_id}) > 0;
}

double ScoreFragment::at(const std::string& stimulus_id, const std::string& metric_id) const {
    auto it = entries_.find({stimulus_id, metric_id});
    if (it == entries_.end()) {
        throw CompletenessError("no score for (" + stimulus_id + ", " + metric_id + ")");
    }
    return it->second;
}

void ScoreFragment::merge(const ScoreFragment& other) {
    for (const auto& [key, value] : other.entries_) entries_[key] = value;
}

ScoreFragment parse_scores(const std::string& text, const MetricRegistry& registry,
                           const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kScoreFileHeader) {
        throw ParseError(origin + ": bad header line, expected '" + std::string(kScoreFileHeader) + "'");
    }
    ScoreFragment fragment;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) {
            ++row;
            continue;
        }
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
        if (fields.size() != 3) {
            throw ParseError(origin + ": row " + std::to_string(row) + ": expected 3 columns, got " +
                             std::to_string(fields.size()));
        }
        if (!registry.contains(fields[1])) {
            throw RegistryError(origin + ": row " + std::to_string(row) + ": metric_id '" + fields[1] +
                                "' not in registry");
        }
        double score = 0.0;
        auto res = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), score);
        if (res.ec != std::errc{} || res.ptr != fields[2].data() + fields[2].size() ||
            !std::isfinite(score)) {
            throw ParseError(origin + ": row " + std::to_string(row) + ": non-finite or malformed score '" +
                             fields[2] + "'");
        }
        fragment.set(fields[0], fields[1], score);
        ++row;
    }
    return fragment;
}

ScoreFragment ingest_external_scores(const std::string& path, const MetricRegistry& registry) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open score file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scores(buf.str(), registry, path);
}

std::string scores_to_string(const ScoreFragment& fragment) {
    std::string out(kScoreFileHeader);
    out.push_back('\n');
    char buf[64];
    for (const auto& [key, value] : fragment.entries()) {
        out += key.first;
        out.push_back(',');
        out += key.second;
        out.push_back(',');
        auto res = std::to_chars(buf, buf + sizeof(buf), value);
        out.append(buf, res.ptr);
        out.push_back('\n');
    }
    return out;
}

void write_scores(const ScoreFragment& fragment, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write score file '" + path + "'");
    out << scores_to_string(fragment);
}

ScoreTable::ScoreTable(std::vector<std::string> stimulus_ids, std::vector<std::string> metric_ids)
    : stimulus_ids_(std::move(stimulus_ids)), metric_ids_(std::move(metric_ids)) {
    for (std::size_t i = 0; i < stimulus_ids_.size(); ++i) {
        if (!stimulus_index_.emplace(stimulus_ids_[i], i).second) {
            throw DuplicateError("duplicate stimulus_id '" + stimulus_ids_[i] + "' in score table");
        }
    }
    for (std::size_t j = 0; j < metric_ids_.size(); ++j) {
        if (!metric_index_.emplace(metric_ids_[j], j).second) {
            throw DuplicateError("duplicate metric_id '" + metric_ids_[j] + "' in score table");
        }
    }
    scores_.setZero(static_cast<Eigen::Index>(stimulus_ids_.size()),
                    static_cast<Eigen::Index>(metric_ids_.size()));
    present_.setConstant(static_cast<Eigen::Index>(stimulus_ids_.size()),
                         static_cast<Eigen::Index>(metric_ids_.size()), false);
}

ScoreTable ScoreTable::assemble(const Database& db, const MetricRegistry& registry,
                                const ScoreFragment& fragment) {
    std::vector<std::string> sids;
    sids.reserve(db.records.size());
    for (const auto& rec : db.records) sids.push_back(rec.stimulus_id);
    ScoreTable table(std::move(sids), registry.metric_ids());
    for (const auto& [key, value] : fragment.entries()) {
        // Fragments may carry stimuli from other databases or metrics outside
        // this registry; both are skipped here and missing pairs surface
        // later as completeness errors if a study actually needs them.
        if (table.stimulus_index_.count(key.first) == 0) continue;
        if (table.metric_index_.count(key.second) == 0) continue;
        table.set(key.first, key.second, value);
    }
    return table;
}

void ScoreTable::set(const std::string& stimulus_id, const std::string& metric_id, double score) {
    if (!std::isfinite(score)) {
        throw NumericError("score for (" + stimulus_id + ", " + metric_id + ") not finite");
    }
    const auto row = stimulus_index(stimulus_id);
    const auto col = metric_index(metric_id);
    scores_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = score;
    present_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = true;
}

std::size_t ScoreTable::stimulus_index(const std::string& stimulus_id) const {
    auto it = stimulus_index_.find(stimulus_id);
    if (it == stimulus_index_.end()) {
        throw CompletenessError("stimulus_id '" + stimulus_id + "' not in score table");
    }
    return it->second;
}

std::size_t ScoreTable::metric_index(const std::string& metric_id) const {
    auto it = metric_index_.find(metric_id);
    if (it == metric_index_.end()) {
        throw RegistryError("metric_id '" + metric_id + "' not in score table");
    }
    return it->second;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> build_feature_matrix(
    const Database& db, const ScoreTable& table, const std::vector<std::string>& selected) {
    const auto n = static_cast<Eigen::Index>(db.records.size());
    const auto m = static_cast<Eigen::Index>(selected.size());
    Eigen::MatrixXd x(n, m);
    Eigen::VectorXd y(n);

    std::vector<std::size_t> cols;
    cols.reserve(selected.size());
    for (const auto& id : selected) cols.push_back(table.metric_index(id));

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& rec = db.records[static_cast<std::size_t>(i)];
        const std::size_t row = table.stimulus_index(rec.stimulus_id);
        y(i) = rec.subjective_score;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!table.has(row, cols[static_cast<std::size_t>(j)])) {
                throw CompletenessError("missing score for (" + rec.stimulus_id + ", " +
                                        selected[static_cast<std::size_t>(j)] + ")");
            }
            x(i, j) = table.at(row, cols[static_cast<std::size_t>(j)]);
        }
    }
    return {std::move(x), std::move(y)};
}

}  // namespace iqaboost
