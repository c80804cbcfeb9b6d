#include "iqaboost/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace iqaboost {

namespace {

const std::array<const char*, 7> kCategoryNames = {
    "compression", "noise", "communication", "blur", "color", "global", "local",
};

std::vector<std::string> split_csv_row(const std::string& line) {
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
    return fields;
}

// Shortest decimal form that round-trips, so write-then-read is the identity.
std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_score(const std::string& token, std::size_t row, const std::string& origin) {
    double value = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw ParseError(origin + ": row " + std::to_string(row) + ": non-numeric subjective_score '" +
                         token + "'");
    }
    if (!std::isfinite(value)) {
        throw ParseError(origin + ": row " + std::to_string(row) + ": subjective_score not finite");
    }
    return value;
}

}  // namespace

std::string to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

Category category_from_string(const std::string& token) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (token == kCategoryNames[i]) return static_cast<Category>(i);
    }
    throw ParseError("unknown category '" + token + "'");
}

Database parse_manifest(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(origin + ": empty manifest");
    }
    if (line != kManifestHeader) {
        throw ParseError(origin + ": bad header line, expected '" + std::string(kManifestHeader) + "'");
    }

    Database db;
    std::unordered_set<std::string> seen_ids;
    std::size_t row = 1;  // header is row 0
    while (std::getline(in, line)) {
        if (line.empty()) {
            ++row;
            continue;
        }
        auto fields = split_csv_row(line);
        if (fields.size() != 6) {
            throw ParseError(origin + ": row " + std::to_string(row) + ": expected 6 columns, got " +
                             std::to_string(fields.size()));
        }
        StimulusRecord rec;
        rec.stimulus_id = fields[0];
        rec.reference_path = fields[1];
        rec.distorted_path = fields[2];
        rec.subjective_score = parse_score(fields[3], row, origin);
        try {
            rec.category = category_from_string(fields[4]);
        } catch (const ParseError&) {
            throw ParseError(origin + ": row " + std::to_string(row) + ": unknown category '" +
                             fields[4] + "'");
        }
        rec.database_id = fields[5];
        if (rec.stimulus_id.empty()) {
            throw ParseError(origin + ": row " + std::to_string(row) + ": empty stimulus_id");
        }
        if (!seen_ids.insert(rec.stimulus_id).second) {
            throw DuplicateError(origin + ": row " + std::to_string(row) + ": duplicate stimulus_id '" +
                                 rec.stimulus_id + "'");
        }
        if (db.records.empty()) {
            db.database_id = rec.database_id;
        } else if (rec.database_id != db.database_id) {
            throw ParseError(origin + ": row " + std::to_string(row) + ": database_id '" +
                             rec.database_id + "' differs from '" + db.database_id + "'");
        }
        db.records.push_back(std::move(rec));
        ++row;
    }
    if (db.records.empty()) {
        throw ParseError(origin + ": manifest has no records");
    }
    db.score_min = std::numeric_limits<double>::infinity();
    db.score_max = -std::numeric_limits<double>::infinity();
    for (const auto& rec : db.records) {
        db.score_min = std::min(db.score_min, rec.subjective_score);
        db.score_max = std::max(db.score_max, rec.subjective_score);
    }
    return db;
}

Database load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open manifest '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), path);
}

std::string manifest_to_string(const Database& db) {
    std::string out(kManifestHeader);
    out.push_back('\n');
    for (const auto& rec : db.records) {
        out += rec.stimulus_id;
        out.push_back(',');
        out += rec.reference_path;
        out.push_back(',');
        out += rec.distorted_path;
        out.push_back(',');
        out += format_double(rec.subjective_score);
        out.push_back(',');
        out += to_string(rec.category);
        out.push_back(',');
        out += rec.database_id;
        out.push_back('\n');
    }
    return out;
}

void write_manifest(const Database& db, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write manifest '" + path + "'");
    }
    out << manifest_to_string(db);
}

std::map<Category, std::size_t> category_counts(const Database& db) {
    std::map<Category, std::size_t> counts;
    for (Category c : kAllCategories) counts[c] = 0;
    for (const auto& rec : db.records) ++counts[rec.category];
    return counts;
}

ValidationReport validate_database(const Database& db,
                                   const std::map<Category, std::size_t>& expected,
                                   std::optional<std::size_t> expected_total) {
    ValidationReport report;
    report.database_id = db.database_id;
    const auto actual = category_counts(db);

    std::size_t expected_sum = 0;
    for (Category c : kAllCategories) {
        CategoryCheck check;
        check.category = c;
        auto it = expected.find(c);
        check.expected = (it == expected.end()) ? 0 : it->second;
        check.actual = actual.at(c);
        check.matches = check.expected == check.actual;
        expected_sum += check.expected;
        report.checks.push_back(check);
    }
    report.expected_total = expected_total.value_or(expected_sum);
    report.actual_total = db.records.size();
    report.total_matches = report.expected_total == report.actual_total;
    return report;
}

bool ValidationReport::all_match() const {
    if (!total_matches) return false;
    return std::all_of(checks.begin(), checks.end(), [](const CategoryCheck& c) { return c.matches; });
}

std::vector<Category> ValidationReport::mismatched_categories() const {
    std::vector<Category> out;
    for (const auto& c : checks) {
        if (!c.matches) out.push_back(c.category);
    }
    return out;
}

std::string ValidationReport::to_text() const {
    std::ostringstream out;
    out << "database: " << database_id << "\n";
    for (const auto& c : checks) {
        out << to_string(c.category) << ": expected " << c.expected << ", actual " << c.actual << " ["
            << (c.matches ? "ok" : "MISMATCH") << "]\n";
    }
    out << "total: expected " << expected_total << ", actual " << actual_total << " ["
        << (total_matches ? "ok" : "MISMATCH") << "]\n";
    out << "result: " << (all_match() ? "pass" : "fail") << "\n";
    return out.str();
}

std::string ValidationReport::to_json() const {
    nlohmann::ordered_json j;
    j["database"] = database_id;
    nlohmann::ordered_json cats;
    for (const auto& c : checks) {
        cats[to_string(c.category)] = {
            {"expected", c.expected}, {"actual", c.actual}, {"matches", c.matches}};
    }
    j["categories"] = cats;
    j["total"] = {{"expected", expected_total}, {"actual", actual_total}, {"matches", total_matches}};
    j["pass"] = all_match();
    return j.dump(2) + "\n";
}

}  // namespace iqaboost
