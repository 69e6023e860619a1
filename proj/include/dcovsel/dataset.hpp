#pragma once

#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

namespace dcovsel {

/// Subjects x features matrix with a response channel kept as raw label text.
/// The label text is interpreted on demand as a real response, a binary +-1
/// response or a set of class labels.
struct Dataset {
    Eigen::MatrixXd x;
    std::vector<std::string> feature_names;
    std::vector<std::string> subject_ids;
    std::vector<std::string> labels;

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(x.rows()); }
    [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(x.cols()); }

    void validate() const
    {
        if (static_cast<std::size_t>(x.cols()) != feature_names.size()) {
            throw DimensionError("feature name count does not match column count");
        }
        if (subject_ids.size() != n() || labels.size() != n()) {
            throw DimensionError("subject ids / labels do not match row count");
        }
        if (!x.allFinite()) {
            throw DataError("feature matrix contains non-finite values");
        }
        std::unordered_set<std::string> seen;
        for (const auto& name : feature_names) {
            if (!seen.insert(name).second) {
                throw DataError("duplicate feature name '" + name + "'");
            }
        }
    }

    /// Rows `rows` of this dataset, in the given order.
    [[nodiscard]] Dataset subset(const std::vector<std::size_t>& rows) const
    {
        Dataset out;
        out.feature_names = feature_names;
        out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            out.x.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
            out.subject_ids.push_back(subject_ids[rows[k]]);
            out.labels.push_back(labels[rows[k]]);
        }
        return out;
    }
};

inline std::optional<double> parse_double(std::string_view text)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    if (text.empty()) {
        return std::nullopt;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

/// Real-valued response; every label must parse as a finite number.
inline Eigen::VectorXd numeric_response(const Dataset& data)
{
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.n()));
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto v = parse_double(data.labels[i]);
        if (!v) {
            throw DataError("label '" + data.labels[i] + "' of subject " + data.subject_ids[i] + " is not numeric");
        }
        y(static_cast<Eigen::Index>(i)) = *v;
    }
    return y;
}

inline bool labels_numeric(const Dataset& data)
{
    return std::all_of(data.labels.begin(), data.labels.end(),
                       [](const std::string& s) { return parse_double(s).has_value(); });
}

/// +1 for `positive_label`, -1 otherwise. Without a positive label the labels
/// must already be numeric -1/+1.
inline std::vector<int> binary_labels(const Dataset& data, const std::optional<std::string>& positive_label)
{
    std::vector<int> out(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (positive_label) {
            out[i] = data.labels[i] == *positive_label ? 1 : -1;
            continue;
        }
        const auto v = parse_double(data.labels[i]);
        if (!v || (*v != 1.0 && *v != -1.0)) {
            throw DataError("label '" + data.labels[i] + "' of subject " + data.subject_ids[i] +
                            " is not -1/+1; pass a positive label");
        }
        out[i] = *v > 0 ? 1 : -1;
    }
    return out;
}

/// Sorted distinct labels and each subject's index into them.
struct ClassCoding {
    std::vector<std::string> classes;
    std::vector<int> ids;
};

inline ClassCoding class_coding(const std::vector<std::string>& labels)
{
    ClassCoding c;
    const std::set<std::string> distinct(labels.begin(), labels.end());
    c.classes.assign(distinct.begin(), distinct.end());
    std::map<std::string, int> index;
    for (std::size_t k = 0; k < c.classes.size(); ++k) {
        index[c.classes[k]] = static_cast<int>(k);
    }
    c.ids.reserve(labels.size());
    for (const auto& l : labels) {
        c.ids.push_back(index.at(l));
    }
    return c;
}

inline Eigen::VectorXd to_vector(const std::vector<int>& labels)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = labels[i];
    }
    return v;
}

/// Column z-scores with the (n-1) standard deviation; constant columns become 0.
inline Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x)
{
    Eigen::MatrixXd out(x.rows(), x.cols());
    const double n = static_cast<double>(x.rows());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (x.rows() == 0 || x.col(c).minCoeff() == x.col(c).maxCoeff()) {
            out.col(c).setZero();
            continue;
        }
        const double mean = x.col(c).mean();
        const Eigen::VectorXd centered = x.col(c).array() - mean;
        const double sd = n > 1 ? std::sqrt(centered.squaredNorm() / (n - 1.0)) : 0.0;
        if (sd > 0.0 && std::isfinite(sd)) {
            out.col(c) = centered / sd;
        } else {
            out.col(c).setZero();
        }
    }
    return out;
}

} // namespace dcovsel
