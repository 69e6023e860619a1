#pragma once

// Plot-ready CSV tables: selection overlap, replication summaries, voting
// scores and bins, scaled distance matrices and selection frequencies.

#include "cv.hpp"
#include "dcov.hpp"
#include "errors.hpp"
#include "io.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace dcovsel {

inline void write_overlap(const std::filesystem::path& path, const std::vector<std::vector<std::size_t>>& selections,
                          const std::vector<std::string>& set_names)
{
    if (selections.size() != set_names.size()) {
        throw DimensionError("overlap table needs one name per selection");
    }
    const SelectionOverlap overlap = selection_overlap(selections);
    CsvWriter out(path);
    std::vector<std::string> header{"set"};
    header.insert(header.end(), set_names.begin(), set_names.end());
    out.row(header);
    for (std::size_t a = 0; a < selections.size(); ++a) {
        std::vector<std::string> row{set_names[a]};
        for (std::size_t b = 0; b < selections.size(); ++b) {
            row.push_back(std::to_string(overlap.counts[a][b]));
        }
        out.row(row);
    }
}

inline void write_mcv_summary(const std::filesystem::path& path, const std::vector<McvSummaryRow>& rows)
{
    CsvWriter out(path);
    out.row("d", "replications", "skipped", "with_decision", "mean_training_accuracy", "sd_training_accuracy",
            "mean_testing_accuracy", "sd_testing_accuracy", "mean_n_training_with_decision",
            "sd_n_training_with_decision", "mean_n_testing_with_decision", "sd_n_testing_with_decision");
    for (const auto& r : rows) {
        out.row(r.d, r.reps, r.skipped, r.decisive, r.training_accuracy.mean, r.training_accuracy.sd,
                r.testing_accuracy.mean, r.testing_accuracy.sd, r.n_train_with_decision.mean,
                r.n_train_with_decision.sd, r.n_test_with_decision.mean, r.n_test_with_decision.sd);
    }
}

/// Voting score as printed: infinities saturate at +-voting_saturation.
inline double displayed_vote(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? voting_saturation : -voting_saturation;
    }
    return v;
}

inline void write_voting(const std::filesystem::path& path, const std::vector<VotingRecord>& votes,
                         const std::vector<std::string>& subject_ids, const std::vector<int>& truth)
{
    CsvWriter out(path);
    out.row("subject", "truth", "s", "w", "r", "v", "saturated");
    for (std::size_t i = 0; i < votes.size(); ++i) {
        const auto& v = votes[i];
        out.row(subject_ids[i], truth[i], v.s, v.w, v.r, displayed_vote(v.v), std::isinf(v.v));
    }
}

inline void write_voting_bins(CsvWriter& out, double d, const VotingTable& table)
{
    for (const auto& bin : table.bins) {
        out.row(d, "(" + format_real(bin.lo) + "," + format_real(bin.hi) + "]", bin.frequency, bin.positives,
                bin.proportion());
    }
    out.row(d, "below", table.below, std::string{}, std::string{});
    out.row(d, "above", table.above, std::string{}, std::string{});
    out.row(d, "not_evaluated", table.unevaluated, std::string{}, std::string{});
}

inline void write_frequency(const std::filesystem::path& path, const std::vector<double>& d_values,
                            const std::vector<std::vector<FeatureFrequency>>& per_d,
                            const std::vector<std::string>& feature_names)
{
    CsvWriter out(path);
    out.row("d", "feature", "name", "pre_model", "post_model");
    for (std::size_t k = 0; k < d_values.size(); ++k) {
        for (const auto& f : per_d[k]) {
            out.row(d_values[k], f.feature, feature_names.at(f.feature), f.pre_model, f.post_model);
        }
    }
}

/// Euclidean distance matrix divided by its maximum entry (all zeros when the
/// points coincide).
inline Eigen::MatrixXd scaled_distances(const Eigen::MatrixXd& rows)
{
    Eigen::MatrixXd d = pairwise_distances(VariableBlock(rows));
    const double max = d.maxCoeff();
    if (max > 0.0) {
        d /= max;
    }
    return d;
}

inline void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                         const std::vector<std::string>& names)
{
    CsvWriter out(path);
    std::vector<std::string> header{""};
    header.insert(header.end(), names.begin(), names.end());
    out.row(header);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<std::string> row{names[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(format_real(m(i, j)));
        }
        out.row(row);
    }
}

} // namespace dcovsel
