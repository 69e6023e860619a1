#pragma once

// JSON forms of fitted reject models and replication records.

#include "cv.hpp"
#include "errors.hpp"
#include "svm_reject.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace dcovsel {

using json = nlohmann::ordered_json;

namespace detail {

inline json to_json_vector(const Eigen::VectorXd& v)
{
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

inline Eigen::VectorXd from_json_vector(const json& j)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

} // namespace detail

inline constexpr const char* model_format = "dcovsel-reject-model";

inline json model_to_json(const RejectModel& m, const std::vector<std::string>& feature_names)
{
    if (feature_names.size() != static_cast<std::size_t>(m.lambda.size())) {
        throw DimensionError("feature name count does not match model size");
    }
    json j;
    j["format"] = model_format;
    j["version"] = 1;
    j["features"] = feature_names;
    j["lambda"] = detail::to_json_vector(m.lambda);
    j["intercept"] = m.intercept;
    j["r"] = m.r;
    j["d"] = m.params.d;
    j["delta"] = m.params.delta;
    j["has_intercept"] = m.has_intercept;
    j["standardized"] = m.standardized;
    j["fitted_lambda"] = detail::to_json_vector(m.fitted_lambda);
    j["fitted_intercept"] = m.fitted_intercept;
    j["center"] = detail::to_json_vector(m.center);
    j["scale"] = detail::to_json_vector(m.scale);
    j["objective"] = m.objective;
    j["duality_gap"] = m.duality_gap;
    j["kkt_residual"] = m.kkt_residual;
    j["iterations"] = m.iterations;
    return j;
}

struct LoadedModel {
    RejectModel model;
    std::vector<std::string> features;
};

inline LoadedModel model_from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != model_format) {
            throw DataError("not a reject-model file");
        }
        LoadedModel out;
        out.features = j.at("features").get<std::vector<std::string>>();
        RejectModel& m = out.model;
        m.lambda = detail::from_json_vector(j.at("lambda"));
        m.intercept = j.at("intercept").get<double>();
        m.r = j.at("r").get<double>();
        m.params.d = j.at("d").get<double>();
        m.params.delta = j.at("delta").get<double>();
        m.params.validate();
        m.has_intercept = j.at("has_intercept").get<bool>();
        m.standardized = j.at("standardized").get<bool>();
        m.fitted_lambda = detail::from_json_vector(j.at("fitted_lambda"));
        m.fitted_intercept = j.at("fitted_intercept").get<double>();
        m.center = detail::from_json_vector(j.at("center"));
        m.scale = detail::from_json_vector(j.at("scale"));
        m.objective = j.at("objective").get<double>();
        m.duality_gap = j.at("duality_gap").get<double>();
        m.kkt_residual = j.at("kkt_residual").get<double>();
        m.iterations = j.at("iterations").get<std::size_t>();
        if (out.features.size() != static_cast<std::size_t>(m.lambda.size())) {
            throw DataError("model feature list and coefficients differ in length");
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    } catch (const ArgumentError& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

inline json records_to_json(const std::vector<ReplicationRecord>& records, const std::vector<double>& d_values)
{
    json j;
    j["format"] = "dcovsel-replications";
    j["version"] = 1;
    j["d_values"] = d_values;
    json list = json::array();
    for (const auto& rec : records) {
        json r;
        r["rep_id"] = rec.rep_id;
        std::string roles;
        for (const auto role : rec.roles) {
            roles += role == SplitRole::tuning ? 'u' : role == SplitRole::training ? 'r' : 'e';
        }
        r["roles"] = roles;
        r["resampled"] = rec.resampled;
        r["skipped"] = rec.skipped;
        r["note"] = rec.note;
        r["selected_features"] = rec.selected_features;
        r["max_marginal_r2"] = rec.skipped ? json(nullptr) : json(rec.max_marginal_r2);
        json outcomes = json::array();
        for (const auto& o : rec.outcomes) {
            json oj;
            oj["d"] = o.d;
            const auto number = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
            oj["tuned_r"] = number(o.tuned_r);
            oj["tuning_loss"] = number(o.tuning_loss);
            oj["decisive_model_available"] = o.decisive_model_available;
            oj["post_model_features"] = o.post_model_features;
            std::string decisions;
            for (const int dec : o.decisions) {
                decisions += dec > 0 ? '+' : dec < 0 ? '-' : '0';
            }
            oj["decisions"] = decisions;
            oj["training_accuracy"] = number(o.training_accuracy);
            oj["testing_accuracy"] = number(o.testing_accuracy);
            oj["n_with_decision_train"] = o.n_with_decision_train;
            oj["n_with_decision_test"] = o.n_with_decision_test;
            outcomes.push_back(std::move(oj));
        }
        r["outcomes"] = std::move(outcomes);
        list.push_back(std::move(r));
    }
    j["records"] = std::move(list);
    return j;
}

struct LoadedRecords {
    std::vector<double> d_values;
    std::vector<ReplicationRecord> records;
};

inline LoadedRecords records_from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != "dcovsel-replications") {
            throw DataError("not a replication file");
        }
        LoadedRecords out;
        out.d_values = j.at("d_values").get<std::vector<double>>();
        const auto number = [](const json& v) { return v.is_null() ? not_available : v.get<double>(); };
        for (const auto& r : j.at("records")) {
            ReplicationRecord rec;
            rec.rep_id = r.at("rep_id").get<std::size_t>();
            for (const char c : r.at("roles").get<std::string>()) {
                rec.roles.push_back(c == 'u' ? SplitRole::tuning : c == 'r' ? SplitRole::training : SplitRole::testing);
            }
            rec.resampled = r.at("resampled").get<bool>();
            rec.skipped = r.at("skipped").get<bool>();
            rec.note = r.at("note").get<std::string>();
            rec.selected_features = r.at("selected_features").get<std::vector<std::size_t>>();
            rec.max_marginal_r2 = number(r.at("max_marginal_r2"));
            for (const auto& oj : r.at("outcomes")) {
                ModelOutcome o;
                o.d = oj.at("d").get<double>();
                o.tuned_r = number(oj.at("tuned_r"));
                o.tuning_loss = number(oj.at("tuning_loss"));
                o.decisive_model_available = oj.at("decisive_model_available").get<bool>();
                o.post_model_features = oj.at("post_model_features").get<std::vector<std::size_t>>();
                for (const char c : oj.at("decisions").get<std::string>()) {
                    o.decisions.push_back(c == '+' ? 1 : c == '-' ? -1 : 0);
                }
                o.training_accuracy = number(oj.at("training_accuracy"));
                o.testing_accuracy = number(oj.at("testing_accuracy"));
                o.n_with_decision_train = oj.at("n_with_decision_train").get<std::size_t>();
                o.n_with_decision_test = oj.at("n_with_decision_test").get<std::size_t>();
                rec.outcomes.push_back(std::move(o));
            }
            if (rec.outcomes.size() != out.d_values.size()) {
                throw DataError("replication " + std::to_string(rec.rep_id) + " has the wrong number of outcomes");
            }
            out.records.push_back(std::move(rec));
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed replication file: ") + e.what());
    }
}

inline json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
}

} // namespace dcovsel
