#include "windgp/model_io.hpp"

#include <fstream>
#include <sstream>

#include "windgp/csv.hpp"
#include "windgp/error.hpp"

namespace windgp {

namespace {

using json = nlohmann::ordered_json;

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
    if (!a.is_array()) throw DataError("expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a.at(i).get<double>();
    return v;
}

}  // namespace

json model_to_json(const TrainedModel& model, const std::optional<LinkSpec>& link, const json& metadata) {
    const auto& theta = model.hyperparams();
    const auto& data = model.dataset();

    json doc;
    doc["format"] = "windgp-model";
    doc["version"] = kModelFormatVersion;
    doc["kernel"] = {
        {"order", model.spec().order == KernelOrder::SecondOrderAdditive ? "second" : "first"},
        {"active", model.spec().active},
    };
    doc["hyperparameters"] = {
        {"log_signal_sd", vector_to_json(theta.log_signal_sd)},
        {"log_length", vector_to_json(theta.log_length)},
        {"log_pair_sd", vector_to_json(theta.log_pair_sd)},
        {"log_noise_sd", theta.log_noise_sd},
    };
    doc["target_offset"] = model.offset();
    doc["jitter"] = model.jitter();
    if (link) doc["link"] = {{"epsilon", link->epsilon}, {"normalizer", link->normalizer}};
    else doc["link"] = nullptr;
    doc["metadata"] = metadata;

    json rows = json::array();
    for (Eigen::Index r = 0; r < data.X.rows(); ++r) rows.push_back(vector_to_json(data.X.row(r).transpose()));
    doc["training"] = {
        {"columns", data.column_names},
        {"X", std::move(rows)},
        {"y", vector_to_json(data.y)},
    };
    return doc;
}

ModelFile model_from_json(const json& doc) {
    if (!doc.is_object() || doc.value("format", "") != "windgp-model")
        throw DataError("corrupt model file: missing windgp-model format tag");
    try {
        const auto version = doc.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw DataError("model file version " + std::to_string(version) +
                            " is not supported (this build reads version " + std::to_string(kModelFormatVersion) + ")");
        KernelSpec spec;
        const auto order = doc.at("kernel").at("order").get<std::string>();
        if (order == "first") spec.order = KernelOrder::FirstOrderAdditive;
        else if (order == "second") spec.order = KernelOrder::SecondOrderAdditive;
        else throw DataError("unknown kernel order '" + order + "'");
        spec.active = doc.at("kernel").at("active").get<std::vector<std::size_t>>();

        const auto& h = doc.at("hyperparameters");
        HyperParams theta;
        theta.log_signal_sd = vector_from_json(h.at("log_signal_sd"));
        theta.log_length = vector_from_json(h.at("log_length"));
        theta.log_pair_sd = vector_from_json(h.at("log_pair_sd"));
        theta.log_noise_sd = h.at("log_noise_sd").get<double>();

        const auto& t = doc.at("training");
        Dataset data;
        data.column_names = t.at("columns").get<std::vector<std::string>>();
        data.y = vector_from_json(t.at("y"));
        const auto& rows = t.at("X");
        const auto n = static_cast<Eigen::Index>(rows.size());
        const auto d = static_cast<Eigen::Index>(theta.log_signal_sd.size());
        if (n != data.y.size()) throw DataError("training X and y lengths differ");
        data.X.resize(n, d);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto row = vector_from_json(rows.at(static_cast<std::size_t>(r)));
            if (row.size() != d) throw DataError("training row " + std::to_string(r) + " has wrong width");
            data.X.row(r) = row.transpose();
        }

        std::optional<LinkSpec> link;
        if (!doc.at("link").is_null()) {
            link = LinkSpec{doc.at("link").at("epsilon").get<double>(), doc.at("link").at("normalizer").get<double>()};
            link->validate();
        }
        ModelFile out{restore_model(std::move(data), theta, spec, doc.at("target_offset").get<double>(),
                                    doc.at("jitter").get<double>()),
                      link, doc.value("metadata", json::object())};
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("corrupt model file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("corrupt model file: ") + e.what());
    }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path, const std::optional<LinkSpec>& link,
                const json& metadata) {
    auto out = csv::open_output(path);
    out << model_to_json(model, link, metadata).dump(1) << '\n';
    if (!out) throw DataError("failed writing model file '" + path.string() + "'");
}

ModelFile load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("corrupt model file '" + path.string() + "': " + e.what());
    }
    return model_from_json(doc);
}

}  // namespace windgp
