#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qre/catalog.hpp"
#include "qre/core/error.hpp"
#include "qre/model.hpp"

// Model file layout (JSON, one model per document):
//
//   {"name": "...",
//    "rates": {"arrival": SEQ, "service": SEQ},
//    "environment": {"labels": [...], "blocked": [...],
//                    "generators": SEQ, "jumps": SEQ}}
//
// where SEQ = {"prefix": [...], "tail": [...], "growth": g} holds scalars or
// square matrices (arrays of rows). N0 is the prefix length, p the tail
// length. A catalog shortcut replaces everything else:
//
//   {"catalog": "base_stock", "params": {"lambda": 1, "mu": 2, "nu": 1, "b": 2}}

namespace qre {

class ModelFormatError : public Error {
public:
    using Error::Error;
};

using json = nlohmann::json;

namespace detail {

inline json to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json to_json(double x) { return x; }

inline Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ModelFormatError("matrix must be a non-empty array of rows");
    const std::size_t n = j.size();
    Matrix m(n, j[0].size());
    for (std::size_t r = 0; r < n; ++r) {
        if (!j[r].is_array() || j[r].size() != m.cols()) throw ModelFormatError("matrix rows differ in length");
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

template <class T>
json sequence_to_json(const TailSequence<T>& s) {
    json prefix = json::array(), tail = json::array();
    for (const auto& x : s.prefix()) prefix.push_back(to_json(x));
    for (const auto& x : s.tail()) tail.push_back(to_json(x));
    return {{"prefix", prefix}, {"tail", tail}, {"growth", s.growth()}};
}

template <class T, class Read>
TailSequence<T> sequence_from_json(const json& j, const char* what, Read read) {
    if (!j.is_object() || !j.contains("tail")) throw ModelFormatError(std::string(what) + ": missing \"tail\"");
    std::vector<T> prefix, tail;
    if (j.contains("prefix"))
        for (const auto& x : j.at("prefix")) prefix.push_back(read(x));
    for (const auto& x : j.at("tail")) tail.push_back(read(x));
    if (tail.empty()) throw ModelFormatError(std::string(what) + ": tail must be non-empty");
    const double growth = j.value("growth", 0.0);
    if (growth < 0.0) throw ModelFormatError(std::string(what) + ": growth must be >= 0");
    return TailSequence<T>(std::move(prefix), std::move(tail), growth);
}

inline CatalogParams params_from_json(const json& j) {
    CatalogParams p;
    if (j.is_null()) return p;
    p.lambda = j.value("lambda", p.lambda);
    p.mu = j.value("mu", p.mu);
    p.nu = j.value("nu", p.nu);
    p.gamma = j.value("gamma", p.gamma);
    p.eta = j.value("eta", p.eta);
    p.b = j.value("b", p.b);
    return p;
}

}  // namespace detail

inline json model_to_json(const JointModel& model) {
    const auto& env = model.env();
    json blocked = json::array();
    for (bool b : env.blocked) blocked.push_back(b);
    return {{"name", model.name()},
            {"rates",
             {{"arrival", detail::sequence_to_json(model.rates().arrival)},
              {"service", detail::sequence_to_json(model.rates().service)}}},
            {"environment",
             {{"labels", env.labels},
              {"blocked", blocked},
              {"generators", detail::sequence_to_json(env.generators)},
              {"jumps", detail::sequence_to_json(env.jumps)}}}};
}

inline JointModel model_from_json(const json& j) {
    try {
        if (j.contains("catalog")) {
            return catalog(j.at("catalog").get<std::string>(), detail::params_from_json(j.value("params", json())));
        }
        const auto& r = j.at("rates");
        const auto& e = j.at("environment");
        auto scalar = [](const json& x) { return x.get<double>(); };
        RateFamily rates{detail::sequence_from_json<double>(r.at("arrival"), "arrival", scalar),
                         detail::sequence_from_json<double>(r.at("service"), "service", scalar)};
        EnvironmentSpec env;
        env.labels = e.at("labels").get<std::vector<std::string>>();
        env.blocked = e.at("blocked").get<std::vector<bool>>();
        if (env.blocked.size() != env.labels.size())
            throw ModelFormatError("environment: \"blocked\" and \"labels\" differ in length");
        env.generators = detail::sequence_from_json<Matrix>(e.at("generators"), "generators", detail::matrix_from_json);
        env.jumps = detail::sequence_from_json<Matrix>(e.at("jumps"), "jumps", detail::matrix_from_json);
        return JointModel(std::move(rates), std::move(env), j.value("name", std::string("custom")));
    } catch (const json::exception& ex) {
        throw ModelFormatError(std::string("model file: ") + ex.what());
    }
}

inline JointModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelFormatError("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw ModelFormatError("model file '" + path + "': " + ex.what());
    }
    return model_from_json(j);
}

inline void save_model(const JointModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelFormatError("cannot write model file '" + path + "'");
    out << model_to_json(model).dump(2) << '\n';
}

/// FNV-1a over the canonical (key-sorted, compact) JSON form.
inline std::uint64_t model_hash(const JointModel& model) {
    const std::string text = model_to_json(model).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << x;
    return os.str();
}

}  // namespace qre
