#include "plp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "plp/errors.hpp"

namespace plp::metrics {

std::string_view to_string(Units u) { return u == Units::percent ? "percent" : "fraction"; }

namespace {

void require_finite(const EvalPairs& p) {
    for (const auto& e : p.pairs) {
        if (!std::isfinite(e.true_accuracy) || !std::isfinite(e.predicted_accuracy)) {
            throw PreconditionError("non-finite accuracy for '" + e.dataset_id + "'");
        }
    }
}

}  // namespace

double pearson_r(const EvalPairs& p) {
    const auto n = p.pairs.size();
    if (n < 2) throw PreconditionError("pearson_r needs at least 2 pairs, got " + std::to_string(n));
    require_finite(p);
    const auto constant = [&](auto field) {
        return std::all_of(p.pairs.begin(), p.pairs.end(),
                           [&](const EvalPair& e) { return e.*field == p.pairs.front().*field; });
    };
    if (constant(&EvalPair::true_accuracy)) throw ConstantSeries("true accuracies are constant");
    if (constant(&EvalPair::predicted_accuracy)) throw ConstantSeries("predicted accuracies are constant");
    double mt = 0.0, mp = 0.0;
    for (const auto& e : p.pairs) {
        mt += e.true_accuracy;
        mp += e.predicted_accuracy;
    }
    mt /= static_cast<double>(n);
    mp /= static_cast<double>(n);
    double stt = 0.0, spp = 0.0, stp = 0.0;
    for (const auto& e : p.pairs) {
        const double dt = e.true_accuracy - mt;
        const double dp = e.predicted_accuracy - mp;
        stt += dt * dt;
        spp += dp * dp;
        stp += dt * dp;
    }
    if (stt == 0.0) throw ConstantSeries("true accuracies are constant");
    if (spp == 0.0) throw ConstantSeries("predicted accuracies are constant");
    return std::clamp(stp / std::sqrt(stt * spp), -1.0, 1.0);
}

double rmse(const EvalPairs& p) {
    if (p.pairs.empty()) throw EmptyRows("rmse: no pairs");
    require_finite(p);
    double sq = 0.0;
    for (const auto& e : p.pairs) {
        const double d = e.predicted_accuracy - e.true_accuracy;
        sq += d * d;
    }
    return std::sqrt(sq / static_cast<double>(p.pairs.size()));
}

EvalPairs to_units(const EvalPairs& p, Units target) {
    if (p.units == target) return p;
    const double k = target == Units::percent ? 100.0 : 0.01;
    EvalPairs out{p.pairs, target};
    for (auto& e : out.pairs) {
        e.true_accuracy *= k;
        e.predicted_accuracy *= k;
    }
    return out;
}

EvalPairs read_values_file(const std::filesystem::path& path, Units units) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    EvalPairs out{{}, units};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::istringstream fields(line);
        std::string id, t, pr;
        if (!std::getline(fields, id, '\t') || !std::getline(fields, t, '\t') || !std::getline(fields, pr, '\t')) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
        }
        try {
            std::size_t used_t = 0, used_p = 0;
            const double tv = std::stod(t, &used_t);
            const double pv = std::stod(pr, &used_p);
            if (used_t != t.size() || used_p != pr.size()) throw std::invalid_argument("trailing characters");
            out.pairs.push_back({id, tv, pv});
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    return out;
}

void write_values_file(const EvalPairs& pairs, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# dataset_id\ttrue\tpredicted (" << to_string(pairs.units) << ")\n";
    out << std::setprecision(17);
    for (const auto& e : pairs.pairs) out << e.dataset_id << '\t' << e.true_accuracy << '\t' << e.predicted_accuracy << '\n';
}

Summary summarize(const EvalPairs& pairs) {
    Summary s;
    s.n = pairs.pairs.size();
    s.units = pairs.units;
    s.rmse = rmse(pairs);
    if (s.n >= 2) {
        try {
            s.pearson = pearson_r(pairs);
            s.pearson_defined = true;
        } catch (const ConstantSeries&) {
        }
    }
    return s;
}

std::string format_summary(const EvalPairs& pairs, const Summary& s) {
    std::ostringstream out;
    out << std::fixed;
    out << std::left << std::setw(24) << "dataset" << std::right << std::setw(12) << "true" << std::setw(12)
        << "predicted" << '\n';
    const int prec = s.units == Units::percent ? 2 : 4;
    for (const auto& e : pairs.pairs) {
        out << std::left << std::setw(24) << e.dataset_id << std::right << std::setprecision(prec) << std::setw(12)
            << e.true_accuracy << std::setw(12) << e.predicted_accuracy << '\n';
    }
    out << "Pearson-r = ";
    if (s.pearson_defined) out << std::setprecision(2) << s.pearson; else out << "undefined";
    out << ". Root Mean Squared Error = " << std::setprecision(s.units == Units::percent ? 2 : 6) << s.rmse << " ("
        << to_string(s.units) << ", n=" << s.n << ")\n";
    return out.str();
}

std::string results_json(const EvalPairs& pairs, const Summary& s) {
    nlohmann::ordered_json j;
    j["units"] = std::string(to_string(s.units));
    j["n"] = s.n;
    j["pearson_r"] = s.pearson_defined ? nlohmann::ordered_json(s.pearson) : nlohmann::ordered_json(nullptr);
    j["rmse"] = s.rmse;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : pairs.pairs) {
        arr.push_back({{"dataset_id", e.dataset_id}, {"true_accuracy", e.true_accuracy},
                       {"predicted_accuracy", e.predicted_accuracy}});
    }
    j["pairs"] = arr;
    return j.dump(2) + "\n";
}

}  // namespace plp::metrics
