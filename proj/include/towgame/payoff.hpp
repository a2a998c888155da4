#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/field.hpp"

namespace towgame {

/**
 * Named boundary payoff presets:
 *   constant  {"value": c}
 *   affine    {"a": [..], "b": b}                  <a, x> + b
 *   cosine    {"amplitude": A, "k": [..], "offset": c}   A prod cos(k_i x_i) + c
 *   samples   {"points": [[..], ..], "values": [..]} or {"path": "file.csv"}
 *             nearest-sample evaluation; CSV columns x0..x{n-1},value
 */
struct PayoffSpec {
    std::string kind = "constant";
    double value = 1.0;
    std::vector<double> a;
    double b = 0.0;
    double amplitude = 1.0;
    std::vector<double> k;
    double offset = 0.0;
    std::vector<std::vector<double>> points;
    std::vector<double> values;

    static PayoffSpec from_json(const nlohmann::json& j, const std::string& base_dir = ".") {
        PayoffSpec s;
        s.kind = j.value("kind", std::string("constant"));
        if (s.kind == "constant") {
            s.value = j.value("value", 1.0);
        } else if (s.kind == "affine") {
            s.a = j.at("a").get<std::vector<double>>();
            s.b = j.value("b", 0.0);
        } else if (s.kind == "cosine") {
            s.amplitude = j.value("amplitude", 1.0);
            s.k = j.at("k").get<std::vector<double>>();
            s.offset = j.value("offset", 0.0);
        } else if (s.kind == "samples") {
            if (j.contains("path")) {
                s.load_csv(base_dir + "/" + j.at("path").get<std::string>());
            } else {
                s.points = j.at("points").get<std::vector<std::vector<double>>>();
                s.values = j.at("values").get<std::vector<double>>();
            }
            if (s.points.empty() || s.points.size() != s.values.size())
                throw std::invalid_argument("sample payoff needs matching nonempty points and values");
        } else {
            throw std::invalid_argument("unknown payoff preset '" + s.kind + "'");
        }
        return s;
    }

    nlohmann::json to_json() const {
        if (kind == "constant") return {{"kind", kind}, {"value", value}};
        if (kind == "affine") return {{"kind", kind}, {"a", a}, {"b", b}};
        if (kind == "cosine") return {{"kind", kind}, {"amplitude", amplitude}, {"k", k}, {"offset", offset}};
        return {{"kind", kind}, {"points", points}, {"values", values}};
    }

    void check_dimension(int n) const {
        if (kind == "affine" && static_cast<int>(a.size()) != n)
            throw std::invalid_argument("affine payoff dimension mismatch");
        if (kind == "cosine" && static_cast<int>(k.size()) != n)
            throw std::invalid_argument("cosine payoff dimension mismatch");
        for (const auto& p : points)
            if (static_cast<int>(p.size()) != n) throw std::invalid_argument("sample payoff dimension mismatch");
    }

    bool is_constant() const { return kind == "constant"; }

    template <int Dim>
    Payoff<Dim> make() const {
        check_dimension(Dim);
        if (kind == "constant") {
            const double c = value;
            return [c](const Vec<Dim>&) { return c; };
        }
        if (kind == "affine") {
            const Vec<Dim> av = to_vec<Dim>(a);
            const double bb = b;
            return [av, bb](const Vec<Dim>& x) { return dot(av, x) + bb; };
        }
        if (kind == "cosine") {
            const Vec<Dim> kv = to_vec<Dim>(k);
            const double amp = amplitude, off = offset;
            return [kv, amp, off](const Vec<Dim>& x) {
                double v = amp;
                for (int d = 0; d < Dim; ++d) v *= std::cos(kv[d] * x[d]);
                return v + off;
            };
        }
        auto pts = std::make_shared<std::vector<Vec<Dim>>>();
        for (const auto& p : points) pts->push_back(to_vec<Dim>(p));
        auto vals = std::make_shared<std::vector<double>>(values);
        return [pts, vals](const Vec<Dim>& x) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < pts->size(); ++i) {
                const double d = dist((*pts)[i], x);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            return (*vals)[best];
        };
    }

    /// Lipschitz constant: analytic for the closed-form presets, the largest
    /// pairwise difference quotient for samples.
    double lipschitz() const {
        if (kind == "constant") return 0.0;
        if (kind == "affine") {
            double s = 0.0;
            for (double c : a) s += c * c;
            return std::sqrt(s);
        }
        if (kind == "cosine") {
            double s = 0.0;
            for (double c : k) s += c * c;
            return std::abs(amplitude) * std::sqrt(s);
        }
        double L = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t j = i + 1; j < points.size(); ++j) {
                double d2 = 0.0;
                for (std::size_t c = 0; c < points[i].size(); ++c)
                    d2 += (points[i][c] - points[j][c]) * (points[i][c] - points[j][c]);
                if (d2 > 0) L = std::max(L, std::abs(values[i] - values[j]) / std::sqrt(d2));
            }
        return L;
    }

private:
    void load_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open payoff samples '" + path + "'");
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<double> row;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
            if (row.size() < 2) throw std::runtime_error("payoff sample rows need coordinates and a value");
            values.push_back(row.back());
            row.pop_back();
            points.push_back(std::move(row));
        }
    }
};

}  // namespace towgame
