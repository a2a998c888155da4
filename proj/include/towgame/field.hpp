#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/domain.hpp"

namespace towgame {

enum class FieldRole { BoundaryData, Iterate, Solution };

inline const char* to_string(FieldRole r) {
    switch (r) {
        case FieldRole::BoundaryData: return "boundary_data";
        case FieldRole::Iterate: return "iterate";
        case FieldRole::Solution: return "solution";
    }
    return "unknown";
}

inline FieldRole field_role_from_string(const std::string& s) {
    if (s == "boundary_data") return FieldRole::BoundaryData;
    if (s == "iterate") return FieldRole::Iterate;
    if (s == "solution") return FieldRole::Solution;
    throw std::invalid_argument("unknown field role '" + s + "'");
}

/// Boundary payoff F, evaluable at any point of the strip.
template <int Dim>
using Payoff = std::function<double(const Vec<Dim>&)>;

/// Scalar values on the points of a DomainGrid.
template <int Dim>
class ValueField {
public:
    using Grid = DomainGrid<Dim>;

    ValueField(std::shared_ptr<const Grid> grid, std::vector<double> values, FieldRole role)
        : grid_(std::move(grid)), values_(std::move(values)), role_(role) {
        if (!grid_) throw std::invalid_argument("field requires a grid");
        if (values_.size() != grid_->size()) throw std::invalid_argument("field size does not match grid");
    }

    ValueField(std::shared_ptr<const Grid> grid, double fill, FieldRole role)
        : ValueField(grid, std::vector<double>(grid ? grid->size() : 0, fill), role) {}

    const Grid& grid() const { return *grid_; }
    const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::size_t size() const { return values_.size(); }
    FieldRole role() const { return role_; }
    void set_role(FieldRole r) { role_ = r; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    double sup_norm() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    double strip_sup_norm() const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            if (!grid_->is_interior(i)) m = std::max(m, std::abs(values_[i]));
        return m;
    }

    double interior_sup_norm() const {
        double m = 0.0;
        for (auto i : grid_->interior_indices()) m = std::max(m, std::abs(values_[i]));
        return m;
    }

    /// Multilinear interpolation at an arbitrary point of Omega_eps. Missing
    /// cell corners (outside the sampled region) are dropped and the remaining
    /// weights renormalized.
    double interpolate(const Vec<Dim>& x) const {
        std::array<std::int64_t, Dim> cell{};
        Vec<Dim> frac{};
        grid_->locate(x, cell, frac);
        double acc = 0.0;
        double wsum = 0.0;
        for (int corner = 0; corner < (1 << Dim); ++corner) {
            std::array<std::int64_t, Dim> k = cell;
            double w = 1.0;
            for (int d = 0; d < Dim; ++d) {
                if (corner & (1 << d)) { k[d] += 1; w *= frac[d]; }
                else w *= 1.0 - frac[d];
            }
            if (w == 0.0) continue;
            const auto j = grid_->lookup(k);
            if (j < 0) continue;
            acc += w * values_[static_cast<std::size_t>(j)];
            wsum += w;
        }
        if (wsum <= 0.0) {
            const auto j = grid_->nearest(x);
            if (j < 0) throw std::out_of_range("interpolation point outside the grid");
            return values_[static_cast<std::size_t>(j)];
        }
        return acc / wsum;
    }

private:
    std::shared_ptr<const Grid> grid_;
    std::vector<double> values_;
    FieldRole role_;
};

/// Boundary data field: F on strip points, zero on Interior points.
template <int Dim>
ValueField<Dim> sample_boundary(std::shared_ptr<const DomainGrid<Dim>> grid, const Payoff<Dim>& F) {
    ValueField<Dim> f(grid, 0.0, FieldRole::BoundaryData);
    for (std::size_t i = 0; i < grid->size(); ++i)
        if (!grid->is_interior(i)) f[i] = F(grid->point(i));
    return f;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV with columns index,class,x0..x{Dim-1},value.
template <int Dim>
void write_field_csv(const ValueField<Dim>& f, std::ostream& os) {
    os << "index,class";
    for (int d = 0; d < Dim; ++d) os << ",x" << d;
    os << ",value\n";
    const auto& g = f.grid();
    for (std::size_t i = 0; i < f.size(); ++i) {
        os << i << ',' << (g.is_interior(i) ? "interior" : "strip");
        const auto x = g.point(i);
        for (int d = 0; d < Dim; ++d) os << ',' << format_double(x[d]);
        os << ',' << format_double(f[i]) << '\n';
    }
}

template <int Dim>
nlohmann::json field_metadata(const ValueField<Dim>& f) {
    nlohmann::json j;
    j["grid"] = f.grid().to_json();
    j["role"] = to_string(f.role());
    j["points"] = f.size();
    return j;
}

/// Reads a field back from its metadata (grid description) and CSV values.
template <int Dim>
ValueField<Dim> read_field(const nlohmann::json& meta, std::istream& csv) {
    const auto& gj = meta.at("grid");
    auto grid = std::make_shared<const DomainGrid<Dim>>(DomainShape<Dim>::from_json(gj.at("shape")),
                                                        gj.at("epsilon").get<double>(), gj.at("h").get<double>());
    std::vector<double> values;
    values.reserve(grid->size());
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        const auto pos = line.rfind(',');
        if (pos == std::string::npos) throw std::runtime_error("malformed field CSV row");
        values.push_back(std::stod(line.substr(pos + 1)));
    }
    if (values.size() != grid->size())
        throw std::runtime_error("field CSV row count does not match the grid description");
    return ValueField<Dim>(grid, std::move(values), field_role_from_string(meta.at("role").get<std::string>()));
}

}  // namespace towgame
