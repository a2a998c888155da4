#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "towgame/vec.hpp"

namespace towgame {

enum class ShapeKind { Interval, Box, Ball, Annulus };

inline const char* to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::Interval: return "interval";
        case ShapeKind::Box: return "box";
        case ShapeKind::Ball: return "ball";
        case ShapeKind::Annulus: return "annulus";
    }
    return "unknown";
}

/**
 * Bounded open domain Omega in R^Dim.
 *
 * Membership is strict: points on the topological boundary are outside,
 * which is where the game pays out.
 */
template <int Dim>
class DomainShape {
public:
    static DomainShape interval(double a, double b)
        requires(Dim == 1)
    {
        if (!(std::isfinite(a) && std::isfinite(b)) || !(a < b))
            throw std::invalid_argument("interval requires finite a < b");
        DomainShape s(ShapeKind::Interval);
        s.lo_ = {a};
        s.hi_ = {b};
        return s;
    }

    static DomainShape box(const Vec<Dim>& lo, const Vec<Dim>& hi) {
        for (int d = 0; d < Dim; ++d) {
            if (!(std::isfinite(lo[d]) && std::isfinite(hi[d])) || !(lo[d] < hi[d]))
                throw std::invalid_argument("box requires finite lo < hi on every axis");
        }
        DomainShape s(Dim == 1 ? ShapeKind::Interval : ShapeKind::Box);
        s.lo_ = lo;
        s.hi_ = hi;
        return s;
    }

    static DomainShape ball(const Vec<Dim>& center, double radius) {
        check_finite(center);
        if (!std::isfinite(radius) || !(radius > 0))
            throw std::invalid_argument("ball requires a positive finite radius");
        DomainShape s(ShapeKind::Ball);
        s.center_ = center;
        s.r_out_ = radius;
        s.set_bbox_from_radius();
        return s;
    }

    static DomainShape annulus(const Vec<Dim>& center, double r_in, double r_out) {
        check_finite(center);
        if (!std::isfinite(r_in) || !std::isfinite(r_out) || !(r_in > 0) || !(r_in < r_out))
            throw std::invalid_argument("annulus requires 0 < r_in < r_out");
        DomainShape s(ShapeKind::Annulus);
        s.center_ = center;
        s.r_in_ = r_in;
        s.r_out_ = r_out;
        s.set_bbox_from_radius();
        return s;
    }

    ShapeKind kind() const { return kind_; }
    static constexpr int dimension() { return Dim; }

    /// Point about which grids are anchored.
    Vec<Dim> anchor() const {
        if (kind_ == ShapeKind::Ball || kind_ == ShapeKind::Annulus) return center_;
        return 0.5 * (lo_ + hi_);
    }
    const Vec<Dim>& center() const { return center_; }
    const Vec<Dim>& lower() const { return lo_; }
    const Vec<Dim>& upper() const { return hi_; }
    double inner_radius() const { return r_in_; }
    double outer_radius() const { return r_out_; }
    double radius() const { return r_out_; }

    bool contains(const Vec<Dim>& x) const { return signed_distance(x) < 0.0; }

    /// Negative inside Omega (minus the distance to the boundary), zero on
    /// the boundary, the distance to the closure of Omega outside.
    double signed_distance(const Vec<Dim>& x) const {
        switch (kind_) {
            case ShapeKind::Interval:
            case ShapeKind::Box: {
                double outside = 0.0;
                double inside = std::numeric_limits<double>::infinity();
                bool in = true;
                for (int d = 0; d < Dim; ++d) {
                    const double below = lo_[d] - x[d];
                    const double above = x[d] - hi_[d];
                    const double excess = std::max({below, above, 0.0});
                    outside += excess * excess;
                    if (below >= 0.0 || above >= 0.0) in = false;
                    inside = std::min(inside, std::min(-below, -above));
                }
                return in ? -inside : std::sqrt(outside);
            }
            case ShapeKind::Ball:
                return dist(x, center_) - r_out_;
            case ShapeKind::Annulus: {
                const double r = dist(x, center_);
                return std::max(r_in_ - r, r - r_out_);
            }
        }
        return 0.0;
    }

    double distance_to_boundary(const Vec<Dim>& x) const { return std::abs(signed_distance(x)); }

    /// Closest point of the boundary to an interior point x.
    Vec<Dim> boundary_projection(const Vec<Dim>& x) const {
        switch (kind_) {
            case ShapeKind::Interval:
            case ShapeKind::Box: {
                int axis = 0;
                bool upper = false;
                double best = std::numeric_limits<double>::infinity();
                for (int d = 0; d < Dim; ++d) {
                    if (x[d] - lo_[d] < best) { best = x[d] - lo_[d]; axis = d; upper = false; }
                    if (hi_[d] - x[d] < best) { best = hi_[d] - x[d]; axis = d; upper = true; }
                }
                Vec<Dim> y = x;
                y[axis] = upper ? hi_[axis] : lo_[axis];
                return y;
            }
            case ShapeKind::Ball:
            case ShapeKind::Annulus: {
                const Vec<Dim> v = x - center_;
                const double r = norm(v);
                Vec<Dim> dir{};
                if (r > 0) dir = (1.0 / r) * v;
                else dir[0] = 1.0;
                const double target =
                    (kind_ == ShapeKind::Annulus && r - r_in_ < r_out_ - r) ? r_in_ : r_out_;
                return center_ + target * dir;
            }
        }
        return x;
    }

    /// Axis-aligned bounding box of the closure of Omega.
    const Vec<Dim>& bbox_lower() const { return lo_; }
    const Vec<Dim>& bbox_upper() const { return hi_; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["kind"] = to_string(kind_);
        j["dimension"] = Dim;
        switch (kind_) {
            case ShapeKind::Interval:
                j["a"] = lo_[0];
                j["b"] = hi_[0];
                break;
            case ShapeKind::Box:
                j["lo"] = to_std(lo_);
                j["hi"] = to_std(hi_);
                break;
            case ShapeKind::Ball:
                j["center"] = to_std(center_);
                j["radius"] = r_out_;
                break;
            case ShapeKind::Annulus:
                j["center"] = to_std(center_);
                j["r_in"] = r_in_;
                j["r_out"] = r_out_;
                break;
        }
        return j;
    }

    static DomainShape from_json(const nlohmann::json& j) {
        const std::string kind = j.at("kind").get<std::string>();
        auto vec = [&](const char* key) {
            const auto xs = j.at(key).get<std::vector<double>>();
            if (static_cast<int>(xs.size()) != Dim)
                throw std::invalid_argument(std::string("shape field '") + key + "' has wrong dimension");
            return to_vec<Dim>(xs);
        };
        if (kind == "interval") {
            if constexpr (Dim == 1) return interval(j.at("a").get<double>(), j.at("b").get<double>());
            else throw std::invalid_argument("interval shapes are one-dimensional");
        }
        if (kind == "box") return box(vec("lo"), vec("hi"));
        if (kind == "ball") return ball(vec("center"), j.at("radius").get<double>());
        if (kind == "annulus")
            return annulus(vec("center"), j.at("r_in").get<double>(), j.at("r_out").get<double>());
        throw std::invalid_argument("unknown shape kind '" + kind + "'");
    }

private:
    explicit DomainShape(ShapeKind k) : kind_(k) {}

    static void check_finite(const Vec<Dim>& v) {
        for (double c : v)
            if (!std::isfinite(c)) throw std::invalid_argument("shape coordinates must be finite");
    }

    void set_bbox_from_radius() {
        for (int d = 0; d < Dim; ++d) {
            lo_[d] = center_[d] - r_out_;
            hi_[d] = center_[d] + r_out_;
        }
    }

    ShapeKind kind_;
    Vec<Dim> lo_{};
    Vec<Dim> hi_{};
    Vec<Dim> center_{};
    double r_in_ = 0.0;
    double r_out_ = 0.0;
};

enum class PointClass : std::uint8_t { Interior, BoundaryStrip };

/**
 * Uniform lattice discretization of Omega_eps = Omega u Gamma_eps.
 *
 * Lattice points are anchor + k*h for integer k. A lattice point is kept
 * when it lies in Omega (Interior) or outside Omega within distance eps of
 * it (BoundaryStrip). Points are ordered lexicographically by lattice
 * index, axis 0 most significant. Balls are closed: |y - x| <= eps.
 *
 * Immutable after construction.
 */
template <int Dim>
class DomainGrid {
public:
    using Point = Vec<Dim>;
    static constexpr double kMinRatio = 4.0;

    DomainGrid(DomainShape<Dim> shape, double epsilon, double h) : shape_(std::move(shape)), eps_(epsilon), h_(h) {
        if (!(epsilon > 0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
        if (!(h > 0) || !std::isfinite(h)) throw std::invalid_argument("grid spacing must be positive");
        if (h > epsilon / kMinRatio * (1.0 + 1e-12))
            throw std::invalid_argument("grid spacing must satisfy h <= epsilon/4");
        build();
    }

    const DomainShape<Dim>& shape() const { return shape_; }
    double epsilon() const { return eps_; }
    double spacing() const { return h_; }
    std::size_t size() const { return classes_.size(); }
    std::size_t interior_count() const { return interior_.size(); }
    std::size_t strip_count() const { return size() - interior_count(); }

    Point point(std::size_t i) const {
        Point x{};
        for (int d = 0; d < Dim; ++d) x[d] = coords_[i * Dim + d];
        return x;
    }
    PointClass classification(std::size_t i) const { return classes_[i]; }
    bool is_interior(std::size_t i) const { return classes_[i] == PointClass::Interior; }

    /// Indices of Interior points, ascending.
    std::span<const std::uint32_t> interior_indices() const { return interior_; }

    /// Closed eps-ball neighborhood of an Interior point, ascending indices.
    std::span<const std::uint32_t> interior_ball(std::size_t interior_rank) const {
        return std::span<const std::uint32_t>(nbr_.data() + nbr_offsets_[interior_rank],
                                              nbr_offsets_[interior_rank + 1] - nbr_offsets_[interior_rank]);
    }

    /// All grid indices j with |x_j - x_i| <= eps (i included), ascending.
    std::vector<std::uint32_t> ball_neighbors(std::size_t i) const {
        if (i >= size()) throw std::out_of_range("grid point index out of range");
        std::vector<std::uint32_t> out;
        const auto base = lattice_of(i);
        for (const auto& off : stencil_) {
            std::array<std::int64_t, Dim> k{};
            for (int d = 0; d < Dim; ++d) k[d] = base[d] + off[d];
            const auto j = lookup(k);
            if (j >= 0) out.push_back(static_cast<std::uint32_t>(j));
        }
        return out;
    }

    /// Grid indices within the closed ball B_r(x) for an arbitrary point x,
    /// ascending. Used by strategies acting on continuous positions.
    void points_within(const Point& x, double r, std::vector<std::uint32_t>& out) const {
        out.clear();
        std::array<std::int64_t, Dim> lo{}, hi{};
        for (int d = 0; d < Dim; ++d) {
            lo[d] = static_cast<std::int64_t>(std::ceil((x[d] - r - anchor_[d]) / h_ - 1e-9));
            hi[d] = static_cast<std::int64_t>(std::floor((x[d] + r - anchor_[d]) / h_ + 1e-9));
        }
        const double r2 = r * r * (1.0 + 1e-12);
        std::array<std::int64_t, Dim> k = lo;
        while (true) {
            const auto j = lookup(k);
            if (j >= 0) {
                double d2 = 0.0;
                for (int d = 0; d < Dim; ++d) {
                    const double delta = coords_[static_cast<std::size_t>(j) * Dim + d] - x[d];
                    d2 += delta * delta;
                }
                if (d2 <= r2) out.push_back(static_cast<std::uint32_t>(j));
            }
            int d = Dim - 1;
            while (d >= 0 && ++k[d] > hi[d]) { k[d] = lo[d]; --d; }
            if (d < 0) break;
        }
    }

    /// Nearest grid point to x, or -1 if none lies within one lattice cell.
    std::int64_t nearest(const Point& x) const {
        std::vector<std::uint32_t> cands;
        points_within(x, h_ * std::sqrt(static_cast<double>(Dim)), cands);
        std::int64_t best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (auto j : cands) {
            const double dj = dist(point(j), x);
            if (dj < best_d) { best_d = dj; best = j; }
        }
        return best;
    }

    /// Lattice cell containing x: lower corner lattice index and the local
    /// coordinates in [0,1)^Dim.
    void locate(const Point& x, std::array<std::int64_t, Dim>& cell, Point& frac) const {
        for (int d = 0; d < Dim; ++d) {
            const double t = (x[d] - anchor_[d]) / h_;
            const double f = std::floor(t);
            cell[d] = static_cast<std::int64_t>(f);
            frac[d] = t - f;
        }
    }

    /// Grid index of the lattice point k, or -1 when it is not part of the grid.
    std::int64_t lookup(const std::array<std::int64_t, Dim>& k) const {
        std::size_t lin = 0;
        for (int d = 0; d < Dim; ++d) {
            if (k[d] < kmin_[d] || k[d] > kmax_[d]) return -1;
            lin = lin * static_cast<std::size_t>(extent_[d]) + static_cast<std::size_t>(k[d] - kmin_[d]);
        }
        return table_[lin];
    }

    std::array<std::int64_t, Dim> lattice_of(std::size_t i) const {
        std::array<std::int64_t, Dim> k{};
        for (int d = 0; d < Dim; ++d) k[d] = lattice_[i * Dim + d];
        return k;
    }

    std::size_t stencil_size() const { return stencil_.size(); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["shape"] = shape_.to_json();
        j["epsilon"] = eps_;
        j["h"] = h_;
        j["points"] = size();
        j["interior"] = interior_count();
        j["boundary_strip"] = strip_count();
        return j;
    }

private:
    void build() {
        anchor_ = shape_.anchor();
        const double tol = 1e-9;
        std::size_t total = 1;
        for (int d = 0; d < Dim; ++d) {
            kmin_[d] = static_cast<std::int64_t>(std::ceil((shape_.bbox_lower()[d] - eps_ - anchor_[d]) / h_ - tol));
            kmax_[d] = static_cast<std::int64_t>(std::floor((shape_.bbox_upper()[d] + eps_ - anchor_[d]) / h_ + tol));
            extent_[d] = kmax_[d] - kmin_[d] + 1;
            total *= static_cast<std::size_t>(extent_[d]);
        }
        if (total > (std::size_t{1} << 31)) throw std::invalid_argument("grid too large");
        table_.assign(total, -1);

        const double strip_tol = tol * h_;
        std::array<std::int64_t, Dim> k = kmin_;
        for (std::size_t lin = 0; lin < total; ++lin) {
            Point x{};
            for (int d = 0; d < Dim; ++d) x[d] = anchor_[d] + static_cast<double>(k[d]) * h_;
            // Points within roundoff of the boundary count as on it.
            const double sd = shape_.signed_distance(x);
            PointClass cls;
            bool keep = true;
            if (sd < -strip_tol) cls = PointClass::Interior;
            else if (sd <= eps_ + strip_tol) cls = PointClass::BoundaryStrip;
            else keep = false;
            if (keep) {
                table_[lin] = static_cast<std::int32_t>(classes_.size());
                if (cls == PointClass::Interior) interior_.push_back(static_cast<std::uint32_t>(classes_.size()));
                classes_.push_back(cls);
                for (int d = 0; d < Dim; ++d) {
                    coords_.push_back(x[d]);
                    lattice_.push_back(k[d]);
                }
            }
            int d = Dim - 1;
            while (d >= 0 && ++k[d] > kmax_[d]) { k[d] = kmin_[d]; --d; }
        }
        if (interior_.empty()) throw std::invalid_argument("grid resolves no interior point");

        // Closed-ball stencil in lattice units, lexicographic order.
        const auto m = static_cast<std::int64_t>(std::floor(eps_ / h_ + tol));
        const double lim = (eps_ / h_) * (eps_ / h_) * (1.0 + 1e-12);
        std::array<std::int64_t, Dim> o{};
        o.fill(-m);
        while (true) {
            double r2 = 0.0;
            for (int d = 0; d < Dim; ++d) r2 += static_cast<double>(o[d] * o[d]);
            if (r2 <= lim) stencil_.push_back(o);
            int d = Dim - 1;
            while (d >= 0 && ++o[d] > m) { o[d] = -m; --d; }
            if (d < 0) break;
        }

        nbr_offsets_.reserve(interior_.size() + 1);
        nbr_offsets_.push_back(0);
        for (auto i : interior_) {
            const auto base = lattice_of(i);
            for (const auto& off : stencil_) {
                std::array<std::int64_t, Dim> q{};
                for (int d = 0; d < Dim; ++d) q[d] = base[d] + off[d];
                const auto j = lookup(q);
                if (j < 0) throw std::logic_error("interior ball leaves the grid; strip sampling has a hole");
                nbr_.push_back(static_cast<std::uint32_t>(j));
            }
            nbr_offsets_.push_back(nbr_.size());
        }
    }

    DomainShape<Dim> shape_;
    double eps_;
    double h_;
    Point anchor_{};
    std::array<std::int64_t, Dim> kmin_{}, kmax_{}, extent_{};
    std::vector<std::int32_t> table_;
    std::vector<double> coords_;
    std::vector<std::int64_t> lattice_;
    std::vector<PointClass> classes_;
    std::vector<std::uint32_t> interior_;
    std::vector<std::array<std::int64_t, Dim>> stencil_;
    std::vector<std::uint32_t> nbr_;
    std::vector<std::size_t> nbr_offsets_;
};

template <int Dim>
DomainGrid<Dim> build_grid(const DomainShape<Dim>& shape, double epsilon, double h) {
    return DomainGrid<Dim>(shape, epsilon, h);
}

}  // namespace towgame
