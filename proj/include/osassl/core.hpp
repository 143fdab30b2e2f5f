#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace osassl {

/// Base exception for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CityId {
    std::int64_t value = 0;

    friend constexpr auto operator<=>(const CityId&, const CityId&) = default;
};

struct TimeIndex {
    std::int64_t value = 1;

    friend constexpr auto operator<=>(const TimeIndex&, const TimeIndex&) = default;
};

// ============================================================================
// Schema
// ============================================================================

enum class CovariateKind { continuous, categorical };

/// Covariates with role `x` describe the city; role `swi` entries form the
/// SWI feature vector z.
enum class CovariateRole { x, swi };

struct CovariateEntry {
    std::string name;
    CovariateKind kind = CovariateKind::continuous;
    int levels = 0;  // categorical only, 2..5
    std::string group;
    CovariateRole role = CovariateRole::x;
};

class CovariateSchema {
public:
    CovariateSchema() = default;

    explicit CovariateSchema(std::vector<CovariateEntry> entries) : entries_(std::move(entries)) {
        std::set<std::string> seen;
        for (const auto& e : entries_) {
            if (e.name.empty())
                throw Error("schema: empty covariate name");
            if (!seen.insert(e.name).second)
                throw Error("schema: duplicate covariate name '" + e.name + "'");
            if (e.kind == CovariateKind::categorical) {
                if (e.levels < 2 || e.levels > 5)
                    throw Error("schema: categorical covariate '" + e.name + "' must have 2..5 levels");
                if (e.role == CovariateRole::swi)
                    throw Error("schema: SWI feature '" + e.name + "' must be continuous");
            }
            auto& bucket = e.role == CovariateRole::x ? x_index_ : z_index_;
            bucket.push_back(&e - entries_.data());
        }
    }

    const std::vector<CovariateEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Positions (into entries()) of the x covariates, in x-vector order.
    const std::vector<std::size_t>& x_entries() const { return x_index_; }
    /// Positions (into entries()) of the SWI features, in z-vector order.
    const std::vector<std::size_t>& z_entries() const { return z_index_; }

    std::size_t x_arity() const { return x_index_.size(); }
    std::size_t z_arity() const { return z_index_.size(); }

    std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].name == name)
                return i;
        return std::nullopt;
    }

    friend bool operator==(const CovariateSchema& a, const CovariateSchema& b) {
        if (a.entries_.size() != b.entries_.size())
            return false;
        for (std::size_t i = 0; i < a.entries_.size(); ++i) {
            const auto& l = a.entries_[i];
            const auto& r = b.entries_[i];
            if (l.name != r.name || l.kind != r.kind || l.levels != r.levels || l.group != r.group ||
                l.role != r.role)
                return false;
        }
        return true;
    }

private:
    std::vector<CovariateEntry> entries_;
    std::vector<std::size_t> x_index_;
    std::vector<std::size_t> z_index_;
};

// ============================================================================
// Observations and panels
// ============================================================================

/// One (city, year) record. A non-declared city carries a zero cost.
class Observation {
public:
    Observation() = default;

    Observation(CityId city, TimeIndex time, std::vector<double> x, std::vector<double> z, double y,
                bool declared)
        : city_(city), time_(time), x_(std::move(x)), z_(std::move(z)), y_(y), declared_(declared) {
        if (!std::isfinite(y_) || y_ < 0.0)
            throw Error("observation: cost must be finite and nonnegative");
        if (!declared_ && y_ != 0.0)
            throw Error("observation: non-declared city must have zero cost");
        for (double v : x_)
            if (!std::isfinite(v))
                throw Error("observation: missing or non-finite covariate value");
        for (double v : z_)
            if (!std::isfinite(v))
                throw Error("observation: missing or non-finite SWI value");
    }

    CityId city() const { return city_; }
    TimeIndex time() const { return time_; }
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& z() const { return z_; }
    double y() const { return y_; }
    bool declared() const { return declared_; }

    /// Same covariates, different cost (used by perturbation tests and ingestion).
    Observation with_cost(double y) const {
        return Observation(city_, time_, x_, z_, y, declared_);
    }

private:
    CityId city_{};
    TimeIndex time_{};
    std::vector<double> x_;
    std::vector<double> z_;
    double y_ = 0.0;
    bool declared_ = false;
};

/// All observations of one year, ordered by city id.
class PanelSlice {
public:
    PanelSlice() = default;

    PanelSlice(TimeIndex time, std::vector<Observation> observations)
        : time_(time), obs_(std::move(observations)) {
        std::sort(obs_.begin(), obs_.end(),
                  [](const Observation& a, const Observation& b) { return a.city() < b.city(); });
        for (std::size_t i = 0; i < obs_.size(); ++i) {
            if (obs_[i].time() != time_)
                throw Error("slice: observation time differs from slice time");
            if (i > 0 && obs_[i - 1].city() == obs_[i].city())
                throw Error("slice: duplicate city " + std::to_string(obs_[i].city().value));
        }
    }

    TimeIndex time() const { return time_; }
    const std::vector<Observation>& observations() const { return obs_; }
    std::size_t size() const { return obs_.size(); }
    const Observation& operator[](std::size_t i) const { return obs_[i]; }

    double total_cost() const {
        double s = 0.0;
        for (const auto& o : obs_)
            s += o.y();
        return s;
    }

private:
    TimeIndex time_{};
    std::vector<Observation> obs_;
};

/// Time-ordered slices over a fixed city set. Slices are shared between a
/// panel and its prefixes.
class Panel {
public:
    using SlicePtr = std::shared_ptr<const PanelSlice>;

    Panel() = default;

    Panel(CovariateSchema schema, std::vector<SlicePtr> slices, std::optional<double> cost_bound = std::nullopt)
        : schema_(std::move(schema)), slices_(std::move(slices)) {
        if (slices_.empty())
            throw Error("panel: at least one slice required");
        for (const auto& o : slices_.front()->observations())
            cities_.push_back(o.city());
        if (cities_.empty())
            throw Error("panel: empty city set");
        double max_y = 0.0;
        for (std::size_t s = 0; s < slices_.size(); ++s) {
            const auto& slice = *slices_[s];
            if (s > 0 && slice.time().value != slices_[s - 1]->time().value + 1)
                throw Error("panel: slices must be contiguous in time");
            if (slice.size() != cities_.size())
                throw Error("panel: slice at time " + std::to_string(slice.time().value) +
                            " does not cover the city set");
            for (std::size_t i = 0; i < slice.size(); ++i) {
                const auto& o = slice[i];
                if (o.city() != cities_[i])
                    throw Error("panel: slice at time " + std::to_string(slice.time().value) +
                                " does not cover the city set");
                check_conformance(o);
                max_y = std::max(max_y, o.y());
            }
        }
        cost_bound_ = cost_bound ? *cost_bound : (max_y > 0.0 ? 1.5 * max_y : 1.0);
        if (!(cost_bound_ > 0.0) || !std::isfinite(cost_bound_))
            throw Error("panel: cost bound must be positive and finite");
        if (max_y > cost_bound_)
            throw Error("panel: observed cost exceeds the cost bound");
    }

    static Panel from_slices(CovariateSchema schema, std::vector<PanelSlice> slices,
                             std::optional<double> cost_bound = std::nullopt) {
        std::vector<SlicePtr> ptrs;
        ptrs.reserve(slices.size());
        for (auto& s : slices)
            ptrs.push_back(std::make_shared<const PanelSlice>(std::move(s)));
        return Panel(std::move(schema), std::move(ptrs), cost_bound);
    }

    const CovariateSchema& schema() const { return schema_; }
    const std::vector<CityId>& cities() const { return cities_; }
    std::size_t num_cities() const { return cities_.size(); }
    std::size_t num_slices() const { return slices_.size(); }
    const PanelSlice& slice(std::size_t i) const { return *slices_[i]; }
    const std::vector<SlicePtr>& slice_ptrs() const { return slices_; }
    double cost_bound() const { return cost_bound_; }

    TimeIndex first_time() const { return slices_.front()->time(); }
    TimeIndex last_time() const { return slices_.back()->time(); }

    /// Slice holding time t.
    const PanelSlice& at(TimeIndex t) const {
        const auto off = t.value - first_time().value;
        if (off < 0 || off >= static_cast<std::int64_t>(slices_.size()))
            throw Error("panel: time " + std::to_string(t.value) + " out of range");
        return *slices_[static_cast<std::size_t>(off)];
    }

    /// Copy of this panel with the slice at time t replaced.
    Panel with_slice(TimeIndex t, PanelSlice replacement) const {
        auto slices = slices_;
        const auto off = t.value - first_time().value;
        if (off < 0 || off >= static_cast<std::int64_t>(slices.size()))
            throw Error("panel: time " + std::to_string(t.value) + " out of range");
        slices[static_cast<std::size_t>(off)] = std::make_shared<const PanelSlice>(std::move(replacement));
        return Panel(schema_, std::move(slices), cost_bound_);
    }

private:
    void check_conformance(const Observation& o) const {
        if (o.x().size() != schema_.x_arity() || o.z().size() != schema_.z_arity())
            throw Error("panel: observation arity does not match the schema");
        const auto& xs = schema_.x_entries();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto& e = schema_.entries()[xs[i]];
            if (e.kind != CovariateKind::categorical)
                continue;
            const double v = o.x()[i];
            if (v != std::floor(v) || v < 0.0 || v >= e.levels)
                throw Error("panel: covariate '" + e.name + "' has an invalid category code");
        }
    }

    CovariateSchema schema_;
    std::vector<CityId> cities_;
    std::vector<SlicePtr> slices_;
    double cost_bound_ = 1.0;
};

/// The sub-panel of slices with time <= t (the history F_t).
inline Panel history_prefix(const Panel& panel, TimeIndex t) {
    if (t < panel.first_time() || t > panel.last_time())
        throw Error("history_prefix: time " + std::to_string(t.value) + " out of range");
    const auto n = static_cast<std::size_t>(t.value - panel.first_time().value + 1);
    std::vector<Panel::SlicePtr> slices(panel.slice_ptrs().begin(),
                                        panel.slice_ptrs().begin() + static_cast<std::ptrdiff_t>(n));
    return Panel(panel.schema(), std::move(slices), panel.cost_bound());
}

// ============================================================================
// Dependency graph
// ============================================================================

class DependencyGraph {
public:
    DependencyGraph() = default;

    DependencyGraph(std::vector<CityId> vertices, const std::vector<std::pair<CityId, CityId>>& edges)
        : vertices_(std::move(vertices)) {
        std::sort(vertices_.begin(), vertices_.end());
        if (std::adjacent_find(vertices_.begin(), vertices_.end()) != vertices_.end())
            throw Error("graph: duplicate vertex");
        for (std::size_t i = 0; i < vertices_.size(); ++i)
            index_.emplace(vertices_[i].value, i);
        adjacency_.resize(vertices_.size());
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& [a, b] : edges) {
            if (a == b)
                throw Error("graph: self-loop on vertex " + std::to_string(a.value));
            const auto ia = index_of(a);
            const auto ib = index_of(b);
            if (!seen.insert(std::minmax(ia, ib)).second)
                continue;
            adjacency_[ia].push_back(ib);
            adjacency_[ib].push_back(ia);
        }
        for (auto& adj : adjacency_)
            std::sort(adj.begin(), adj.end());
    }

    const std::vector<CityId>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }

    std::size_t index_of(CityId c) const {
        const auto it = index_.find(c.value);
        if (it == index_.end())
            throw Error("graph: unknown vertex " + std::to_string(c.value));
        return it->second;
    }

    /// Neighbor indices of the vertex at position i.
    const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
    std::size_t neighbor_count(std::size_t i) const { return adjacency_[i].size(); }

    bool adjacent(std::size_t i, std::size_t j) const {
        return std::binary_search(adjacency_[i].begin(), adjacency_[i].end(), j);
    }

    std::size_t num_edges() const {
        std::size_t n = 0;
        for (const auto& adj : adjacency_)
            n += adj.size();
        return n / 2;
    }

    /// 1 + the largest number of edges incident to a vertex.
    std::size_t degree() const {
        std::size_t m = 0;
        for (const auto& adj : adjacency_)
            m = std::max(m, adj.size());
        return m + 1;
    }

private:
    std::vector<CityId> vertices_;
    std::unordered_map<std::int64_t, std::size_t> index_;
    std::vector<std::vector<std::size_t>> adjacency_;
};

struct DegreeStats {
    double min = 0;
    double q1 = 0;
    double median = 0;
    double mean = 0;
    double q3 = 0;
    double q99 = 0;
    double max = 0;
    std::size_t graph_degree = 1;
};

namespace detail {

// Type-7 (linear interpolation) sample quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Order statistics of per-vertex neighbor counts.
inline DegreeStats degree_stats(const DependencyGraph& graph) {
    if (graph.size() == 0)
        throw Error("empty graph");
    std::vector<double> counts;
    counts.reserve(graph.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        counts.push_back(static_cast<double>(graph.neighbor_count(i)));
        sum += counts.back();
    }
    std::sort(counts.begin(), counts.end());
    DegreeStats s;
    s.min = counts.front();
    s.max = counts.back();
    s.mean = sum / static_cast<double>(counts.size());
    s.q1 = detail::sorted_quantile(counts, 0.25);
    s.median = detail::sorted_quantile(counts, 0.5);
    s.q3 = detail::sorted_quantile(counts, 0.75);
    s.q99 = detail::sorted_quantile(counts, 0.99);
    s.graph_degree = static_cast<std::size_t>(s.max) + 1;
    return s;
}

}  // namespace osassl
