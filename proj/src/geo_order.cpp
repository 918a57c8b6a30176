#include "spcar/geo_order.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "spcar/error.hpp"

namespace spcar {

double haversine_km(LatLon a, LatLon b) {
    constexpr double deg = std::numbers::pi / 180.0;
    double dlat = (b.lat - a.lat) * deg;
    double dlon = (b.lon - a.lon) * deg;
    double s_lat = std::sin(dlat / 2.0);
    double s_lon = std::sin(dlon / 2.0);
    double h = s_lat * s_lat + std::cos(a.lat * deg) * std::cos(b.lat * deg) * s_lon * s_lon;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

std::vector<double> strictify(std::span<const double> distances, double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("tie epsilon must be positive");
    for (std::size_t i = 1; i < distances.size(); ++i)
        if (distances[i] < distances[i - 1])
            throw ContractError(fmt::format("strictify: input not sorted at position {}", i));

    std::vector<double> out(distances.begin(), distances.end());
    std::size_t rank_in_group = 0;
    for (std::size_t i = 1; i < out.size(); ++i) {
        rank_in_group = distances[i] == distances[i - 1] ? rank_in_group + 1 : 0;
        out[i] = distances[i] + static_cast<double>(rank_in_group) * epsilon;
        if (out[i] <= out[i - 1]) out[i] = out[i - 1] + epsilon;
    }
    return out;
}

void OrderedSeries::validate() const {
    const std::size_t n = values.size();
    if (distances.size() != n || gaps.size() != n || site_ids.size() != n || source_rows.size() != n)
        throw ContractError("ordered series: length mismatch");
    std::size_t observed_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double prev = i == 0 ? 0.0 : distances[i - 1];
        if (!(distances[i] > prev)) throw ContractError(fmt::format("ordered series: distance not increasing at {}", i));
        if (gaps[i] != distances[i] - prev) throw ContractError(fmt::format("ordered series: bad gap at {}", i));
        if (values[i]) {
            if (!std::isfinite(*values[i])) throw ContractError(fmt::format("ordered series: non-finite value at {}", i));
            ++observed_count;
        }
    }
    if (observed_count != n_observed) throw ContractError("ordered series: n_observed mismatch");
}

OrderedSeries OrderedSeries::from_distances(std::vector<double> distances, std::vector<OptionalValue> values) {
    if (distances.size() != values.size()) throw ContractError("ordered series: length mismatch");
    OrderedSeries s;
    const std::size_t n = distances.size();
    s.gaps.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.gaps[i] = distances[i] - (i == 0 ? 0.0 : distances[i - 1]);
    s.site_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.site_ids[i] = std::to_string(i + 1);
    s.source_rows.resize(n);
    std::iota(s.source_rows.begin(), s.source_rows.end(), std::size_t{0});
    s.n_observed = static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto& v) { return v.has_value(); }));
    s.distances = std::move(distances);
    s.values = std::move(values);
    s.validate();
    return s;
}

OrderedSeries make_ordered_series(std::span<const std::string> ids, std::span<const LatLon> sites,
                                  std::span<const OptionalValue> values, LatLon centroid, double epsilon) {
    const std::size_t n = sites.size();
    if (ids.size() != n || values.size() != n) throw ContractError("make_ordered_series: length mismatch");
    if (!(centroid.lat >= -90.0 && centroid.lat <= 90.0 && centroid.lon >= -180.0 && centroid.lon <= 180.0))
        throw ContractError("make_ordered_series: centroid out of range");

    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = std::max(haversine_km(centroid, sites[i]), epsilon);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });

    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = raw[order[i]];

    OrderedSeries s;
    s.distances = strictify(sorted, epsilon);
    s.gaps.resize(n);
    s.site_ids.reserve(n);
    s.values.reserve(n);
    s.source_rows = order;
    for (std::size_t i = 0; i < n; ++i) {
        s.gaps[i] = s.distances[i] - (i == 0 ? 0.0 : s.distances[i - 1]);
        s.site_ids.push_back(ids[order[i]]);
        s.values.push_back(values[order[i]]);
        if (s.values.back()) ++s.n_observed;
    }
    s.validate();
    return s;
}

OrderedSeries make_ordered_series(const DesignTable& table, std::string_view variable, LatLon centroid,
                                  double epsilon) {
    const std::size_t var = table.variable_index(variable);
    std::vector<std::string> ids;
    std::vector<LatLon> sites;
    std::vector<OptionalValue> values;
    for (const auto& row : table.rows) {
        ids.push_back(row.facility_id);
        sites.push_back({row.latitude, row.longitude});
        values.push_back(row.covariates[var]);
    }
    return make_ordered_series(ids, sites, values, centroid, epsilon);
}

}  // namespace spcar
