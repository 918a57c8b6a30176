#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spcar/data_model.hpp"

namespace spcar {

struct LatLon {
    double lat = 0.0;  // degrees
    double lon = 0.0;  // degrees
};

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr double kDefaultTieEpsilonKm = 1e-6;
/// Geographic center of Florida.
inline constexpr LatLon kFloridaCentroid{28.6305, -82.4497};

double haversine_km(LatLon a, LatLon b);

/// Turns a nondecreasing sequence into a strictly increasing one: the j-th
/// member of a tie group (0-based, original order) is shifted by j*epsilon.
/// A shifted value that would reach the next input value is pushed to
/// previous + epsilon. Throws ContractError if `distances` is not sorted.
std::vector<double> strictify(std::span<const double> distances, double epsilon = kDefaultTieEpsilonKm);

/// One variable laid out along strictly increasing distance from a reference
/// point. gaps[0] = distances[0], gaps[i] = distances[i] - distances[i-1].
struct OrderedSeries {
    std::vector<std::string> site_ids;
    std::vector<double> distances;
    std::vector<double> gaps;
    std::vector<OptionalValue> values;
    std::vector<std::size_t> source_rows;  // row in the originating table
    std::size_t n_observed = 0;

    std::size_t size() const { return values.size(); }
    bool observed(std::size_t i) const { return values[i].has_value(); }

    /// Throws ContractError if any invariant is broken.
    void validate() const;

    /// Builds a series from already strictly increasing positive distances.
    static OrderedSeries from_distances(std::vector<double> distances, std::vector<OptionalValue> values);
};

/// Sorts the table's sites by strictified distance from `centroid` and packages
/// `variable` (a name from DesignTable::variable_names) in that order. Sites
/// lying on the centroid receive distance epsilon.
OrderedSeries make_ordered_series(const DesignTable& table, std::string_view variable, LatLon centroid,
                                  double epsilon = kDefaultTieEpsilonKm);

/// Same ordering for an arbitrary site list.
OrderedSeries make_ordered_series(std::span<const std::string> ids, std::span<const LatLon> sites,
                                  std::span<const OptionalValue> values, LatLon centroid,
                                  double epsilon = kDefaultTieEpsilonKm);

}  // namespace spcar
