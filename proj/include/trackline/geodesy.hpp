#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trackline/error.hpp"
#include "trackline/time.hpp"

namespace trackline::geodesy {

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// Mean Earth radius used for all spherical distance/speed/error math [m].
constexpr double kEarthRadiusM = 6'371'008.8;

// WGS-84 ellipsoid, used only as the Cartesian frame for the position solver.
constexpr double kWgs84SemiMajorM = 6'378'137.0;
constexpr double kWgs84Flattening = 1.0 / 298.257223563;
constexpr double kWgs84Ecc2 = kWgs84Flattening * (2.0 - kWgs84Flattening);

/// All GPS carrier frequencies are integer multiples of this one constant.
constexpr double kFundamentalFreqMhz = 10.23;

constexpr double kKmhPerKnot = 1.852;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Geodetic position: latitude/longitude in degrees, altitude above MSL in meters.
struct GeoPoint {
  double lat_deg = 0.0;  // [-90, 90]
  double lon_deg = 0.0;  // (-180, 180]
  double alt_m = 0.0;
};

/// True iff lat/lon are in range and all fields are finite.
bool is_valid(const GeoPoint& p);

/// Earth-centered Earth-fixed Cartesian position [m].
struct EcefPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  EcefPoint operator-(const EcefPoint& o) const { return {x - o.x, y - o.y, z - o.z}; }
  EcefPoint operator+(const EcefPoint& o) const { return {x + o.x, y + o.y, z + o.z}; }
};

/// One satellite's known position and the measured pseudorange to it.
struct SatObservation {
  EcefPoint sat_pos;
  double pseudorange_m = 0.0;  // > 0
};

/// Output of the pseudorange solver.
struct PositionSolution {
  EcefPoint pos;
  double clock_bias_m = 0.0;  // c * receiver clock offset, signed
  int iterations = 0;
  double residual_rms_m = 0.0;
};

enum class GpsBand { L1, L2, L5 };

/// Carrier frequency in MHz: the fundamental frequency times the band multiplier
/// (154 for L1, 120 for L2, 115 for L5).
double carrier_frequency_mhz(GpsBand band);

// ---------------------------------------------------------------------------
// Spherical distance / speed
// ---------------------------------------------------------------------------

/// Great-circle distance on a sphere of radius kEarthRadiusM. Altitude is ignored.
double haversine_distance_m(const GeoPoint& a, const GeoPoint& b);

/// Initial bearing from a to b, degrees in [0, 360).
double bearing_deg(const GeoPoint& a, const GeoPoint& b);

/// Average ground speed between two timestamped positions, km/h.
/// Throws PreconditionError unless curr_t > prev_t.
double ground_speed_kmh(const GeoPoint& prev, SimTime prev_t, const GeoPoint& curr,
                        SimTime curr_t);

inline double knots_to_kmh(double knots) { return knots * kKmhPerKnot; }

// ---------------------------------------------------------------------------
// Geodetic <-> ECEF (WGS-84)
// ---------------------------------------------------------------------------

EcefPoint geodetic_to_ecef(const GeoPoint& p);

/// Inverse conversion by Bowring iteration. Throws Error if the latitude
/// iteration has not settled after max_iter steps.
GeoPoint ecef_to_geodetic(const EcefPoint& p, int max_iter = 20);

// ---------------------------------------------------------------------------
// Pseudorange trilateration
// ---------------------------------------------------------------------------

class SolveFailure : public Error {
 public:
  enum class Kind { Underdetermined, BadGeometry, NoConvergence };

  SolveFailure(Kind kind, const std::string& msg,
               std::optional<PositionSolution> last = std::nullopt)
      : Error(msg), kind(kind), last_iterate(std::move(last)) {}

  Kind kind;
  /// Populated for NoConvergence so callers can inspect where the iteration stalled.
  std::optional<PositionSolution> last_iterate;
};

/// Solve receiver position and clock bias from >= 4 pseudoranges by
/// Gauss-Newton least squares on r_i = rho_i - (|sat_i - pos| + bias).
///
/// Converges when the largest parameter update is below tol_m. Throws
/// SolveFailure: Underdetermined for < 4 observations, BadGeometry when the
/// normal matrix is singular or its condition estimate exceeds 1e12, and
/// NoConvergence (carrying the last iterate) when max_iter is exhausted.
PositionSolution solve_position(std::span<const SatObservation> obs,
                                const EcefPoint& initial, int max_iter = 20,
                                double tol_m = 1e-4);

// ---------------------------------------------------------------------------
// Routes and tracking error
// ---------------------------------------------------------------------------

/// Ground-truth path: timestamped waypoints, linearly interpolated between.
struct RouteWaypoint {
  SimTime t = 0;
  GeoPoint point;
};

struct Route {
  std::vector<RouteWaypoint> waypoints;

  SimTime start_time() const { return waypoints.front().t; }
  SimTime end_time() const { return waypoints.back().t; }
  bool covers(SimTime t) const {
    return !waypoints.empty() && t >= start_time() && t <= end_time();
  }
};

/// Throws Error unless the route has >= 2 waypoints, strictly increasing
/// timestamps, valid points, and consecutive waypoints no more than 10 km apart.
void validate_route(const Route& route);

/// Position at time t by linear interpolation in lat/lon/alt. A timestamp
/// exactly on a waypoint returns that waypoint. Throws Error outside the span.
GeoPoint route_position_at(const Route& route, SimTime t);

/// Speed of the interpolated motion at time t (piecewise constant per segment;
/// a waypoint time belongs to the outgoing segment, the final time to the last).
double route_speed_kmh_at(const Route& route, SimTime t);

/// Course of the segment containing t, degrees in [0, 360).
double route_course_deg_at(const Route& route, SimTime t);

/// One recorded sample for tracking-error evaluation.
struct TimedPoint {
  SimTime t = 0;
  GeoPoint point;
};

struct TrackErrorStats {
  double rmse_m = 0.0;
  double max_m = 0.0;
  std::vector<double> per_sample_m;
};

/// Per-sample distance between each recorded point and the truth route
/// interpolated at the same timestamp, plus RMSE and max. Throws Error on an
/// empty sample list or any timestamp outside the route span.
TrackErrorStats track_error(std::span<const TimedPoint> recorded, const Route& truth);

}  // namespace trackline::geodesy
