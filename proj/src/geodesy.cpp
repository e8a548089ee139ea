#include "trackline/geodesy.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace trackline::geodesy {

namespace {

constexpr double kPi = 3.14159265358979323846;

// --- small dense 4x4 helpers for the solver normal equations ---------------

using Mat4 = std::array<std::array<double, 4>, 4>;
using Vec4 = std::array<double, 4>;

double det3(double a, double b, double c, double d, double e, double f, double g,
            double h, double i) {
  return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
}

// Inverse by adjugate; returns false when the determinant is negligible
// relative to the matrix scale.
bool invert4(const Mat4& m, Mat4& inv) {
  Mat4 cof{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      double sub[9];
      int k = 0;
      for (int i = 0; i < 4; ++i) {
        if (i == r) continue;
        for (int j = 0; j < 4; ++j) {
          if (j == c) continue;
          sub[k++] = m[i][j];
        }
      }
      double minor = det3(sub[0], sub[1], sub[2], sub[3], sub[4], sub[5], sub[6], sub[7],
                          sub[8]);
      cof[r][c] = ((r + c) % 2 == 0) ? minor : -minor;
    }
  }
  double det = 0.0;
  for (int c = 0; c < 4; ++c) det += m[0][c] * cof[0][c];

  double scale = 0.0;
  for (const auto& row : m)
    for (double v : row) scale = std::max(scale, std::abs(v));
  if (std::abs(det) <= 1e-14 * std::pow(std::max(scale, 1e-300), 4.0) ||
      !std::isfinite(det))
    return false;

  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) inv[r][c] = cof[c][r] / det;  // adjugate transpose
  return true;
}

double norm1(const Mat4& m) {
  double best = 0.0;
  for (int c = 0; c < 4; ++c) {
    double s = 0.0;
    for (int r = 0; r < 4; ++r) s += std::abs(m[r][c]);
    best = std::max(best, s);
  }
  return best;
}

}  // namespace

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat_deg) && std::isfinite(p.lon_deg) && std::isfinite(p.alt_m) &&
         p.lat_deg >= -90.0 && p.lat_deg <= 90.0 && p.lon_deg > -180.0 &&
         p.lon_deg <= 180.0;
}

double carrier_frequency_mhz(GpsBand band) {
  switch (band) {
    case GpsBand::L1: return 154 * kFundamentalFreqMhz;
    case GpsBand::L2: return 120 * kFundamentalFreqMhz;
    case GpsBand::L5: return 115 * kFundamentalFreqMhz;
  }
  throw Error("unknown GPS band");
}

double haversine_distance_m(const GeoPoint& a, const GeoPoint& b) {
  double phi1 = a.lat_deg * kDegToRad;
  double phi2 = b.lat_deg * kDegToRad;
  double dphi = (b.lat_deg - a.lat_deg) * kDegToRad;
  double dlam = (b.lon_deg - a.lon_deg) * kDegToRad;
  double s1 = std::sin(dphi / 2.0);
  double s2 = std::sin(dlam / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double bearing_deg(const GeoPoint& a, const GeoPoint& b) {
  double phi1 = a.lat_deg * kDegToRad;
  double phi2 = b.lat_deg * kDegToRad;
  double dlam = (b.lon_deg - a.lon_deg) * kDegToRad;
  double y = std::sin(dlam) * std::cos(phi2);
  double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlam);
  if (x == 0.0 && y == 0.0) return 0.0;  // coincident points
  double deg = std::atan2(y, x) * kRadToDeg;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double ground_speed_kmh(const GeoPoint& prev, SimTime prev_t, const GeoPoint& curr,
                        SimTime curr_t) {
  if (curr_t <= prev_t)
    throw PreconditionError("ground_speed: timestamps must be strictly increasing");
  double meters = haversine_distance_m(prev, curr);
  double seconds = seconds_from_duration(curr_t - prev_t);
  return meters / seconds * 3.6;
}

EcefPoint geodetic_to_ecef(const GeoPoint& p) {
  double lat = p.lat_deg * kDegToRad;
  double lon = p.lon_deg * kDegToRad;
  double sin_lat = std::sin(lat), cos_lat = std::cos(lat);
  double n = kWgs84SemiMajorM / std::sqrt(1.0 - kWgs84Ecc2 * sin_lat * sin_lat);
  return {(n + p.alt_m) * cos_lat * std::cos(lon),
          (n + p.alt_m) * cos_lat * std::sin(lon),
          (n * (1.0 - kWgs84Ecc2) + p.alt_m) * sin_lat};
}

GeoPoint ecef_to_geodetic(const EcefPoint& p, int max_iter) {
  double lon = std::atan2(p.y, p.x);
  double rho = std::hypot(p.x, p.y);

  // Bowring's fixed-point iteration on geodetic latitude.
  double lat = std::atan2(p.z, rho * (1.0 - kWgs84Ecc2));
  bool settled = false;
  for (int i = 0; i < max_iter; ++i) {
    double sin_lat = std::sin(lat);
    double n = kWgs84SemiMajorM / std::sqrt(1.0 - kWgs84Ecc2 * sin_lat * sin_lat);
    double next = std::atan2(p.z + kWgs84Ecc2 * n * sin_lat, rho);
    double delta = std::abs(next - lat);
    lat = next;
    if (delta < 1e-13) {
      settled = true;
      break;
    }
  }
  if (!settled) throw Error("ecef_to_geodetic: latitude iteration did not converge");

  double sin_lat = std::sin(lat), cos_lat = std::cos(lat);
  double n = kWgs84SemiMajorM / std::sqrt(1.0 - kWgs84Ecc2 * sin_lat * sin_lat);
  // Near the poles rho/cos(lat) degenerates; use the z-based form there.
  double alt = (std::abs(cos_lat) > 1e-8) ? rho / cos_lat - n
                                          : p.z / sin_lat - n * (1.0 - kWgs84Ecc2);
  return {lat * kRadToDeg, lon * kRadToDeg, alt};
}

PositionSolution solve_position(std::span<const SatObservation> obs,
                                const EcefPoint& initial, int max_iter, double tol_m) {
  if (obs.size() < 4)
    throw SolveFailure(SolveFailure::Kind::Underdetermined,
                       "solve_position: need at least 4 satellite observations, got " +
                           std::to_string(obs.size()));
  for (const auto& o : obs)
    if (!(o.pseudorange_m > 0.0) || !std::isfinite(o.pseudorange_m))
      throw PreconditionError("solve_position: pseudoranges must be positive and finite");

  const std::size_t n = obs.size();
  EcefPoint pos = initial;
  double bias = 0.0;

  auto residual_rms = [&](const EcefPoint& at, double b) {
    double sum = 0.0;
    for (const auto& o : obs) {
      double r = o.pseudorange_m - ((o.sat_pos - at).norm() + b);
      sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(n));
  };

  int iter = 0;
  while (iter < max_iter) {
    ++iter;

    // Jacobian row i: d(predicted_i)/d(x,y,z,bias) = [-u_i, 1] with u_i the
    // unit vector from the current estimate to satellite i.
    Mat4 ata{};
    Vec4 atr{};
    for (const auto& o : obs) {
      EcefPoint d = o.sat_pos - pos;
      double range = d.norm();
      if (range < 1.0)
        throw SolveFailure(SolveFailure::Kind::BadGeometry,
                           "solve_position: iterate collided with a satellite");
      Vec4 row = {-d.x / range, -d.y / range, -d.z / range, 1.0};
      double r = o.pseudorange_m - (range + bias);
      for (int a = 0; a < 4; ++a) {
        atr[a] += row[a] * r;
        for (int b = 0; b < 4; ++b) ata[a][b] += row[a] * row[b];
      }
    }

    Mat4 inv;
    if (!invert4(ata, inv))
      throw SolveFailure(SolveFailure::Kind::BadGeometry,
                         "solve_position: singular normal matrix (degenerate satellite "
                         "geometry)");
    double cond = norm1(ata) * norm1(inv);
    if (!(cond < 1e12))
      throw SolveFailure(SolveFailure::Kind::BadGeometry,
                         "solve_position: ill-conditioned geometry (cond ~ " +
                             std::to_string(cond) + ")");

    Vec4 delta{};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) delta[a] += inv[a][b] * atr[b];

    // Max-step clamp: a far initial guess can make the first undamped step
    // overshoot by orders of magnitude, past where every satellite direction
    // collapses to near-parallel. Any Earth-scale correction fits well under
    // the cap, so converging runs never see it.
    double step = std::sqrt(delta[0] * delta[0] + delta[1] * delta[1] +
                            delta[2] * delta[2] + delta[3] * delta[3]);
    constexpr double kMaxStepM = 5e7;
    if (step > kMaxStepM)
      for (double& v : delta) v *= kMaxStepM / step;

    pos.x += delta[0];
    pos.y += delta[1];
    pos.z += delta[2];
    bias += delta[3];

    double max_update = 0.0;
    for (double v : delta) max_update = std::max(max_update, std::abs(v));
    if (max_update < tol_m)
      return {pos, bias, iter, residual_rms(pos, bias)};
  }

  PositionSolution last{pos, bias, iter, residual_rms(pos, bias)};
  throw SolveFailure(SolveFailure::Kind::NoConvergence,
                     "solve_position: no convergence in " + std::to_string(max_iter) +
                         " iterations",
                     last);
}

void validate_route(const Route& route) {
  if (route.waypoints.size() < 2) throw Error("route needs at least 2 waypoints");
  for (std::size_t i = 0; i < route.waypoints.size(); ++i) {
    const auto& wp = route.waypoints[i];
    if (!is_valid(wp.point))
      throw Error("route waypoint " + std::to_string(i) + " is not a valid position");
    if (i > 0) {
      if (wp.t <= route.waypoints[i - 1].t)
        throw Error("route timestamps must be strictly increasing (waypoint " +
                    std::to_string(i) + ")");
      double gap = haversine_distance_m(route.waypoints[i - 1].point, wp.point);
      if (gap > 10'000.0)
        throw Error("route segment " + std::to_string(i - 1) + " longer than 10 km (" +
                    std::to_string(gap) + " m)");
    }
  }
}

namespace {

// Index of the segment [i, i+1] bracketing t; exact waypoint hits resolve to
// the outgoing segment (the last waypoint to the final segment).
std::size_t segment_index(const Route& route, SimTime t) {
  if (!route.covers(t))
    throw Error("time " + format_iso8601(t) + " outside route span [" +
                format_iso8601(route.start_time()) + ", " +
                format_iso8601(route.end_time()) + "]");
  std::size_t lo = 0;
  for (std::size_t i = 0; i + 1 < route.waypoints.size(); ++i) {
    if (t >= route.waypoints[i].t) lo = i;
    if (t < route.waypoints[i + 1].t) break;
  }
  return lo;
}

}  // namespace

GeoPoint route_position_at(const Route& route, SimTime t) {
  std::size_t i = segment_index(route, t);
  const auto& a = route.waypoints[i];
  const auto& b = route.waypoints[i + 1];
  if (t == a.t) return a.point;
  if (t == b.t) return b.point;
  double f = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
  return {a.point.lat_deg + f * (b.point.lat_deg - a.point.lat_deg),
          a.point.lon_deg + f * (b.point.lon_deg - a.point.lon_deg),
          a.point.alt_m + f * (b.point.alt_m - a.point.alt_m)};
}

double route_speed_kmh_at(const Route& route, SimTime t) {
  std::size_t i = segment_index(route, t);
  const auto& a = route.waypoints[i];
  const auto& b = route.waypoints[i + 1];
  return ground_speed_kmh(a.point, a.t, b.point, b.t);
}

double route_course_deg_at(const Route& route, SimTime t) {
  std::size_t i = segment_index(route, t);
  return bearing_deg(route.waypoints[i].point, route.waypoints[i + 1].point);
}

TrackErrorStats track_error(std::span<const TimedPoint> recorded, const Route& truth) {
  validate_route(truth);
  if (recorded.empty()) throw Error("track_error: no recorded samples");
  TrackErrorStats stats;
  stats.per_sample_m.reserve(recorded.size());
  double sum_sq = 0.0;
  for (const auto& sample : recorded) {
    GeoPoint ref = route_position_at(truth, sample.t);  // throws if out of span
    double err = haversine_distance_m(sample.point, ref);
    stats.per_sample_m.push_back(err);
    stats.max_m = std::max(stats.max_m, err);
    sum_sq += err * err;
  }
  stats.rmse_m = std::sqrt(sum_sq / static_cast<double>(recorded.size()));
  return stats;
}

}  // namespace trackline::geodesy
