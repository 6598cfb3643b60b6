#pragma once

namespace phevsim::units {

// All internal computation is SI (m, s, kg, N·m, W). These helpers convert
// at the boundaries only.
inline constexpr double kMphToMps = 0.44704;
inline constexpr double kMileToMeter = 1609.344;
inline constexpr double kLbToKg = 0.45359237;
inline constexpr double kInToM = 0.0254;
inline constexpr double kRpmToRadps = 0.10471975511965977;  // 2*pi/60

inline constexpr double mph_to_mps(double mph) { return mph * kMphToMps; }
inline constexpr double mps_to_mph(double mps) { return mps / kMphToMps; }
inline constexpr double miles_to_m(double mi) { return mi * kMileToMeter; }
inline constexpr double m_to_miles(double m) { return m / kMileToMeter; }
inline constexpr double rpm_to_radps(double rpm) { return rpm * kRpmToRadps; }
inline constexpr double radps_to_rpm(double w) { return w / kRpmToRadps; }

}  // namespace phevsim::units
