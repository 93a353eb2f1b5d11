#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>

namespace fregi {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * (kPi / 180.0); }
inline double rad2deg(double r) { return r * (180.0 / kPi); }

// Label classes used throughout; values are the on-disk u8 codes.
enum class AnatomyClass : std::uint8_t {
  background = 0,
  hemipelvis_l = 1,
  hemipelvis_r = 2,
  femur_l = 3,
  femur_r = 4,
  vertebrae = 5,
  sacrum = 6,
};

constexpr int kNumClasses = 7;

// The 14 bilateral landmark names, "<site>_<l|r>".
inline const std::array<std::string, 14>& landmark_names()
{
  static const std::array<std::string, 14> names = {
    "FH_l",   "FH_r",
    "GSN_l",  "GSN_r",
    "IOF_l",  "IOF_r",
    "MOF_l",  "MOF_r",
    "SPS_l",  "SPS_r",
    "IPS_l",  "IPS_r",
    "ASIS_l", "ASIS_r",
  };
  return names;
}

// Owning label class used to gate landmark extraction candidates.
AnatomyClass landmark_owner_class(const std::string& name);

}  // namespace fregi
