#pragma once

#include "ftcbf/simulator.hpp"

namespace fixtures {

using ftcbf::Mat;
using ftcbf::Vec;

inline Mat wmr_F() {
  Mat f = Mat::Zero(4, 4);
  f(0, 2) = 1.0;
  f(1, 3) = 1.0;
  return f;
}

inline Mat wmr_G() {
  Mat g = Mat::Zero(4, 2);
  g(2, 0) = 1.0;
  g(3, 1) = 1.0;
  return g;
}

inline Mat wmr_c() {
  Mat c = Mat::Zero(6, 4);
  c(0, 0) = 1.0;
  c(1, 0) = 1.0;
  c(2, 1) = 1.0;
  c(3, 1) = 1.0;
  c(4, 2) = 1.0;
  c(5, 3) = 1.0;
  return c;
}

inline Mat boeing_F() {
  Mat f(4, 4);
  f << -0.0558, -0.9968, 0.0802, 0.0415,
        0.598, -0.115, -0.0318, 0.0,
       -3.05, 0.388, -0.465, 0.0,
        0.0, 0.0805, 1.0, 0.0;
  return f;
}

inline Mat boeing_G() {
  Mat g(4, 3);
  g << 0.00729, 0.01, 0.005,
      -0.475, -0.5, -0.3,
       0.153, 0.2, 0.1,
       0.0, 0.0, 0.0;
  return g;
}

inline ftcbf::SystemModel wmr_model(double sigma = 0.01, double nu = 0.01) {
  return ftcbf::SystemModel::linear(wmr_F(), wmr_G(), wmr_c(), sigma * Mat::Identity(4, 4),
                                    nu * Mat::Identity(6, 6));
}

}  // namespace fixtures
