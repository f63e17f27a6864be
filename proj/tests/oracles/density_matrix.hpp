#pragma once

// Brute-force purification: two Werner pairs as a 16x16 density matrix,
// bilateral CNOT, Z measurement of the target pair, post-selection on equal
// outcomes. Qubit order A1 B1 A2 B2, A1 most significant.

#include <Eigen/Dense>
#include <array>
#include <cmath>

namespace oracle {

using Mat4 = Eigen::Matrix<double, 4, 4>;
using Mat16 = Eigen::Matrix<double, 16, 16>;

inline Mat4 werner_state(double f) {
  Eigen::Vector4d phi_plus(1, 0, 0, 1);
  phi_plus /= std::sqrt(2.0);
  Mat4 bell = phi_plus * phi_plus.transpose();
  return f * bell + (1.0 - f) / 3.0 * (Mat4::Identity() - bell);
}

inline int bit(int idx, int q) { return (idx >> (3 - q)) & 1; }

// Permutation matrix of CNOT(control, target) on 4 qubits.
inline Mat16 cnot(int control, int target) {
  Mat16 m = Mat16::Zero();
  for (int i = 0; i < 16; ++i) {
    int j = i;
    if (bit(i, control)) j ^= 1 << (3 - target);
    m(j, i) = 1.0;
  }
  return m;
}

struct PurifyResult {
  double success_prob;
  double fidelity;
};

inline PurifyResult purify(double f1, double f2) {
  const Mat4 r1 = werner_state(f1);  // A1 B1
  const Mat4 r2 = werner_state(f2);  // A2 B2
  // Kronecker product in order (A1 B1)(A2 B2) matches A1 B1 A2 B2.
  Mat16 rho;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) rho(i * 4 + k, j * 4 + l) = r1(i, j) * r2(k, l);
  const Mat16 u = cnot(1, 3) * cnot(0, 2);
  rho = u * rho * u.transpose();
  // Keep outcomes A2 == B2 and trace them out.
  Mat4 out = Mat4::Zero();
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      if (bit(i, 2) != bit(i, 3) || bit(j, 2) != bit(j, 3)) continue;
      if (bit(i, 2) != bit(j, 2)) continue;
      out(i >> 2, j >> 2) += rho(i, j);
    }
  }
  const double p = out.trace();
  Eigen::Vector4d phi_plus(1, 0, 0, 1);
  phi_plus /= std::sqrt(2.0);
  const double f = phi_plus.dot(out * phi_plus) / p;
  return {p, f};
}

}  // namespace oracle
