#pragma once

// Executable invariant suite: identities and inequalities that every build
// must satisfy on the shipped model systems.

#include <cstdint>
#include <string>
#include <vector>

#include "lydim/systems.hpp"

namespace lydim {

struct NamedSystem {
  std::string name;
  ModelSystem system;
};

/// Every model family with representative parameters (one non-affine circle,
/// one planar repeller whose branch derivatives are not co-ordered).
std::vector<NamedSystem> shipped_systems();

struct NamedMeasure {
  std::string name;
  std::string system;  // name in shipped_systems()
  ErgodicMeasureSpec measure;
};

/// The Bowen-equation pairs: Cantor (3,3), torus diag(2,3) and planar (3,4),
/// each with two Bernoulli measures.
std::vector<NamedMeasure> bowen_pairs();

struct IdentityCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;      // observed error or margin
  double tolerance = 0.0;
  std::string detail;
};

struct IdentityOptions {
  int triples = 1000;      // random (x, n, l, t) super-additivity draws
  int horizon = 30;        // QR vs SVD product length
  bool caratheodory = true;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

std::vector<IdentityCheck> verify_identities(const IdentityOptions& options);

}  // namespace lydim
