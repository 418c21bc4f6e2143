#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "smgark/integrators.hpp"
#include "smgark/tableau.hpp"

namespace smgark {

enum class CompositionFamily { TripleJump, Suzuki, AdvancedComposition, Custom };

/// Palindromic substep weights: one macro step of the composed scheme runs
/// the base scheme r times with step sizes gamma_i * H.
struct CompositionWeights {
  Vector gammas;
  // Order of the base scheme the weights were derived for.
  int base_order = 2;
  // Order the composition reaches when applied to such a base.
  int target_order = 4;
  CompositionFamily family = CompositionFamily::Custom;

  int steps() const { return static_cast<int>(gammas.size()); }
};

/// Three-substep palindrome raising a symmetric scheme of even order p by
/// two: gamma_1 = gamma_3 = 1/(2 - 2^{1/(p+1)}), gamma_2 the negative
/// middle weight.  Throws std::invalid_argument unless p is even and >= 2.
CompositionWeights triple_jump(int p);

/// Five-substep palindrome with the same effect whose partial sums all stay
/// inside [0, 1]: gamma_{1,2,4,5} = 1/(4 - 4^{1/(p+1)}), gamma_3 negative.
CompositionWeights suzuki(int p);

/// Weight sets of minimal substep count for a given target order (family
/// "advanced": r = 3, 7, 15, 31), or the variants whose step points stay in
/// the time window (family "advanced-window": r = 5, 9, 17, 33).  Loaded
/// from the bundled data file (see bundled_weights_path) and gated on
/// palindromic symmetry and the power-sum conditions up to the target order
/// before being returned.  Throws std::invalid_argument for orders other
/// than 4, 6, 8, 10 and std::runtime_error on file or validation problems.
CompositionWeights advanced_composition(int order, bool stay_in_window);

/// One named weight set of the plain-text exchange format: a header line
/// "family <name> order <p> r <count>" followed by count weights, one per
/// line, 17+ significant digits.
struct WeightSet {
  std::string family;
  int order = 0;
  Vector gammas;
};

/// Parses every set in the stream; throws std::runtime_error naming the
/// offending line on malformed input.
std::vector<WeightSet> read_weight_sets(std::istream& is);
void write_weight_sets(std::ostream& os, const std::vector<WeightSet>& sets);

/// Path of the weight data file: the SMGARK_WEIGHTS_FILE environment
/// variable when set, otherwise the location bundled at build time.
std::string bundled_weights_path();

/// Composed tableau: r scaled copies of the base scheme in sequence.  Fast
/// micro-step blocks are rescaled by r*gamma_i (micro-step sizes gamma_i*h),
/// the slow scheme becomes the r-fold concatenation with gamma_{i'} 1 b^T
/// fills, and the coupling blocks connect each copy to its own and earlier
/// copies only.  The composed scheme has r*M micro steps per macro step.
PartitionedMgarkTableau compose_tableau(const PartitionedMgarkTableau& t,
                                        const CompositionWeights& w);
MgarkTableau compose_tableau(const MgarkTableau& t,
                             const CompositionWeights& w);

/// Composed one-step map:  Psi_H = Phi_{gamma_r H} o ... o Phi_{gamma_1 H}.
/// Any stepper works as a base, including an already composed one.
Stepper compose_stepper(Stepper base, const CompositionWeights& w);

}  // namespace smgark
