#pragma once

#include "scatterkit/numeric.hpp"
#include "scatterkit/operator_core.hpp"

namespace scatterkit {

// Semifinite-trace desk model: tau(A) = sum_i w_i A_ii with positive weights.
// The uniform weight recovers the ordinary matrix trace.
class TraceWeight {
  public:
    explicit TraceWeight(RealVector weights);
    static TraceWeight uniform(int dim) { return TraceWeight(RealVector::Ones(dim)); }

    int dim() const { return static_cast<int>(w_.size()); }
    const RealVector& weights() const { return w_; }
    double total() const { return w_.sum(); }  // tau(I)

  private:
    RealVector w_;
};

cxd trace(const Matrix& a, const TraceWeight& w);

// Singular values, descending; computed from the eigenvalues of A*A with
// negative round-off clamped to zero.
RealVector singular_values(const Matrix& a);

// ||A||_p with respect to the weighted trace; p in [1, inf]. p = inf is the
// operator norm regardless of weights; non-uniform weights for other p are a
// desk-model extension computed through tau(|A|^p).
double schatten_norm(const Matrix& a, double p, const TraceWeight& w);
double schatten_norm(const Matrix& a, double p);  // uniform weight

// T = G1* G with G = |T|^{1/2} and G1* = V |T|^{1/2} (V the polar partial
// isometry). Both factors are Hilbert-Schmidt with ||G||_2^2 = ||T||_1.
struct CommutatorFactorization {
    Matrix G;
    Matrix G1;
    Matrix T;
};

CommutatorFactorization factor_commutator(const Matrix& t, double support_tol = 1e-13);

}  // namespace scatterkit
