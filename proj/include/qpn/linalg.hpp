#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "qpn/layout.hpp"

namespace qpn {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr std::size_t kDefaultMaxDimension = 4096;

/// Upper bound on any single input or output dimension a map may reach.
std::size_t max_dimension();
void set_max_dimension(std::size_t cap);

/// Restores the previous dimension cap on scope exit.
class DimensionCapScope {
public:
    explicit DimensionCapScope(std::size_t cap) : previous_(max_dimension()) { set_max_dimension(cap); }
    ~DimensionCapScope() { set_max_dimension(previous_); }
    DimensionCapScope(const DimensionCapScope&) = delete;
    DimensionCapScope& operator=(const DimensionCapScope&) = delete;

private:
    std::size_t previous_;
};

Matrix kron(const Matrix& a, const Matrix& b);

/// Completely positive map in Kraus form with a lazily computed Choi matrix.
///
/// The Choi matrix uses input-major ordering:
/// C[(i,a),(j,b)] = sum_k K_k[a,i] conj(K_k[b,j]), so row index i*out + a.
/// Instances are immutable; copies share the Choi cache.
class QuantumMap {
public:
    static QuantumMap from_kraus(std::size_t input_dim, std::size_t output_dim, std::vector<Matrix> kraus);
    /// Decomposes a Choi matrix into Kraus operators. Throws MatrixError when
    /// the matrix is not Hermitian or not positive semidefinite within `tol`
    /// (negative `tol` selects the default PSD tolerance).
    static QuantumMap from_choi(std::size_t input_dim, std::size_t output_dim, const Matrix& choi,
                                double tol = -1.0);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    const std::vector<Matrix>& kraus() const { return kraus_; }
    const Matrix& choi() const;

    Matrix apply(const Matrix& rho) const;
    /// Heisenberg-picture action: sum_k K_k^dagger X K_k.
    Matrix apply_dual(const Matrix& observable) const;

private:
    struct ChoiCache;

    QuantumMap(std::size_t in, std::size_t out, std::vector<Matrix> kraus);

    std::size_t input_dim_ = 1;
    std::size_t output_dim_ = 1;
    std::vector<Matrix> kraus_;
    std::shared_ptr<ChoiCache> cache_;
};

/// Hermitian operator E with tr(M(rho)) = tr(E rho) for the map it came from.
class EffectOperator {
public:
    EffectOperator() : matrix_(Matrix::Identity(1, 1)) {}
    explicit EffectOperator(Matrix m);

    const Matrix& matrix() const { return matrix_; }
    std::size_t dim() const { return static_cast<std::size_t>(matrix_.rows()); }

private:
    Matrix matrix_;
};

QuantumMap identity_map(std::size_t dim);
QuantumMap tensor(const QuantumMap& a, const QuantumMap& b);
QuantumMap compose(const QuantumMap& after, const QuantumMap& before);
EffectOperator effect_of(const QuantumMap& m);

/// Re-expresses a map with at most in*out Kraus operators via its Choi matrix.
QuantumMap compress(const QuantumMap& m);

/// Frobenius norm of the difference of the two Choi matrices.
double choi_distance(const QuantumMap& a, const QuantumMap& b);

/// Partial trace of `mat` (laid out by `layout`) keeping `keep`, which are
/// returned in `layout` order.
Matrix partial_trace(const Matrix& mat, const FactorLayout& layout, const std::set<FactorKey>& keep);

/// Conjugates `mat` by the unitary that reorders tensor factors `from` -> `to`.
Matrix permute_factors(const Matrix& mat, const FactorLayout& from, const FactorLayout& to);
/// Rows reordered `out_from` -> `out_to`, columns `in_from` -> `in_to`.
Matrix permute_factors(const Matrix& mat, const FactorLayout& out_from, const FactorLayout& out_to,
                       const FactorLayout& in_from, const FactorLayout& in_to);
QuantumMap permute_factors(const QuantumMap& m, const FactorLayout& in_from, const FactorLayout& in_to,
                           const FactorLayout& out_from, const FactorLayout& out_to);

/// Index table: position in `to` of each basis index of `from`.
std::vector<std::size_t> permutation_table(const FactorLayout& from, const FactorLayout& to);

/// Embeds an operator on `sub` into `full` as op (x) I_rest, in `full` order.
Matrix extend_operator(const Matrix& op, const FactorLayout& sub, const FactorLayout& full);

struct EigenProbe {
    double value = 0.0;
    Vector vector;
};

/// Smallest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
EigenProbe min_eigen(const Matrix& hermitian);

/// 1e-9 * dim * max|entry|.
double default_psd_tolerance(const Matrix& m);

bool is_hermitian(const Matrix& m, double tol);
bool is_psd(const EffectOperator& e, std::optional<double> tol = std::nullopt);
bool loewner_geq(const EffectOperator& a, const EffectOperator& b, std::optional<double> tol = std::nullopt);

struct CptniCheck {
    bool cp = false;
    bool tni = false;
    double min_choi_eigenvalue = 0.0;
    double max_effect_eigenvalue = 0.0;
};

CptniCheck is_cptni(const QuantumMap& m, std::optional<double> tol = std::nullopt);
/// Same test on a raw Choi matrix; throws DimensionError if its size is not in*out.
CptniCheck is_cptni(std::size_t input_dim, std::size_t output_dim, const Matrix& choi,
                    std::optional<double> tol = std::nullopt);

}  // namespace qpn
