#include "qpn/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "qpn/errors.hpp"

namespace qpn {

namespace {

std::atomic<std::size_t> g_max_dimension{kDefaultMaxDimension};

void check_cap(std::size_t dim, const char* what) {
    if (dim > max_dimension()) {
        throw DimensionError(std::string(what) + " dimension " + std::to_string(dim) + " exceeds cap " +
                             std::to_string(max_dimension()));
    }
}

std::size_t checked_product(std::size_t a, std::size_t b, const char* what) {
    if (a != 0 && b > max_dimension() / a + 1) {
        throw DimensionError(std::string(what) + " dimension overflows the cap");
    }
    std::size_t p = a * b;
    check_cap(p, what);
    return p;
}

double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace

std::size_t max_dimension() { return g_max_dimension.load(); }

void set_max_dimension(std::size_t cap) {
    if (cap == 0) throw DimensionError("dimension cap must be positive");
    g_max_dimension.store(cap);
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

struct QuantumMap::ChoiCache {
    std::once_flag once;
    Matrix value;
};

QuantumMap::QuantumMap(std::size_t in, std::size_t out, std::vector<Matrix> kraus)
    : input_dim_(in), output_dim_(out), kraus_(std::move(kraus)), cache_(std::make_shared<ChoiCache>()) {}

QuantumMap QuantumMap::from_kraus(std::size_t input_dim, std::size_t output_dim, std::vector<Matrix> kraus) {
    if (input_dim == 0 || output_dim == 0) throw DimensionError("map dimensions must be positive");
    check_cap(input_dim, "input");
    check_cap(output_dim, "output");
    if (kraus.empty()) throw DimensionError("a Kraus set must be nonempty");
    for (const auto& k : kraus) {
        if (static_cast<std::size_t>(k.rows()) != output_dim || static_cast<std::size_t>(k.cols()) != input_dim) {
            throw DimensionError("Kraus operator is " + std::to_string(k.rows()) + "x" + std::to_string(k.cols()) +
                                 ", expected " + std::to_string(output_dim) + "x" + std::to_string(input_dim));
        }
        if (!k.allFinite()) throw MatrixError("Kraus operator has non-finite entries");
    }
    return QuantumMap(input_dim, output_dim, std::move(kraus));
}

QuantumMap QuantumMap::from_choi(std::size_t input_dim, std::size_t output_dim, const Matrix& choi, double tol) {
    if (input_dim == 0 || output_dim == 0) throw DimensionError("map dimensions must be positive");
    check_cap(input_dim, "input");
    check_cap(output_dim, "output");
    const auto n = static_cast<Eigen::Index>(input_dim * output_dim);
    if (choi.rows() != n || choi.cols() != n) {
        throw DimensionError("Choi matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (!choi.allFinite()) throw MatrixError("Choi matrix has non-finite entries");
    const double t = tol < 0 ? default_psd_tolerance(choi) : tol;
    if (!is_hermitian(choi, std::max(t, 1e-12))) throw MatrixError("Choi matrix is not Hermitian");

    Eigen::SelfAdjointEigenSolver<Matrix> es(choi);
    const auto& vals = es.eigenvalues();
    if (vals(0) < -t) {
        throw MatrixError("Choi matrix is not positive semidefinite (min eigenvalue " + std::to_string(vals(0)) + ")");
    }
    const double top = std::max(1.0, vals(vals.size() - 1));
    std::vector<Matrix> kraus;
    for (Eigen::Index j = vals.size() - 1; j >= 0; --j) {
        if (vals(j) <= 1e-13 * top) break;
        Vector u = es.eigenvectors().col(j) * std::sqrt(vals(j));
        kraus.emplace_back(Eigen::Map<Matrix>(u.data(), static_cast<Eigen::Index>(output_dim),
                                              static_cast<Eigen::Index>(input_dim)));
    }
    if (kraus.empty()) {
        kraus.push_back(Matrix::Zero(static_cast<Eigen::Index>(output_dim), static_cast<Eigen::Index>(input_dim)));
    }
    return QuantumMap(input_dim, output_dim, std::move(kraus));
}

const Matrix& QuantumMap::choi() const {
    std::call_once(cache_->once, [this] {
        const auto n = static_cast<Eigen::Index>(input_dim_ * output_dim_);
        Matrix c = Matrix::Zero(n, n);
        for (const auto& k : kraus_) {
            // Column-major storage of K is exactly the input-major vectorization.
            Eigen::Map<const Vector> v(k.data(), n);
            c.noalias() += v * v.adjoint();
        }
        cache_->value = std::move(c);
    });
    return cache_->value;
}

Matrix QuantumMap::apply(const Matrix& rho) const {
    if (static_cast<std::size_t>(rho.rows()) != input_dim_ || rho.rows() != rho.cols()) {
        throw DimensionError("state does not match map input dimension");
    }
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(output_dim_), static_cast<Eigen::Index>(output_dim_));
    for (const auto& k : kraus_) out.noalias() += k * rho * k.adjoint();
    return out;
}

Matrix QuantumMap::apply_dual(const Matrix& observable) const {
    if (static_cast<std::size_t>(observable.rows()) != output_dim_ || observable.rows() != observable.cols()) {
        throw DimensionError("observable does not match map output dimension");
    }
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(input_dim_), static_cast<Eigen::Index>(input_dim_));
    for (const auto& k : kraus_) out.noalias() += k.adjoint() * observable * k;
    return out;
}

EffectOperator::EffectOperator(Matrix m) : matrix_(std::move(m)) {
    if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) throw DimensionError("effect must be square");
}

QuantumMap identity_map(std::size_t dim) {
    if (dim == 0) throw DimensionError("identity dimension must be positive");
    check_cap(dim, "identity");
    const auto d = static_cast<Eigen::Index>(dim);
    return QuantumMap::from_kraus(dim, dim, {Matrix::Identity(d, d)});
}

QuantumMap tensor(const QuantumMap& a, const QuantumMap& b) {
    const std::size_t in = checked_product(a.input_dim(), b.input_dim(), "tensor input");
    const std::size_t out = checked_product(a.output_dim(), b.output_dim(), "tensor output");
    std::vector<Matrix> kraus;
    kraus.reserve(a.kraus().size() * b.kraus().size());
    for (const auto& ka : a.kraus()) {
        for (const auto& kb : b.kraus()) kraus.push_back(kron(ka, kb));
    }
    return QuantumMap::from_kraus(in, out, std::move(kraus));
}

QuantumMap compose(const QuantumMap& after, const QuantumMap& before) {
    if (before.output_dim() != after.input_dim()) {
        throw DimensionError("compose: output dimension " + std::to_string(before.output_dim()) +
                             " does not match input dimension " + std::to_string(after.input_dim()));
    }
    std::vector<Matrix> kraus;
    kraus.reserve(after.kraus().size() * before.kraus().size());
    for (const auto& ka : after.kraus()) {
        for (const auto& kb : before.kraus()) kraus.push_back(ka * kb);
    }
    return QuantumMap::from_kraus(before.input_dim(), after.output_dim(), std::move(kraus));
}

EffectOperator effect_of(const QuantumMap& m) {
    const auto d = static_cast<Eigen::Index>(m.input_dim());
    Matrix e = Matrix::Zero(d, d);
    for (const auto& k : m.kraus()) e.noalias() += k.adjoint() * k;
    return EffectOperator(std::move(e));
}

QuantumMap compress(const QuantumMap& m) {
    return QuantumMap::from_choi(m.input_dim(), m.output_dim(), m.choi(), std::numeric_limits<double>::infinity());
}

double choi_distance(const QuantumMap& a, const QuantumMap& b) {
    if (a.input_dim() != b.input_dim() || a.output_dim() != b.output_dim()) {
        throw DimensionError("choi_distance: maps have different signatures");
    }
    return (a.choi() - b.choi()).norm();
}

std::vector<std::size_t> permutation_table(const FactorLayout& from, const FactorLayout& to) {
    if (!from.is_permutation_of(to)) throw DimensionError("layouts are not permutations of each other");
    const std::size_t n = from.size();
    // Strides of each `from` factor when written in `to` order.
    std::vector<std::size_t> to_stride(to.size(), 1);
    for (std::size_t k = to.size(); k-- > 1;) to_stride[k - 1] = to_stride[k] * to.factors()[k].dim;
    std::vector<std::size_t> stride_of_from(n);
    std::vector<std::size_t> dims(n);
    for (std::size_t k = 0; k < n; ++k) {
        stride_of_from[k] = to_stride[*to.position(from.factors()[k].key)];
        dims[k] = from.factors()[k].dim;
    }
    const std::size_t total = from.total_dim();
    std::vector<std::size_t> table(total);
    std::vector<std::size_t> digit(n, 0);
    std::size_t target = 0;
    for (std::size_t idx = 0; idx < total; ++idx) {
        table[idx] = target;
        // Odometer increment over `from` digits, last factor fastest.
        for (std::size_t k = n; k-- > 0;) {
            if (++digit[k] < dims[k]) {
                target += stride_of_from[k];
                break;
            }
            target -= (dims[k] - 1) * stride_of_from[k];
            digit[k] = 0;
        }
    }
    return table;
}

Matrix permute_factors(const Matrix& mat, const FactorLayout& out_from, const FactorLayout& out_to,
                       const FactorLayout& in_from, const FactorLayout& in_to) {
    if (static_cast<std::size_t>(mat.rows()) != out_from.total_dim() ||
        static_cast<std::size_t>(mat.cols()) != in_from.total_dim()) {
        throw DimensionError("permute_factors: matrix does not match layouts");
    }
    const auto rows = permutation_table(out_from, out_to);
    const auto cols = permutation_table(in_from, in_to);
    Matrix out(mat.rows(), mat.cols());
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
        const auto tc = static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]);
        for (Eigen::Index r = 0; r < mat.rows(); ++r) {
            out(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]), tc) = mat(r, c);
        }
    }
    return out;
}

Matrix permute_factors(const Matrix& mat, const FactorLayout& from, const FactorLayout& to) {
    if (from == to) return mat;
    return permute_factors(mat, from, to, from, to);
}

QuantumMap permute_factors(const QuantumMap& m, const FactorLayout& in_from, const FactorLayout& in_to,
                           const FactorLayout& out_from, const FactorLayout& out_to) {
    if (in_from == in_to && out_from == out_to) return m;
    std::vector<Matrix> kraus;
    kraus.reserve(m.kraus().size());
    for (const auto& k : m.kraus()) kraus.push_back(permute_factors(k, out_from, out_to, in_from, in_to));
    return QuantumMap::from_kraus(m.input_dim(), m.output_dim(), std::move(kraus));
}

Matrix partial_trace(const Matrix& mat, const FactorLayout& layout, const std::set<FactorKey>& keep) {
    if (mat.rows() != mat.cols() || static_cast<std::size_t>(mat.rows()) != layout.total_dim()) {
        throw DimensionError("partial_trace: matrix does not match layout");
    }
    for (const auto& k : keep) {
        if (!layout.contains(k)) throw DimensionError("partial_trace: unknown factor " + to_string(k));
    }
    const FactorLayout kept = layout.only(keep);
    const FactorLayout traced = layout.without(keep);
    const Matrix arranged = permute_factors(mat, layout, kept.concat(traced));
    const auto k = static_cast<Eigen::Index>(kept.total_dim());
    const auto t = static_cast<Eigen::Index>(traced.total_dim());
    Matrix out = Matrix::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            Complex acc = 0;
            for (Eigen::Index s = 0; s < t; ++s) acc += arranged(i * t + s, j * t + s);
            out(i, j) = acc;
        }
    }
    return out;
}

Matrix extend_operator(const Matrix& op, const FactorLayout& sub, const FactorLayout& full) {
    if (op.rows() != op.cols() || static_cast<std::size_t>(op.rows()) != sub.total_dim()) {
        throw DimensionError("extend_operator: operator does not match its layout");
    }
    const FactorLayout rest = full.without(sub.keys());
    if (rest.size() + sub.size() != full.size()) {
        throw DimensionError("extend_operator: sub-layout is not contained in the full layout");
    }
    const auto r = static_cast<Eigen::Index>(rest.total_dim());
    return permute_factors(kron(op, Matrix::Identity(r, r)), sub.concat(rest), full);
}

EigenProbe min_eigen(const Matrix& hermitian) {
    if (hermitian.rows() != hermitian.cols() || hermitian.rows() == 0) {
        throw DimensionError("min_eigen: matrix must be square and nonempty");
    }
    const Matrix h = 0.5 * (hermitian + hermitian.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    return {es.eigenvalues()(0), es.eigenvectors().col(0)};
}

double default_psd_tolerance(const Matrix& m) {
    return std::max(1e-9 * static_cast<double>(m.rows()) * max_abs(m), std::numeric_limits<double>::min());
}

bool is_hermitian(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    return max_abs(m - m.adjoint()) <= tol;
}

bool is_psd(const EffectOperator& e, std::optional<double> tol) {
    const double t = tol.value_or(default_psd_tolerance(e.matrix()));
    if (!is_hermitian(e.matrix(), std::max(t, 1e-12))) throw MatrixError("is_psd: operator is not Hermitian");
    return min_eigen(e.matrix()).value >= -t;
}

bool loewner_geq(const EffectOperator& a, const EffectOperator& b, std::optional<double> tol) {
    if (a.dim() != b.dim()) throw DimensionError("loewner_geq: dimension mismatch");
    return is_psd(EffectOperator(a.matrix() - b.matrix()), tol);
}

CptniCheck is_cptni(std::size_t input_dim, std::size_t output_dim, const Matrix& choi, std::optional<double> tol) {
    const auto n = static_cast<Eigen::Index>(input_dim * output_dim);
    if (input_dim == 0 || output_dim == 0 || choi.rows() != n || choi.cols() != n) {
        throw DimensionError("malformed Choi matrix: expected " + std::to_string(n) + "x" + std::to_string(n));
    }
    const double t = tol.value_or(default_psd_tolerance(choi));
    if (!is_hermitian(choi, std::max(t, 1e-12))) throw MatrixError("Choi matrix is not Hermitian");
    CptniCheck out;
    out.min_choi_eigenvalue = min_eigen(choi).value;
    out.cp = out.min_choi_eigenvalue >= -t;
    // Effect = (tr_out C)^T.
    const auto in = static_cast<Eigen::Index>(input_dim);
    const auto od = static_cast<Eigen::Index>(output_dim);
    Matrix effect = Matrix::Zero(in, in);
    for (Eigen::Index i = 0; i < in; ++i) {
        for (Eigen::Index j = 0; j < in; ++j) {
            Complex acc = 0;
            for (Eigen::Index a = 0; a < od; ++a) acc += choi(i * od + a, j * od + a);
            effect(j, i) = acc;
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (effect + effect.adjoint()), Eigen::EigenvaluesOnly);
    out.max_effect_eigenvalue = es.eigenvalues()(in - 1);
    out.tni = out.max_effect_eigenvalue <= 1.0 + t;
    return out;
}

CptniCheck is_cptni(const QuantumMap& m, std::optional<double> tol) {
    const EffectOperator e = effect_of(m);
    CptniCheck out;
    // Kraus form is CP by construction; the Choi spectrum is still reported.
    out.min_choi_eigenvalue = min_eigen(m.choi()).value;
    out.cp = true;
    const double t = tol.value_or(default_psd_tolerance(e.matrix()) + 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (e.matrix() + e.matrix().adjoint()), Eigen::EigenvaluesOnly);
    out.max_effect_eigenvalue = es.eigenvalues()(es.eigenvalues().size() - 1);
    out.tni = out.max_effect_eigenvalue <= 1.0 + t;
    return out;
}

}  // namespace qpn
