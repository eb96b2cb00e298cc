#ifndef HYPOQL_QUASILIK_HPP
#define HYPOQL_QUASILIK_HPP

#include <atomic>
#include <functional>
#include <memory>
#include <optional>

#include "hypoql/model.hpp"
#include "hypoql/simulate.hpp"

namespace hypoql {

/// The covariance of the principal conditionally Gaussian part of a scaled
/// increment pair, assembled as [[C, C H_x*/2], [H_x C/2, V/3]] with
/// V = H_x C H_x*, together with its closed-form inverse blocks
///   S11 = C^{-1} + 3 H_x* V^{-1} H_x,  S12 = -6 H_x* V^{-1},
///   S21 = S12*,                        S22 = 12 V^{-1},
/// and log det S = log det C + log det V - d_Y log 12.
struct SBlocks {
    Mat C;        // d_x x d_x
    Mat off;      // C H_x* / 2, d_x x d_y
    Mat V;        // d_y x d_y
    double logdet_S = 0.0;
    Mat S11, S12, S21, S22;

    Mat assembled() const;         // the full (d_x+d_y)^2 matrix S
    Mat assembled_inverse() const; // the full closed-form inverse
};

/// Approximately centered scaled increment:
///   Dx = h^{-1/2} (Delta_j X - h A),  Dy = h^{-3/2} (Delta_j Y - h G_n),
/// stacked as (Dx, Dy) to match the block order of S.
struct Increment {
    long j = 0;
    Vec dx;
    Vec dy;
    Vec stacked() const {
        Vec d(dx.size() + dy.size());
        d << dx, dy;
        return d;
    }
};

/// C(z, theta1) = B B*.
Mat eval_C(const ModelSpec& model, const Vec& z, const Vec& theta1);

/// V(z, theta1, theta3) = H_x C H_x*.
Mat eval_V(const ModelSpec& model, const Vec& z, const Vec& theta1, const Vec& theta3);

/// S blocks from already-evaluated C and H_x, Cholesky-based. Throws
/// NotPositiveDefiniteError naming the failing sub-block.
SBlocks make_sblocks(const Mat& C, const Mat& Hx);

SBlocks eval_S(const ModelSpec& model, const Vec& z, const Vec& theta1, const Vec& theta3);

/// L_H = H_x[A] + (1/2) H_xx[C] + H_y[H].
Vec eval_LH(const ModelSpec& model, const Vec& z, const Vec& theta1, const Vec& theta2,
            const Vec& theta3);

/// G_n = H + (h/2) L_H.
Vec eval_Gn(const ModelSpec& model, const Vec& z, double h, const Vec& theta1,
            const Vec& theta2, const Vec& theta3);

/// The n centered increments of a path at the given parameters.
std::vector<Increment> increments(const SamplePath& path, const ModelSpec& model,
                                  const Vec& theta1, const Vec& theta2, const Vec& theta3);

/// A quasi-log-likelihood random field over one parameter block, bound to a
/// path and to fixed nuisance estimates. Evaluation is pure and thread-safe;
/// out-of-box points and positive-definiteness failures map to the -inf
/// sentinel (the latter are counted in diagnostics). Counters are shared
/// across copies and monotone under concurrency.
class QLField {
public:
    enum class Block { theta1_initial, theta2, theta3, theta1_improved };

    struct Bindings {
        std::optional<Vec> theta1;
        std::optional<Vec> theta2;
        std::optional<Vec> theta3;
    };

    QLField() = default;
    QLField(Block block, ParamBox box, std::function<double(const Vec&)> fn,
            Bindings bindings = {});

    double operator()(const Vec& theta) const;

    Block block() const { return block_; }
    int dim() const { return box_.dim(); }
    const ParamBox& box() const { return box_; }
    const Bindings& bindings() const { return bindings_; }
    long evaluations() const { return counters_->evals.load(std::memory_order_relaxed); }
    long pd_failures() const { return counters_->pd_failures.load(std::memory_order_relaxed); }

private:
    struct Counters {
        std::atomic<long> evals{0};
        std::atomic<long> pd_failures{0};
    };
    Block block_ = Block::theta1_initial;
    ParamBox box_;
    std::function<double(const Vec&)> fn_;
    Bindings bindings_;
    std::shared_ptr<Counters> counters_ = std::make_shared<Counters>();

    friend struct FieldBuilder;
};

const char* block_name(QLField::Block b);

/// theta1 |-> -1/2 sum_j { C(Z_{t_{j-1}},theta1)^{-1}[h^{-1}(Delta_j X)^{x2}]
///                         + log det C(Z_{t_{j-1}},theta1) }.
QLField field_theta1_initial(const SamplePath& path, const ModelSpec& model);

/// theta2 |-> -1/2 sum_j C(.,theta1_hat)^{-1}[h^{-1}(Delta_j X - h A(.,theta2))^{x2}].
QLField field_theta2(const SamplePath& path, const ModelSpec& model, const Vec& theta1_hat);

/// theta3 |-> -1/2 sum_j { S(.,theta1_hat,theta3)^{-1}[D_j^{x2}] + log det S },
/// with D_j = D_j(theta1_hat, theta2_hat, theta3).
QLField field_theta3(const SamplePath& path, const ModelSpec& model, const Vec& theta1_hat,
                     const Vec& theta2_hat);

/// theta1 |-> -1/2 sum_j { S(.,theta1,theta3_hat)^{-1}[D_j^{x2}] + log det S },
/// with D_j = D_j(theta1, theta2_hat, theta3_hat); D_j depends on theta1
/// through the H_xx[C] term of G_n.
QLField field_theta1_improved(const SamplePath& path, const ModelSpec& model,
                              const Vec& theta2_hat, const Vec& theta3_hat);

} // namespace hypoql

#endif
