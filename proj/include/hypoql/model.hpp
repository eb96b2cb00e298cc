#ifndef HYPOQL_MODEL_HPP
#define HYPOQL_MODEL_HPP

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "hypoql/errors.hpp"

namespace hypoql {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ConstVecRef = Eigen::Ref<const Eigen::VectorXd>;

/// Dimensions of the state and of the three parameter blocks.
/// The state z = (x, y) splits into the rough component x (dimension d_x,
/// carries the Wiener noise of dimension r) and the smooth component y
/// (dimension d_y, driven by H dt only).
struct Dimensions {
    int d_x = 1;
    int d_y = 1;
    int r = 1;
    int p1 = 1;
    int p2 = 1;
    int p3 = 1;

    int d_z() const { return d_x + d_y; }

    void validate() const {
        if (d_x < 1 || d_y < 1 || r < 1 || p1 < 1 || p2 < 1 || p3 < 1)
            throw InvalidArgumentError("all dimensions must be >= 1");
    }
};

/// Bounded box for one parameter block, lower < upper componentwise.
struct ParamBox {
    Vec lower;
    Vec upper;

    ParamBox() = default;
    ParamBox(Vec lo, Vec up) : lower(std::move(lo)), upper(std::move(up)) {
        validate();
    }
    static ParamBox cube(int dim, double lo, double up) {
        return ParamBox(Vec::Constant(dim, lo), Vec::Constant(dim, up));
    }

    int dim() const { return static_cast<int>(lower.size()); }
    Vec center() const { return 0.5 * (lower + upper); }
    Vec width() const { return upper - lower; }

    /// Containment in the closed box.
    bool contains(const Vec& v) const {
        if (v.size() != lower.size()) return false;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (!(v[i] >= lower[i] && v[i] <= upper[i])) return false;
        }
        return true;
    }
    /// Strict interior.
    bool interior(const Vec& v) const {
        if (v.size() != lower.size()) return false;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (!(v[i] > lower[i] && v[i] < upper[i])) return false;
        }
        return true;
    }
    Vec clip(Vec v) const {
        return v.cwiseMax(lower).cwiseMin(upper);
    }

    void validate() const {
        if (lower.size() != upper.size() || lower.size() == 0)
            throw InvalidArgumentError("parameter box: bounds size mismatch");
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
                throw InvalidArgumentError("parameter box: need finite lower < upper");
        }
    }
};

/// The three parameter sub-vectors.
struct ThetaBlocks {
    Vec theta1;
    Vec theta2;
    Vec theta3;
};

/// Parametric degenerate diffusion
///   dX = A(Z, theta2) dt + B(Z, theta1) dw,   dY = H(Z, theta3) dt.
///
/// Coefficients and their derivatives are supplied as callbacks writing into
/// caller-provided outputs (resized by the callee as needed). Evaluators must
/// be pure functions of their arguments; a ModelSpec is then shareable across
/// threads. C = B B* is always computed from B, never user-supplied.
struct ModelSpec {
    std::string name = "custom";
    Dimensions dims;
    std::array<ParamBox, 3> boxes;

    // A(z, theta2) -> d_x
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th2, Vec& out)> drift;
    // B(z, theta1) -> d_x x r
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th1, Mat& out)> diffusion;
    // H(z, theta3) -> d_y
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th3, Vec& out)> smooth_drift;
    // H_x(z, theta3) -> d_y x d_x
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th3, Mat& out)> smooth_dx;
    // H_xx(z, theta3) -> d_y matrices of size d_x x d_x
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th3, std::vector<Mat>& out)> smooth_dxx;
    // H_y(z, theta3) -> d_y x d_y
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th3, Mat& out)> smooth_dy;
    // d/dtheta1 C(z, theta1) -> p1 matrices of size d_x x d_x
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th1, std::vector<Mat>& out)> cov_d1;
    // d/dtheta2 A(z, theta2) -> d_x x p2
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th2, Mat& out)> drift_d2;
    // d/dtheta3 H(z, theta3) -> d_y x p3
    std::function<void(ConstVecRef x, ConstVecRef y, const Vec& th3, Mat& out)> smooth_d3;

    // Structure hints used to hoist work out of per-increment loops.
    // diffusion_state_independent: B(z, theta1) does not depend on z.
    // hx_state_independent: H_x(z, theta3) does not depend on z (this forces
    // H_xx == 0). Both built-ins satisfy both. validate_model spot-checks the
    // claims when set.
    bool diffusion_state_independent = false;
    bool hx_state_independent = false;

    // True when the derivative callbacks were generated by finite differences
    // rather than supplied analytically; surfaced in validation reports.
    bool fd_derivatives = false;

    const ParamBox& box1() const { return boxes[0]; }
    const ParamBox& box2() const { return boxes[1]; }
    const ParamBox& box3() const { return boxes[2]; }

    bool theta_in_boxes(const ThetaBlocks& th) const {
        return boxes[0].contains(th.theta1) && boxes[1].contains(th.theta2) &&
               boxes[2].contains(th.theta3);
    }
};

/// Convenience by-value wrappers (tests, validation, cold paths).
Vec eval_drift(const ModelSpec& m, const Vec& z, const Vec& th2);
Mat eval_diffusion(const ModelSpec& m, const Vec& z, const Vec& th1);
Vec eval_smooth_drift(const ModelSpec& m, const Vec& z, const Vec& th3);
Mat eval_smooth_dx(const ModelSpec& m, const Vec& z, const Vec& th3);
std::vector<Mat> eval_smooth_dxx(const ModelSpec& m, const Vec& z, const Vec& th3);
Mat eval_smooth_dy(const ModelSpec& m, const Vec& z, const Vec& th3);
std::vector<Mat> eval_cov_d1(const ModelSpec& m, const Vec& z, const Vec& th1);
Mat eval_drift_d2(const ModelSpec& m, const Vec& z, const Vec& th2);
Mat eval_smooth_d3(const ModelSpec& m, const Vec& z, const Vec& th3);

/// 1+1 dimensional linear benchmark:
///   dX = (-theta21 X - theta22) dt + theta1 dw,   dY = theta3 X dt,
/// boxes [1e-4, 10] per coordinate.
ModelSpec builtin_linear();

/// FitzHugh-Nagumo:
///   dX = (gamma Y - X + beta) dt + sigma dw,
///   dY = (1/eps) (Y - Y^3 - X + s) dt,
/// theta1 = sigma, theta2 = (gamma, beta), theta3 = (eps, s);
/// boxes [1e-4, 10] except s in [-10, 10].
ModelSpec builtin_fhn();

/// Registry lookup by name ("linear", "fhn"); throws InvalidArgumentError on
/// unknown names.
ModelSpec model_by_name(const std::string& name);
std::vector<std::string> model_names();

/// Fills any missing derivative evaluator with a central finite-difference
/// fallback built from A, B, H and marks the model (fd_derivatives), which
/// validation reports surface. Analytic derivatives are preferred: the
/// quasi-likelihood fields call these per increment.
void attach_fd_derivatives(ModelSpec& model);

/// One validation check outcome.
struct ValidationCheck {
    std::string name;      // e.g. "positive_definite_C", "derivative_Hx"
    bool pass = false;
    std::string detail;    // offending state / max relative deviation
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool ok() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    std::string summary() const;
};

/// Checks shape conformance, symmetry/positive-definiteness of C and V at
/// each probe state, and central finite-difference consistency of the
/// supplied derivatives at relative tolerance 1e-4 (step 1e-6*(1+|value|)).
/// probe_states: one state per column (length d_z each).
ValidationReport validate_model(const ModelSpec& model, const Mat& probe_states,
                                const ThetaBlocks& theta);

} // namespace hypoql

#endif
