#ifndef HYPOQL_SELFCHECK_HPP
#define HYPOQL_SELFCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hypoql/model.hpp"

namespace hypoql {

struct SelfCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Random well-conditioned SPD matrix (eigenvalues in [0.5, 2]).
Mat random_spd(int dim, class Rng& rng);
/// Random full-rank rows x cols matrix (smallest singular value > 0.1).
Mat random_full_rank(int rows, int cols, class Rng& rng);

/// Closed-form S inverse identity (max |S S^{-1} - I| <= 1e-10) and Schur
/// determinant factorization (relative error <= 1e-10 against a generic LU
/// determinant) over random instances with d_X <= 4, d_Y <= min(d_X, 3).
SelfCheck check_s_inverse_identity(int instances, std::uint64_t seed);
SelfCheck check_det_factorization(int instances, std::uint64_t seed);

/// Variance-comparison trace inequality on random rectangular systems
/// (d_Y < d_X), and the equality case for square invertible H_x (to 1e-10).
SelfCheck check_trace_inequality(int instances, std::uint64_t seed);
SelfCheck check_trace_equality_square(int instances, std::uint64_t seed);

/// validate_model on a built-in over random states and in-box parameters.
SelfCheck check_builtin_model(const std::string& name, int draws, std::uint64_t seed);

/// Y^(1), Y^(J,1), Y^(2), Y^(3) vanish at theta* (<= 1e-12) and are <= 0 on a
/// grid, evaluated on a short simulated linear path. When csv_prefix is
/// nonempty the four curves are dumped to <prefix>_y{1,j1,2,3}.csv.
SelfCheck check_y_field_zeros(std::uint64_t seed, const std::string& csv_prefix = "");

/// The `check` subcommand suite.
std::vector<SelfCheck> run_selfchecks(std::uint64_t seed, const std::string& y_csv_prefix = "");

bool all_pass(const std::vector<SelfCheck>& checks);

} // namespace hypoql

#endif
