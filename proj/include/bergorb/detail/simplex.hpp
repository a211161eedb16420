#ifndef BERGORB_DETAIL_SIMPLEX_HPP
#define BERGORB_DETAIL_SIMPLEX_HPP

#include "bergorb/detail/cyclotomic.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace bergorb::detail {

/// Exact two-phase simplex for  min c.y  s.t.  A y = b, y >= 0  over the rationals.
///
/// Bland's rule throughout, so it terminates on degenerate systems.
/// Returns nullopt when the system is infeasible. The problems solved here
/// are always bounded below (objectives are non-negative sums).
class ExactSimplex {
 public:
  using matrix = std::vector<std::vector<rational>>;

  static std::optional<std::vector<rational>> solve(matrix a, std::vector<rational> b,
                                                    const std::vector<rational> &cost)
  {
    const std::size_t rows = a.size();
    const std::size_t n = cost.size();
    for (std::size_t i = 0; i < rows; ++i) {
      if (b[i] < 0) {
        for (auto &v : a[i])
          v = -v;
        b[i] = -b[i];
      }
    }

    // Tableau columns: n structural, rows artificial, then rhs.
    const std::size_t width = n + rows + 1;
    matrix t(rows, std::vector<rational>(width, rational(0)));
    std::vector<std::size_t> basis(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        t[i][j] = a[i][j];
      t[i][n + i] = 1;
      t[i][width - 1] = b[i];
      basis[i] = n + i;
    }

    // Phase 1: minimize the sum of artificials.
    std::vector<rational> phase1(n + rows, rational(0));
    for (std::size_t i = 0; i < rows; ++i)
      phase1[n + i] = 1;
    run(t, basis, phase1, n + rows);
    rational infeasibility = 0;
    for (std::size_t i = 0; i < rows; ++i)
      if (basis[i] >= n)
        infeasibility += t[i][width - 1];
    if (infeasibility != 0)
      return std::nullopt;

    // Drive zero-level artificials out of the basis; drop redundant rows.
    for (std::size_t i = 0; i < t.size();) {
      if (basis[i] < n) {
        ++i;
        continue;
      }
      std::size_t col = n;
      for (std::size_t j = 0; j < n; ++j)
        if (t[i][j] != 0) {
          col = j;
          break;
        }
      if (col == n) {
        t.erase(t.begin() + static_cast<std::ptrdiff_t>(i));
        basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(i));
        continue;
      }
      pivot(t, basis, i, col);
      ++i;
    }

    // Phase 2 on structural columns only.
    std::vector<rational> phase2(n + rows, rational(0));
    for (std::size_t j = 0; j < n; ++j)
      phase2[j] = cost[j];
    run(t, basis, phase2, n);

    std::vector<rational> y(n, rational(0));
    for (std::size_t i = 0; i < t.size(); ++i)
      if (basis[i] < n)
        y[basis[i]] = t[i][width - 1];
    return y;
  }

 private:
  static void pivot(matrix &t, std::vector<std::size_t> &basis, std::size_t row, std::size_t col)
  {
    const rational p = t[row][col];
    for (auto &v : t[row])
      v /= p;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i == row || t[i][col] == 0)
        continue;
      const rational factor = t[i][col];
      for (std::size_t j = 0; j < t[i].size(); ++j)
        if (t[row][j] != 0)
          t[i][j] -= factor * t[row][j];
    }
    basis[row] = col;
  }

  // Minimizes cost over columns [0, allowed) starting from the current basis.
  static void run(matrix &t, std::vector<std::size_t> &basis, const std::vector<rational> &cost,
                  std::size_t allowed)
  {
    const std::size_t width = t.empty() ? 0 : t[0].size();
    for (;;) {
      // Reduced costs c_j - c_B B^{-1} A_j; Bland: first improving column.
      std::size_t enter = allowed;
      for (std::size_t j = 0; j < allowed; ++j) {
        rational reduced = cost[j];
        for (std::size_t i = 0; i < t.size(); ++i)
          if (t[i][j] != 0)
            reduced -= cost[basis[i]] * t[i][j];
        if (reduced < 0) {
          enter = j;
          break;
        }
      }
      if (enter == allowed)
        return;

      std::size_t leave = t.size();
      rational best;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i][enter] <= 0)
          continue;
        rational ratio = t[i][width - 1] / t[i][enter];
        if (leave == t.size() || ratio < best || (ratio == best && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == t.size())
        return; // unbounded; cannot happen for the objectives used here
      pivot(t, basis, leave, enter);
    }
  }
};

} // namespace bergorb::detail

#endif // BERGORB_DETAIL_SIMPLEX_HPP
