#include "ftcbf/types.hpp"

#include <algorithm>

namespace ftcbf {

IndexSet complement(const IndexSet& drop, int size) {
  IndexSet keep;
  for (int i = 0; i < size; ++i) {
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
  }
  return keep;
}

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  IndexSet u = a;
  u.insert(u.end(), b.begin(), b.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

Mat remove_rows(const Mat& m, const IndexSet& drop) {
  const IndexSet keep = complement(drop, static_cast<int>(m.rows()));
  Mat out(static_cast<Eigen::Index>(keep.size()), m.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(keep[r]);
  return out;
}

Mat remove_rows_and_cols(const Mat& m, const IndexSet& drop) {
  const IndexSet keep = complement(drop, static_cast<int>(m.rows()));
  const auto k = static_cast<Eigen::Index>(keep.size());
  Mat out(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = m(keep[i], keep[j]);
  }
  return out;
}

}  // namespace ftcbf
