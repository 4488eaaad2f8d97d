// Plugging a model into the library: implement a score provider, materialize
// the score tensor, then calibrate and predict.

#include <cmath>
#include <iostream>
#include <vector>

#include "caos/all.hpp"

namespace {

// One-shot "predictor" from a single labeled point on the real line: the
// score of candidate y for input x is the distance to the reference,
// doubled when the labels disagree.
struct LineProvider {
  using input_type = double;
  std::size_t num_labels() const { return 3; }
  double score(const caos::Labeled<double>& ref, const double& x, caos::Label y) const {
    const double d = std::abs(x - ref.input);
    return y == ref.label ? d : 2.0 * d + 1.0;
  }
};

}  // namespace

int main() {
  std::vector<caos::Labeled<double>> calib;
  for (int i = 0; i < 12; ++i) calib.push_back({0.5 * i + 0.1 * (i % 3), static_cast<caos::Label>(i / 4)});
  const std::vector<double> test{0.3, 2.6, 5.2};

  const auto tensor = caos::materialize(LineProvider{}, std::span<const caos::Labeled<double>>(calib),
                                        std::span<const double>(test), /*with_full=*/true);
  const auto cal = caos::caos_calibrate(tensor, 0.2, 3);
  std::cout << "threshold " << cal.threshold << '\n';
  for (std::size_t t = 0; t < test.size(); ++t) {
    const auto set = caos::caos_predict(tensor, t, cal);
    std::cout << "x=" << test[t] << " ->";
    for (auto y : set.members) std::cout << ' ' << y;
    std::cout << '\n';
  }
}
