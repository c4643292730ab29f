#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wetplan/errors.hpp"
#include "wetplan/units.hpp"

namespace wetplan {

/// Quadratic fit of a rectenna transfer characteristic,
///   fit(w) = a2*w^2 + a1*w + a0   (input and output in watts).
/// Defaults are the fitted curve of the Powercast P2110B at 868 MHz.
struct EhCoefficients {
  double a2 = -1.952;     // 1/W
  double a1 = 0.663;      // dimensionless
  double a0 = -1.453e-5;  // W

  // Concave, increasing-then-saturating fit with a small negative offset.
  void validate() const {
    if (!(a2 < 0.0) || !(a1 > 0.0) || !(a0 < 0.0))
      throw DomainError("EhCoefficients: require a2 < 0, a1 > 0, a0 < 0");
    if (!(a0 / a2 > 0.0))
      throw DomainError("EhCoefficients: a0/a2 must be positive");
  }
};

/// Default saturation input of the bundled rectenna curve: 11 dBm.
inline double default_saturation_input_w() { return dbm_to_watts(11.0); }

inline constexpr std::size_t kDefaultTableKnots = 8192;

/// RF energy-harvesting circuit model: the raw quadratic fit, a monotone
/// piecewise-linear "measured" curve with hard saturation, the conversion
/// efficiency, the max-efficiency operating point, and the exact inverse of
/// the measured curve.
///
/// Immutable after construction; safe for concurrent reads.
class EhModel {
 public:
  /// Builds the measured curve by sampling the fit at log-spaced inputs on
  /// [zero-crossing, saturation]. Output is 0 below the zero-crossing and
  /// flat beyond saturation.
  static EhModel from_fit(const EhCoefficients& coeffs = {},
                          double saturation_input_w = default_saturation_input_w(),
                          std::size_t knots = kDefaultTableKnots) {
    coeffs.validate();
    if (knots < 2) throw DomainError("EhModel: need at least 2 table knots");
    EhModel m;
    m.coeffs_ = coeffs;
    m.max_eff_input_w_ = std::sqrt(coeffs.a0 / coeffs.a2);
    m.zero_input_w_ = positive_zero_crossing(coeffs);
    m.saturation_input_w_ = saturation_input_w;
    const double lo = std::log(m.zero_input_w_);
    const double hi = std::log(m.saturation_input_w_);
    m.inputs_.resize(knots);
    m.outputs_.resize(knots);
    for (std::size_t i = 0; i < knots; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(knots - 1);
      m.inputs_[i] = std::exp(lo + t * (hi - lo));
      m.outputs_[i] = std::max(0.0, fit_eval(coeffs, m.inputs_[i]));
    }
    // Pin the endpoints exactly.
    m.inputs_.front() = m.zero_input_w_;
    m.outputs_.front() = 0.0;
    m.inputs_.back() = m.saturation_input_w_;
    m.outputs_.back() = fit_eval(coeffs, m.saturation_input_w_);
    m.check_invariants();
    return m;
  }

  /// Loads a digitized curve. Expected format: header `input_w,output_w`,
  /// then rows of two strictly increasing columns; the first output must be
  /// 0 and the last input is taken as the saturation point.
  static EhModel from_csv(const std::string& path, const EhCoefficients& coeffs = {}) {
    coeffs.validate();
    std::ifstream in(path);
    if (!in) throw IoError("curve csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("curve csv '" + path + "': empty file");
    if (strip(line) != "input_w,output_w")
      throw ConfigError("curve csv '" + path + "': header row 'input_w,output_w' required");
    EhModel m;
    m.coeffs_ = coeffs;
    m.max_eff_input_w_ = std::sqrt(coeffs.a0 / coeffs.a2);
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      const std::string s = strip(line);
      if (s.empty()) continue;
      const auto comma = s.find(',');
      if (comma == std::string::npos)
        throw ConfigError("curve csv '" + path + "' row " + std::to_string(row) +
                          ": expected 'input_w,output_w'");
      try {
        m.inputs_.push_back(std::stod(s.substr(0, comma)));
        m.outputs_.push_back(std::stod(s.substr(comma + 1)));
      } catch (const std::exception&) {
        throw ConfigError("curve csv '" + path + "' row " + std::to_string(row) +
                          ": non-numeric value");
      }
    }
    if (m.inputs_.size() < 2)
      throw ConfigError("curve csv '" + path + "': need at least 2 data rows");
    m.zero_input_w_ = m.inputs_.front();
    m.saturation_input_w_ = m.inputs_.back();
    m.check_invariants();
    return m;
  }

  /// Raw quadratic fit, no clamping; callers clamp via eval_measured.
  double eval_fit(double input_w) const {
    if (input_w < 0.0) throw DomainError("eval_fit: negative input power");
    return fit_eval(coeffs_, input_w);
  }

  /// Piecewise-linear measured curve: 0 up to the zero-crossing, table
  /// interpolation in between, flat plateau from saturation onward.
  double eval_measured(double input_w) const {
    if (input_w < 0.0) throw DomainError("eval_measured: negative input power");
    if (input_w <= zero_input_w_) return 0.0;
    if (input_w >= saturation_input_w_) return outputs_.back();
    const auto it = std::upper_bound(inputs_.begin(), inputs_.end(), input_w);
    const std::size_t hi = static_cast<std::size_t>(it - inputs_.begin());
    const std::size_t lo = hi - 1;
    const double t = (input_w - inputs_[lo]) / (inputs_[hi] - inputs_[lo]);
    return outputs_[lo] + t * (outputs_[hi] - outputs_[lo]);
  }

  /// DC output over RF input, from the measured curve.
  double efficiency(double input_w) const {
    if (!(input_w > 0.0)) throw DomainError("efficiency: input power must be positive");
    return eval_measured(input_w) / input_w;
  }

  /// Input power maximizing the conversion efficiency of the fit,
  /// sqrt(a0/a2).
  double max_efficiency_point() const { return max_eff_input_w_; }

  /// Unique input with eval_measured(input) == output_w. Inputs within a
  /// 1e-9 relative band above the plateau map to the saturation input
  /// (endpoint rounding); beyond that the request is unsatisfiable.
  double inverse(double output_w) const {
    if (!(output_w > 0.0)) throw DomainError("inverse: output power must be positive");
    const double plateau = outputs_.back();
    if (output_w > plateau) {
      if (output_w <= plateau * (1.0 + 1e-9)) return saturation_input_w_;
      throw SaturationError("inverse: requested output exceeds the saturation plateau");
    }
    const auto it = std::lower_bound(outputs_.begin(), outputs_.end(), output_w);
    std::size_t hi = static_cast<std::size_t>(it - outputs_.begin());
    if (hi == 0) hi = 1;  // output_w > 0 = outputs_[0], so this never triggers
    const std::size_t lo = hi - 1;
    const double t = (output_w - outputs_[lo]) / (outputs_[hi] - outputs_[lo]);
    return inputs_[lo] + t * (inputs_[hi] - inputs_[lo]);
  }

  double saturation_input_w() const { return saturation_input_w_; }
  double zero_input_w() const { return zero_input_w_; }
  double saturation_output_w() const { return outputs_.back(); }
  const EhCoefficients& coefficients() const { return coeffs_; }
  const std::vector<double>& table_inputs_w() const { return inputs_; }
  const std::vector<double>& table_outputs_w() const { return outputs_; }

  static double fit_eval(const EhCoefficients& c, double input_w) {
    return c.a2 * input_w * input_w + c.a1 * input_w + c.a0;
  }

  /// Inverse of the fit on its increasing branch (used for solver seeds).
  static double fit_inverse(const EhCoefficients& c, double output_w) {
    const double disc = c.a1 * c.a1 - 4.0 * c.a2 * (c.a0 - output_w);
    if (disc < 0.0) throw DomainError("fit_inverse: output beyond the fit's range");
    const double q = -(c.a1 + std::sqrt(disc)) / 2.0;
    return (c.a0 - output_w) / q;
  }

 private:
  EhModel() = default;

  static double positive_zero_crossing(const EhCoefficients& c) {
    const double disc = c.a1 * c.a1 - 4.0 * c.a2 * c.a0;
    const double q = -(c.a1 + std::sqrt(disc)) / 2.0;
    const double r1 = q / c.a2;
    const double r2 = c.a0 / q;
    const double lo = std::min(r1, r2);
    const double hi = std::max(r1, r2);
    if (lo > 0.0) return lo;
    if (hi > 0.0) return hi;
    throw DomainError("EhCoefficients: fit has no positive zero crossing");
  }

  static std::string strip(const std::string& s) {
    std::string out;
    for (char ch : s)
      if (!std::isspace(static_cast<unsigned char>(ch))) out.push_back(ch);
    return out;
  }

  void check_invariants() const {
    if (!(zero_input_w_ < max_eff_input_w_ && max_eff_input_w_ < saturation_input_w_))
      throw ConfigError("EhModel: require zero-crossing < max-efficiency point < saturation");
    if (outputs_.front() != 0.0)
      throw ConfigError("EhModel: first table output must be 0");
    for (std::size_t i = 1; i < inputs_.size(); ++i) {
      if (!(inputs_[i] > inputs_[i - 1]))
        throw ConfigError("EhModel: table inputs must be strictly increasing");
      if (!(outputs_[i] > outputs_[i - 1]))
        throw ConfigError("EhModel: table outputs must be strictly increasing");
    }
  }

  EhCoefficients coeffs_;
  double max_eff_input_w_ = 0.0;
  double zero_input_w_ = 0.0;
  double saturation_input_w_ = 0.0;
  std::vector<double> inputs_;
  std::vector<double> outputs_;
};

}  // namespace wetplan
