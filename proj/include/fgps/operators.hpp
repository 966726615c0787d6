#pragma once

// Forward operators and measurement filters.
//
// Every linear operator here is a periodic convolution, i.e. a circulant
// matrix whose first column is the kernel. It is diagonalized by the DFT, so
// apply() is IDFT(response . DFT(x)). The haze operator is affine with a
// diagonal linear part and is handled separately.

#include <Eigen/Dense>

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "fgps/error.hpp"
#include "fgps/fft.hpp"
#include "fgps/random.hpp"
#include "fgps/spectral_prior.hpp"

namespace fgps {

class CirculantOperator {
 public:
  explicit CirculantOperator(std::vector<double> kernel, std::string tag = "custom")
      : kernel_(std::move(kernel)), tag_(std::move(tag)) {
    detail::require(!kernel_.empty(), "circulant operator: empty kernel");
    for (double v : kernel_) detail::require(std::isfinite(v), "circulant operator: non-finite kernel");
    response_ = fft::forward(std::span<const double>(kernel_));
  }

  // Builds the operator from a Hermitian-symmetric frequency response.
  static CirculantOperator from_response(const ComplexVector& response, std::string tag = "custom") {
    CirculantOperator op(fft::inverse_real(response), std::move(tag));
    op.response_ = response;
    return op;
  }

  std::size_t size() const { return kernel_.size(); }
  std::span<const double> kernel() const { return kernel_; }
  std::span<const Complex> response() const { return response_; }
  const Complex& response(std::size_t k) const { return response_[k]; }
  const std::string& tag() const { return tag_; }

 private:
  std::vector<double> kernel_;
  ComplexVector response_;
  std::string tag_;
};

inline CirculantOperator identity_operator(std::size_t n) {
  detail::require(n >= 1, "identity_operator: n must be positive");
  std::vector<double> kernel(n, 0.0);
  kernel[0] = 1.0;
  return CirculantOperator(std::move(kernel), "identity");
}

// Kernel proportional to exp(-d^2 / (2 sigma^2)) over the circular distance d,
// normalized to sum 1. sigma below 1e-6 collapses to the Dirac kernel.
inline CirculantOperator gaussian_blur_kernel(std::size_t n, double sigma) {
  detail::require(n >= 1, "gaussian_blur_kernel: n must be positive");
  detail::require(std::isfinite(sigma) && sigma > 0.0, "gaussian_blur_kernel: sigma must be positive");
  std::vector<double> kernel(n, 0.0);
  if (sigma < 1e-6) {
    kernel[0] = 1.0;
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(std::min(i, n - i));
      kernel[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      total += kernel[i];
    }
    for (double& v : kernel) v /= total;
  }
  return CirculantOperator(std::move(kernel), "gaussian");
}

// Dirac minus Gaussian: sums to zero, so the dc response vanishes.
inline CirculantOperator high_pass_kernel(std::size_t n, double sigma) {
  const auto blur = gaussian_blur_kernel(n, sigma);
  std::vector<double> kernel(n);
  for (std::size_t i = 0; i < n; ++i) kernel[i] = -blur.kernel()[i];
  kernel[0] += 1.0;
  return CirculantOperator(std::move(kernel), "highpass");
}

// `width` consecutive taps of 1/width starting at index 0: a 1-D stand-in
// for a directional motion blur.
inline CirculantOperator directional_box_kernel(std::size_t n, std::size_t width) {
  detail::require(width >= 1 && width <= n, "directional_box_kernel: width must lie in [1, n]");
  std::vector<double> kernel(n, 0.0);
  for (std::size_t i = 0; i < width; ++i) kernel[i] = 1.0 / static_cast<double>(width);
  return CirculantOperator(std::move(kernel), "box");
}

inline std::vector<double> apply_response(std::span<const Complex> response, std::span<const double> x,
                                          bool conjugate = false) {
  detail::require_size(x.size(), response.size(), "apply");
  ComplexVector spectrum = fft::forward(x);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    spectrum[k] *= conjugate ? std::conj(response[k]) : response[k];
  }
  return fft::inverse_real(spectrum);
}

inline std::vector<double> apply(const CirculantOperator& op, std::span<const double> x) {
  return apply_response(op.response(), x);
}

// A^T r: multiplication by the conjugated response.
inline std::vector<double> adjoint_apply(const CirculantOperator& op, std::span<const double> r) {
  return apply_response(op.response(), r, true);
}

inline Eigen::MatrixXd dense_matrix(const CirculantOperator& op, std::size_t cap = kDenseCap) {
  const std::size_t n = op.size();
  if (n > cap) throw ResourceError("dense_matrix: n=" + std::to_string(n) + " exceeds cap");
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) = op.kernel()[(i + n - j) % n];
  }
  return a;
}

// Binary low-pass mask. tau is a fraction of the one-sided range [0, 1/2]:
// bin k passes iff |f_k| <= tau / 2.
struct FrequencyMask {
  double tau = 1.0;
  std::vector<std::uint8_t> pass;

  std::size_t size() const { return pass.size(); }
  std::size_t passed_count() const { return static_cast<std::size_t>(std::count(pass.begin(), pass.end(), 1)); }
  bool all_pass() const { return passed_count() == pass.size(); }
  bool passes(std::size_t k) const { return pass[k] != 0; }
};

inline FrequencyMask low_pass_mask(std::size_t n, double tau) {
  detail::require(n >= 1, "low_pass_mask: n must be positive");
  detail::require(std::isfinite(tau) && tau >= 0.0 && tau <= 1.0, "low_pass_mask: tau must lie in [0, 1]");
  FrequencyMask mask{tau, std::vector<std::uint8_t>(n, 0)};
  // Compare in index units, 2 min(k, n-k) <= tau n, with slack for cutoffs
  // that were themselves computed as 2 m / n.
  const double limit = tau * static_cast<double>(n) * (1.0 + 1e-12) + 1e-9;
  for (std::size_t k = 0; k < n; ++k) {
    const double twice_index = 2.0 * static_cast<double>(std::min(k, n - k));
    mask.pass[k] = twice_index <= limit ? 1 : 0;
  }
  return mask;
}

inline FrequencyMask all_pass_mask(std::size_t n) { return low_pass_mask(n, 1.0); }

inline CirculantOperator mask_as_operator(const FrequencyMask& mask) {
  ComplexVector response(mask.size());
  for (std::size_t k = 0; k < mask.size(); ++k) response[k] = mask.passes(k) ? 1.0 : 0.0;
  return CirculantOperator::from_response(response, "mask");
}

inline std::vector<double> apply_mask(const FrequencyMask& mask, std::span<const double> x) {
  detail::require_size(x.size(), mask.size(), "apply_mask");
  ComplexVector spectrum = fft::forward(x);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    if (!mask.passes(k)) spectrum[k] = 0.0;
  }
  return fft::inverse_real(spectrum);
}

// Atmospheric scattering: A(x) = t . x + L (1 - t), t_i = exp(-beta_h d_i),
// with d_i = |i - n/2| / (n/2) the normalized distance from the center.
class HazeOperator {
 public:
  HazeOperator(std::size_t n, double light, double scattering) : light_(light), scattering_(scattering) {
    detail::require(n >= 2, "haze: n must be at least 2");
    detail::require(std::isfinite(light), "haze: atmospheric light must be finite");
    detail::require(std::isfinite(scattering) && scattering >= 0.0, "haze: scattering must be nonnegative");
    depth_.resize(n);
    transmission_.resize(n);
    const double half = static_cast<double>(n) / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
      depth_[i] = std::abs(static_cast<double>(i) - half) / half;
      transmission_[i] = std::exp(-scattering_ * depth_[i]);
    }
  }

  std::size_t size() const { return transmission_.size(); }
  double light() const { return light_; }
  double scattering() const { return scattering_; }
  std::span<const double> depth() const { return depth_; }
  std::span<const double> transmission() const { return transmission_; }

 private:
  double light_;
  double scattering_;
  std::vector<double> depth_;
  std::vector<double> transmission_;
};

inline HazeOperator make_haze_operator(std::size_t n, double light = 1.0, double scattering = 1.0) {
  return HazeOperator(n, light, scattering);
}

inline std::vector<double> haze_apply(const HazeOperator& op, std::span<const double> x) {
  detail::require_size(x.size(), op.size(), "haze_apply");
  std::vector<double> out(x.size());
  const auto t = op.transmission();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = t[i] * x[i] + op.light() * (1.0 - t[i]);
  return out;
}

// A forward model is either a circulant convolution or the affine haze map.
using ForwardOperator = std::variant<CirculantOperator, HazeOperator>;

inline std::size_t operator_size(const ForwardOperator& op) {
  return std::visit([](const auto& o) { return o.size(); }, op);
}

inline std::vector<double> apply(const HazeOperator& op, std::span<const double> x) { return haze_apply(op, x); }

inline std::vector<double> apply(const ForwardOperator& op, std::span<const double> x) {
  return std::visit([&](const auto& o) { return apply(o, x); }, op);
}

// Catch-all for vectors and other contiguous ranges. Argument-dependent
// lookup also finds std::apply for std:: argument types; this constrained
// overload is more specialized, so it wins.
template <class Op, class V>
  requires(std::same_as<std::remove_cvref_t<Op>, CirculantOperator> ||
           std::same_as<std::remove_cvref_t<Op>, HazeOperator> ||
           std::same_as<std::remove_cvref_t<Op>, ForwardOperator>) &&
          (!std::same_as<std::remove_cvref_t<V>, std::span<const double>>) &&
          std::convertible_to<V&&, std::span<const double>>
std::vector<double> apply(Op&& op, V&& x) {
  return apply(static_cast<const std::remove_cvref_t<Op>&>(op), std::span<const double>(x));
}

// Linear part J of A(x) = J x + b.
inline std::vector<double> linear_apply(const ForwardOperator& op, std::span<const double> x) {
  if (const auto* c = std::get_if<CirculantOperator>(&op)) return apply(*c, x);
  const auto& haze = std::get<HazeOperator>(op);
  detail::require_size(x.size(), haze.size(), "linear_apply");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = haze.transmission()[i] * x[i];
  return out;
}

// J^T r.
inline std::vector<double> linear_adjoint(const ForwardOperator& op, std::span<const double> r) {
  if (const auto* c = std::get_if<CirculantOperator>(&op)) return adjoint_apply(*c, r);
  // diag(t) is its own transpose.
  return linear_apply(op, r);
}

// Offset b of A(x) = J x + b.
inline std::vector<double> affine_offset(const ForwardOperator& op) {
  if (const auto* c = std::get_if<CirculantOperator>(&op)) return std::vector<double>(c->size(), 0.0);
  const auto& haze = std::get<HazeOperator>(op);
  std::vector<double> b(haze.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = haze.light() * (1.0 - haze.transmission()[i]);
  return b;
}

inline Eigen::MatrixXd dense_linear_part(const ForwardOperator& op, std::size_t cap = kDenseCap) {
  if (const auto* c = std::get_if<CirculantOperator>(&op)) return dense_matrix(*c, cap);
  const auto& haze = std::get<HazeOperator>(op);
  if (haze.size() > cap) throw ResourceError("dense_linear_part: n exceeds cap");
  Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(haze.transmission().data(),
                                                        static_cast<Eigen::Index>(haze.size()));
  return t.asDiagonal();
}

// Text descriptor such as "kind=highpass n=256 sigma=5".
struct OperatorDescriptor {
  enum class Kind { identity, gaussian, highpass, box, haze };

  Kind kind = Kind::identity;
  std::size_t n = 0;
  double sigma = 0.0;       // gaussian, highpass
  std::size_t width = 1;    // box
  double light = 1.0;       // haze
  double scattering = 1.0;  // haze

  bool operator==(const OperatorDescriptor&) const = default;
};

inline const char* kind_name(OperatorDescriptor::Kind kind) {
  switch (kind) {
    case OperatorDescriptor::Kind::identity: return "identity";
    case OperatorDescriptor::Kind::gaussian: return "gaussian";
    case OperatorDescriptor::Kind::highpass: return "highpass";
    case OperatorDescriptor::Kind::box: return "box";
    case OperatorDescriptor::Kind::haze: return "haze";
  }
  return "unknown";
}

inline OperatorDescriptor::Kind parse_kind(const std::string& name) {
  static const std::map<std::string, OperatorDescriptor::Kind> kinds{
      {"identity", OperatorDescriptor::Kind::identity}, {"gaussian", OperatorDescriptor::Kind::gaussian},
      {"highpass", OperatorDescriptor::Kind::highpass}, {"box", OperatorDescriptor::Kind::box},
      {"haze", OperatorDescriptor::Kind::haze}};
  auto it = kinds.find(name);
  if (it == kinds.end()) throw InvalidParameter("unknown operator kind '" + name + "'");
  return it->second;
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

inline std::string to_string(const OperatorDescriptor& d) {
  std::string s = std::string("kind=") + kind_name(d.kind) + " n=" + std::to_string(d.n);
  switch (d.kind) {
    case OperatorDescriptor::Kind::gaussian:
    case OperatorDescriptor::Kind::highpass: s += " sigma=" + format_double(d.sigma); break;
    case OperatorDescriptor::Kind::box: s += " width=" + std::to_string(d.width); break;
    case OperatorDescriptor::Kind::haze:
      s += " light=" + format_double(d.light) + " scattering=" + format_double(d.scattering);
      break;
    case OperatorDescriptor::Kind::identity: break;
  }
  return s;
}

inline OperatorDescriptor parse_operator_descriptor(const std::string& text) {
  OperatorDescriptor d;
  std::istringstream in(text);
  std::string token;
  bool have_kind = false;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw InvalidParameter("operator descriptor: expected key=value, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    try {
      if (key == "kind") {
        d.kind = parse_kind(value);
        have_kind = true;
      } else if (key == "n") {
        d.n = std::stoul(value);
      } else if (key == "sigma") {
        d.sigma = std::stod(value);
      } else if (key == "width") {
        d.width = std::stoul(value);
      } else if (key == "light") {
        d.light = std::stod(value);
      } else if (key == "scattering") {
        d.scattering = std::stod(value);
      } else {
        throw InvalidParameter("operator descriptor: unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw InvalidParameter("operator descriptor: bad value for '" + key + "': '" + value + "'");
    }
  }
  if (!have_kind) throw InvalidParameter("operator descriptor: missing kind");
  return d;
}

inline ForwardOperator make_operator(const OperatorDescriptor& d) {
  switch (d.kind) {
    case OperatorDescriptor::Kind::identity: return identity_operator(d.n);
    case OperatorDescriptor::Kind::gaussian: return gaussian_blur_kernel(d.n, d.sigma);
    case OperatorDescriptor::Kind::highpass: return high_pass_kernel(d.n, d.sigma);
    case OperatorDescriptor::Kind::box: return directional_box_kernel(d.n, d.width);
    case OperatorDescriptor::Kind::haze: return make_haze_operator(d.n, d.light, d.scattering);
  }
  throw InvalidParameter("make_operator: unknown kind");
}

struct Measurement {
  std::vector<double> y;
  double sigma_y = 0.0;
  std::string operator_id;
  std::uint64_t seed = 0;
};

inline std::string operator_id(const ForwardOperator& op) {
  if (const auto* c = std::get_if<CirculantOperator>(&op)) return c->tag();
  return "haze";
}

// y = A(x0) + sigma_y eps, eps drawn from derive_seed(seed, {kMeasurement}).
inline Measurement measure(const ForwardOperator& op, std::span<const double> x0, double sigma_y,
                           std::uint64_t seed) {
  detail::require(std::isfinite(sigma_y) && sigma_y >= 0.0, "measure: sigma_y must be nonnegative");
  Measurement m{apply(op, x0), sigma_y, operator_id(op), seed};
  if (sigma_y > 0.0) {
    Rng rng(derive_seed(seed, {stream::kMeasurement}));
    std::vector<double> noise(m.y.size());
    fill_standard_normal(rng, noise);
    for (std::size_t i = 0; i < m.y.size(); ++i) m.y[i] += sigma_y * noise[i];
  }
  return m;
}

// Named noise levels.
namespace presets {
inline constexpr double kSyntheticNoise = 1.0;    // gap studies: z ~ N(0, I)
inline constexpr double kRestorationNoise = 0.05; // restoration benchmark
}  // namespace presets

}  // namespace fgps
