#include "condlab/measures.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace condlab {

namespace {

// splitmix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  state_ = mix64(mix64(seed) ^ mix64(stream_id ^ 0xA02BDBF7BB3C0A7ULL));
}

std::uint64_t RngStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  for (;;) {
    const double u = 2.0 * uniform() - 1.0;
    const double v = 2.0 * uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

Vec RngStream::normal_vec(int d) {
  Vec out(d);
  for (int i = 0; i < d; ++i) out[i] = normal();
  return out;
}

RngStream RngStream::split(std::uint64_t child_index) const {
  return RngStream(seed_, mix64(stream_id_ * 0x9E3779B97F4A7C15ULL ^
                                (child_index + 1)));
}

EmpiricalMeasure::EmpiricalMeasure()
    : points_{Vec::Zero(1)}, weights_{1.0}, dim_(1) {}

EmpiricalMeasure::EmpiricalMeasure(std::vector<Vec> points,
                                   std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.empty()) {
    throw std::invalid_argument("EmpiricalMeasure: empty support");
  }
  if (points_.size() != weights_.size()) {
    throw std::invalid_argument(
        "EmpiricalMeasure: points/weights size mismatch");
  }
  dim_ = static_cast<int>(points_.front().size());
  if (dim_ < 1) {
    throw std::invalid_argument("EmpiricalMeasure: dimension must be >= 1");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].size() != dim_) {
      throw std::invalid_argument(
          "EmpiricalMeasure: inconsistent point dimensions");
    }
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw std::invalid_argument("EmpiricalMeasure: negative weight");
    }
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("EmpiricalMeasure: weights must sum to 1");
  }
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<Vec> points) {
  const double w = 1.0 / static_cast<double>(points.size());
  std::vector<double> weights(points.size(), w);
  return EmpiricalMeasure(std::move(points), std::move(weights));
}

EmpiricalMeasure EmpiricalMeasure::uniform_1d(
    const std::vector<double>& values) {
  std::vector<Vec> pts;
  pts.reserve(values.size());
  for (double v : values) {
    Vec p(1);
    p[0] = v;
    pts.push_back(p);
  }
  return uniform(std::move(pts));
}

EmpiricalMeasure EmpiricalMeasure::dirac(Vec point) {
  std::vector<Vec> pts;
  pts.push_back(std::move(point));
  return EmpiricalMeasure(std::move(pts), {1.0});
}

Vec EmpiricalMeasure::mean() const {
  Vec m = Vec::Zero(dim_);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    m += weights_[i] * points_[i];
  }
  return m;
}

nlohmann::json EmpiricalMeasure::to_json() const {
  nlohmann::json j;
  j["d"] = dim_;
  nlohmann::json pts = nlohmann::json::array();
  for (const Vec& p : points_) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < p.size(); ++k) row.push_back(p[k]);
    pts.push_back(std::move(row));
  }
  j["points"] = std::move(pts);
  j["weights"] = weights_;
  return j;
}

EmpiricalMeasure EmpiricalMeasure::from_json(const nlohmann::json& j) {
  const int d = j.at("d").get<int>();
  std::vector<Vec> pts;
  for (const auto& row : j.at("points")) {
    Vec p(d);
    if (static_cast<int>(row.size()) != d) {
      throw std::invalid_argument("EmpiricalMeasure: point/d mismatch in JSON");
    }
    for (int k = 0; k < d; ++k) p[k] = row.at(k).get<double>();
    pts.push_back(std::move(p));
  }
  return EmpiricalMeasure(std::move(pts),
                          j.at("weights").get<std::vector<double>>());
}

double second_moment(const EmpiricalMeasure& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    acc += m.weight(i) * m.point(i).squaredNorm();
  }
  return acc;
}

GaussianJoint::GaussianJoint(double mu_x, double mu_c, double sigma_xx,
                             double sigma_cc, double sigma_xc)
    : mu_x_(mu_x),
      mu_c_(mu_c),
      sigma_xx_(sigma_xx),
      sigma_cc_(sigma_cc),
      sigma_xc_(sigma_xc) {
  if (!(sigma_xx > 0.0) || !(sigma_cc > 0.0)) {
    throw std::invalid_argument("GaussianJoint: variances must be positive");
  }
  if (sigma_xx * sigma_cc - sigma_xc * sigma_xc <= 1e-12) {
    throw std::invalid_argument(
        "GaussianJoint: covariance matrix not positive definite");
  }
}

double GaussianJoint::conditional_mean(double c) const {
  return mu_x_ + (sigma_xc_ / sigma_cc_) * (c - mu_c_);
}

double GaussianJoint::conditional_variance() const {
  return sigma_xx_ - sigma_xc_ * sigma_xc_ / sigma_cc_;
}

double GaussianJoint::posterior_mean_c(double x) const {
  return mu_c_ + (sigma_xc_ / sigma_xx_) * (x - mu_x_);
}

double GaussianJoint::posterior_variance_c() const {
  return sigma_cc_ - sigma_xc_ * sigma_xc_ / sigma_xx_;
}

ConditionalGaussian gaussian_conditional(const GaussianJoint& j, double c) {
  return {j.conditional_mean(c), j.conditional_variance()};
}

Vec LinearMap::operator()(const Vec& x) const {
  if (x.size() != A.cols()) {
    throw std::invalid_argument("LinearMap: dimension mismatch");
  }
  return A * x + b;
}

LinearMap LinearMap::identity(int d) {
  return LinearMap{Mat::Identity(d, d), Vec::Zero(d)};
}

}  // namespace condlab
