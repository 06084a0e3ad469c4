// Copyright 2026 The layoutcorr Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "layoutcorr/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace layoutcorr {

BetaProfile BetaProfile::parse(const std::string& text) {
  if (text == "epsilon-flat") return epsilon_flat();
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (colon == std::string::npos || (kind != "linear-up" && kind != "linear-down")) {
    throw Error(Errc::kConfig, "unknown beta profile '" + text + "'");
  }
  double value = 0.0;
  try {
    value = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(Errc::kConfig, "bad beta profile value in '" + text + "'");
  }
  return kind == "linear-up" ? linear_up(value) : linear_down(value);
}

std::string BetaProfile::name() const {
  if (kind == BetaProfileKind::kEpsilonFlat) return "epsilon-flat";
  std::ostringstream os;
  os << (kind == BetaProfileKind::kLinearUp ? "linear-up:" : "linear-down:") << value;
  return os.str();
}

namespace {

double total_beta_at(const BetaProfile& p, int t, int T) {
  if (t == 0) return 0.0;
  if (p.kind == BetaProfileKind::kEpsilonFlat) return kBetaEpsilon;
  const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 1.0;
  if (p.kind == BetaProfileKind::kLinearUp) return kBetaEpsilon + (p.value - kBetaEpsilon) * frac;
  return p.value - (p.value - kBetaEpsilon) * frac;
}

}  // namespace

DiffusionSchedule DiffusionSchedule::build(int T, int K, const BetaProfile& profile) {
  if (T < 1) throw Error(Errc::kInvalidArgument, "T must be >= 1");
  if (K < 1) throw Error(Errc::kInvalidArgument, "K must be >= 1");
  if (profile.kind != BetaProfileKind::kEpsilonFlat &&
      (profile.value < kBetaEpsilon || profile.value > 0.2)) {
    throw Error(Errc::kInvalidArgument, "profile value must lie in [1e-6, 0.2]");
  }
  DiffusionSchedule s;
  s.T_ = T;
  s.K_ = K;
  s.profile_ = profile;
  s.alpha_.assign(T + 1, 1.0);
  s.beta_.assign(T + 1, 0.0);
  s.gamma_.assign(T + 1, 0.0);
  s.alpha_bar_.assign(T + 1, 1.0);
  s.beta_bar_.assign(T + 1, 0.0);
  s.gamma_bar_.assign(T + 1, 0.0);

  for (int t = 1; t <= T; ++t) {
    const double bt = total_beta_at(profile, t, T);
    const double gb = static_cast<double>(t) / T * (1.0 - kMaskHeadroom - bt);
    s.gamma_bar_[t] = gb;
    s.alpha_bar_[t] = 1.0 - gb - bt;
    s.beta_bar_[t] = bt / (K + 1);
  }
  for (int t = 1; t <= T; ++t) {
    const double a = s.alpha_bar_[t] / s.alpha_bar_[t - 1];
    const double g = 1.0 - (1.0 - s.gamma_bar_[t]) / (1.0 - s.gamma_bar_[t - 1]);
    double b = (1.0 - a - g) / (K + 1);
    if (a > 1.0 + 1e-12 || a < 0.0 || g < -1e-12 || g > 1.0 || b < -1e-12) {
      std::ostringstream os;
      os << profile.name() << " needs a negative per-step probability at t=" << t << " (alpha=" << a
         << ", beta=" << b << ", gamma=" << g << ")";
      throw Error(Errc::kInfeasibleProfile, os.str());
    }
    s.alpha_[t] = a;
    s.gamma_[t] = std::max(g, 0.0);
    s.beta_[t] = std::max(b, 0.0);
  }
  return s;
}

StepKernel DiffusionSchedule::span_kernel(int s, int t) const {
  if (s < 0 || t > T_ || s >= t) throw Error(Errc::kInvalidArgument, "span kernel needs 0 <= s < t <= T");
  StepKernel k;
  k.keep = alpha_bar_[t] / alpha_bar_[s];
  k.mask = 1.0 - (1.0 - gamma_bar_[t]) / (1.0 - gamma_bar_[s]);
  k.replace = std::max(0.0, (1.0 - k.keep - k.mask) / (K_ + 1));
  return k;
}

nlohmann::json DiffusionSchedule::to_json() const {
  return nlohmann::json{{"T", T_},
                        {"K", K_},
                        {"profile", profile_.name()},
                        {"alpha_bar", alpha_bar_},
                        {"beta_bar", beta_bar_},
                        {"gamma_bar", gamma_bar_}};
}

DiffusionSchedule DiffusionSchedule::from_json(const nlohmann::json& j) {
  DiffusionSchedule s;
  try {
    s = build(j.at("T").get<int>(), j.at("K").get<int>(), BetaProfile::parse(j.at("profile").get<std::string>()));
    const auto check = [](const nlohmann::json& arr, const std::vector<double>& ref, const char* name) {
      const auto v = arr.get<std::vector<double>>();
      if (v.size() != ref.size()) throw Error(Errc::kParse, std::string(name) + " has wrong length");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i] - ref[i]) > 1e-12) throw Error(Errc::kParse, std::string(name) + " disagrees with profile");
      }
    };
    check(j.at("alpha_bar"), s.alpha_bar_, "alpha_bar");
    check(j.at("beta_bar"), s.beta_bar_, "beta_bar");
    check(j.at("gamma_bar"), s.gamma_bar_, "gamma_bar");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParse, std::string("schedule json: ") + e.what());
  }
  return s;
}

Eigen::MatrixXd transition_matrix(const DiffusionSchedule& s, int t) {
  if (t < 1 || t > s.T()) throw Error(Errc::kInvalidArgument, "transition_matrix needs 1 <= t <= T");
  const int n = s.num_classes();
  const int m = s.mask_index();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int from = 0; from < m; ++from) {
    for (int to = 0; to < m; ++to) q(to, from) = s.beta(t) + (to == from ? s.alpha(t) : 0.0);
    q(m, from) = s.gamma(t);
  }
  q(m, m) = 1.0;
  return q;
}

Eigen::VectorXd cumulative_marginal(const DiffusionSchedule& s, int t, Token z0) {
  const int m = s.mask_index();
  if (z0 == m) throw Error(Errc::kMaskInput, "z0 is MASK");
  if (z0 < 0 || z0 > m) throw Error(Errc::kOutOfRange, "token outside schedule classes");
  Eigen::VectorXd v = Eigen::VectorXd::Constant(s.num_classes(), s.beta_bar(t));
  v(z0) += s.alpha_bar(t);
  v(m) = s.gamma_bar(t);
  return v;
}

TokenSeq forward_sample(const TokenSeq& z0, int t, const DiffusionSchedule& s, Rng& rng) {
  const int m = s.mask_index();
  TokenSeq out = z0;
  if (t == 0) return out;
  const double gb = s.gamma_bar(t);
  const double keep = gb + s.alpha_bar(t);
  for (auto& tok : out.tokens) {
    if (tok == m) throw Error(Errc::kMaskInput, "forward_sample input contains MASK");
    const double u = rng.uniform();
    if (u < gb) {
      tok = m;
    } else if (u >= keep) {
      tok = static_cast<Token>(rng.below(static_cast<std::uint64_t>(m)));
    }
  }
  return out;
}

ReverseMixture::ReverseMixture(const DiffusionSchedule& s, int t, int to)
    : sched_(&s), t_(t), to_(to) {
  if (t < 1 || t > s.T()) throw Error(Errc::kInvalidArgument, "reverse step needs 1 <= t <= T");
  if (to < 0 || to >= t) throw Error(Errc::kStepOvershoot, "target timestep must satisfy 0 <= to < t");
  if (s.num_classes() > 256) throw Error(Errc::kInvalidArgument, "at most 256 classes are supported");
  step_ = s.span_kernel(to, t);
  ab_ = s.alpha_bar(to);
  bb_ = s.beta_bar(to);
  gb_ = s.gamma_bar(to);
}

void ReverseMixture::likelihood(Token z_t, std::span<double> a) const {
  const int m = sched_->mask_index();
  if (z_t == m) {
    for (int i = 0; i < m; ++i) a[i] = step_.mask;
    a[m] = 1.0;
  } else {
    for (int i = 0; i < m; ++i) a[i] = step_.replace;
    a[z_t] += step_.keep;
    a[m] = 0.0;
  }
}

double ReverseMixture::normalizer(std::span<const double> a, double a_reg_sum, int k) const {
  const int m = sched_->mask_index();
  return std::max(ab_ * a[k] + bb_ * a_reg_sum + gb_ * a[m], kProbFloor);
}

void ReverseMixture::mix(Token z_t, std::span<const double> probs, std::span<double> out) const {
  const int m = sched_->mask_index();
  const int n = m + 1;
  double a[256];
  std::span<double> av(a, static_cast<std::size_t>(n));
  likelihood(z_t, av);
  double a_reg = 0.0;
  for (int i = 0; i < m; ++i) a_reg += a[i];
  double total_u = 0.0;
  for (int k = 0; k < m; ++k) {
    const double u = probs[k] / normalizer(av, a_reg, k);
    out[k] = u;
    total_u += u;
  }
  for (int i = 0; i < m; ++i) out[i] = a[i] * (ab_ * out[i] + bb_ * total_u);
  out[m] = a[m] * gb_ * total_u;
}

double ReverseMixture::kl_and_grad(Token z_t, std::span<const double> probs, std::span<const double> target,
                                   std::span<double> mixed, std::span<double> grad_probs) const {
  const int m = sched_->mask_index();
  const int n = m + 1;
  double a[256], z[256], r[256];
  std::span<double> av(a, static_cast<std::size_t>(n));
  likelihood(z_t, av);
  double a_reg = 0.0;
  for (int i = 0; i < m; ++i) a_reg += a[i];
  double total_u = 0.0;
  for (int k = 0; k < m; ++k) {
    z[k] = normalizer(av, a_reg, k);
    total_u += probs[k] / z[k];
  }
  for (int i = 0; i < m; ++i) mixed[i] = a[i] * (ab_ * probs[i] / z[i] + bb_ * total_u);
  mixed[m] = a[m] * gb_ * total_u;

  double kl = 0.0;
  double r_reg = 0.0;
  for (int i = 0; i < n; ++i) {
    if (target[i] <= 0.0) {
      r[i] = 0.0;
      continue;
    }
    const double p = std::max(mixed[i], kProbFloor);
    kl += target[i] * (std::log(target[i]) - std::log(p));
    r[i] = target[i] * a[i] / p;
    if (i < m) r_reg += r[i];
  }
  for (int k = 0; k < m; ++k) grad_probs[k] = -(ab_ * r[k] + bb_ * r_reg + gb_ * r[m]) / z[k];
  grad_probs[m] = 0.0;
  return kl;
}

Eigen::VectorXd posterior_span(Token z_t, Token z0, int t, int to, const DiffusionSchedule& s) {
  const int m = s.mask_index();
  if (z0 == m) throw Error(Errc::kMaskInput, "z0 is MASK");
  if (to < 0 || to >= t) throw Error(Errc::kStepOvershoot, "target timestep must satisfy 0 <= to < t");
  // Zero-probability conditioning pairs are rejected before any flooring.
  const Eigen::VectorXd marg = cumulative_marginal(s, t, z0);
  if (!(marg(z_t) > 0.0)) {
    throw Error(Errc::kZeroProbability, "q(z_t | z_0) = 0 for z_t=" + std::to_string(z_t) +
                                            ", z_0=" + std::to_string(z0));
  }
  ReverseMixture mixture(s, t, to);
  std::vector<double> point(s.num_classes(), 0.0);
  point[z0] = 1.0;
  Eigen::VectorXd out(s.num_classes());
  mixture.mix(z_t, point, std::span<double>(out.data(), out.size()));
  return out;
}

Eigen::VectorXd posterior(Token z_t, Token z0, int t, const DiffusionSchedule& s) {
  return posterior_span(z_t, z0, t, t - 1, s);
}

namespace {

Eigen::MatrixXd mixture_rows(const Eigen::MatrixXd& probs, const TokenSeq& z_t, const ReverseMixture& mixture,
                             const DiffusionSchedule& s) {
  const int n = s.num_classes();
  const int m = s.mask_index();
  if (probs.cols() != n || probs.rows() != z_t.length()) {
    throw Error(Errc::kInvalidArgument, "denoiser probabilities have the wrong shape");
  }
  Eigen::MatrixXd out(probs.rows(), n);
  std::vector<double> row(n), mixed(n);
  for (Eigen::Index p = 0; p < probs.rows(); ++p) {
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      row[k] = probs(p, k);
      if (row[k] < 0.0) throw Error(Errc::kUnnormalized, "negative denoiser probability");
      total += row[k];
    }
    if (std::abs(total - 1.0) > 1e-6 || row[m] > 1e-6) {
      throw Error(Errc::kUnnormalized, "denoiser row " + std::to_string(p) + " sums to " + std::to_string(total) +
                                           " with MASK mass " + std::to_string(row[m]));
    }
    row[m] = 0.0;
    for (auto& v : row) v /= total;
    mixture.mix(z_t.tokens[p], row, mixed);
    for (int k = 0; k < n; ++k) out(p, k) = mixed[k];
  }
  return out;
}

}  // namespace

Eigen::MatrixXd reverse_distribution(const Eigen::MatrixXd& denoiser_probs, const TokenSeq& z_t, int t,
                                     const DiffusionSchedule& s) {
  return mixture_rows(denoiser_probs, z_t, ReverseMixture(s, t, t - 1), s);
}

Eigen::MatrixXd fast_reverse_distribution(const Eigen::MatrixXd& denoiser_probs, const TokenSeq& z_t, int t,
                                          int delta, const DiffusionSchedule& s) {
  if (delta < 1 || t - delta < 0) {
    throw Error(Errc::kStepOvershoot, "step " + std::to_string(delta) + " overshoots t=" + std::to_string(t));
  }
  return mixture_rows(denoiser_probs, z_t, ReverseMixture(s, t, t - delta), s);
}

void restrict_to_legal(std::span<double> dist, Field field, const Vocabulary& vocab, bool drop_mask) {
  const auto& legal = vocab.legal_mask(field);
  const int m = vocab.mask_id();
  double total = 0.0;
  for (int k = 0; k < m; ++k) {
    if (!legal[k]) dist[k] = 0.0;
    total += dist[k];
  }
  if (drop_mask) dist[m] = 0.0;
  total += dist[m];
  if (total <= 0.0) {
    // Degenerate row: fall back to uniform over the legal set.
    const auto& tokens = vocab.legal_tokens(field);
    for (auto& v : dist) v = 0.0;
    for (Token tk : tokens) dist[tk] = 1.0 / tokens.size();
    return;
  }
  for (auto& v : dist) v /= total;
}

TokenSeq sample_tokens(const Eigen::MatrixXd& dist, const Vocabulary& vocab, bool drop_mask, Rng& rng) {
  if (dist.cols() != vocab.size()) throw Error(Errc::kInvalidArgument, "distribution width does not match vocabulary");
  TokenSeq out;
  out.tokens.resize(dist.rows());
  std::vector<double> row(dist.cols());
  for (Eigen::Index p = 0; p < dist.rows(); ++p) {
    for (Eigen::Index k = 0; k < dist.cols(); ++k) row[k] = dist(p, k);
    restrict_to_legal(row, field_at(static_cast<int>(p)), vocab, drop_mask);
    out.tokens[p] = static_cast<Token>(rng.categorical(std::span<const double>(row)));
  }
  return out;
}

}  // namespace layoutcorr
