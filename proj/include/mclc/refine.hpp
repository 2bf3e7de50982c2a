#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "mclc/errors.hpp"
#include "mclc/image.hpp"
#include "mclc/mclc.hpp"

namespace mclc {

/// Two-label fully connected CRF over a square window around the annotation.
/// Pairwise kernel between pixels i and j:
///   w_appearance * exp(-|s_i - s_j|^2 / 2 theta_alpha^2 - (c_i - c_j)^2 / 2 theta_beta^2)
/// + w_smoothness * exp(-|s_i - s_j|^2 / 2 theta_gamma^2)
/// with Potts compatibility.
struct CrfParams {
  int window_radius = 32;
  int iters = 5;
  double w_appearance = 0.2;
  double w_smoothness = 0.0;
  double theta_alpha = 8.0;
  double theta_beta = 5.0;
  double theta_gamma = 3.0;
  double unary_epsilon = 0.05;

  void validate() const {
    if (window_radius < 1) {
      throw InvalidParams("CRF window_radius must be at least 1");
    }
    if (iters < 1) {
      throw InvalidParams("CRF iters must be at least 1");
    }
    if (!(w_appearance >= 0.0) || !(w_smoothness >= 0.0)) {
      throw InvalidParams("CRF kernel weights must be non-negative");
    }
    if (!(theta_alpha > 0.0) || !(theta_beta > 0.0) || !(theta_gamma > 0.0)) {
      throw InvalidParams("CRF bandwidths must be positive");
    }
    if (!(unary_epsilon > 0.0 && unary_epsilon < 0.5)) {
      throw InvalidParams("CRF unary_epsilon must lie in (0, 0.5)");
    }
  }

  friend bool operator==(const CrfParams&, const CrfParams&) = default;
};

struct MeanFieldResult {
  /// Foreground posterior per window pixel; background is 1 - q.
  std::vector<double> q;
  /// Mean-field free energy after initialisation (index 0) and after each
  /// iteration; filled only when requested.
  std::vector<double> free_energy;
};

namespace detail {

/// Kernel lookups: weighted spatial factors indexed by (|dx|, |dy|), colour
/// factor by |dc| when every intensity in the window is integral.
class CrfKernel {
public:
  CrfKernel(const InfraredImage& window, const CrfParams& p)
      : img_(window), p_(p), span_(std::max(window.width(), window.height())) {
    alpha_.resize(static_cast<std::size_t>(span_) * span_);
    gamma_.resize(alpha_.size());
    for (int dy = 0; dy < span_; ++dy) {
      for (int dx = 0; dx < span_; ++dx) {
        const double d2 = static_cast<double>(dx * dx + dy * dy);
        alpha_[static_cast<std::size_t>(dy) * span_ + dx] =
            p.w_appearance * std::exp(-d2 / (2.0 * p.theta_alpha * p.theta_alpha));
        gamma_[static_cast<std::size_t>(dy) * span_ + dx] =
            p.w_smoothness * std::exp(-d2 / (2.0 * p.theta_gamma * p.theta_gamma));
      }
    }
    integral_ = std::all_of(img_.data().begin(), img_.data().end(),
                            [](double v) { return v == std::floor(v); });
    if (integral_) {
      color_.resize(static_cast<std::size_t>(kMaxIntensity) + 1);
      for (std::size_t dc = 0; dc < color_.size(); ++dc) {
        color_[dc] = std::exp(-static_cast<double>(dc * dc) / (2.0 * p.theta_beta * p.theta_beta));
      }
    }
  }

  double operator()(int xi, int yi, int xj, int yj) const {
    const std::size_t s = static_cast<std::size_t>(std::abs(yi - yj)) * span_ + std::abs(xi - xj);
    const double ci = img_.at(xi, yi);
    const double cj = img_.at(xj, yj);
    const double color = integral_ ? color_[static_cast<std::size_t>(std::abs(ci - cj))]
                                   : std::exp(-(ci - cj) * (ci - cj) / (2.0 * p_.theta_beta * p_.theta_beta));
    return alpha_[s] * color + gamma_[s];
  }

private:
  const InfraredImage& img_;
  const CrfParams& p_;
  int span_;
  bool integral_ = false;
  std::vector<double> alpha_;
  std::vector<double> gamma_;
  std::vector<double> color_;
};

inline double free_energy(const InfraredImage& window, const CrfKernel& kernel, std::span<const double> u0,
                          std::span<const double> u1, std::span<const double> q) {
  const int w = window.width();
  const std::size_t n = q.size();
  double unary = 0.0, entropy = 0.0, pairwise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q1 = q[i];
    const double q0 = 1.0 - q1;
    unary += q0 * u0[i] + q1 * u1[i];
    entropy += (q0 > 0.0 ? q0 * std::log(q0) : 0.0) + (q1 > 0.0 ? q1 * std::log(q1) : 0.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double disagree = q0 * q[j] + q1 * (1.0 - q[j]);
      pairwise += kernel(static_cast<int>(i) % w, static_cast<int>(i) / w, static_cast<int>(j) % w,
                         static_cast<int>(j) / w) *
                  disagree;
    }
  }
  return unary + pairwise + entropy;
}

} // namespace detail

/// Exact mean-field inference over every pixel pair of `window`.
/// `fg_prob` holds the per-pixel foreground probability, clamped to
/// [eps, 1 - eps] before taking -log as the unary.
inline MeanFieldResult mean_field(const InfraredImage& window, std::span<const double> fg_prob, const CrfParams& p,
                                  bool track_energy = false) {
  p.validate();
  const std::size_t n = window.size();
  if (fg_prob.size() != n) {
    throw DimensionMismatch("unary probabilities do not match the CRF window");
  }
  const int w = window.width();
  std::vector<double> u0(n), u1(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pr = std::clamp(fg_prob[i], p.unary_epsilon, 1.0 - p.unary_epsilon);
    u0[i] = -std::log(1.0 - pr);
    u1[i] = -std::log(pr);
  }
  const detail::CrfKernel kernel(window, p);

  MeanFieldResult r;
  r.q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.q[i] = 1.0 / (1.0 + std::exp(u1[i] - u0[i]));
  }
  if (track_energy) {
    r.free_energy.push_back(detail::free_energy(window, kernel, u0, u1, r.q));
  }

  std::vector<double> next(n);
  for (int it = 0; it < p.iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const int xi = static_cast<int>(i) % w;
      const int yi = static_cast<int>(i) / w;
      // Potts: label l pays k_ij for every neighbour mass not on l.
      double pay0 = 0.0, pay1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          continue;
        }
        const double k = kernel(xi, yi, static_cast<int>(j) % w, static_cast<int>(j) / w);
        pay0 += k * r.q[j];
        pay1 += k * (1.0 - r.q[j]);
      }
      next[i] = 1.0 / (1.0 + std::exp((u1[i] + pay1) - (u0[i] + pay0)));
    }
    r.q.swap(next);
    if (track_energy) {
      r.free_energy.push_back(detail::free_energy(window, kernel, u0, u1, r.q));
    }
  }
  return r;
}

/// Refines a TPM inside the CRF window around the annotation and returns the
/// full-size mask of the foreground component anchored at the annotation.
/// Throws DegenerateUnary when the TPM is zero throughout the window and
/// EmptyMask when no foreground survives near the annotation.
inline PseudoMask refine_tpm(const InfraredImage& img, const TargetProbabilityMap& tpm, const PointAnnotation& anno,
                             const CrfParams& params) {
  params.validate();
  if (img.width() != tpm.width() || img.height() != tpm.height()) {
    throw DimensionMismatch("TPM and image differ in size");
  }
  require_in_bounds(img, anno.coord());
  const Window win = centered_window(anno.coord(), params.window_radius, img.width(), img.height());
  const InfraredImage local = img.crop(win);

  std::vector<double> probs(local.size());
  bool any = false;
  for (int y = 0; y < win.height; ++y) {
    for (int x = 0; x < win.width; ++x) {
      const double pr = tpm.prob(x + win.x0, y + win.y0);
      probs[local.index(x, y)] = pr;
      any = any || pr > 0.0;
    }
  }
  if (!any) {
    throw DegenerateUnary("TPM is zero throughout the CRF window");
  }

  const MeanFieldResult mf = mean_field(local, probs, params);
  PseudoMask labels(win.width, win.height);
  for (std::size_t i = 0; i < mf.q.size(); ++i) {
    labels.set(i, mf.q[i] > 0.5);
  }
  const PseudoMask full = paste(labels, win, img.width(), img.height());
  PseudoMask out = anchored_component(
      img.width(), img.height(), anno.coord(), [&](int x, int y) { return full.at(x, y); },
      [&](int x, int y) { return mf.q[local.index(x - win.x0, y - win.y0)]; });
  out.provenance.method = "mclc+crf";
  return out;
}

} // namespace mclc
