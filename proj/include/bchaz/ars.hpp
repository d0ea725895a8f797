#pragma once

// Derivative-free adaptive rejection sampling (Gilks & Wild, 1992) on an
// interval (lo, hi), either end possibly infinite.
//
// The upper hull is built from secants through neighbouring abscissae: on
// [x_i, x_{i+1}] it is the lower of the secants through (x_{i-1}, x_i) and
// (x_{i+1}, x_{i+2}) extended into the interval, and in the tails the
// outermost secant is extended to the boundary. For a log-concave target this
// bounds the log density from above and the chord between neighbours bounds
// it from below (the squeeze), so the sampler is exact. Rejected points are
// added to the hull.
//
// If the abscissae reveal non-concavity (secant slopes increasing, or a
// density value above the hull) the accepted point is passed through the
// Metropolis correction of Gilks, Best & Tan (1995), which leaves the target
// invariant without requiring a true envelope.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "stats.hpp"

namespace bchaz {

struct ArsOptions {
  int init_points = 3;
  int max_proposals = 200;
  int max_tail_steps = 60;
  int tune_rounds = 4;
};

/// Running counters; summed over all draws of a chain.
struct ArsStats {
  std::uint64_t draws = 0;
  std::uint64_t proposals = 0;
  std::uint64_t squeeze_accepts = 0;
  std::uint64_t evaluations = 0;
  std::uint64_t nonconcave_draws = 0;
  std::uint64_t metropolis_rejections = 0;
  std::uint64_t failures = 0;

  ArsStats& operator+=(const ArsStats& o) {
    draws += o.draws;
    proposals += o.proposals;
    squeeze_accepts += o.squeeze_accepts;
    evaluations += o.evaluations;
    nonconcave_draws += o.nonconcave_draws;
    metropolis_rejections += o.metropolis_rejections;
    failures += o.failures;
    return *this;
  }

  double squeeze_rate() const {
    return proposals == 0 ? 0.0 : static_cast<double>(squeeze_accepts) / static_cast<double>(proposals);
  }
};

namespace detail {

struct HullPoint {
  double x;
  double f;
};

struct Line {
  double x0;
  double y0;
  double slope;
  double at(double x) const { return y0 + slope * (x - x0); }
};

inline Line secant(const HullPoint& a, const HullPoint& b) { return {a.x, a.f, (b.f - a.f) / (b.x - a.x)}; }

struct Segment {
  double a;
  double b;
  Line line;
  double log_mass;
};

// log of the integral of exp(line) over [a, b]; +inf if unbounded.
inline double log_segment_mass(double a, double b, const Line& l) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double w = b - a;
  const double s = l.slope;
  if (std::isfinite(w) && std::abs(s) * w < 1e-10) return l.at(0.5 * (a + b)) + std::log(w);
  if (s > 0.0) {
    if (!std::isfinite(b)) return inf;
    return l.at(b) + std::log(-std::expm1(-s * w)) - std::log(s);
  }
  if (s < 0.0) {
    if (!std::isfinite(a)) return inf;
    return l.at(a) + std::log(-std::expm1(s * w)) - std::log(-s);
  }
  return inf;
}

// Inverse-CDF draw from exp(line) restricted to [a, b], u in (0, 1).
inline double sample_segment(const Segment& seg, double u) {
  const double w = seg.b - seg.a;
  const double s = seg.line.slope;
  double x;
  if (std::isfinite(w) && std::abs(s) * w < 1e-10)
    x = seg.a + u * w;
  else if (s > 0.0)
    x = seg.b + std::log1p((1.0 - u) * std::expm1(-s * w)) / s;
  else
    x = seg.a + std::log1p(u * std::expm1(s * w)) / s;
  return std::clamp(x, seg.a, seg.b);
}

class Envelope {
 public:
  /// Rebuilds from sorted, distinct points. Returns false when the hull is
  /// not integrable (tail slopes of the wrong sign on an infinite side).
  bool build(const std::vector<HullPoint>& pts, double lo, double hi) {
    pts_ = &pts;
    segments_.clear();
    const std::size_t k = pts.size();
    if (k < 3) return false;
    auto chord = [&](std::size_t i) { return secant(pts[i], pts[i + 1]); };  // through points i, i+1

    if (lo < pts[0].x) push(lo, pts[0].x, chord(0));
    push(pts[0].x, pts[1].x, chord(1));
    for (std::size_t i = 1; i + 2 < k; ++i) push_min(pts[i].x, pts[i + 1].x, chord(i - 1), chord(i + 1));
    push(pts[k - 2].x, pts[k - 1].x, chord(k - 3));
    if (pts[k - 1].x < hi) push(pts[k - 1].x, hi, chord(k - 2));

    concave_ = true;
    for (std::size_t i = 0; i + 2 < k; ++i) {
      const double s1 = chord(i).slope, s2 = chord(i + 1).slope;
      if (s2 > s1 + 1e-12 * (1.0 + std::abs(s1))) concave_ = false;
    }

    max_log_mass_ = -std::numeric_limits<double>::infinity();
    for (const auto& seg : segments_) {
      if (!(seg.log_mass < std::numeric_limits<double>::infinity())) return false;
      max_log_mass_ = std::max(max_log_mass_, seg.log_mass);
    }
    if (!std::isfinite(max_log_mass_)) return false;
    cumulative_.resize(segments_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      acc += std::exp(segments_[i].log_mass - max_log_mass_);
      cumulative_[i] = acc;
    }
    return true;
  }

  bool concave() const { return concave_; }

  double upper(double x) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                               [](double v, const Segment& s) { return v < s.a; });
    if (it != segments_.begin()) --it;
    return it->line.at(x);
  }

  double squeeze(double x) const {
    const auto& p = *pts_;
    if (x < p.front().x || x > p.back().x) return -std::numeric_limits<double>::infinity();
    auto it = std::upper_bound(p.begin(), p.end(), x, [](double v, const HullPoint& q) { return v < q.x; });
    if (it == p.end()) return p.back().f;
    const auto& right = *it;
    const auto& left = *(it - 1);
    return secant(left, right).at(x);
  }

  template <class Rng>
  double sample(Rng& rng) const {
    const double target = stats::uniform_open01(rng) * cumulative_.back();
    const auto idx = static_cast<std::size_t>(
        std::lower_bound(cumulative_.begin(), cumulative_.end(), target) - cumulative_.begin());
    return sample_segment(segments_[std::min(idx, segments_.size() - 1)], stats::uniform_open01(rng));
  }

 private:
  void push(double a, double b, const Line& l) {
    if (!(b > a)) return;
    segments_.push_back({a, b, l, log_segment_mass(a, b, l)});
  }

  void push_min(double a, double b, const Line& l1, const Line& l2) {
    const double ds = l1.slope - l2.slope;
    if (ds != 0.0) {
      const double xi = l1.x0 + (l2.at(l1.x0) - l1.y0) / ds;
      if (xi > a && xi < b) {
        const double m1 = 0.5 * (a + xi), m2 = 0.5 * (xi + b);
        push(a, xi, l1.at(m1) <= l2.at(m1) ? l1 : l2);
        push(xi, b, l1.at(m2) <= l2.at(m2) ? l1 : l2);
        return;
      }
    }
    const double m = 0.5 * (a + b);
    push(a, b, l1.at(m) <= l2.at(m) ? l1 : l2);
  }

  const std::vector<HullPoint>* pts_ = nullptr;
  std::vector<Segment> segments_;
  std::vector<double> cumulative_;
  double max_log_mass_ = 0.0;
  bool concave_ = true;
};

inline bool insert_point(std::vector<HullPoint>& pts, double x, double f) {
  auto it = std::lower_bound(pts.begin(), pts.end(), x, [](const HullPoint& p, double v) { return p.x < v; });
  if (it != pts.end() && it->x == x) return false;
  pts.insert(it, {x, f});
  return true;
}

}  // namespace detail

/// Draws once from the density proportional to exp(log_density) on (lo, hi),
/// starting from `current` (which must have finite log density). `scale` is a
/// per-coordinate length scale; it is refined from the local curvature and
/// written back for the next call. Returns nullopt if no valid hull could be
/// built or no proposal was accepted within the proposal budget.
template <class LogDensity, class Rng>
std::optional<double> adaptive_rejection_sample(LogDensity&& log_density, double current, double& scale, double lo,
                                                double hi, const ArsOptions& opt, Rng& rng, ArsStats& stats) {
  using detail::HullPoint;
  ++stats.draws;
  auto eval = [&](double x) {
    ++stats.evaluations;
    return log_density(x);
  };
  auto fail = [&]() -> std::optional<double> {
    ++stats.failures;
    return std::nullopt;
  };

  if (!(hi > lo) || !(current > lo) || !(current < hi)) return fail();
  const double f_current = eval(current);
  if (!std::isfinite(f_current)) return fail();
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;

  // Centre the initial abscissae near the mode at the local curvature scale.
  std::vector<HullPoint> pts;
  double centre = current, f_centre = f_current, d = scale;
  for (int round = 0;; ++round) {
    const double dl = std::min(d, 0.5 * (centre - lo));
    const double dr = std::min(d, 0.5 * (hi - centre));
    const double xl = centre - dl, xr = centre + dr;
    if (!(xl < centre) || !(xr > centre)) return fail();
    const double fl = eval(xl), fr = eval(xr);
    pts = {{xl, fl}, {centre, f_centre}, {xr, fr}};
    if (!std::isfinite(fl) || !std::isfinite(fr)) {
      d *= 0.25;
      if (round >= opt.tune_rounds + 20) return fail();
      continue;
    }
    const double s1 = (f_centre - fl) / dl, s2 = (fr - f_centre) / dr;
    const double curvature = (s2 - s1) / (0.5 * (dl + dr));
    if (round >= opt.tune_rounds) break;
    if (!(curvature < 0.0)) {
      d *= 2.0;
      continue;
    }
    const double slope = (s1 * dr + s2 * dl) / (dl + dr);
    const double new_d = 1.0 / std::sqrt(-curvature);
    double mode = centre - slope / curvature;
    if (std::isfinite(lo) && mode <= lo) mode = lo + 0.5 * (centre - lo);
    if (std::isfinite(hi) && mode >= hi) mode = hi - 0.5 * (hi - centre);
    const bool settled = std::abs(mode - centre) <= d && new_d >= d / 3.0 && new_d <= 3.0 * d;
    d = new_d;
    if (settled || !std::isfinite(mode)) break;
    const double f_mode = eval(mode);
    if (!std::isfinite(f_mode)) break;
    centre = mode;
    f_centre = f_mode;
  }
  scale = d;

  // Extra abscissae alternate outward on either side of the centre.
  for (int extra = 0; extra < opt.init_points - 3; ++extra) {
    const bool left = extra % 2 == 0;
    const double reach = d * (2.0 + extra / 2);
    double x;
    if (left)
      x = std::isfinite(lo) && centre - reach <= lo ? 0.5 * (lo + pts.front().x) : centre - reach;
    else
      x = std::isfinite(hi) && centre + reach >= hi ? 0.5 * (hi + pts.back().x) : centre + reach;
    const double fx = eval(x);
    if (std::isfinite(fx)) detail::insert_point(pts, x, fx);
  }

  // On an infinite side the outermost secant must slope toward -inf. A
  // point inserted later can break this when the target is not log-concave,
  // so it is re-checked after every insertion.
  auto extend_tails = [&]() {
    // Steps grow geometrically; a step landing where the density underflows
    // is shortened instead.
    auto extend = [&](bool left) {
      const std::size_t k = pts.size();
      double dist = left ? std::max(2.0 * (pts[1].x - pts[0].x), d) : std::max(2.0 * (pts[k - 1].x - pts[k - 2].x), d);
      for (int step = 0; step < opt.max_tail_steps; ++step) {
        const double x = left ? pts.front().x - dist : pts.back().x + dist;
        const double fx = eval(x);
        if (std::isfinite(fx)) {
          detail::insert_point(pts, x, fx);
          return true;
        }
        dist *= 0.25;
      }
      return false;
    };
    for (int step = 0; !std::isfinite(lo) && pts[1].f <= pts[0].f; ++step)
      if (step >= opt.max_tail_steps || !extend(true)) return false;
    for (int step = 0; !std::isfinite(hi) && pts[pts.size() - 2].f <= pts.back().f; ++step)
      if (step >= opt.max_tail_steps || !extend(false)) return false;
    return true;
  };
  if (!extend_tails()) return fail();

  detail::Envelope env;
  if (!env.build(pts, lo, hi)) return fail();
  bool nonconcave = !env.concave();

  for (int t = 0; t < opt.max_proposals; ++t) {
    ++stats.proposals;
    const double x = env.sample(rng);
    if (!(x > lo && x < hi)) continue;
    const double ux = env.upper(x);
    const double log_u = std::log(stats::uniform_open01(rng));
    if (!nonconcave && log_u <= env.squeeze(x) - ux) {
      ++stats.squeeze_accepts;
      return x;
    }
    const double fx = eval(x);
    if (fx > ux + 1e-9 * (1.0 + std::abs(ux))) nonconcave = true;
    if (log_u <= fx - ux) {
      if (!nonconcave) return x;
      ++stats.nonconcave_draws;
      const double u_current = env.upper(current);
      const double log_ratio = fx + std::min(f_current, u_current) - f_current - std::min(fx, ux);
      if (std::log(stats::uniform_open01(rng)) <= log_ratio) return x;
      ++stats.metropolis_rejections;
      return current;
    }
    if (std::isfinite(fx) && detail::insert_point(pts, x, fx)) {
      if (!extend_tails() || !env.build(pts, lo, hi)) return fail();
      if (!env.concave()) nonconcave = true;
    }
  }
  return fail();
}

}  // namespace bchaz
