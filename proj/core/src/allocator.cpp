#include "prpm/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "prpm/error.hpp"

namespace prpm {

namespace {

constexpr int kMaxResamples = 64;

template <typename Distribution>
double truncated_sample(Distribution& dist, const DurationDist& params, Rng& rng) {
  double value = 0;
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    value = dist(rng);
    if (value >= params.min_seconds && value <= params.max_seconds) return value;
  }
  return std::clamp(value, params.min_seconds, params.max_seconds);
}

}  // namespace

std::string_view to_string(DurationKind kind) {
  switch (kind) {
    case DurationKind::fixed: return "fixed";
    case DurationKind::normal: return "normal";
    case DurationKind::exponential: return "exponential";
  }
  return "?";
}

std::optional<DurationKind> parse_duration_kind(std::string_view text) {
  if (text == "fixed") return DurationKind::fixed;
  if (text == "normal") return DurationKind::normal;
  if (text == "exponential") return DurationKind::exponential;
  return std::nullopt;
}

void DurationDist::validate() const {
  if (!(fixed_seconds > 0)) throw ConfigError("fixed duration must be positive");
  if (!(min_seconds > 0 && min_seconds <= max_seconds)) {
    throw ConfigError("duration bounds must satisfy 0 < min <= max");
  }
  if (!(mean_seconds > 0)) throw ConfigError("duration mean must be positive");
  if (!(std_seconds >= 0)) throw ConfigError("duration std must be non-negative");
}

double sample_duration(const DurationDist& dist, Rng& rng) {
  switch (dist.kind) {
    case DurationKind::fixed:
      return dist.fixed_seconds;
    case DurationKind::normal: {
      std::normal_distribution<double> normal(dist.mean_seconds, dist.std_seconds);
      return truncated_sample(normal, dist, rng);
    }
    case DurationKind::exponential: {
      std::exponential_distribution<double> exponential(1.0 / dist.mean_seconds);
      return truncated_sample(exponential, dist, rng);
    }
  }
  return dist.fixed_seconds;
}

ResourcePool::ResourcePool(std::size_t capacity) : capacity_(capacity) {
  for (std::size_t id = 0; id < capacity; ++id) free_ids_.insert(id);
  active_.resize(capacity);
}

std::vector<Grant> ResourcePool::release_due(Timestamp now) {
  std::vector<Grant> released;
  while (!busy_.empty() && busy_.begin()->first <= now) {
    const std::size_t id = busy_.begin()->second;
    busy_.erase(busy_.begin());
    free_ids_.insert(id);
    released.push_back(active_[id]);
  }
  return released;
}

std::optional<Grant> ResourcePool::try_acquire(Timestamp now, const DurationDist& dist,
                                               Rng& rng) {
  release_due(now);
  if (free_ids_.empty()) return std::nullopt;
  const double seconds = sample_duration(dist, rng);
  const auto millis = std::max<Timestamp>(1, std::llround(seconds * 1000.0));
  Grant grant{*free_ids_.begin(), now, now + millis};
  free_ids_.erase(free_ids_.begin());
  busy_.emplace(grant.release_at, grant.resource_id);
  active_[grant.resource_id] = grant;
  return grant;
}

std::optional<Timestamp> ResourcePool::next_release() const {
  if (busy_.empty()) return std::nullopt;
  return busy_.begin()->first;
}

}  // namespace prpm
