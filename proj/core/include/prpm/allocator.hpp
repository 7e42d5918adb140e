#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

#include "prpm/event_log.hpp"
#include "prpm/random.hpp"

namespace prpm {

enum class DurationKind { fixed, normal, exponential };

std::string_view to_string(DurationKind kind);
std::optional<DurationKind> parse_duration_kind(std::string_view text);

/// Treatment duration in seconds. Stochastic kinds are truncated to
/// [min_seconds, max_seconds] by resampling (up to 64 draws) and then clamping.
struct DurationDist {
  DurationKind kind = DurationKind::fixed;
  double fixed_seconds = 60.0;
  double mean_seconds = 30.0;
  double std_seconds = 10.0;
  double min_seconds = 1.0;
  double max_seconds = 60.0;

  void validate() const;
};

double sample_duration(const DurationDist& dist, Rng& rng);

struct Grant {
  std::size_t resource_id = 0;
  Timestamp acquired_at = 0;
  Timestamp release_at = 0;
};

/// Fixed set of interchangeable resources. Busy resources are released once
/// the simulated clock reaches their release time (inclusive).
class ResourcePool {
 public:
  explicit ResourcePool(std::size_t capacity);

  /// Frees every resource whose release time is <= now and returns them in
  /// release order.
  std::vector<Grant> release_due(Timestamp now);

  /// Releases due resources, then blocks the lowest free resource id for a
  /// sampled duration. Returns nullopt when every resource is busy.
  std::optional<Grant> try_acquire(Timestamp now, const DurationDist& dist, Rng& rng);

  std::size_t capacity() const { return capacity_; }
  std::size_t busy_count() const { return busy_.size(); }
  std::size_t free_count() const { return capacity_ - busy_.size(); }
  std::optional<Timestamp> next_release() const;

 private:
  std::size_t capacity_;
  std::set<std::size_t> free_ids_;
  // (release time, resource id) ordered by earliest release
  std::set<std::pair<Timestamp, std::size_t>> busy_;
  std::vector<Grant> active_;
};

}  // namespace prpm
