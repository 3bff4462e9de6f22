#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

namespace qadmit {

enum Action : int { kReject = 0, kAdmit = 1 };

/// Deterministic stationary admission policy over the observed job count
/// s = 0..S. The canonical form rejects at s = S, where an admission could
/// not enter the network anyway.
struct Policy {
  std::vector<int> action;

  Policy() = default;
  explicit Policy(std::vector<int> actions) : action(std::move(actions)) { canonicalize(); }

  /// Admit iff s < n.
  static Policy threshold(int capacity, int n) {
    if (capacity < 0 || n < 0 || n > capacity) throw std::invalid_argument("threshold must lie in [0, S]");
    std::vector<int> a(static_cast<std::size_t>(capacity) + 1, kReject);
    for (int s = 0; s < n; ++s) a[static_cast<std::size_t>(s)] = kAdmit;
    return Policy(std::move(a));
  }
  static Policy accept_all(int capacity) { return threshold(capacity, capacity); }

  [[nodiscard]] int capacity() const { return static_cast<int>(action.size()) - 1; }
  [[nodiscard]] int operator()(int s) const { return action.at(static_cast<std::size_t>(s)); }

  void canonicalize() {
    if (!action.empty()) action.back() = kReject;
  }

  /// Number of leading admitting states; equals n for a threshold policy.
  [[nodiscard]] int first_reject() const {
    int n = 0;
    while (n < static_cast<int>(action.size()) && action[static_cast<std::size_t>(n)] == kAdmit) ++n;
    return n;
  }

  /// n when the policy is exactly "admit iff s < n", nothing otherwise.
  [[nodiscard]] std::optional<int> as_threshold() const {
    const int n = first_reject();
    for (std::size_t s = static_cast<std::size_t>(n); s < action.size(); ++s) {
      if (action[s] == kAdmit) return std::nullopt;
    }
    return n;
  }

  friend bool operator==(const Policy&, const Policy&) = default;
};

}  // namespace qadmit
