#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "qadmit/mdp.hpp"
#include "qadmit/network.hpp"
#include "qadmit/policy.hpp"
#include "qadmit/rng.hpp"

namespace qadmit {

enum class EventKind { kArrivalAdmitted, kArrivalRejected, kInternalMove, kDeparture, kSelfLoop };

std::string_view to_string(EventKind kind);

struct StepOutcome {
  EventKind kind = EventKind::kSelfLoop;
  int from_queue = 0;  // serving queue for moves and departures
  int to_queue = 0;    // destination queue for admissions and moves
  int observed = 0;    // total job count after the step
  double reward = 0.0;
};

/// Uniformized discrete-time simulation of the open network under admission
/// control. Each step consumes two draws from a counter-based generator keyed
/// by (seed, stream, step): one picks the event band, one the routing target.
///
/// Event bands over [0, U): [0, lambda) arrival, then one band of width mu_i
/// per busy queue in index order, then the self-loop remainder.
class NetworkSimulator {
 public:
  NetworkSimulator(QueueingNetworkSpec spec, std::uint64_t seed, std::uint64_t stream = 0);
  NetworkSimulator(QueueingNetworkSpec spec, std::vector<int> initial, std::uint64_t seed, std::uint64_t stream = 0);

  StepOutcome step(int action);
  /// Same transition with caller-supplied uniforms in [0, 1).
  StepOutcome step_with_draws(int action, double event_draw, double route_draw);

  [[nodiscard]] int observed() const { return total_; }
  [[nodiscard]] std::int64_t step_count() const { return steps_; }
  [[nodiscard]] const QueueingNetworkSpec& spec() const { return spec_; }
  /// Hidden per-queue occupancy; diagnostics and tests only.
  [[nodiscard]] std::span<const int> hidden_occupancy() const { return occupancy_; }
  [[nodiscard]] double r_max() const;

 private:
  int route(int from, double draw) const;

  QueueingNetworkSpec spec_;
  std::vector<int> occupancy_;
  int total_ = 0;
  std::int64_t steps_ = 0;
  CounterRng rng_;
};

/// What a controller that only sees arrivals and departures receives.
struct Observation {
  int state = 0;
  double reward = 0.0;
};

/// Learner-facing interface: the observed job count and realized rewards,
/// nothing about the hidden network state.
class ObservableEnvironment {
 public:
  virtual ~ObservableEnvironment() = default;
  [[nodiscard]] virtual int observe() const = 0;
  virtual Observation step(int action) = 0;
};

class NetworkEnvironment final : public ObservableEnvironment {
 public:
  explicit NetworkEnvironment(NetworkSimulator sim) : sim_(std::move(sim)) {}
  [[nodiscard]] int observe() const override { return sim_.observed(); }
  Observation step(int action) override {
    const StepOutcome out = sim_.step(action);
    return {out.observed, out.reward};
  }

 private:
  NetworkSimulator sim_;
};

/// Samples the aggregated birth-death MDP directly; rewards are realized the
/// same way as in the network (rejection cost charged on a rejected arrival).
class BirthDeathEnvironment final : public ObservableEnvironment {
 public:
  BirthDeathEnvironment(AggregatedMdp mdp, std::uint64_t seed, int initial = 0, std::uint64_t stream = 0);
  [[nodiscard]] int observe() const override { return state_; }
  Observation step(int action) override;

 private:
  AggregatedMdp mdp_;
  int state_;
  std::int64_t steps_ = 0;
  CounterRng rng_;
};

struct Trace {
  std::vector<int> state;   // s_t before the step
  std::vector<int> action;  // a_t = policy(s_t)
  std::vector<double> reward;
  std::vector<EventKind> event;
};

/// Runs `policy` for `steps` steps from `initial` (empty network by default).
Trace run_policy(const QueueingNetworkSpec& spec, const Policy& policy, std::int64_t steps, std::uint64_t seed,
                 std::vector<int> initial = {});

/// CSV with header t,s,a,event,reward.
void write_trace_csv(std::ostream& out, const Trace& trace);

}  // namespace qadmit
