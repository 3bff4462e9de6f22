#include "qadmit/simulator.hpp"

#include <ostream>
#include <stdexcept>

namespace qadmit {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kArrivalAdmitted: return "arrival-admitted";
    case EventKind::kArrivalRejected: return "arrival-rejected";
    case EventKind::kInternalMove: return "internal-move";
    case EventKind::kDeparture: return "departure";
    case EventKind::kSelfLoop: return "self-loop";
  }
  return "unknown";
}

NetworkSimulator::NetworkSimulator(QueueingNetworkSpec spec, std::uint64_t seed, std::uint64_t stream)
    : NetworkSimulator(std::move(spec), {}, seed, stream) {}

NetworkSimulator::NetworkSimulator(QueueingNetworkSpec spec, std::vector<int> initial, std::uint64_t seed,
                                   std::uint64_t stream)
    : spec_(std::move(spec)), rng_(seed, stream) {
  if (initial.empty()) initial.assign(static_cast<std::size_t>(spec_.n_queues), 0);
  if (static_cast<int>(initial.size()) != spec_.n_queues) {
    throw std::invalid_argument("initial occupancy must have one entry per queue");
  }
  for (int x : initial) {
    if (x < 0) throw std::invalid_argument("initial occupancy must be nonnegative");
    total_ += x;
  }
  if (total_ > spec_.capacity) {
    throw std::invalid_argument("initial occupancy " + std::to_string(total_) + " exceeds capacity " +
                                std::to_string(spec_.capacity));
  }
  occupancy_ = std::move(initial);
}

double NetworkSimulator::r_max() const {
  return (spec_.arrival_rate * spec_.rejection_cost + spec_.holding_cost * spec_.capacity) / spec_.uniformization;
}

int NetworkSimulator::route(int from, double draw) const {
  const auto& row = spec_.routing[static_cast<std::size_t>(from)];
  double acc = 0.0;
  int last = -1;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] <= 0.0) continue;
    acc += row[j];
    last = static_cast<int>(j);
    if (draw < acc) return last;
  }
  return last;  // rounding in the row sum
}

StepOutcome NetworkSimulator::step(int action) {
  const double event = rng_.uniform(static_cast<std::uint64_t>(steps_), 0);
  const double routing = rng_.uniform(static_cast<std::uint64_t>(steps_), 1);
  return step_with_draws(action, event, routing);
}

StepOutcome NetworkSimulator::step_with_draws(int action, double event_draw, double route_draw) {
  const double u = spec_.uniformization;
  const int before = total_;
  StepOutcome out;
  out.reward = r_max() - spec_.holding_cost * before / u;
  double e = event_draw * u;
  ++steps_;

  if (e < spec_.arrival_rate) {
    if (action == kAdmit && before < spec_.capacity) {
      const int j = route(0, route_draw);
      ++occupancy_[static_cast<std::size_t>(j - 1)];
      ++total_;
      out.kind = EventKind::kArrivalAdmitted;
      out.to_queue = j;
    } else {
      out.kind = EventKind::kArrivalRejected;
      out.reward -= spec_.rejection_cost;
    }
    out.observed = total_;
    return out;
  }
  e -= spec_.arrival_rate;
  for (int i = 1; i <= spec_.n_queues; ++i) {
    if (occupancy_[static_cast<std::size_t>(i - 1)] == 0) continue;
    const double rate = spec_.mu(i);
    if (e < rate) {
      const int j = route(i, route_draw);
      --occupancy_[static_cast<std::size_t>(i - 1)];
      out.from_queue = i;
      if (j == 0) {
        --total_;
        out.kind = EventKind::kDeparture;
      } else {
        ++occupancy_[static_cast<std::size_t>(j - 1)];
        out.kind = EventKind::kInternalMove;
        out.to_queue = j;
      }
      out.observed = total_;
      return out;
    }
    e -= rate;
  }
  out.kind = EventKind::kSelfLoop;
  out.observed = total_;
  return out;
}

BirthDeathEnvironment::BirthDeathEnvironment(AggregatedMdp mdp, std::uint64_t seed, int initial, std::uint64_t stream)
    : mdp_(std::move(mdp)), state_(initial), rng_(seed, stream) {
  if (initial < 0 || initial > mdp_.capacity()) throw std::invalid_argument("initial state out of range");
}

Observation BirthDeathEnvironment::step(int action) {
  const auto& p = mdp_.params();
  const double e = rng_.uniform(static_cast<std::uint64_t>(steps_++), 0) * p.uniformization;
  Observation out;
  out.reward = mdp_.r_max() - p.holding_cost * state_ / p.uniformization;
  if (e < p.arrival_rate) {
    if (action == kAdmit && state_ < mdp_.capacity()) {
      ++state_;
    } else {
      out.reward -= p.rejection_cost;
    }
  } else if (e < p.arrival_rate + mdp_.mu(state_)) {
    --state_;
  }
  out.state = state_;
  return out;
}

Trace run_policy(const QueueingNetworkSpec& spec, const Policy& policy, std::int64_t steps, std::uint64_t seed,
                 std::vector<int> initial) {
  if (steps < 1) throw std::invalid_argument("run_policy needs at least one step");
  if (policy.capacity() != spec.capacity) throw std::invalid_argument("policy capacity does not match the network");
  NetworkSimulator sim(spec, std::move(initial), seed);
  Trace trace;
  const auto n = static_cast<std::size_t>(steps);
  trace.state.reserve(n);
  trace.action.reserve(n);
  trace.reward.reserve(n);
  trace.event.reserve(n);
  for (std::int64_t t = 0; t < steps; ++t) {
    const int s = sim.observed();
    const int a = policy(s);
    const StepOutcome out = sim.step(a);
    trace.state.push_back(s);
    trace.action.push_back(a);
    trace.reward.push_back(out.reward);
    trace.event.push_back(out.kind);
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "t,s,a,event,reward\n";
  for (std::size_t t = 0; t < trace.state.size(); ++t) {
    out << t << ',' << trace.state[t] << ',' << trace.action[t] << ',' << to_string(trace.event[t]) << ','
        << trace.reward[t] << '\n';
  }
}

}  // namespace qadmit
